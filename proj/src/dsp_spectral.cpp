#include "acevc/dsp/spectral.hpp"

#include <unsupported/Eigen/FFT>

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <vector>

#include "acevc/error.hpp"
#include "acevc/random.hpp"

namespace acevc::dsp {

namespace {

/// Index into x as if it were extended by mirror reflection (no edge repeat).
Eigen::Index reflect(Eigen::Index i, Eigen::Index n) {
  if (n == 1) return 0;
  const Eigen::Index period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

constexpr double kGriffinLimMomentum = 0.99;

}  // namespace

Eigen::VectorXd hann_window(int size) {
  Eigen::VectorXd w(size);
  for (int i = 0; i < size; ++i) w(i) = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / size);
  return w;
}

Eigen::MatrixXcd stft(const Eigen::VectorXd& x, Eigen::Index frames) {
  if (x.size() == 0) throw Error("stft: empty signal", ErrorCode::kInvalidInput);
  const Eigen::VectorXd window = hann_window(kWindowSize);
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  Eigen::MatrixXcd out(frames, kSpectrumBins);
  std::vector<double> buf(kFftSize, 0.0);
  std::vector<std::complex<double>> spec;
  const Eigen::Index n = x.size();
  for (Eigen::Index t = 0; t < frames; ++t) {
    const Eigen::Index start = t * kHopSize - kWindowSize / 2;
    for (int k = 0; k < kWindowSize; ++k) buf[static_cast<std::size_t>(k)] = x(reflect(start + k, n)) * window(k);
    fft.fwd(spec, buf);
    for (int b = 0; b < kSpectrumBins; ++b) out(t, b) = spec[static_cast<std::size_t>(b)];
  }
  return out;
}

Eigen::VectorXd istft(const Eigen::MatrixXcd& spectrum, Eigen::Index length) {
  const Eigen::VectorXd window = hann_window(kWindowSize);
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(length);
  Eigen::VectorXd norm = Eigen::VectorXd::Zero(length);
  std::vector<std::complex<double>> spec(kSpectrumBins);
  std::vector<double> frame;
  for (Eigen::Index t = 0; t < spectrum.rows(); ++t) {
    for (int b = 0; b < kSpectrumBins; ++b) spec[static_cast<std::size_t>(b)] = spectrum(t, b);
    fft.inv(frame, spec);
    const Eigen::Index start = t * kHopSize - kWindowSize / 2;
    for (int k = 0; k < kWindowSize; ++k) {
      const Eigen::Index i = start + k;
      if (i < 0 || i >= length) continue;
      acc(i) += frame[static_cast<std::size_t>(k)] * window(k);
      norm(i) += window(k) * window(k);
    }
  }
  for (Eigen::Index i = 0; i < length; ++i)
    if (norm(i) > 1e-8) acc(i) /= norm(i);
  return acc;
}

double hz_to_mel(double hz) {
  constexpr double f_sp = 200.0 / 3.0;
  constexpr double min_log_hz = 1000.0;
  constexpr double min_log_mel = min_log_hz / f_sp;
  const double logstep = std::log(6.4) / 27.0;
  if (hz >= min_log_hz) return min_log_mel + std::log(hz / min_log_hz) / logstep;
  return hz / f_sp;
}

double mel_to_hz(double mel) {
  constexpr double f_sp = 200.0 / 3.0;
  constexpr double min_log_hz = 1000.0;
  constexpr double min_log_mel = min_log_hz / f_sp;
  const double logstep = std::log(6.4) / 27.0;
  if (mel >= min_log_mel) return min_log_hz * std::exp(logstep * (mel - min_log_mel));
  return f_sp * mel;
}

const Eigen::MatrixXd& mel_filterbank() {
  static const Eigen::MatrixXd bank = [] {
    Eigen::VectorXd edges(kMelBands + 2);
    const double lo = hz_to_mel(kMelMinHz), hi = hz_to_mel(kMelMaxHz);
    for (int i = 0; i < kMelBands + 2; ++i) edges(i) = mel_to_hz(lo + (hi - lo) * i / (kMelBands + 1));
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(kMelBands, kSpectrumBins);
    for (int m = 0; m < kMelBands; ++m) {
      const double left = edges(m), center = edges(m + 1), right = edges(m + 2);
      const double enorm = 2.0 / (right - left);
      for (int b = 0; b < kSpectrumBins; ++b) {
        const double f = static_cast<double>(b) * kSampleRate / kFftSize;
        const double rise = (f - left) / (center - left);
        const double fall = (right - f) / (right - center);
        w(m, b) = std::max(0.0, std::min(rise, fall)) * enorm;
      }
    }
    return w;
  }();
  return bank;
}

MelSpectrogram mel_spectrogram(const Waveform& w) {
  if (w.samples.size() < kWindowSize)
    throw Error("waveform shorter than one analysis window (" + std::to_string(w.samples.size()) + " < " +
                    std::to_string(kWindowSize) + " samples)",
                ErrorCode::kInvalidInput);
  const Eigen::MatrixXcd spec = stft(w.samples, frame_count(w.samples.size()));
  const Eigen::MatrixXd magnitude = spec.cwiseAbs();
  MelSpectrogram m;
  m.frames = (magnitude * mel_filterbank().transpose()).cwiseMax(kLogFloor).array().log().matrix();
  return m;
}

Waveform griffin_lim(const MelSpectrogram& m, int iterations, std::uint64_t seed) {
  if (iterations < 1) throw Error("griffin_lim: iterations must be >= 1", ErrorCode::kInvalidInput);
  if (m.frames.cols() != kMelBands) throw Error("griffin_lim: expected 80 mel bands", ErrorCode::kInvalidInput);
  static const Eigen::MatrixXd pseudo_inverse =
      mel_filterbank().completeOrthogonalDecomposition().pseudoInverse();  // bins x bands
  const Eigen::Index frames = m.frames.rows();
  const Eigen::Index length = frames * kHopSize;
  const Eigen::MatrixXd mel_magnitude = m.frames.array().exp().matrix();
  const Eigen::MatrixXd magnitude = (mel_magnitude * pseudo_inverse.transpose()).cwiseMax(0.0);

  Rng rng(seed);
  Eigen::MatrixXcd angles(frames, kSpectrumBins);
  for (Eigen::Index b = 0; b < kSpectrumBins; ++b)
    for (Eigen::Index t = 0; t < frames; ++t) angles(t, b) = std::polar(1.0, 2.0 * M_PI * rng.uniform());

  Eigen::MatrixXcd rebuilt = Eigen::MatrixXcd::Zero(frames, kSpectrumBins);
  Eigen::MatrixXcd previous = rebuilt;
  for (int it = 0; it < iterations; ++it) {
    const Eigen::MatrixXcd spec = magnitude.cast<std::complex<double>>().cwiseProduct(angles);
    rebuilt = stft(istft(spec, length), frames);
    angles = rebuilt - (kGriffinLimMomentum / (1.0 + kGriffinLimMomentum)) * previous;
    for (Eigen::Index b = 0; b < kSpectrumBins; ++b)
      for (Eigen::Index t = 0; t < frames; ++t) {
        const double r = std::abs(angles(t, b));
        angles(t, b) = r > 1e-16 ? angles(t, b) / r : std::complex<double>(1.0, 0.0);
      }
    previous = rebuilt;
  }
  const Eigen::MatrixXcd spec = magnitude.cast<std::complex<double>>().cwiseProduct(angles);
  Waveform out;
  out.samples = istft(spec, length);
  out.sample_rate = kSampleRate;
  return out;
}

}  // namespace acevc::dsp
