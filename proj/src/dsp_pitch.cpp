#include "acevc/dsp/pitch.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include "acevc/dsp/spectral.hpp"
#include "acevc/error.hpp"

namespace acevc::dsp {

double PitchContour::voiced_mean() const {
  double sum = 0.0;
  Eigen::Index n = 0;
  for (Eigen::Index i = 0; i < f0.size(); ++i)
    if (f0(i) > 0.0) {
      sum += f0(i);
      ++n;
    }
  return n ? sum / static_cast<double>(n) : 0.0;
}

double yin_frame(const Eigen::Ref<const Eigen::VectorXd>& frame, int sample_rate) {
  const Eigen::Index integration = frame.size() / 2;
  const auto min_lag = static_cast<Eigen::Index>(std::floor(sample_rate / kYinMaxHz));
  const auto max_lag = std::min<Eigen::Index>(static_cast<Eigen::Index>(std::ceil(sample_rate / kYinMinHz)),
                                              integration - 1);
  if (frame.head(integration).squaredNorm() < 1e-10 * static_cast<double>(integration)) return 0.0;

  // Difference function and its cumulative-mean-normalized form.
  Eigen::VectorXd diff(max_lag + 2);
  diff(0) = 0.0;
  for (Eigen::Index lag = 1; lag <= max_lag + 1; ++lag)
    diff(lag) = (frame.head(integration) - frame.segment(lag, integration)).squaredNorm();
  Eigen::VectorXd cmnd(max_lag + 2);
  cmnd(0) = 1.0;
  double running = 0.0;
  for (Eigen::Index lag = 1; lag <= max_lag + 1; ++lag) {
    running += diff(lag);
    cmnd(lag) = running > 0.0 ? diff(lag) * static_cast<double>(lag) / running : 1.0;
  }

  Eigen::Index lag = -1;
  for (Eigen::Index t = std::max<Eigen::Index>(min_lag, 2); t <= max_lag; ++t) {
    if (cmnd(t) < kYinThreshold) {
      while (t + 1 <= max_lag && cmnd(t + 1) < cmnd(t)) ++t;
      lag = t;
      break;
    }
  }
  if (lag < 0) return 0.0;

  const double a = cmnd(lag - 1), b = cmnd(lag), c = cmnd(lag + 1);
  const double denom = a - 2.0 * b + c;
  double refined = static_cast<double>(lag);
  if (std::abs(denom) > 1e-12) refined += std::clamp(0.5 * (a - c) / denom, -1.0, 1.0);
  const double f0 = sample_rate / refined;
  return (f0 >= kYinMinHz && f0 <= kYinMaxHz) ? f0 : 0.0;
}

PitchContour yin_pitch(const Waveform& w) {
  const Eigen::Index n = w.samples.size();
  PitchContour p;
  p.f0 = Eigen::VectorXd::Zero(frame_count(n));
  if (n == 0) return p;
  Eigen::VectorXd padded;
  const Eigen::VectorXd* source = &w.samples;
  if (n < kWindowSize) {
    padded = Eigen::VectorXd::Zero(kWindowSize);
    padded.head(n) = w.samples;
    source = &padded;
  }
  const Eigen::Index limit = source->size() - kWindowSize;
  for (Eigen::Index t = 0; t < p.f0.size(); ++t) {
    const Eigen::Index start = std::clamp<Eigen::Index>(t * kHopSize - kWindowSize / 2, 0, limit);
    p.f0(t) = yin_frame(source->segment(start, kWindowSize), w.sample_rate);
  }
  return p;
}

Eigen::VectorXd time_stretch(const Eigen::VectorXd& x, double factor) {
  if (!(factor > 0.0)) throw Error("time_stretch: factor must be positive", ErrorCode::kInvalidInput);
  const Eigen::Index frames = frame_count(x.size());
  const Eigen::MatrixXcd spec = stft(x, frames);
  const double rate = 1.0 / factor;
  const auto steps = static_cast<Eigen::Index>(std::ceil(static_cast<double>(frames) / rate));
  Eigen::VectorXd advance(kSpectrumBins);
  for (int b = 0; b < kSpectrumBins; ++b) advance(b) = 2.0 * M_PI * kHopSize * b / kFftSize;

  auto frame_at = [&](Eigen::Index i, int b) {
    return i < frames ? spec(i, b) : std::complex<double>(0.0, 0.0);
  };
  Eigen::VectorXd phase(kSpectrumBins);
  for (int b = 0; b < kSpectrumBins; ++b) phase(b) = std::arg(spec(0, b));
  Eigen::MatrixXcd out(steps, kSpectrumBins);
  for (Eigen::Index s = 0; s < steps; ++s) {
    const double pos = static_cast<double>(s) * rate;
    const auto i = static_cast<Eigen::Index>(std::floor(pos));
    const double alpha = pos - static_cast<double>(i);
    for (int b = 0; b < kSpectrumBins; ++b) {
      const std::complex<double> c0 = frame_at(i, b), c1 = frame_at(i + 1, b);
      const double mag = (1.0 - alpha) * std::abs(c0) + alpha * std::abs(c1);
      out(s, b) = std::polar(mag, phase(b));
      double dphase = std::arg(c1) - std::arg(c0) - advance(b);
      dphase -= 2.0 * M_PI * std::round(dphase / (2.0 * M_PI));
      phase(b) += advance(b) + dphase;
    }
  }
  const auto length = static_cast<Eigen::Index>(std::llround(static_cast<double>(x.size()) * factor));
  return istft(out, length);
}

Waveform pitch_shift(const Waveform& w, double semitones) {
  if (std::abs(semitones) > 12.0)
    throw Error("pitch_shift: |semitones| must be <= 12", ErrorCode::kInvalidInput);
  if (semitones == 0.0 || w.samples.size() == 0) return w;
  const double factor = std::pow(2.0, semitones / 12.0);
  Waveform out;
  out.sample_rate = w.sample_rate;
  out.samples = resample_to_length(time_stretch(w.samples, factor), w.samples.size());
  return out;
}

SpeakerPitchStats speaker_pitch_stats(const std::vector<PitchContour>& contours) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& c : contours)
    for (Eigen::Index i = 0; i < c.f0.size(); ++i)
      if (c.f0(i) > 0.0) {
        sum += c.f0(i);
        ++n;
      }
  if (n == 0) throw Error("speaker_pitch_stats: no voiced frames", ErrorCode::kInvalidInput);
  const double mean = sum / static_cast<double>(n);
  double var = 0.0;
  for (const auto& c : contours)
    for (Eigen::Index i = 0; i < c.f0.size(); ++i)
      if (c.f0(i) > 0.0) var += (c.f0(i) - mean) * (c.f0(i) - mean);
  var /= static_cast<double>(n);
  return SpeakerPitchStats{mean, std::max(std::sqrt(var), kPitchStdFloorHz)};
}

Eigen::VectorXd normalize_pitch(const PitchContour& p, const SpeakerPitchStats& stats) {
  if (!(stats.std_hz > 0.0)) throw Error("normalize_pitch: std must be positive", ErrorCode::kInvalidInput);
  Eigen::VectorXd out(p.f0.size());
  for (Eigen::Index i = 0; i < p.f0.size(); ++i)
    out(i) = p.f0(i) > 0.0 ? (p.f0(i) - stats.mean_hz) / stats.std_hz : 0.0;
  return out;
}

PitchContour denormalize_pitch(const Eigen::VectorXd& normalized, const Eigen::VectorXd& voiced_mask,
                               const SpeakerPitchStats& stats) {
  PitchContour p;
  p.f0 = Eigen::VectorXd::Zero(normalized.size());
  for (Eigen::Index i = 0; i < normalized.size(); ++i)
    if (voiced_mask(i) > 0.0) p.f0(i) = normalized(i) * stats.std_hz + stats.mean_hz;
  return p;
}

}  // namespace acevc::dsp
