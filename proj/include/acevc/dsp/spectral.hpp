#pragma once

#include <Eigen/Core>

#include <cstdint>

#include "acevc/dsp/audio.hpp"

namespace acevc::dsp {

inline constexpr int kFftSize = 1024;
inline constexpr int kWindowSize = 1024;
inline constexpr int kHopSize = 256;
inline constexpr int kMelBands = 80;
inline constexpr double kMelMinHz = 0.0;
inline constexpr double kMelMaxHz = 8000.0;
inline constexpr double kLogFloor = 1e-5;
inline constexpr int kSpectrumBins = kFftSize / 2 + 1;

/// Log-mel magnitudes, one row per hop.
struct MelSpectrogram {
  Eigen::MatrixXd frames;  // T x kMelBands

  Eigen::Index size() const { return frames.rows(); }
  static constexpr double hop_seconds() { return static_cast<double>(kHopSize) / kSampleRate; }
};

/// Number of centered frames for a signal: ceil(n / hop).
constexpr Eigen::Index frame_count(Eigen::Index samples) { return (samples + kHopSize - 1) / kHopSize; }

/// Periodic Hann window.
Eigen::VectorXd hann_window(int size);

/// Centered, reflect-padded STFT; frame t is centered on sample t * hop.
/// Returns frames x (fft/2 + 1).
Eigen::MatrixXcd stft(const Eigen::VectorXd& x, Eigen::Index frames);

/// Weighted overlap-add inverse of stft() onto `length` samples.
Eigen::VectorXd istft(const Eigen::MatrixXcd& spectrum, Eigen::Index length);

/// Slaney mel scale.
double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// kMelBands x kSpectrumBins triangular filterbank with Slaney area
/// normalization over [kMelMinHz, kMelMaxHz].
const Eigen::MatrixXd& mel_filterbank();

/// Requires at least one window of samples.
MelSpectrogram mel_spectrogram(const Waveform& w);

/// Inverts a log-mel spectrogram: pseudo-inverse projection to linear
/// magnitudes, then momentum Griffin-Lim phase reconstruction. Output has
/// T * hop samples.
Waveform griffin_lim(const MelSpectrogram& m, int iterations, std::uint64_t seed = 0);

}  // namespace acevc::dsp
