#pragma once

#include <Eigen/Core>

#include <string>

namespace acevc::dsp {

inline constexpr int kSampleRate = 22050;

/// Mono audio. After ingestion the rate is always kSampleRate and samples
/// lie in [-1, 1].
struct Waveform {
  Eigen::VectorXd samples;
  int sample_rate = kSampleRate;

  Eigen::Index size() const { return samples.size(); }
  double seconds() const { return static_cast<double>(samples.size()) / sample_rate; }
};

/// Raw decoded WAV contents, channels interleaved into columns.
struct WavData {
  Eigen::MatrixXd channels;  // frames x channel_count
  int sample_rate = 0;
};

/// Decodes PCM (8/16/24/32-bit integer) or 32/64-bit float WAV.
WavData read_wav(const std::string& path);

/// Writes 16-bit PCM mono; samples are clipped to [-1, 1].
void write_wav(const std::string& path, const Waveform& w);

/// Band-limited (Kaiser-windowed sinc) resampling of a signal onto exactly
/// `length` output samples spanning the same duration.
Eigen::VectorXd resample_to_length(const Eigen::VectorXd& x, Eigen::Index length);

/// Resamples between sample rates; output length is round(n * to / from).
Eigen::VectorXd resample(const Eigen::VectorXd& x, int from_rate, int to_rate);

/// Reads a WAV file, averages channels, resamples to 22050 Hz and scales
/// down if the peak exceeds 1.
Waveform ingest_audio(const std::string& path);

/// Same conversion for already decoded data.
Waveform ingest(const WavData& wav);

}  // namespace acevc::dsp
