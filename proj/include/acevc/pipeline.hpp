#pragma once

// End-to-end conversion: SRE -> grouper -> synthesizer -> Griffin-Lim.

#include <Eigen/Core>

#include <string>
#include <vector>

#include "acevc/dsp/audio.hpp"
#include "acevc/dsp/pitch.hpp"
#include "acevc/dsp/spectral.hpp"
#include "acevc/grouper.hpp"
#include "acevc/sre.hpp"
#include "acevc/synthesizer.hpp"

namespace acevc::pipeline {

inline constexpr double kSliceSeconds = 2.0;
inline constexpr double kTargetSeconds = 10.0;

struct Analysis {
  dsp::MelSpectrogram mel;
  SreOutput sre;
  dsp::PitchContour f0;
  GroupedContent groups;  // pitch filled in, normalized with the given stats
};

/// Extracts content and speaker representations, groups the content by
/// predicted token and averages the normalized pitch over each group.
Analysis analyze(const SreModel& sre, const dsp::Waveform& w, const dsp::SpeakerPitchStats& stats);

/// Synthesizer training example for one utterance.
SynthItem make_synth_item(const SreModel& sre, const dsp::Waveform& w, const dsp::SpeakerPitchStats& stats);

/// Splits into non-overlapping 2 s slices, extracts z_s per slice and
/// returns the re-normalized mean. Throws below `min_seconds`.
Eigen::VectorXd target_speaker_embedding(const SreModel& sre, const dsp::Waveform& w,
                                         double min_seconds = kTargetSeconds);

struct ConversionReport {
  std::string mode;
  std::string tokens;  // greedy transcript
  std::vector<int> durations;
  dsp::SpeakerPitchStats source_stats;
  double source_seconds = 0.0;
  double output_seconds = 0.0;
  Eigen::Index output_frames = 0;

  /// Line-oriented `key: value` text.
  std::string to_text() const;
};

struct Conversion {
  dsp::Waveform audio;
  dsp::MelSpectrogram mel;
  ConversionReport report;
};

struct ConvertOptions {
  SynthMode mode = SynthMode::kAdaptive;
  int griffin_lim_iters = 60;
  std::uint64_t seed = 0;
  /// Source speaker pitch stats; estimated from the source itself when null.
  const dsp::SpeakerPitchStats* source_stats = nullptr;
};

/// Throws "no content detected" when every group is blank.
Conversion convert(const SreModel& sre, const SynthModel& synth, const dsp::Waveform& source,
                   const Eigen::VectorXd& target_embedding, const ConvertOptions& options);

SynthMode parse_mode(const std::string& name);
std::string mode_name(SynthMode mode);

}  // namespace acevc::pipeline
