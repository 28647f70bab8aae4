#pragma once

#include <Eigen/Core>

#include <vector>

#include "acevc/dsp/audio.hpp"

namespace acevc::dsp {

inline constexpr double kYinMinHz = 50.0;
inline constexpr double kYinMaxHz = 800.0;
inline constexpr double kYinThreshold = 0.15;
inline constexpr double kPitchStdFloorHz = 1.0;

/// Per-frame f0 in Hz aligned with the mel frames; 0 marks unvoiced.
struct PitchContour {
  Eigen::VectorXd f0;

  Eigen::Index size() const { return f0.size(); }
  Eigen::Index voiced_count() const { return (f0.array() > 0.0).count(); }
  /// Mean over voiced frames, 0 when there are none.
  double voiced_mean() const;
};

struct SpeakerPitchStats {
  double mean_hz = 0.0;
  double std_hz = kPitchStdFloorHz;
};

/// Yin estimate for a single analysis frame (difference function, cumulative
/// mean normalization, absolute threshold, parabolic refinement). Returns 0
/// when no lag passes the threshold or the frame is silent.
double yin_frame(const Eigen::Ref<const Eigen::VectorXd>& frame, int sample_rate);

/// One estimate per mel frame (ceil(n / hop) frames). The analysis window
/// is centered on each hop and shifted inward at the signal edges.
PitchContour yin_pitch(const Waveform& w);

/// Shifts pitch by `semitones` (|s| <= 12) with a phase-vocoder time
/// stretch followed by resampling back to the original length.
Waveform pitch_shift(const Waveform& w, double semitones);

/// Phase-vocoder time stretch: output has about n * factor samples.
Eigen::VectorXd time_stretch(const Eigen::VectorXd& x, double factor);

/// Mean and population standard deviation over voiced frames; the std is
/// floored at kPitchStdFloorHz. Throws when no frame is voiced.
SpeakerPitchStats speaker_pitch_stats(const std::vector<PitchContour>& contours);

/// (f0 - mean) / std on voiced frames, 0 on unvoiced frames.
Eigen::VectorXd normalize_pitch(const PitchContour& p, const SpeakerPitchStats& stats);

/// Inverse of normalize_pitch given the voicing mask of the original.
PitchContour denormalize_pitch(const Eigen::VectorXd& normalized, const Eigen::VectorXd& voiced_mask,
                               const SpeakerPitchStats& stats);

}  // namespace acevc::dsp
