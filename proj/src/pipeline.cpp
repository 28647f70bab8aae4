#include "acevc/pipeline.hpp"

#include <algorithm>
#include <sstream>

#include "acevc/corpus.hpp"
#include "acevc/error.hpp"

namespace acevc::pipeline {

Analysis analyze(const SreModel& sre, const dsp::Waveform& w, const dsp::SpeakerPitchStats& stats) {
  Analysis a;
  a.mel = dsp::mel_spectrogram(w);
  a.sre = sre.extract(a.mel);
  a.groups = group_content(a.sre.content.z, losses::frame_argmax(a.sre.content.log_probs));
  a.f0 = dsp::yin_pitch(w);
  a.groups.pitch = segment_pitch(dsp::normalize_pitch(a.f0, stats), a.groups.durations, sre.config().subsample);
  return a;
}

SynthItem make_synth_item(const SreModel& sre, const dsp::Waveform& w, const dsp::SpeakerPitchStats& stats) {
  Analysis a = analyze(sre, w, stats);
  return SynthItem{std::move(a.groups), std::move(a.sre.speaker), std::move(a.mel.frames)};
}

Eigen::VectorXd target_speaker_embedding(const SreModel& sre, const dsp::Waveform& w, double min_seconds) {
  if (w.seconds() + 1e-9 < min_seconds)
    throw Error("target speech is " + std::to_string(w.seconds()) + " s; at least " + std::to_string(min_seconds) +
                    " s is required",
                ErrorCode::kInvalidInput);
  const auto slice = static_cast<Eigen::Index>(kSliceSeconds * w.sample_rate);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(sre.config().speaker_dim);
  int count = 0;
  for (Eigen::Index start = 0; start + slice <= w.samples.size(); start += slice) {
    dsp::Waveform piece;
    piece.sample_rate = w.sample_rate;
    piece.samples = w.samples.segment(start, slice);
    sum += sre.extract(dsp::mel_spectrogram(piece)).speaker;
    ++count;
  }
  if (count == 0 || sum.norm() == 0.0) throw Error("target speech yields no usable slices", ErrorCode::kInvalidInput);
  return sum / sum.norm();
}

std::string ConversionReport::to_text() const {
  std::ostringstream out;
  out << "mode: " << mode << "\n";
  out << "tokens: " << tokens << "\n";
  out << "durations:";
  for (int d : durations) out << ' ' << d;
  out << "\n";
  out << "groups: " << durations.size() << "\n";
  out << "source_f0_mean_hz: " << source_stats.mean_hz << "\n";
  out << "source_f0_std_hz: " << source_stats.std_hz << "\n";
  out << "source_seconds: " << source_seconds << "\n";
  out << "output_seconds: " << output_seconds << "\n";
  out << "output_frames: " << output_frames << "\n";
  return out.str();
}

Conversion convert(const SreModel& sre, const SynthModel& synth, const dsp::Waveform& source,
                   const Eigen::VectorXd& target_embedding, const ConvertOptions& options) {
  const dsp::SpeakerPitchStats stats =
      options.source_stats ? *options.source_stats : dsp::speaker_pitch_stats({dsp::yin_pitch(source)});
  const Analysis a = analyze(sre, source, stats);
  if (std::all_of(a.groups.tokens.begin(), a.groups.tokens.end(), [](int t) { return t == losses::kBlank; }))
    throw Error("no content detected", ErrorCode::kInvalidInput);
  const SynthOutput out = synth.infer(a.groups, target_embedding, options.mode);
  Conversion c;
  c.mel = out.mel;
  c.audio = dsp::griffin_lim(out.mel, options.griffin_lim_iters, options.seed);
  c.report.mode = mode_name(options.mode);
  c.report.tokens = corpus::decode_tokens(losses::ctc_greedy_decode(a.sre.content.log_probs));
  c.report.durations = out.durations;
  c.report.source_stats = stats;
  c.report.source_seconds = source.seconds();
  c.report.output_seconds = c.audio.seconds();
  c.report.output_frames = out.mel.frames.rows();
  return c;
}

SynthMode parse_mode(const std::string& name) {
  if (name == "mimic") return SynthMode::kMimic;
  if (name == "adaptive") return SynthMode::kAdaptive;
  throw Error("unknown mode '" + name + "' (expected mimic or adaptive)", ErrorCode::kInvalidInput);
}

std::string mode_name(SynthMode mode) { return mode == SynthMode::kMimic ? "mimic" : "adaptive"; }

}  // namespace acevc::pipeline
