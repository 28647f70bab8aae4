#pragma once

// Experiment protocols shared by the command-line tool and the acceptance
// run: dataset loading, the embedding probe, synthesizer data preparation
// and cross-speaker conversion trials.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "acevc/config.hpp"
#include "acevc/corpus.hpp"
#include "acevc/evaluation.hpp"
#include "acevc/pipeline.hpp"

namespace acevc::eval {

struct Dataset {
  std::vector<corpus::ToySpeakerSpec> speakers;
  corpus::Split split;
};

/// Loads `speakers.txt` next to the manifest, filters by the corpus
/// duration window and holds out `corpus.heldout` utterances per speaker.
Dataset load_dataset(const std::string& manifest_path, const Config& config);

/// Yin statistics per speaker over the given utterances.
std::map<std::string, dsp::SpeakerPitchStats> speaker_pitch_table(const std::vector<corpus::Utterance>& utterances);

/// Synthesizer training items, pitch normalized with the speaker's stats.
std::vector<SynthItem> make_synth_items(const SreModel& sre, const std::vector<corpus::Utterance>& utterances,
                                        const std::map<std::string, dsp::SpeakerPitchStats>& stats);

struct ProbeResult {
  double content = 0.0;  // accuracy on time-mean-pooled z_c
  double speaker = 0.0;  // accuracy on z_s
  std::string to_text() const;
};

ProbeResult probe_sre(const SreModel& sre, const Dataset& data, const ProbeOptions& options);

/// Concatenates the speaker's utterances in order until `seconds` is reached.
dsp::Waveform enrollment_audio(const std::vector<corpus::Utterance>& utterances, const std::string& speaker,
                               double seconds);

struct VcTrial {
  std::string source_path;
  std::string source_speaker;
  std::string target_speaker;
  double source_mean_hz = 0.0;
  double target_mean_hz = 0.0;
  double output_mean_hz = 0.0;  // adaptive-mode output; 0 when Yin finds no voiced frame
  bool closer_to_target = false;  // false for unvoiced output
  int mimic_frames = 0;
  int expected_mimic_frames = 0;  // r * sum(d_c)
  double mimic_hops = 0.0;        // mimic output length in hops
  int adaptive_frames = 0;
  double rate_gap = 0.0;          // relative speaking-rate difference of the pair
  double cer = -1.0;              // adaptive output vs source, when decodable
  std::string failure;            // non-empty when the trial could not run
};

struct VcOptions {
  int trials = 20;
  int griffin_lim_iters = 60;
  double target_seconds = pipeline::kTargetSeconds;
  std::uint64_t seed = 0;
};

struct VcReport {
  std::vector<VcTrial> trials;
  double closer_fraction = 0.0;
  double max_mimic_error_hops = 0.0;
  int rate_pairs = 0;           // trials whose speakers' rates differ by >= 20%
  int rate_pairs_differing = 0; // of those, adaptive and mimic lengths differ
  double mean_cer = 0.0;
  std::optional<double> sv_eer;  // with an independent scorer
  std::string to_text() const;
};

/// Converts between the lowest- and highest-f0 speakers in both
/// directions, sources drawn from held-out then training utterances.
/// With `scorer`, the converted outputs are verified against enrollment
/// embeddings of every speaker to give an SV-EER. A non-empty
/// `output_dir` receives one WAV per adaptive conversion.
VcReport run_vc_trials(const SreModel& sre, const SynthModel& synth, const SreModel* scorer, const Dataset& data,
                       const VcOptions& options, const std::string& output_dir = {});

}  // namespace acevc::eval
