#include "acevc/eval_protocols.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <sstream>

#include "acevc/error.hpp"

namespace acevc::eval {

namespace fs = std::filesystem;

Dataset load_dataset(const std::string& manifest_path, const Config& config) {
  Dataset d;
  const fs::path speakers = fs::path(manifest_path).parent_path() / "speakers.txt";
  d.speakers = corpus::load_speakers(speakers.string());
  const auto utts = corpus::load_manifest(manifest_path, d.speakers, config.get_double("corpus.min_seconds"),
                                          config.get_double("corpus.max_seconds"));
  if (utts.empty()) throw Error("'" + manifest_path + "' has no usable utterances", ErrorCode::kInvalidInput);
  d.split = corpus::split_heldout(utts, static_cast<int>(config.get_int("corpus.heldout")));
  return d;
}

std::map<std::string, dsp::SpeakerPitchStats> speaker_pitch_table(const std::vector<corpus::Utterance>& utterances) {
  std::map<std::string, std::vector<dsp::PitchContour>> contours;
  for (const auto& u : utterances) contours[u.speaker].push_back(dsp::yin_pitch(dsp::ingest_audio(u.path)));
  std::map<std::string, dsp::SpeakerPitchStats> out;
  for (const auto& [speaker, list] : contours) out[speaker] = dsp::speaker_pitch_stats(list);
  return out;
}

std::vector<SynthItem> make_synth_items(const SreModel& sre, const std::vector<corpus::Utterance>& utterances,
                                        const std::map<std::string, dsp::SpeakerPitchStats>& stats) {
  std::vector<SynthItem> items;
  items.reserve(utterances.size());
  for (const auto& u : utterances) {
    const auto it = stats.find(u.speaker);
    if (it == stats.end()) throw Error("no pitch statistics for speaker '" + u.speaker + "'", ErrorCode::kInvalidInput);
    items.push_back(pipeline::make_synth_item(sre, dsp::ingest_audio(u.path), it->second));
  }
  return items;
}

std::string ProbeResult::to_text() const {
  std::ostringstream out;
  out << "probe_content_accuracy: " << content << "\nprobe_speaker_accuracy: " << speaker << "\n";
  return out.str();
}

namespace {

void embed(const SreModel& sre, const std::vector<corpus::Utterance>& utts,
           const std::vector<corpus::ToySpeakerSpec>& speakers, Eigen::MatrixXd& content, Eigen::MatrixXd& speaker,
           std::vector<int>& labels) {
  content.resize(static_cast<Eigen::Index>(utts.size()), sre.config().content_dim);
  speaker.resize(static_cast<Eigen::Index>(utts.size()), sre.config().speaker_dim);
  labels.clear();
  for (std::size_t i = 0; i < utts.size(); ++i) {
    const SreOutput o = sre.extract(dsp::mel_spectrogram(dsp::ingest_audio(utts[i].path)));
    const auto row = static_cast<Eigen::Index>(i);
    content.row(row) = o.content.z.colwise().mean();
    speaker.row(row) = o.speaker.transpose();
    labels.push_back(speaker_index(speakers, utts[i].speaker));
  }
}

double mean_voiced_hz(const dsp::Waveform& w) { return dsp::yin_pitch(w).voiced_mean(); }

}  // namespace

ProbeResult probe_sre(const SreModel& sre, const Dataset& data, const ProbeOptions& options) {
  Eigen::MatrixXd ctr, str, cte, ste;
  std::vector<int> ytr, yte;
  embed(sre, data.split.train, data.speakers, ctr, str, ytr);
  embed(sre, data.split.heldout, data.speakers, cte, ste, yte);
  return ProbeResult{probe_accuracy(ctr, ytr, cte, yte, options), probe_accuracy(str, ytr, ste, yte, options)};
}

dsp::Waveform enrollment_audio(const std::vector<corpus::Utterance>& utterances, const std::string& speaker,
                               double seconds) {
  std::vector<Eigen::VectorXd> parts;
  Eigen::Index total = 0;
  for (const auto& u : utterances) {
    if (u.speaker != speaker) continue;
    parts.push_back(dsp::ingest_audio(u.path).samples);
    total += parts.back().size();
    if (static_cast<double>(total) >= seconds * dsp::kSampleRate) break;
  }
  dsp::Waveform w;
  w.samples.resize(total);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    w.samples.segment(at, p.size()) = p;
    at += p.size();
  }
  return w;
}

std::string VcReport::to_text() const {
  std::ostringstream out;
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const VcTrial& t = trials[i];
    out << "trial " << i << ": " << t.source_speaker << " -> " << t.target_speaker;
    if (!t.failure.empty()) {
      out << " failed: " << t.failure << "\n";
      continue;
    }
    out << " source_hz " << t.source_mean_hz << " target_hz " << t.target_mean_hz << " output_hz " << t.output_mean_hz
        << " closer " << (t.closer_to_target ? 1 : 0) << " mimic_frames " << t.mimic_frames << " expected "
        << t.expected_mimic_frames << " adaptive_frames " << t.adaptive_frames << " cer " << t.cer << "\n";
  }
  out << "trials: " << trials.size() << "\n";
  out << "closer_to_target_fraction: " << closer_fraction << "\n";
  out << "max_mimic_length_error_hops: " << max_mimic_error_hops << "\n";
  out << "rate_pairs: " << rate_pairs << "\n";
  out << "rate_pairs_length_differs: " << rate_pairs_differing << "\n";
  out << "mean_cer: " << mean_cer << "\n";
  if (sv_eer) out << "sv_eer: " << *sv_eer << "\n";
  return out.str();
}

VcReport run_vc_trials(const SreModel& sre, const SynthModel& synth, const SreModel* scorer, const Dataset& data,
                       const VcOptions& options, const std::string& output_dir) {
  if (data.speakers.size() < 2) throw Error("conversion trials need two speakers", ErrorCode::kInvalidInput);
  const auto [lo, hi] = std::minmax_element(
      data.speakers.begin(), data.speakers.end(),
      [](const corpus::ToySpeakerSpec& a, const corpus::ToySpeakerSpec& b) { return a.base_f0 < b.base_f0; });
  const corpus::ToySpeakerSpec* pair[2] = {&*lo, &*hi};

  std::vector<corpus::Utterance> pair_utts;
  for (const auto* list : {&data.split.train, &data.split.heldout})
    for (const auto& u : *list)
      if (u.speaker == pair[0]->name || u.speaker == pair[1]->name) pair_utts.push_back(u);
  const auto stats = speaker_pitch_table(pair_utts);

  // Enrollment comes from training utterances; sources from held-out first.
  Eigen::VectorXd target_embedding[2];
  std::vector<const corpus::Utterance*> sources[2];
  for (int k = 0; k < 2; ++k) {
    target_embedding[k] = pipeline::target_speaker_embedding(
        sre, enrollment_audio(data.split.train, pair[k]->name, options.target_seconds), options.target_seconds);
    for (const auto* list : {&data.split.heldout, &data.split.train})
      for (const auto& u : *list)
        if (u.speaker == pair[k]->name) sources[k].push_back(&u);
  }

  std::map<std::string, Eigen::VectorXd> scorer_enrollment;
  if (scorer)
    for (const auto& s : data.speakers)
      scorer_enrollment[s.name] = pipeline::target_speaker_embedding(
          *scorer, enrollment_audio(data.split.train, s.name, options.target_seconds), options.target_seconds);

  if (!output_dir.empty()) fs::create_directories(output_dir);
  VcReport report;
  std::vector<double> positive, negative;
  int closer = 0, cer_count = 0;
  double cer_sum = 0.0;
  for (int i = 0; i < options.trials; ++i) {
    const int src = i % 2, tgt = 1 - src;
    const std::size_t pick = static_cast<std::size_t>(i / 2);
    VcTrial t;
    t.source_speaker = pair[src]->name;
    t.target_speaker = pair[tgt]->name;
    t.rate_gap = std::abs(pair[src]->rate - pair[tgt]->rate) / std::min(pair[src]->rate, pair[tgt]->rate);
    t.source_mean_hz = stats.at(t.source_speaker).mean_hz;
    t.target_mean_hz = stats.at(t.target_speaker).mean_hz;
    if (sources[src].empty()) throw Error("no utterances for speaker '" + t.source_speaker + "'", ErrorCode::kInvalidInput);
    const corpus::Utterance& u = *sources[src][pick % sources[src].size()];
    t.source_path = u.path;
    try {
      const dsp::Waveform source = dsp::ingest_audio(u.path);
      pipeline::ConvertOptions opt;
      opt.griffin_lim_iters = options.griffin_lim_iters;
      opt.seed = options.seed;
      opt.mode = SynthMode::kMimic;
      const pipeline::Conversion mimic = pipeline::convert(sre, synth, source, target_embedding[tgt], opt);
      opt.mode = SynthMode::kAdaptive;
      const pipeline::Conversion adaptive = pipeline::convert(sre, synth, source, target_embedding[tgt], opt);

      int total = 0;
      for (int d : mimic.report.durations) total += d;
      t.expected_mimic_frames = total * sre.config().subsample;
      t.mimic_frames = static_cast<int>(mimic.report.output_frames);
      t.mimic_hops = static_cast<double>(mimic.audio.size()) / dsp::kHopSize;
      t.adaptive_frames = static_cast<int>(adaptive.report.output_frames);
      t.output_mean_hz = mean_voiced_hz(adaptive.audio);
      // An output with no voiced frame has no pitch to compare and counts as a miss.
      t.closer_to_target = t.output_mean_hz > 0.0 && std::abs(t.output_mean_hz - t.target_mean_hz) <
                                                         std::abs(t.output_mean_hz - t.source_mean_hz);
      try {
        t.cer = transcribe_cer(sre, source, adaptive.audio);
        cer_sum += t.cer;
        ++cer_count;
      } catch (const Error&) {
        t.cer = -1.0;
      }
      if (scorer) {
        const Eigen::VectorXd e = scorer->extract(dsp::mel_spectrogram(adaptive.audio)).speaker;
        for (const auto& [name, ref] : scorer_enrollment)
          (name == t.target_speaker ? positive : negative).push_back(cosine(e, ref));
      }
      if (!output_dir.empty())
        dsp::write_wav((fs::path(output_dir) / ("trial" + std::to_string(i) + ".wav")).string(), adaptive.audio);
    } catch (const Error& e) {
      t.failure = e.what();
    }
    if (t.failure.empty()) {
      closer += t.closer_to_target ? 1 : 0;
      report.max_mimic_error_hops =
          std::max(report.max_mimic_error_hops, std::abs(t.mimic_hops - t.expected_mimic_frames));
      if (t.rate_gap >= 0.2) {
        ++report.rate_pairs;
        if (t.adaptive_frames != t.mimic_frames) ++report.rate_pairs_differing;
      }
    } else {
      report.max_mimic_error_hops = std::numeric_limits<double>::infinity();
      if (t.rate_gap >= 0.2) ++report.rate_pairs;
    }
    report.trials.push_back(std::move(t));
  }
  report.closer_fraction = options.trials > 0 ? static_cast<double>(closer) / options.trials : 0.0;
  report.mean_cer = cer_count > 0 ? cer_sum / cer_count : 1.0;
  if (scorer && !positive.empty() && !negative.empty()) report.sv_eer = equal_error_rate(positive, negative);
  return report;
}

}  // namespace acevc::eval
