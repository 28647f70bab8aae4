// acevc: corpus generation, two-stage training, conversion and evaluation.
//
// Every command writes into a run directory: the resolved config snapshot
// (config.cfg), a run record (run.txt: command line, seed, artifact
// hashes) and the command's outputs. Re-running a command with
// `--config <run>/config.cfg` reproduces its artifacts bit for bit.
//
// Exit codes: 0 success, 1 usage error, 2 runtime failure.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <iterator>
#include <sstream>

#include "acevc/config.hpp"
#include "acevc/corpus.hpp"
#include "acevc/error.hpp"
#include "acevc/eval_protocols.hpp"
#include "acevc/nn/checkpoint.hpp"
#include "acevc/pipeline.hpp"
#include "acevc/sre.hpp"
#include "acevc/synthesizer.hpp"

namespace fs = std::filesystem;
using namespace acevc;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string hash_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  const std::string bytes{std::istreambuf_iterator<char>(in), {}};
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << nn::fingerprint("file", bytes);
  return out.str();
}

// Shared per-invocation state: resolved config and run directory.
struct Run {
  std::string command;
  std::string config_path;
  std::vector<std::string> overrides;
  std::string run_dir;
  long seed = -1;
  Config config = Config::defaults();
  fs::path dir;
  std::vector<std::pair<std::string, fs::path>> artifacts;

  void resolve(const std::string& name) {
    command = name;
    try {
      if (!config_path.empty()) config = Config::load(config_path);
      for (const auto& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
        config.set(kv.substr(0, eq), kv.substr(eq + 1));
      }
      if (seed >= 0) config.set("train.seed", std::to_string(seed));
    } catch (const Error& e) {
      throw UsageError(std::string(e.what()) + "\n  hint: see `acevc --help` and the README for the config keys");
    }
    if (!run_dir.empty()) {
      dir = run_dir;
    } else {
      const char* root = std::getenv("ACEVC_RUN_DIR");
      dir = fs::path(root && *root ? root : "runs") / name;
    }
    fs::create_directories(dir);
  }

  void set(const std::string& key, const std::string& value) { config.set(key, value); }

  fs::path output(const std::string& flag_value, const std::string& default_name) const {
    return flag_value.empty() ? dir / default_name : fs::path(flag_value);
  }

  void record(const std::string& role, const fs::path& p) { artifacts.emplace_back(role, p); }

  void finish(const std::string& argv_text) const {
    std::ofstream(dir / "config.cfg") << config.to_text();
    std::ofstream out(dir / "run.txt");
    out << "command: " << argv_text << "\n";
    out << "seed: " << config.get_int("train.seed") << "\n";
    for (const auto& [role, p] : artifacts)
      if (fs::is_regular_file(p)) out << role << ": " << p.string() << " " << hash_file(p) << "\n";
  }
};

void require_file(const std::string& path, const std::string& what) {
  if (!fs::is_regular_file(path)) throw Error(what + " '" + path + "' does not exist", ErrorCode::kIo);
}

SreModel load_sre(const std::string& path) {
  require_file(path, "SRE checkpoint");
  return SreModel::load(path);
}

SynthModel load_synth(const std::string& path, const SreModel& sre) {
  require_file(path, "synthesizer checkpoint");
  SynthModel m = SynthModel::load(path);
  if (m.config().content_dim != sre.config().content_dim || m.config().speaker_dim != sre.config().speaker_dim)
    throw Error("synthesizer '" + path + "' does not match the SRE's embedding sizes", ErrorCode::kFingerprint);
  return m;
}

std::string hint_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kIo:
      return "check that the path exists and is readable";
    case ErrorCode::kFormat:
    case ErrorCode::kChecksum:
    case ErrorCode::kVersion:
      return "the file is corrupt or was not written by acevc; regenerate it";
    case ErrorCode::kFingerprint:
      return "the checkpoint was trained with a different config; retrain or use the matching run's config.cfg";
    case ErrorCode::kNonFinite:
      return "training diverged; lower the learning rate";
    default:
      return "check the inputs";
  }
}

dsp::Waveform load_target(const std::string& target_dir, const std::string& target_wav) {
  if (!target_wav.empty()) {
    require_file(target_wav, "target audio");
    return dsp::ingest_audio(target_wav);
  }
  if (!fs::is_directory(target_dir)) throw Error("target directory '" + target_dir + "' does not exist", ErrorCode::kIo);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(target_dir))
    if (e.path().extension() == ".wav") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw Error("no .wav files in '" + target_dir + "'", ErrorCode::kInvalidInput);
  dsp::Waveform all;
  for (const auto& f : files) {
    const dsp::Waveform w = dsp::ingest_audio(f.string());
    const Eigen::Index at = all.samples.size();
    all.samples.conservativeResize(at + w.size());
    all.samples.segment(at, w.size()) = w.samples;
  }
  return all;
}

void print_losses(std::ostream& log, long step, const std::vector<std::pair<std::string, double>>& terms) {
  log << step;
  for (const auto& [name, v] : terms) log << '\t' << v;
  log << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acevc: zero-shot voice conversion toolkit"};
  app.require_subcommand(1);
  Run run;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", run.config_path, "Config file (key = value with [sections])");
    sub->add_option("--set", run.overrides, "Override a config key, e.g. --set sre.steps=200");
    sub->add_option("--run-dir", run.run_dir, "Run directory (default $ACEVC_RUN_DIR/<command> or runs/<command>)");
    sub->add_option("--seed", run.seed, "Master seed (train.seed)")->check(CLI::NonNegativeNumber);
  };

  std::string out, manifest, sre_path, synth_path, wav, src, target_dir, target_wav, mode = "adaptive", scorer;
  long steps = -1;
  int trials = -1;
  bool no_disentangle = false;

  auto* gen = app.add_subcommand("gen-corpus", "Generate the synthetic multi-speaker corpus");
  common(gen);
  gen->add_option("-o,--out", out, "Output directory (default <run>/corpus)");

  auto* tsre = app.add_subcommand("train-sre", "Train the speech representation extractor");
  common(tsre);
  tsre->add_option("--manifest", manifest, "Corpus manifest")->required();
  tsre->add_flag("--no-disentangle", no_disentangle, "Train without the disentanglement loss (beta = 0)");
  tsre->add_option("--steps", steps, "Training steps (sre.steps)");
  tsre->add_option("-o,--out", out, "Checkpoint path (default <run>/sre.ckpt)");

  auto* tsyn = app.add_subcommand("train-synth", "Train the mel synthesizer on a trained SRE");
  common(tsyn);
  tsyn->add_option("--manifest", manifest, "Corpus manifest")->required();
  tsyn->add_option("--sre", sre_path, "SRE checkpoint")->required();
  tsyn->add_option("--steps", steps, "Training steps (synth.steps)");
  tsyn->add_option("-o,--out", out, "Checkpoint path (default <run>/synth.ckpt)");

  auto* ext = app.add_subcommand("extract", "Extract representations of one utterance");
  common(ext);
  ext->add_option("--sre", sre_path, "SRE checkpoint")->required();
  ext->add_option("--wav", wav, "Input audio")->required();
  ext->add_option("-o,--out", out, "Output text (default <run>/extract.txt)");

  auto* conv = app.add_subcommand("convert", "Convert an utterance to a target voice");
  common(conv);
  conv->add_option("--mode", mode, "mimic or adaptive")->check(CLI::IsMember({"mimic", "adaptive"}));
  conv->add_option("--src", src, "Source audio")->required();
  auto* tdir = conv->add_option("--target-dir", target_dir, "Directory of target-speaker WAVs (>= 10 s in total)");
  auto* twav = conv->add_option("--target", target_wav, "Single target-speaker WAV (>= 10 s)");
  tdir->excludes(twav);
  conv->add_option("--sre", sre_path, "SRE checkpoint")->required();
  conv->add_option("--synth", synth_path, "Synthesizer checkpoint")->required();
  conv->add_option("-o,--out", out, "Output WAV; a .report.txt sidecar is written next to it")->required();

  auto* eprobe = app.add_subcommand("eval-probe", "Probe content and speaker embeddings for speaker identity");
  common(eprobe);
  eprobe->add_option("--manifest", manifest, "Corpus manifest")->required();
  eprobe->add_option("--sre", sre_path, "SRE checkpoint")->required();

  auto* evc = app.add_subcommand("eval-vc", "Cross-speaker conversion trials");
  common(evc);
  evc->add_option("--manifest", manifest, "Corpus manifest")->required();
  evc->add_option("--sre", sre_path, "SRE checkpoint")->required();
  evc->add_option("--synth", synth_path, "Synthesizer checkpoint")->required();
  evc->add_option("--scorer", scorer, "Independent SRE checkpoint for SV-EER");
  evc->add_option("--trials", trials, "Number of trials (eval.trials)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  std::string argv_text;
  for (int i = 0; i < argc; ++i) argv_text += (i ? " " : "") + std::string(argv[i]);

  try {
    CLI::App* sub = app.get_subcommands().front();
    run.resolve(sub->get_name());
    Config& cfg = run.config;
    const auto seed = static_cast<std::uint64_t>(cfg.get_int("train.seed"));

    if (sub == gen) {
      corpus::ToyCorpusOptions opt;
      opt.speakers = static_cast<int>(cfg.get_int("corpus.speakers"));
      opt.utterances = static_cast<int>(cfg.get_int("corpus.utterances"));
      opt.seed = static_cast<std::uint64_t>(cfg.get_int("corpus.seed"));
      const fs::path dir = run.output(out, "corpus");
      const auto utts = corpus::generate_toy_corpus(dir.string(), opt);
      run.record("manifest", dir / "manifest.txt");
      run.record("speakers", dir / "speakers.txt");
      std::cout << "wrote " << utts.size() << " utterances to " << dir.string() << "\n";
    } else if (sub == tsre) {
      if (no_disentangle) run.set("sre.beta", "0");
      if (steps >= 0) run.set("sre.steps", std::to_string(steps));
      require_file(manifest, "manifest");
      const eval::Dataset data = eval::load_dataset(manifest, cfg);
      const SreConfig sc = SreConfig::from(cfg, static_cast<int>(data.speakers.size()), corpus::kVocabSize);
      const SreTrainOptions opt = SreTrainOptions::from(cfg);
      std::cerr << "preparing " << data.split.train.size() << " utterances\n";
      const auto items = make_sre_items(data.split.train, data.speakers, cfg.get_doubles("sre.shift_pool"));
      SreModel model(sc, seed);
      nn::Adam<float> adam(model.params(), SreModel::adam_config(opt.lr_backbone, opt.lr_heads));
      std::ofstream log(run.dir / "losses.tsv");
      log << "step\tcontent\tsv\tdisentangle\ttotal\n";
      train_sre(model, adam, items, opt, [&](long step, const SreStepLosses& l) {
        print_losses(log, step, {{"content", l.content}, {"sv", l.sv}, {"disentangle", l.disentangle}, {"total", l.total}});
        if ((step + 1) % 100 == 0)
          std::cerr << "step " << step + 1 << " content " << l.content << " sv " << l.sv << " dis " << l.disentangle << "\n";
      });
      const fs::path ckpt = run.output(out, "sre.ckpt");
      model.save(ckpt.string(), &adam);
      run.record("sre", ckpt);
      std::cout << "wrote " << ckpt.string() << "\n";
    } else if (sub == tsyn) {
      if (steps >= 0) run.set("synth.steps", std::to_string(steps));
      require_file(manifest, "manifest");
      const SreModel sre = load_sre(sre_path);
      const eval::Dataset data = eval::load_dataset(manifest, cfg);
      std::cerr << "preparing " << data.split.train.size() << " utterances\n";
      const auto stats = eval::speaker_pitch_table(data.split.train);
      const auto items = eval::make_synth_items(sre, data.split.train, stats);
      SynthModel model(SynthConfig::from(cfg, sre.config()), seed);
      const SynthTrainOptions opt = SynthTrainOptions::from(cfg);
      nn::Adam<float> adam(model.params(), SynthModel::adam_config(opt.lr));
      std::ofstream log(run.dir / "losses.tsv");
      log << "step\tmel\tpitch\tduration\ttotal\n";
      train_synth(model, adam, items, opt, [&](long step, const SynthStepLosses& l) {
        print_losses(log, step, {{"mel", l.mel}, {"pitch", l.pitch}, {"duration", l.duration}, {"total", l.total}});
        if ((step + 1) % 100 == 0)
          std::cerr << "step " << step + 1 << " mel " << l.mel << " pitch " << l.pitch << " duration " << l.duration << "\n";
      });
      const fs::path ckpt = run.output(out, "synth.ckpt");
      model.save(ckpt.string(), &adam);
      run.record("sre_input", sre_path);
      run.record("synth", ckpt);
      std::cout << "wrote " << ckpt.string() << "\n";
    } else if (sub == ext) {
      const SreModel sre = load_sre(sre_path);
      require_file(wav, "audio");
      const dsp::Waveform w = dsp::ingest_audio(wav);
      const pipeline::Analysis a = pipeline::analyze(sre, w, dsp::speaker_pitch_stats({dsp::yin_pitch(w)}));
      const fs::path path = run.output(out, "extract.txt");
      std::ofstream o(path);
      o << "frames: " << a.mel.size() << "\n";
      o << "content_steps: " << a.sre.content.z.rows() << "\n";
      o << "transcript: " << corpus::decode_tokens(losses::ctc_greedy_decode(a.sre.content.log_probs)) << "\n";
      o << "durations:";
      for (int d : a.groups.durations) o << ' ' << d;
      o << "\nspeaker_embedding:";
      for (Eigen::Index i = 0; i < a.sre.speaker.size(); ++i) o << ' ' << a.sre.speaker(i);
      o << "\n";
      run.record("extract", path);
      std::cout << "wrote " << path.string() << "\n";
    } else if (sub == conv) {
      if (target_dir.empty() && target_wav.empty()) throw UsageError("convert needs --target-dir or --target");
      const SreModel sre = load_sre(sre_path);
      const SynthModel synth = load_synth(synth_path, sre);
      require_file(src, "source audio");
      const dsp::Waveform source = dsp::ingest_audio(src);
      const Eigen::VectorXd zs = pipeline::target_speaker_embedding(sre, load_target(target_dir, target_wav),
                                                                    cfg.get_double("eval.target_seconds"));
      pipeline::ConvertOptions opt;
      opt.mode = pipeline::parse_mode(mode);
      opt.griffin_lim_iters = static_cast<int>(cfg.get_int("dsp.griffin_lim_iters"));
      opt.seed = seed;
      const pipeline::Conversion c = pipeline::convert(sre, synth, source, zs, opt);
      const fs::path wav_out = out;
      if (wav_out.has_parent_path()) fs::create_directories(wav_out.parent_path());
      dsp::write_wav(wav_out.string(), c.audio);
      fs::path report = wav_out;
      report.replace_extension(".report.txt");
      std::ofstream(report) << c.report.to_text();
      run.record("output", wav_out);
      run.record("report", report);
      std::cout << "wrote " << wav_out.string() << " and " << report.string() << "\n";
    } else if (sub == eprobe) {
      require_file(manifest, "manifest");
      const SreModel sre = load_sre(sre_path);
      const eval::Dataset data = eval::load_dataset(manifest, cfg);
      eval::ProbeOptions po;
      po.hidden = static_cast<int>(cfg.get_int("eval.probe_hidden"));
      po.steps = cfg.get_int("eval.probe_steps");
      po.lr = cfg.get_double("eval.probe_lr");
      po.seed = seed;
      const eval::ProbeResult r = eval::probe_sre(sre, data, po);
      const fs::path path = run.dir / "metrics.txt";
      std::ofstream(path) << r.to_text();
      run.record("metrics", path);
      std::cout << r.to_text();
    } else if (sub == evc) {
      if (trials >= 0) run.set("eval.trials", std::to_string(trials));
      require_file(manifest, "manifest");
      const SreModel sre = load_sre(sre_path);
      const SynthModel synth = load_synth(synth_path, sre);
      std::optional<SreModel> scorer_model;
      if (!scorer.empty()) scorer_model = load_sre(scorer);
      const eval::Dataset data = eval::load_dataset(manifest, cfg);
      eval::VcOptions vo;
      vo.trials = static_cast<int>(cfg.get_int("eval.trials"));
      vo.griffin_lim_iters = static_cast<int>(cfg.get_int("dsp.griffin_lim_iters"));
      vo.target_seconds = cfg.get_double("eval.target_seconds");
      vo.seed = seed;
      const eval::VcReport r = eval::run_vc_trials(sre, synth, scorer_model ? &*scorer_model : nullptr, data, vo,
                                                   (run.dir / "outputs").string());
      const fs::path path = run.dir / "metrics.txt";
      std::ofstream(path) << r.to_text();
      run.record("metrics", path);
      for (int i = 0; i < vo.trials; ++i) run.record("output" + std::to_string(i), run.dir / "outputs" / ("trial" + std::to_string(i) + ".wav"));
      std::cout << r.to_text();
    }
    run.finish(argv_text);
    return 0;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n  hint: " << hint_for(e.code()) << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
