#include "acevc/synthesizer.hpp"

#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "acevc/nn/checkpoint.hpp"

namespace acevc {

namespace {

std::map<std::string, std::string> parse_lines(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find(" = ");
    if (eq != std::string::npos) out[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return out;
}

int int_field(const std::map<std::string, std::string>& m, const std::string& key) {
  auto it = m.find(key);
  if (it == m.end()) throw Error("checkpoint config lacks '" + key + "'", ErrorCode::kFormat);
  return std::stoi(it->second);
}

}  // namespace

SynthConfig SynthConfig::from(const Config& c, const SreConfig& sre) {
  SynthConfig s;
  s.content_dim = sre.content_dim;
  s.speaker_dim = sre.speaker_dim;
  s.subsample = sre.subsample;
  s.hidden = static_cast<int>(c.get_int("synth.hidden"));
  s.encoder_blocks = static_cast<int>(c.get_int("synth.encoder_blocks"));
  s.decoder_blocks = static_cast<int>(c.get_int("synth.decoder_blocks"));
  s.heads = static_cast<int>(c.get_int("synth.heads"));
  s.ff_dim = static_cast<int>(c.get_int("synth.ff_dim"));
  s.kernel = static_cast<int>(c.get_int("synth.kernel"));
  s.predictor_kernel = static_cast<int>(c.get_int("synth.predictor_kernel"));
  return s;
}

std::string SynthConfig::canonical() const {
  std::ostringstream out;
  out << "content_dim = " << content_dim << "\nspeaker_dim = " << speaker_dim << "\nhidden = " << hidden
      << "\nencoder_blocks = " << encoder_blocks << "\ndecoder_blocks = " << decoder_blocks << "\nheads = " << heads
      << "\nff_dim = " << ff_dim << "\nkernel = " << kernel << "\npredictor_kernel = " << predictor_kernel
      << "\nsubsample = " << subsample << "\nmel_bands = " << mel_bands << "\n";
  return out.str();
}

SynthConfig SynthConfig::parse(const std::string& text) {
  const auto m = parse_lines(text);
  SynthConfig s;
  s.content_dim = int_field(m, "content_dim");
  s.speaker_dim = int_field(m, "speaker_dim");
  s.hidden = int_field(m, "hidden");
  s.encoder_blocks = int_field(m, "encoder_blocks");
  s.decoder_blocks = int_field(m, "decoder_blocks");
  s.heads = int_field(m, "heads");
  s.ff_dim = int_field(m, "ff_dim");
  s.kernel = int_field(m, "kernel");
  s.predictor_kernel = int_field(m, "predictor_kernel");
  s.subsample = int_field(m, "subsample");
  s.mel_bands = int_field(m, "mel_bands");
  return s;
}

std::vector<Eigen::Index> regulation_indices(const std::vector<int>& durations, int subsample) {
  if (subsample < 1) throw Error("duration_regulate: subsample must be positive", ErrorCode::kInvalidInput);
  std::vector<Eigen::Index> idx;
  for (std::size_t m = 0; m < durations.size(); ++m) {
    if (durations[m] < 0) throw Error("duration_regulate: negative duration", ErrorCode::kInvalidInput);
    idx.insert(idx.end(), static_cast<std::size_t>(durations[m]) * static_cast<std::size_t>(subsample),
               static_cast<Eigen::Index>(m));
  }
  return idx;
}

std::vector<int> round_durations(const Eigen::VectorXd& log_durations) {
  std::vector<int> out(static_cast<std::size_t>(log_durations.size()));
  for (Eigen::Index i = 0; i < log_durations.size(); ++i)
    out[static_cast<std::size_t>(i)] = static_cast<int>(std::max(0.0, std::round(std::expm1(log_durations(i)))));
  return out;
}

SynthModel::SynthModel(const SynthConfig& config, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "synth/init"));
  net_ = SynthNetwork<float>(params_, config, rng);
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> SynthModel::predict(const GroupedContent& groups,
                                                                 const Eigen::VectorXd& speaker) const {
  nn::Graph<float> g(params_);
  nn::Var<float> h = net_.encode(g, g.constant(groups.vectors.cast<float>()), g.constant(speaker.transpose().cast<float>()));
  return {net_.duration(g, h).value().col(0).cast<double>(), net_.pitch(g, h).value().col(0).cast<double>()};
}

SynthOutput SynthModel::infer(const GroupedContent& groups, const Eigen::VectorXd& speaker, SynthMode mode) const {
  nn::Graph<float> g(params_);
  nn::Var<float> h = net_.encode(g, g.constant(groups.vectors.cast<float>()), g.constant(speaker.transpose().cast<float>()));
  SynthOutput out;
  if (mode == SynthMode::kMimic) {
    if (groups.pitch.size() != groups.size())
      throw Error("mimic mode needs per-group source pitch", ErrorCode::kInvalidInput);
    out.durations = groups.durations;
    out.pitch = groups.pitch;
  } else {
    out.durations = round_durations(net_.duration(g, h).value().col(0).cast<double>());
    out.pitch = net_.pitch(g, h).value().col(0).cast<double>();
    out.used_predictors = true;
    if (std::accumulate(out.durations.begin(), out.durations.end(), 0) == 0)
      throw Error("adaptive mode predicted zero total duration", ErrorCode::kInvalidInput);
  }
  nn::Var<float> k = net_.add_pitch(g, h, g.constant(out.pitch.cast<float>()));
  nn::Var<float> mel = net_.decode(g, duration_regulate(k, out.durations, net_.config.subsample));
  out.mel.frames = (mel.value().cast<double>().array() * kMelSpread + kMelCenter).matrix();
  return out;
}

nn::AdamConfig SynthModel::adam_config(double lr) {
  nn::AdamConfig c;
  c.learning_rates = {{"synth", lr}};
  return c;
}

void SynthModel::save(const std::string& path, const nn::Adam<float>* adam) const {
  nn::Container c;
  const std::string text = net_.config.canonical();
  c.config_hash = nn::fingerprint("synth", text);
  c.put_text("kind", "synth");
  c.put_text("config", text);
  nn::store_parameters(c, params_, adam);
  c.write(path);
}

SynthModel SynthModel::load(const std::string& path, const SynthConfig* expected) {
  const nn::Container c = nn::Container::read(path);
  if (!c.contains("kind") || c.get_text("kind") != "synth")
    throw Error("'" + path + "' is not a synthesizer checkpoint", ErrorCode::kFormat);
  const std::string text = c.get_text("config");
  if (nn::fingerprint("synth", text) != c.config_hash)
    throw Error("'" + path + "': config fingerprint does not match the stored config", ErrorCode::kFingerprint);
  if (expected && expected->canonical() != text)
    throw Error("'" + path + "' was trained with a different synthesizer config", ErrorCode::kFingerprint);
  SynthModel m(SynthConfig::parse(text), 0);
  nn::load_parameters<float>(c, m.params_, nullptr);
  return m;
}

SynthStepLosses train_step_synth(SynthModel& model, nn::Adam<float>& adam, const std::vector<const SynthItem*>& batch,
                                 const losses::SynthLossWeights& weights) {
  const nn::LossValues lv = nn::forward_backward(
      model.params(), [&](nn::Graph<float>& g) { return synth_objective(g, model.network(), batch, weights); });
  adam.step(model.params());
  return SynthStepLosses{lv["mel"], lv["pitch"], lv["duration"], lv.total};
}

SynthTrainOptions SynthTrainOptions::from(const Config& c) {
  SynthTrainOptions o;
  o.steps = c.get_int("synth.steps");
  o.batch = static_cast<int>(c.get_int("synth.batch"));
  o.lr = c.get_double("synth.lr");
  o.weights.lambda1 = c.get_double("synth.lambda1");
  o.weights.lambda2 = c.get_double("synth.lambda2");
  o.seed = static_cast<std::uint64_t>(c.get_int("train.seed"));
  return o;
}

std::vector<SynthStepLosses> train_synth(SynthModel& model, nn::Adam<float>& adam, const std::vector<SynthItem>& items,
                                         const SynthTrainOptions& options, const SynthProgress& progress) {
  if (items.empty()) throw Error("train_synth: no training items", ErrorCode::kInvalidInput);
  Rng order_rng(derive_seed(options.seed, "synth/order"));
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();
  const auto batch_size = static_cast<std::size_t>(std::max(1, options.batch));
  std::vector<SynthStepLosses> history;
  for (long step = 0; step < options.steps; ++step) {
    std::vector<const SynthItem*> batch;
    for (std::size_t b = 0; b < std::min(batch_size, items.size()); ++b) {
      if (cursor == order.size()) {
        order_rng.shuffle(order.begin(), order.end());
        cursor = 0;
      }
      batch.push_back(&items[order[cursor++]]);
    }
    history.push_back(train_step_synth(model, adam, batch, options.weights));
    if (progress) progress(step, history.back());
  }
  return history;
}

}  // namespace acevc
