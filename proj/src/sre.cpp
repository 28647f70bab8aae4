#include "acevc/sre.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <sstream>
#include <utility>

#include "acevc/dsp/pitch.hpp"
#include "acevc/nn/checkpoint.hpp"

namespace acevc {

namespace {

std::map<std::string, std::string> parse_lines(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) continue;
    out[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return out;
}

std::string field(const std::map<std::string, std::string>& m, const std::string& key) {
  auto it = m.find(key);
  if (it == m.end()) throw Error("checkpoint config lacks '" + key + "'", ErrorCode::kFormat);
  return it->second;
}

}  // namespace

SreConfig SreConfig::from(const Config& c, int speakers, int vocab) {
  SreConfig s;
  s.subsample = static_cast<int>(c.get_int("sre.subsample"));
  s.width = static_cast<int>(c.get_int("sre.width"));
  s.blocks = static_cast<int>(c.get_int("sre.blocks"));
  s.heads = static_cast<int>(c.get_int("sre.heads"));
  s.kernel = static_cast<int>(c.get_int("sre.kernel"));
  s.content_dim = static_cast<int>(c.get_int("sre.content_dim"));
  s.speaker_dim = static_cast<int>(c.get_int("sre.speaker_dim"));
  s.margin = c.get_double("sre.margin");
  s.scale = c.get_double("sre.scale");
  s.speakers = speakers;
  s.vocab = vocab;
  return s;
}

std::string SreConfig::canonical() const {
  std::ostringstream out;
  out << "blocks = " << blocks << "\nheads = " << heads << "\nkernel = " << kernel << "\nmel_bands = " << mel_bands
      << "\nsubsample = " << subsample << "\nwidth = " << width << "\ncontent_dim = " << content_dim
      << "\nspeaker_dim = " << speaker_dim << "\nvocab = " << vocab << "\nspeakers = " << speakers
      << "\nmargin = " << margin << "\nscale = " << scale << "\n";
  return out.str();
}

SreConfig SreConfig::parse(const std::string& text) {
  const auto m = parse_lines(text);
  SreConfig s;
  s.blocks = std::stoi(field(m, "blocks"));
  s.heads = std::stoi(field(m, "heads"));
  s.kernel = std::stoi(field(m, "kernel"));
  s.mel_bands = std::stoi(field(m, "mel_bands"));
  s.subsample = std::stoi(field(m, "subsample"));
  s.width = std::stoi(field(m, "width"));
  s.content_dim = std::stoi(field(m, "content_dim"));
  s.speaker_dim = std::stoi(field(m, "speaker_dim"));
  s.vocab = std::stoi(field(m, "vocab"));
  s.speakers = std::stoi(field(m, "speakers"));
  s.margin = std::stod(field(m, "margin"));
  s.scale = std::stod(field(m, "scale"));
  return s;
}

SreModel::SreModel(const SreConfig& config, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "sre/init"));
  net_ = SreNetwork<float>(params_, config, rng);
}

SreOutput SreModel::extract(const dsp::MelSpectrogram& mel) const {
  nn::Graph<float> g(params_);
  nn::Var<float> z = net_.encode(g, g.constant(normalize_mel<float>(mel.frames)));
  nn::Var<float> zc = net_.content(g, z);
  nn::Var<float> lp = net_.token_log_probs(g, zc);
  nn::Var<float> zs = net_.speaker(g, z);
  SreOutput out;
  out.content.z = zc.value().cast<double>();
  out.content.log_probs = lp.value().cast<double>();
  out.speaker = zs.value().row(0).transpose().cast<double>();
  Eigen::MatrixXd classes = params_[net_.class_weights].value.cast<double>();
  classes.rowwise().normalize();
  out.speaker_logits = net_.config.scale * (classes * out.speaker);
  return out;
}

nn::AdamConfig SreModel::adam_config(double lr_backbone, double lr_heads) {
  nn::AdamConfig c;
  c.learning_rates = {{"backbone", lr_backbone}, {"heads", lr_heads}};
  return c;
}

void SreModel::save(const std::string& path, const nn::Adam<float>* adam) const {
  nn::Container c;
  const std::string text = net_.config.canonical();
  c.config_hash = nn::fingerprint("sre", text);
  c.put_text("kind", "sre");
  c.put_text("config", text);
  nn::store_parameters(c, params_, adam);
  c.write(path);
}

SreModel SreModel::load(const std::string& path, const SreConfig* expected) {
  const nn::Container c = nn::Container::read(path);
  if (!c.contains("kind") || c.get_text("kind") != "sre")
    throw Error("'" + path + "' is not an SRE checkpoint", ErrorCode::kFormat);
  const std::string text = c.get_text("config");
  if (nn::fingerprint("sre", text) != c.config_hash)
    throw Error("'" + path + "': config fingerprint does not match the stored config", ErrorCode::kFingerprint);
  if (expected && expected->canonical() != text)
    throw Error("'" + path + "' was trained with a different SRE config", ErrorCode::kFingerprint);
  SreModel m(SreConfig::parse(text), 0);
  nn::load_parameters<float>(c, m.params_, nullptr);
  return m;
}

int speaker_index(const std::vector<corpus::ToySpeakerSpec>& speakers, const std::string& name) {
  for (std::size_t i = 0; i < speakers.size(); ++i)
    if (speakers[i].name == name) return static_cast<int>(i);
  throw Error("unknown speaker '" + name + "'", ErrorCode::kInvalidInput);
}

std::vector<SreItem> make_sre_items(const std::vector<corpus::Utterance>& utterances,
                                    const std::vector<corpus::ToySpeakerSpec>& speakers,
                                    const std::vector<double>& shift_pool) {
  std::vector<SreItem> items;
  items.reserve(utterances.size());
  for (const auto& u : utterances) {
    const dsp::Waveform w = dsp::ingest_audio(u.path);
    SreItem item;
    item.mel = dsp::mel_spectrogram(w).frames;
    item.target = corpus::encode_transcript(u.transcript);
    item.speaker = speaker_index(speakers, u.speaker);
    for (double s : shift_pool) item.shifted.push_back(dsp::mel_spectrogram(dsp::pitch_shift(w, s)).frames);
    items.push_back(std::move(item));
  }
  return items;
}

SreTrainOptions SreTrainOptions::from(const Config& c) {
  SreTrainOptions o;
  o.steps = c.get_int("sre.steps");
  o.asr_batch = static_cast<int>(c.get_int("sre.asr_batch"));
  o.sv_batch = static_cast<int>(c.get_int("sre.sv_batch"));
  o.sv_frames = static_cast<int>(c.get_int("sre.sv_frames"));
  o.pretrain_steps = c.get_int("sre.pretrain_steps");
  o.pretrain_lr = c.get_double("sre.pretrain_lr");
  o.weights.alpha = c.get_double("sre.alpha");
  o.weights.beta = c.get_double("sre.beta");
  o.lr_backbone = c.get_double("sre.lr_backbone");
  o.lr_heads = c.get_double("sre.lr_heads");
  o.seed = static_cast<std::uint64_t>(c.get_int("train.seed"));
  return o;
}

SreStepLosses train_step_sre(SreModel& model, nn::Adam<float>& adam, const std::vector<const SreItem*>& asr,
                             const std::vector<const Eigen::MatrixXd*>& shifted,
                             const std::vector<std::pair<Eigen::MatrixXd, int>>& sv,
                             const losses::SreLossWeights& weights) {
  const bool siamese = weights.beta > 0.0, verify = weights.alpha > 0.0;
  if (asr.empty() || (verify && sv.empty())) throw Error("train_step_sre: empty batch", ErrorCode::kInvalidInput);
  if (siamese && shifted.size() != asr.size())
    throw Error("train_step_sre: need one shifted copy per ASR item", ErrorCode::kInvalidInput);
  const auto& net = model.network();
  const nn::LossValues lv = nn::forward_backward(model.params(), [&](nn::Graph<float>& g) {
    std::vector<nn::Var<float>> ctc_terms, dis_terms;
    for (std::size_t i = 0; i < asr.size(); ++i) {
      nn::Var<float> zc = net.content(g, net.encode(g, g.constant(normalize_mel<float>(asr[i]->mel))));
      nn::Var<float> ctc = losses::ctc_loss(net.token_log_probs(g, zc), asr[i]->target);
      ctc_terms.push_back(nn::scale(ctc, 1.0f / static_cast<float>(asr[i]->target.size())));
      if (siamese) {
        nn::Var<float> zc_shift = net.content(g, net.encode(g, g.constant(normalize_mel<float>(*shifted[i]))));
        dis_terms.push_back(losses::cosine_disentangle(zc, zc_shift));
      }
    }
    nn::Var<float> content = nn::mean_rows(nn::concat_rows(ctc_terms));
    nn::Objective<float> obj{content, {{"content", content}}};
    if (verify) {
      std::vector<nn::Var<float>> embeddings;
      std::vector<int> labels;
      for (const auto& [mel, label] : sv) {
        embeddings.push_back(net.speaker(g, net.encode(g, g.constant(normalize_mel<float>(mel)))));
        labels.push_back(label);
      }
      nn::Var<float> sv_loss = net.speaker_loss(g, nn::concat_rows(embeddings), labels);
      obj.total = nn::add(content, nn::scale(sv_loss, static_cast<float>(weights.alpha)));
      obj.terms.push_back({"sv", sv_loss});
    }
    if (siamese) {
      nn::Var<float> dis = nn::mean_rows(nn::concat_rows(dis_terms));
      obj.total = nn::add(obj.total, nn::scale(dis, static_cast<float>(weights.beta)));
      obj.terms.push_back({"disentangle", dis});
    }
    return obj;
  });
  adam.step(model.params());
  SreStepLosses out;
  out.content = lv["content"];
  out.sv = verify ? lv["sv"] : 0.0;
  out.disentangle = siamese ? lv["disentangle"] : 0.0;
  out.total = lv.total;
  return out;
}

std::vector<SreStepLosses> train_sre(SreModel& model, nn::Adam<float>& adam, const std::vector<SreItem>& items,
                                     const SreTrainOptions& options, const SreProgress& progress) {
  if (items.empty()) throw Error("train_sre: no training items", ErrorCode::kInvalidInput);
  Rng order_rng(derive_seed(options.seed, "sre/order"));
  Rng sv_rng(derive_seed(options.seed, "sre/sv"));
  Rng shift_rng(derive_seed(options.seed, "sre/shift"));
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();

  std::vector<SreStepLosses> history;
  history.reserve(static_cast<std::size_t>(options.pretrain_steps + options.steps));
  nn::Adam<float> pretrain_adam(model.params(), SreModel::adam_config(options.pretrain_lr, options.pretrain_lr));
  for (long step = 0; step < options.pretrain_steps + options.steps; ++step) {
    std::vector<const SreItem*> asr;
    std::vector<const Eigen::MatrixXd*> shifted;
    for (int b = 0; b < options.asr_batch; ++b) {
      if (cursor == order.size()) {
        order_rng.shuffle(order.begin(), order.end());
        cursor = 0;
      }
      const SreItem& item = items[order[cursor++]];
      asr.push_back(&item);
      const std::uint64_t pick = shift_rng.below(item.shifted.size());
      if (!item.shifted.empty()) shifted.push_back(&item.shifted[pick]);
    }
    std::vector<std::pair<Eigen::MatrixXd, int>> sv;
    for (int b = 0; b < options.sv_batch; ++b) {
      const SreItem& item = items[sv_rng.below(items.size())];
      const Eigen::Index frames = item.mel.rows();
      const Eigen::Index len = std::min<Eigen::Index>(options.sv_frames, frames);
      const auto offset = static_cast<Eigen::Index>(sv_rng.below(static_cast<std::uint64_t>(frames - len + 1)));
      sv.emplace_back(item.mel.middleRows(offset, len), item.speaker);
    }
    const bool pretraining = step < options.pretrain_steps;
    const losses::SreLossWeights weights = pretraining ? losses::SreLossWeights{0.0, 0.0} : options.weights;
    history.push_back(train_step_sre(model, pretraining ? pretrain_adam : adam, asr, shifted, sv, weights));
    if (progress) progress(step, history.back());
  }
  return history;
}

}  // namespace acevc
