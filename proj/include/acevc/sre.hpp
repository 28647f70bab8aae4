#pragma once

// Speech representation extractor: strided-conv 4x subsampling, conformer
// blocks, a content head (z_c and token log-probabilities) and a speaker
// head reading the first time step.

#include <Eigen/Core>

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "acevc/config.hpp"
#include "acevc/corpus.hpp"
#include "acevc/dsp/spectral.hpp"
#include "acevc/losses.hpp"
#include "acevc/nn/adam.hpp"
#include "acevc/nn/layers.hpp"

namespace acevc {

struct SreConfig {
  int mel_bands = dsp::kMelBands;
  int subsample = 4;
  int width = 128;
  int blocks = 2;
  int heads = 4;
  int kernel = 7;
  int content_dim = 64;
  int speaker_dim = 64;
  int vocab = 6;  // including the blank
  int speakers = 8;
  double margin = 2.0;
  double scale = 30.0;

  static SreConfig from(const Config& c, int speakers, int vocab);
  /// Canonical `key = value` lines; the fingerprint input.
  std::string canonical() const;
  static SreConfig parse(const std::string& canonical_text);
};

/// Log-mel values are mapped to roughly unit range before the network.
inline constexpr double kMelCenter = -4.5;
inline constexpr double kMelSpread = 4.0;

template <typename Scalar>
nn::Matrix<Scalar> normalize_mel(const Eigen::MatrixXd& mel) {
  return ((mel.array() - kMelCenter) / kMelSpread).matrix().cast<Scalar>();
}

/// Layer handles for the SRE over a ParameterSet. Backbone parameters are
/// in group "backbone", head parameters in group "heads".
template <typename Scalar>
struct SreNetwork {
  SreConfig config;
  nn::Conv1d<Scalar> subsample;
  std::vector<nn::ConformerBlock<Scalar>> blocks;
  nn::Linear<Scalar> content_proj, token_proj, speaker_proj;
  int class_weights = -1;  // speakers x speaker_dim

  SreNetwork() = default;
  SreNetwork(nn::ParameterSet<Scalar>& ps, const SreConfig& cfg, Rng& rng) : config(cfg) {
    subsample = nn::Conv1d<Scalar>::create(ps, "sre.subsample", "backbone", cfg.mel_bands, cfg.width, cfg.subsample,
                                           cfg.subsample, 0, rng);
    for (int b = 0; b < cfg.blocks; ++b)
      blocks.push_back(nn::ConformerBlock<Scalar>::create(ps, "sre.block" + std::to_string(b), "backbone", cfg.width,
                                                          cfg.heads, cfg.kernel, rng));
    content_proj = nn::Linear<Scalar>::create(ps, "sre.content", "heads", cfg.width, cfg.content_dim, rng);
    token_proj = nn::Linear<Scalar>::create(ps, "sre.tokens", "heads", cfg.content_dim, cfg.vocab, rng);
    speaker_proj = nn::Linear<Scalar>::create(ps, "sre.speaker", "heads", cfg.width, cfg.speaker_dim, rng);
    class_weights = ps.add("sre.speaker_classes", "heads",
                           nn::truncated_normal<Scalar>(cfg.speakers, cfg.speaker_dim, nn::kInitStd, rng));
  }

  /// T x mel_bands (already normalized) -> floor(T / r) x width.
  nn::Var<Scalar> encode(nn::Graph<Scalar>& g, nn::Var<Scalar> mel) const {
    if (mel.rows() < config.subsample)
      throw Error("sre: input has " + std::to_string(mel.rows()) + " frames, need at least " +
                      std::to_string(config.subsample),
                  ErrorCode::kInvalidInput);
    nn::Var<Scalar> z = nn::silu(subsample(g, mel));
    for (const auto& b : blocks) z = b(g, z);
    return z;
  }

  nn::Var<Scalar> content(nn::Graph<Scalar>& g, nn::Var<Scalar> z) const { return content_proj(g, z); }
  nn::Var<Scalar> token_log_probs(nn::Graph<Scalar>& g, nn::Var<Scalar> zc) const {
    return nn::log_softmax_rows(token_proj(g, zc));
  }
  /// Unit-norm 1 x speaker_dim embedding from the first time step.
  nn::Var<Scalar> speaker(nn::Graph<Scalar>& g, nn::Var<Scalar> z) const {
    return nn::l2_normalize_rows(speaker_proj(g, nn::slice_rows(z, 0, 1)));
  }
  nn::Var<Scalar> speaker_loss(nn::Graph<Scalar>& g, nn::Var<Scalar> embeddings, std::vector<int> labels) const {
    return losses::angular_softmax(embeddings, g.param(class_weights), std::move(labels), config.margin, config.scale);
  }
};

struct ContentSequence {
  Eigen::MatrixXd z;          // T' x content_dim
  Eigen::MatrixXd log_probs;  // T' x vocab
};

struct SreOutput {
  ContentSequence content;
  Eigen::VectorXd speaker;  // unit norm
  Eigen::VectorXd speaker_logits;
};

class SreModel {
 public:
  SreModel(const SreConfig& config, std::uint64_t seed);

  const SreConfig& config() const { return net_.config; }
  nn::ParameterSet<float>& params() { return params_; }
  const nn::ParameterSet<float>& params() const { return params_; }
  const SreNetwork<float>& network() const { return net_; }

  SreOutput extract(const dsp::MelSpectrogram& mel) const;

  void save(const std::string& path, const nn::Adam<float>* adam = nullptr) const;
  /// Loads a checkpoint; with `expected`, a different config is rejected.
  static SreModel load(const std::string& path, const SreConfig* expected = nullptr);
  static nn::AdamConfig adam_config(double lr_backbone, double lr_heads);

 private:
  nn::ParameterSet<float> params_;
  SreNetwork<float> net_;
};

// -- Training ----------------------------------------------------------------

struct SreItem {
  Eigen::MatrixXd mel;
  std::vector<int> target;
  int speaker = 0;
  std::vector<Eigen::MatrixXd> shifted;  // mels of pitch-shifted copies
};

/// Loads audio, computes mels and one pitch-shifted mel per pool entry.
std::vector<SreItem> make_sre_items(const std::vector<corpus::Utterance>& utterances,
                                    const std::vector<corpus::ToySpeakerSpec>& speakers,
                                    const std::vector<double>& shift_pool);

int speaker_index(const std::vector<corpus::ToySpeakerSpec>& speakers, const std::string& name);

struct SreTrainOptions {
  long steps = 1500;
  int asr_batch = 4;
  int sv_batch = 8;
  int sv_frames = 172;
  /// CTC-only steps (alpha = beta = 0) with a separate Adam at
  /// `pretrain_lr`, run before the multi-task steps.
  long pretrain_steps = 0;
  double pretrain_lr = 5e-4;
  losses::SreLossWeights weights;
  double lr_backbone = 1e-4;
  double lr_heads = 1e-3;
  std::uint64_t seed = 1234;

  static SreTrainOptions from(const Config& c);
};

struct SreStepLosses {
  double content = 0.0;
  double sv = 0.0;
  double disentangle = 0.0;
  double total = 0.0;
};

/// One combined multi-task step: CTC on the ASR batch, angular softmax on
/// the SV crops, and (when beta > 0) the Siamese cosine loss between each
/// ASR utterance and its pitch-shifted copy. One Adam update. With alpha = 0
/// the SV crops are not evaluated and the reported SV loss is 0.
SreStepLosses train_step_sre(SreModel& model, nn::Adam<float>& adam, const std::vector<const SreItem*>& asr,
                             const std::vector<const Eigen::MatrixXd*>& shifted,
                             const std::vector<std::pair<Eigen::MatrixXd, int>>& sv,
                             const losses::SreLossWeights& weights);

using SreProgress = std::function<void(long step, const SreStepLosses&)>;

/// Runs `options.pretrain_steps` CTC-only steps, then `options.steps`
/// multi-task steps with `adam`. Batch order, crops and shift choices are
/// drawn from independent streams of the seed, so runs differing only in
/// the loss weights see identical data.
std::vector<SreStepLosses> train_sre(SreModel& model, nn::Adam<float>& adam, const std::vector<SreItem>& items,
                                     const SreTrainOptions& options, const SreProgress& progress = {});

}  // namespace acevc
