#pragma once

// Mel synthesizer: encoder F_e over grouped content conditioned on the
// speaker embedding, duration and pitch predictors, additive pitch
// embedding, discrete duration regulation and decoder F_d.

#include <Eigen/Core>

#include <functional>
#include <string>
#include <vector>

#include "acevc/config.hpp"
#include "acevc/dsp/spectral.hpp"
#include "acevc/grouper.hpp"
#include "acevc/losses.hpp"
#include "acevc/nn/adam.hpp"
#include "acevc/nn/layers.hpp"
#include "acevc/sre.hpp"

namespace acevc {

struct SynthConfig {
  int content_dim = 64;
  int speaker_dim = 64;
  int hidden = 192;
  int encoder_blocks = 2;
  int decoder_blocks = 2;
  int heads = 2;
  int ff_dim = 384;
  int kernel = 3;
  int predictor_kernel = 3;
  int subsample = 4;
  int mel_bands = dsp::kMelBands;

  static SynthConfig from(const Config& c, const SreConfig& sre);
  std::string canonical() const;
  static SynthConfig parse(const std::string& canonical_text);
};

/// Conv -> ReLU -> LayerNorm -> Linear(1): one scalar per step.
template <typename Scalar>
struct ScalarPredictor {
  nn::Conv1d<Scalar> conv;
  nn::LayerNorm<Scalar> norm;
  nn::Linear<Scalar> out;

  static ScalarPredictor create(nn::ParameterSet<Scalar>& ps, const std::string& name, int dim, int kernel, Rng& rng) {
    ScalarPredictor p;
    p.conv = nn::Conv1d<Scalar>::same(ps, name + ".conv", "synth", dim, dim, kernel, rng);
    p.norm = nn::LayerNorm<Scalar>::create(ps, name + ".norm", "synth", dim);
    p.out = nn::Linear<Scalar>::create(ps, name + ".out", "synth", dim, 1, rng);
    return p;
  }

  nn::Var<Scalar> operator()(nn::Graph<Scalar>& g, nn::Var<Scalar> h) const {
    return out(g, norm(g, nn::relu(conv(g, h))));
  }
};

template <typename Scalar>
struct SynthNetwork {
  SynthConfig config;
  nn::Linear<Scalar> input_proj;
  std::vector<nn::FeedForwardTransformerBlock<Scalar>> encoder, decoder;
  ScalarPredictor<Scalar> duration, pitch;
  nn::Linear<Scalar> pitch_embedding;
  nn::Linear<Scalar> mel_out;

  SynthNetwork() = default;
  SynthNetwork(nn::ParameterSet<Scalar>& ps, const SynthConfig& cfg, Rng& rng) : config(cfg) {
    input_proj = nn::Linear<Scalar>::create(ps, "synth.input", "synth", cfg.content_dim + cfg.speaker_dim, cfg.hidden, rng);
    for (int b = 0; b < cfg.encoder_blocks; ++b)
      encoder.push_back(nn::FeedForwardTransformerBlock<Scalar>::create(ps, "synth.encoder" + std::to_string(b), "synth",
                                                                        cfg.hidden, cfg.heads, cfg.ff_dim, cfg.kernel, rng));
    duration = ScalarPredictor<Scalar>::create(ps, "synth.duration", cfg.hidden, cfg.predictor_kernel, rng);
    pitch = ScalarPredictor<Scalar>::create(ps, "synth.pitch", cfg.hidden, cfg.predictor_kernel, rng);
    pitch_embedding = nn::Linear<Scalar>::create(ps, "synth.pitch_embedding", "synth", 1, cfg.hidden, rng);
    for (int b = 0; b < cfg.decoder_blocks; ++b)
      decoder.push_back(nn::FeedForwardTransformerBlock<Scalar>::create(ps, "synth.decoder" + std::to_string(b), "synth",
                                                                        cfg.hidden, cfg.heads, cfg.ff_dim, cfg.kernel, rng));
    mel_out = nn::Linear<Scalar>::create(ps, "synth.mel", "synth", cfg.hidden, cfg.mel_bands, rng);
  }

  /// h = F_e([g_c, broadcast(z_s)] W): M x hidden.
  nn::Var<Scalar> encode(nn::Graph<Scalar>& g, nn::Var<Scalar> groups, nn::Var<Scalar> speaker) const {
    if (groups.cols() != config.content_dim || speaker.cols() != config.speaker_dim || speaker.rows() != 1)
      throw Error("synthesizer: input dimensions do not match the config", ErrorCode::kInvalidInput);
    nn::Var<Scalar> x = nn::concat_cols(std::vector<nn::Var<Scalar>>{groups, nn::broadcast_rows(speaker, groups.rows())});
    nn::Var<Scalar> h = nn::add_positions(g, input_proj(g, x));
    for (const auto& b : encoder) h = b(g, h);
    return h;
  }

  nn::Var<Scalar> add_pitch(nn::Graph<Scalar>& g, nn::Var<Scalar> h, nn::Var<Scalar> group_pitch) const {
    return nn::add(h, pitch_embedding(g, group_pitch));
  }

  /// Normalized-mel output, one row per regulated step.
  nn::Var<Scalar> decode(nn::Graph<Scalar>& g, nn::Var<Scalar> regulated) const {
    nn::Var<Scalar> y = nn::add_positions(g, regulated);
    for (const auto& b : decoder) y = b(g, y);
    return mel_out(g, y);
  }
};

/// Row indices repeating step m durations[m] * r times.
std::vector<Eigen::Index> regulation_indices(const std::vector<int>& durations, int subsample);

/// Discrete upsampling; throws "empty regulation" when every duration is 0.
template <typename Scalar>
nn::Var<Scalar> duration_regulate(nn::Var<Scalar> k, const std::vector<int>& durations, int subsample) {
  if (static_cast<Eigen::Index>(durations.size()) != k.rows())
    throw Error("duration_regulate: duration count does not match steps", ErrorCode::kInvalidInput);
  std::vector<Eigen::Index> idx = regulation_indices(durations, subsample);
  if (idx.empty()) throw Error("empty regulation", ErrorCode::kInvalidInput);
  return nn::gather_rows(k, idx);
}

/// Rounds expm1(log-duration predictions) to non-negative integers.
std::vector<int> round_durations(const Eigen::VectorXd& log_durations);

struct SynthItem {
  GroupedContent groups;     // with pitch
  Eigen::VectorXd speaker;   // z_s
  Eigen::MatrixXd mel;       // target log-mel, at least r * sum(d) rows
};

enum class SynthMode { kMimic, kAdaptive };

struct SynthOutput {
  dsp::MelSpectrogram mel;
  std::vector<int> durations;
  Eigen::VectorXd pitch;
  bool used_predictors = false;
};

struct SynthStepLosses {
  double mel = 0.0;
  double pitch = 0.0;
  double duration = 0.0;
  double total = 0.0;
};

class SynthModel {
 public:
  SynthModel(const SynthConfig& config, std::uint64_t seed);

  const SynthConfig& config() const { return net_.config; }
  nn::ParameterSet<float>& params() { return params_; }
  const nn::ParameterSet<float>& params() const { return params_; }
  const SynthNetwork<float>& network() const { return net_; }

  /// Mimic uses the groups' durations and pitch; adaptive uses the
  /// predictors and never reads the source durations.
  SynthOutput infer(const GroupedContent& groups, const Eigen::VectorXd& speaker, SynthMode mode) const;

  /// Predictor outputs for inspection: (log-durations, pitch).
  std::pair<Eigen::VectorXd, Eigen::VectorXd> predict(const GroupedContent& groups, const Eigen::VectorXd& speaker) const;

  void save(const std::string& path, const nn::Adam<float>* adam = nullptr) const;
  static SynthModel load(const std::string& path, const SynthConfig* expected = nullptr);
  static nn::AdamConfig adam_config(double lr);

 private:
  nn::ParameterSet<float> params_;
  SynthNetwork<float> net_;
};

/// Teacher-forced synthesizer objective for one item: ground-truth pitch
/// and durations feed the decoder; the predictors regress their targets.
template <typename Scalar>
nn::Objective<Scalar> synth_objective(nn::Graph<Scalar>& g, const SynthNetwork<Scalar>& net,
                                      const std::vector<const SynthItem*>& batch, const losses::SynthLossWeights& w);

SynthStepLosses train_step_synth(SynthModel& model, nn::Adam<float>& adam, const std::vector<const SynthItem*>& batch,
                                 const losses::SynthLossWeights& weights);

struct SynthTrainOptions {
  long steps = 2000;
  int batch = 8;
  double lr = 1e-3;
  losses::SynthLossWeights weights;
  std::uint64_t seed = 1234;

  static SynthTrainOptions from(const Config& c);
};

using SynthProgress = std::function<void(long step, const SynthStepLosses&)>;

std::vector<SynthStepLosses> train_synth(SynthModel& model, nn::Adam<float>& adam, const std::vector<SynthItem>& items,
                                         const SynthTrainOptions& options, const SynthProgress& progress = {});

// -- template definition ------------------------------------------------------

template <typename Scalar>
nn::Objective<Scalar> synth_objective(nn::Graph<Scalar>& g, const SynthNetwork<Scalar>& net,
                                      const std::vector<const SynthItem*>& batch, const losses::SynthLossWeights& w) {
  if (batch.empty()) throw Error("synth_objective: empty batch", ErrorCode::kInvalidInput);
  const int r = net.config.subsample;
  std::vector<nn::Var<Scalar>> mel_terms, pitch_terms, dur_terms;
  for (const SynthItem* item : batch) {
    const GroupedContent& gc = item->groups;
    if (gc.pitch.size() != gc.size()) throw Error("synth_objective: groups lack pitch", ErrorCode::kInvalidInput);
    const Eigen::Index frames = static_cast<Eigen::Index>(gc.total_duration()) * r;
    if (item->mel.rows() < frames)
      throw Error("synth_objective: target mel shorter than r * sum(durations)", ErrorCode::kInvalidInput);
    nn::Var<Scalar> h = net.encode(g, g.constant(gc.vectors.cast<Scalar>()),
                                   g.constant(item->speaker.transpose().cast<Scalar>()));
    nn::Var<Scalar> pitch_target = g.constant(gc.pitch.cast<Scalar>());
    nn::Var<Scalar> k = net.add_pitch(g, h, pitch_target);
    nn::Var<Scalar> mel = net.decode(g, duration_regulate(k, gc.durations, r));
    mel_terms.push_back(nn::mse(mel, g.constant(normalize_mel<Scalar>(item->mel.topRows(frames)))));
    pitch_terms.push_back(nn::mse(net.pitch(g, h), pitch_target));
    dur_terms.push_back(nn::mse(net.duration(g, h), g.constant(losses::log_duration_targets(gc.durations).cast<Scalar>())));
  }
  nn::Var<Scalar> mel = nn::mean_rows(nn::concat_rows(mel_terms));
  nn::Var<Scalar> pitch = nn::mean_rows(nn::concat_rows(pitch_terms));
  nn::Var<Scalar> dur = nn::mean_rows(nn::concat_rows(dur_terms));
  nn::Var<Scalar> total = nn::add(mel, nn::add(nn::scale(pitch, static_cast<Scalar>(w.lambda1)),
                                                nn::scale(dur, static_cast<Scalar>(w.lambda2))));
  return {total, {{"mel", mel}, {"pitch", pitch}, {"duration", dur}}};
}

}  // namespace acevc
