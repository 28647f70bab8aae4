#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <numeric>

#include "acevc/error.hpp"
#include "acevc/nn/grad_check.hpp"
#include "acevc/synthesizer.hpp"

using namespace acevc;

namespace {

SynthConfig small_config() {
  SynthConfig c;
  c.content_dim = 6;
  c.speaker_dim = 4;
  c.hidden = 8;
  c.encoder_blocks = 1;
  c.decoder_blocks = 1;
  c.heads = 2;
  c.ff_dim = 12;
  c.kernel = 3;
  c.predictor_kernel = 3;
  c.subsample = 2;
  c.mel_bands = 5;
  return c;
}

SynthItem random_item(const SynthConfig& c, std::vector<int> durations, Rng& rng) {
  SynthItem item;
  const auto m = static_cast<Eigen::Index>(durations.size());
  item.groups.vectors.resize(m, c.content_dim);
  for (Eigen::Index i = 0; i < item.groups.vectors.size(); ++i) item.groups.vectors.data()[i] = rng.uniform(-1, 1);
  item.groups.durations = std::move(durations);
  item.groups.tokens.assign(static_cast<std::size_t>(m), 1);
  item.groups.pitch.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) item.groups.pitch(i) = rng.uniform(-1, 1);
  item.speaker.resize(c.speaker_dim);
  for (Eigen::Index i = 0; i < item.speaker.size(); ++i) item.speaker(i) = rng.uniform(-1, 1);
  item.speaker.normalize();
  const Eigen::Index frames = c.subsample * item.groups.total_duration() + 1;
  item.mel.resize(frames, c.mel_bands);
  for (Eigen::Index i = 0; i < item.mel.size(); ++i) item.mel.data()[i] = rng.uniform(-8, -1);
  return item;
}

bool is_predictor(const std::string& name) {
  return name.rfind("synth.duration.", 0) == 0 || name.rfind("synth.pitch.", 0) == 0;
}

}  // namespace

TEST_CASE("grad_check: synthesizer objective in double precision") {
  const SynthConfig cfg = small_config();
  nn::ParameterSet<double> ps;
  Rng rng(1);
  const SynthNetwork<double> net(ps, cfg, rng);
  for (auto& p : ps)
    for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] += rng.uniform(-0.3, 0.3);
  const SynthItem a = random_item(cfg, {2, 1, 3}, rng), b = random_item(cfg, {1, 0, 2, 1}, rng);
  const std::vector<const SynthItem*> batch{&a, &b};
  const losses::SynthLossWeights w{0.5, 0.7};
  const auto report = nn::grad_check(ps, [&](nn::Graph<double>& g) { return synth_objective(g, net, batch, w).total; }, 1e-4);
  INFO("max relative error " << report.max_relative_error);
  CHECK(report.passed);
}

TEST_CASE("zero predictor weights leave predictor gradients at zero") {
  const SynthConfig cfg = small_config();
  nn::ParameterSet<double> ps;
  Rng rng(2);
  const SynthNetwork<double> net(ps, cfg, rng);
  const SynthItem item = random_item(cfg, {1, 2, 1}, rng);
  const std::vector<const SynthItem*> batch{&item};

  ps.zero_grad();
  {
    nn::Graph<double> g(ps);
    g.backward(synth_objective(g, net, batch, losses::SynthLossWeights{0.0, 0.0}).total);
  }
  bool saw_predictor = false;
  for (const auto& p : ps) {
    if (!is_predictor(p.name)) continue;
    saw_predictor = true;
    CHECK(p.grad.isZero(0.0));
  }
  CHECK(saw_predictor);

  ps.zero_grad();
  {
    nn::Graph<double> g(ps);
    g.backward(synth_objective(g, net, batch, losses::SynthLossWeights{0.1, 0.1}).total);
  }
  double predictor_grad = 0.0;
  for (const auto& p : ps)
    if (is_predictor(p.name)) predictor_grad += p.grad.norm();
  CHECK(predictor_grad > 0.0);
}

TEST_CASE("teacher forcing: the mel term ignores the predictors") {
  const SynthConfig cfg = small_config();
  nn::ParameterSet<double> ps;
  Rng rng(3);
  SynthNetwork<double> net(ps, cfg, rng);
  const SynthItem item = random_item(cfg, {2, 2}, rng);
  const std::vector<const SynthItem*> batch{&item};
  auto mel_term = [&]() {
    nn::Graph<double> g(static_cast<const nn::ParameterSet<double>&>(ps));
    const auto obj = synth_objective(g, net, batch, losses::SynthLossWeights{});
    return obj.terms.front().value.scalar();
  };
  const double before = mel_term();
  for (auto& p : ps)
    if (is_predictor(p.name)) p.value.setConstant(3.0);
  CHECK(mel_term() == before);
}

TEST_CASE("objective rejects short targets and missing pitch") {
  const SynthConfig cfg = small_config();
  nn::ParameterSet<double> ps;
  Rng rng(4);
  const SynthNetwork<double> net(ps, cfg, rng);
  SynthItem item = random_item(cfg, {2, 2}, rng);
  item.mel.conservativeResize(7, Eigen::NoChange);
  nn::Graph<double> g(ps);
  std::vector<const SynthItem*> batch{&item};
  CHECK_THROWS_AS(synth_objective(g, net, batch, {}), Error);
  SynthItem nopitch = random_item(cfg, {1}, rng);
  nopitch.groups.pitch.resize(0);
  batch = {&nopitch};
  CHECK_THROWS_AS(synth_objective(g, net, batch, {}), Error);
}

TEST_CASE("inference modes: mimic keeps durations, adaptive uses predictors") {
  SynthConfig cfg = small_config();
  cfg.mel_bands = dsp::kMelBands;
  const SynthModel model(cfg, 5);
  Rng rng(6);
  const SynthItem item = random_item(cfg, {3, 1, 4}, rng);

  const SynthOutput mimic = model.infer(item.groups, item.speaker, SynthMode::kMimic);
  CHECK(mimic.durations == item.groups.durations);
  CHECK(mimic.mel.frames.rows() == cfg.subsample * 8);
  CHECK(mimic.mel.frames.cols() == dsp::kMelBands);
  CHECK_FALSE(mimic.used_predictors);

  const auto [log_d, pitch] = model.predict(item.groups, item.speaker);
  const std::vector<int> predicted = round_durations(log_d);
  const int total = std::accumulate(predicted.begin(), predicted.end(), 0);
  if (total > 0) {
    const SynthOutput adaptive = model.infer(item.groups, item.speaker, SynthMode::kAdaptive);
    CHECK(adaptive.used_predictors);
    CHECK(adaptive.durations == predicted);
    CHECK(adaptive.mel.frames.rows() == cfg.subsample * total);
    CHECK(adaptive.pitch.isApprox(pitch));
  } else {
    CHECK_THROWS_AS(model.infer(item.groups, item.speaker, SynthMode::kAdaptive), Error);
  }

  // Adaptive output does not depend on the source durations.
  GroupedContent altered = item.groups;
  altered.durations = {1, 1, 1};
  if (total > 0)
    CHECK(model.infer(altered, item.speaker, SynthMode::kAdaptive).mel.frames ==
          model.infer(item.groups, item.speaker, SynthMode::kAdaptive).mel.frames);

  GroupedContent bad = item.groups;
  bad.vectors.conservativeResize(Eigen::NoChange, cfg.content_dim + 1);
  CHECK_THROWS_AS(model.infer(bad, item.speaker, SynthMode::kMimic), Error);
}

TEST_CASE("checkpoint round trip and config mismatch") {
  SynthConfig cfg = small_config();
  cfg.mel_bands = dsp::kMelBands;
  const SynthModel model(cfg, 7);
  const std::string path = (std::filesystem::temp_directory_path() / "acevc_test_synth.ckpt").string();
  model.save(path);
  Rng rng(8);
  const SynthItem item = random_item(cfg, {2, 3}, rng);
  const SynthModel back = SynthModel::load(path, &cfg);
  CHECK(back.infer(item.groups, item.speaker, SynthMode::kMimic).mel.frames ==
        model.infer(item.groups, item.speaker, SynthMode::kMimic).mel.frames);
  SynthConfig other = cfg;
  other.hidden = 10;
  CHECK_THROWS_AS(SynthModel::load(path, &other), Error);
  std::filesystem::remove(path);
}

TEST_CASE("short overfit run lowers the mel loss") {
  SynthConfig cfg = small_config();
  cfg.mel_bands = dsp::kMelBands;
  SynthModel model(cfg, 9);
  Rng rng(10);
  std::vector<SynthItem> items{random_item(cfg, {2, 1, 2}, rng), random_item(cfg, {1, 3}, rng)};
  SynthTrainOptions opt;
  opt.steps = 60;
  opt.batch = 2;
  nn::Adam<float> adam(model.params(), SynthModel::adam_config(1e-2));
  const auto history = train_synth(model, adam, items, opt);
  CHECK(history.back().mel < 0.5 * history.front().mel);
}
