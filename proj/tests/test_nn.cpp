#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <iterator>

#include "acevc/nn/adam.hpp"
#include "acevc/nn/checkpoint.hpp"
#include "acevc/nn/grad_check.hpp"
#include "acevc/nn/layers.hpp"
#include "acevc/losses.hpp"

using namespace acevc;
using namespace acevc::nn;

namespace {

Matrix<double> random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng, double scale = 1.0) {
  Matrix<double> m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-scale, scale);
  return m;
}

// Parameters at init scale (0.02) make finite differences uninformative;
// gradient checks use O(1) weights instead.
void randomize(ParameterSet<double>& ps, Rng& rng, double scale = 0.5) {
  for (auto& p : ps) p.value = random_matrix(p.value.rows(), p.value.cols(), rng, scale);
}

// Reduces a sequence output to a scalar with non-uniform weights so every
// output coordinate matters.
Var<double> weighted_reduce(Graph<double>& g, Var<double> y, const Matrix<double>& w) {
  return sum_all(mul(y, g.constant(w)));
}

// An op whose backward is deliberately wrong by 10%.
Var<double> broken_square(Var<double> x) {
  Tape<double>& t = *x.tape;
  const int ix = x.id;
  return t.push(x.value().cwiseAbs2(), t.requires_grad(ix), [ix](Tape<double>& t, int self) {
    t.grad(ix) += 2.2 * t.node(self).grad.cwiseProduct(t.node(ix).value);
  });
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("acevc_test_nn_" + name)).string();
}

}  // namespace

TEST_CASE("zero-weight linear model with MSE to zero target") {
  ParameterSet<double> ps;
  Rng rng(1);
  auto lin = Linear<double>::create(ps, "lin", "heads", 4, 3, rng);
  ps[lin.weight].value.setZero();
  Rng data(2);
  const Matrix<double> x = random_matrix(5, 4, data);
  LossValues lv = forward_backward(ps, [&](Graph<double>& g) {
    Var<double> loss = mse(lin(g, g.constant(x)), g.constant(Matrix<double>::Zero(5, 3)));
    return Objective<double>{loss, {{"mse", loss}}};
  });
  CHECK(lv.total == 0.0);
  for (const auto& p : ps) CHECK(p.grad.isZero());
}

TEST_CASE("forward_backward names the non-finite term") {
  ParameterSet<double> ps;
  Rng rng(1);
  auto lin = Linear<double>::create(ps, "lin", "heads", 2, 2, rng);
  auto build = [&](Graph<double>& g) {
    Matrix<double> bad(1, 2);
    bad << std::numeric_limits<double>::quiet_NaN(), 1.0;
    Var<double> fine = mean_all(lin(g, g.constant(Matrix<double>::Ones(1, 2))));
    Var<double> broken = mean_all(g.constant(bad));
    return Objective<double>{add(fine, broken), {{"fine", fine}, {"pitch", broken}}};
  };
  CHECK_THROWS_WITH(forward_backward(ps, build), doctest::Contains("pitch"));
}

TEST_CASE("forward_backward is deterministic") {
  auto run = [] {
    ParameterSet<float> ps;
    Rng rng(42);
    auto block = ConformerBlock<float>::create(ps, "blk", "backbone", 16, 4, 3, rng);
    Rng data(9);
    Matrix<float> x(12, 16);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = static_cast<float>(data.uniform(-1, 1));
    LossValues lv = forward_backward(ps, [&](Graph<float>& g) {
      Var<float> loss = mean_all(mul(block(g, g.constant(x)), block(g, g.constant(x))));
      return Objective<float>{loss, {{"l", loss}}};
    });
    return std::make_pair(lv.total, ps[0].grad);
  };
  auto a = run(), b = run();
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
}

TEST_CASE("grad_check: linear layer with MSE at 1e-5") {
  ParameterSet<double> ps;
  Rng rng(3);
  auto lin = Linear<double>::create(ps, "lin", "heads", 6, 4, rng);
  randomize(ps, rng);
  const Matrix<double> x = random_matrix(7, 6, rng), y = random_matrix(7, 4, rng);
  auto report = grad_check(ps, [&](Graph<double>& g) { return mse(lin(g, g.constant(x)), g.constant(y)); }, 1e-5);
  CHECK(report.passed);
  CHECK(report.max_relative_error <= 1e-5);
}

TEST_CASE("grad_check: attention block with cosine loss at 1e-4") {
  ParameterSet<double> ps;
  Rng rng(4);
  auto attn = MultiHeadAttention<double>::create(ps, "attn", "backbone", 8, 2, rng);
  randomize(ps, rng);
  const Matrix<double> x = random_matrix(6, 8, rng), target = random_matrix(6, 8, rng);
  auto report = grad_check(
      ps, [&](Graph<double>& g) { return losses::cosine_disentangle(attn(g, g.constant(x)), g.constant(target)); },
      1e-4);
  CHECK(report.passed);
}

TEST_CASE("grad_check: every layer type at 1e-4") {
  Rng rng(5);
  const Matrix<double> x = random_matrix(9, 8, rng);
  SUBCASE("conv1d strided") {
    ParameterSet<double> ps;
    auto conv = Conv1d<double>::create(ps, "conv", "backbone", 8, 5, 4, 4, 0, rng);
    randomize(ps, rng);
    const Matrix<double> w = random_matrix(2, 5, rng);
    CHECK(grad_check(ps, [&](Graph<double>& g) { return weighted_reduce(g, conv(g, g.constant(x)), w); }, 1e-4).passed);
  }
  SUBCASE("conv1d same padding") {
    ParameterSet<double> ps;
    auto conv = Conv1d<double>::same(ps, "conv", "backbone", 8, 6, 3, rng);
    randomize(ps, rng);
    const Matrix<double> w = random_matrix(9, 6, rng);
    CHECK(grad_check(ps, [&](Graph<double>& g) { return weighted_reduce(g, silu(conv(g, g.constant(x))), w); }, 1e-4).passed);
  }
  SUBCASE("layer norm") {
    ParameterSet<double> ps;
    auto ln = LayerNorm<double>::create(ps, "ln", "backbone", 8);
    randomize(ps, rng);
    auto lin = Linear<double>::create(ps, "proj", "backbone", 8, 8, rng);
    randomize(ps, rng);
    const Matrix<double> w = random_matrix(9, 8, rng);
    CHECK(grad_check(ps, [&](Graph<double>& g) { return weighted_reduce(g, ln(g, lin(g, g.constant(x))), w); }, 1e-4).passed);
  }
  SUBCASE("multi-head attention") {
    ParameterSet<double> ps;
    auto attn = MultiHeadAttention<double>::create(ps, "attn", "backbone", 8, 4, rng);
    randomize(ps, rng);
    const Matrix<double> w = random_matrix(9, 8, rng);
    CHECK(grad_check(ps, [&](Graph<double>& g) { return weighted_reduce(g, attn(g, g.constant(x)), w); }, 1e-4).passed);
  }
  SUBCASE("embedding projection of a scalar track") {
    ParameterSet<double> ps;
    auto proj = Linear<double>::create(ps, "pitch_embed", "synth", 1, 8, rng);
    randomize(ps, rng);
    const Matrix<double> p = random_matrix(9, 1, rng), w = random_matrix(9, 8, rng);
    CHECK(grad_check(ps, [&](Graph<double>& g) { return weighted_reduce(g, tanh(proj(g, g.constant(p))), w); }, 1e-4).passed);
  }
  SUBCASE("conformer block") {
    ParameterSet<double> ps;
    auto blk = ConformerBlock<double>::create(ps, "blk", "backbone", 8, 2, 3, rng);
    randomize(ps, rng, 0.3);
    const Matrix<double> w = random_matrix(9, 8, rng);
    CHECK(grad_check(ps, [&](Graph<double>& g) { return weighted_reduce(g, blk(g, g.constant(x)), w); }, 1e-4).passed);
  }
  SUBCASE("feed-forward transformer block") {
    ParameterSet<double> ps;
    auto blk = FeedForwardTransformerBlock<double>::create(ps, "fft", "synth", 8, 2, 12, 3, rng);
    randomize(ps, rng, 0.3);
    const Matrix<double> w = random_matrix(9, 8, rng);
    CHECK(grad_check(ps, [&](Graph<double>& g) { return weighted_reduce(g, blk(g, g.constant(x)), w); }, 1e-4).passed);
  }
  SUBCASE("sequence plumbing ops") {
    ParameterSet<double> ps;
    const int src = ps.add("x", "synth", random_matrix(4, 8, rng));
    const int row = ps.add("row", "synth", random_matrix(1, 8, rng));
    const Matrix<double> w = random_matrix(10, 16, rng);
    auto report = grad_check(ps, [&](Graph<double>& g) {
      Var<double> up = gather_rows(g.param(src), {0, 0, 1, 3, 3, 3, 2, 1, 0, 2});
      Var<double> rows = broadcast_rows(mean_rows(add_row(g.param(src), g.param(row))), 10);
      Var<double> cat = concat_cols(std::vector<Var<double>>{up, rows});
      Var<double> logp = log_softmax_rows(cat);
      return weighted_reduce(g, logp, w);
    }, 1e-4);
    CHECK(report.passed);
  }
}

TEST_CASE("grad_check fails on a corrupted backward") {
  ParameterSet<double> ps;
  Rng rng(6);
  const int p = ps.add("x", "heads", random_matrix(3, 3, rng));
  auto report = grad_check(ps, [&](Graph<double>& g) { return sum_all(broken_square(g.param(p))); }, 1e-4);
  CHECK_FALSE(report.passed);
  CHECK(report.max_relative_error > 0.05);
}

TEST_CASE("adam first step and group learning rates") {
  ParameterSet<double> ps;
  const int a = ps.add("a", "backbone", Matrix<double>::Constant(1, 1, 0.5));
  const int b = ps.add("b", "heads", Matrix<double>::Constant(1, 1, 0.5));
  Adam<double> adam(ps, AdamConfig{0.9, 0.999, 1e-8, {{"backbone", 1e-5}, {"heads", 1e-4}}});
  ps[a].grad(0, 0) = 1.0;
  ps[b].grad(0, 0) = 1.0;
  adam.step(ps);
  // Step 1: m_hat = g, v_hat = g^2, update = -lr * g / (|g| + eps).
  const double da = ps[a].value(0, 0) - 0.5, db = ps[b].value(0, 0) - 0.5;
  CHECK(da == doctest::Approx(-1e-5 / (1.0 + 1e-8)).epsilon(1e-9));
  CHECK(db == doctest::Approx(-1e-4 / (1.0 + 1e-8)).epsilon(1e-9));
  CHECK(db / da == doctest::Approx(10.0).epsilon(1e-9));
  CHECK(adam.steps() == 1);

  ParameterSet<double> neg;
  const int c = neg.add("c", "heads", Matrix<double>::Constant(1, 1, 0.0));
  Adam<double> adam2(neg, AdamConfig{0.9, 0.999, 1e-8, {{"heads", 1e-3}}});
  neg[c].grad(0, 0) = -3.0;
  adam2.step(neg);
  CHECK(neg[c].value(0, 0) == doctest::Approx(1e-3).epsilon(1e-6));
}

TEST_CASE("adam leaves parameters unchanged for zero gradient or zero learning rate") {
  ParameterSet<double> ps;
  Rng rng(7);
  ps.add("w", "heads", random_matrix(3, 4, rng));
  const Matrix<double> before = ps[0].value;
  Adam<double> adam(ps, AdamConfig{0.9, 0.999, 1e-8, {{"heads", 1e-3}}});
  adam.step(ps);
  CHECK(ps[0].value == before);

  Adam<double> frozen(ps, AdamConfig{0.9, 0.999, 1e-8, {{"heads", 0.0}}});
  for (int i = 0; i < 5; ++i) {
    ps[0].grad = random_matrix(3, 4, rng);
    frozen.step(ps);
  }
  CHECK(ps[0].value == before);
}

TEST_CASE("adam rejects mismatched parameter sets") {
  ParameterSet<double> ps;
  ps.add("w", "heads", Matrix<double>::Zero(2, 2));
  Adam<double> adam(ps, AdamConfig{0.9, 0.999, 1e-8, {{"heads", 1e-3}}});
  ParameterSet<double> other;
  other.add("w", "heads", Matrix<double>::Zero(2, 2));
  other.add("v", "heads", Matrix<double>::Zero(1, 2));
  CHECK_THROWS_AS(adam.step(other), Error);
  ParameterSet<double> missing_group;
  missing_group.add("w", "other", Matrix<double>::Zero(2, 2));
  CHECK_THROWS_AS(Adam<double>(missing_group, AdamConfig{0.9, 0.999, 1e-8, {{"heads", 1e-3}}}), Error);
}

TEST_CASE("checkpoint container round trip is bit exact") {
  ParameterSet<float> ps;
  Rng rng(8);
  auto lin = Linear<float>::create(ps, "lin", "heads", 5, 3, rng);
  (void)lin;
  Adam<float> adam(ps, AdamConfig{0.9, 0.999, 1e-8, {{"heads", 1e-3}}});
  for (int i = 0; i < 3; ++i) {
    for (auto& p : ps) p.grad = random_matrix(p.value.rows(), p.value.cols(), rng).cast<float>();
    adam.step(ps);
  }
  Container c;
  c.config_hash = fingerprint("test", "width = 5");
  c.put_text("config", "width = 5");
  store_parameters(c, ps, &adam);
  const std::string path = temp_path("roundtrip.ckpt");
  c.write(path);

  const Container back = Container::read(path);
  CHECK(back.config_hash == c.config_hash);
  CHECK(back.get_text("config") == "width = 5");
  ParameterSet<float> restored;
  Rng other(99);
  Linear<float>::create(restored, "lin", "heads", 5, 3, other);
  Adam<float> adam2(restored, AdamConfig{0.9, 0.999, 1e-8, {{"heads", 1e-3}}});
  load_parameters(back, restored, &adam2);
  for (int i = 0; i < ps.size(); ++i) {
    CHECK(restored[i].value == ps[i].value);
    CHECK(adam2.first_moments()[i] == adam.first_moments()[i]);
    CHECK(adam2.second_moments()[i] == adam.second_moments()[i]);
  }
  CHECK(adam2.steps() == 3);

  // Re-serializing yields the identical byte stream.
  Container again;
  again.config_hash = c.config_hash;
  again.put_text("config", "width = 5");
  store_parameters(again, restored, &adam2);
  CHECK(again.serialize() == c.serialize());
}

TEST_CASE("checkpoint corruption, truncation and version errors") {
  Container c;
  c.config_hash = 1234;
  c.put_matrix<double>("m", Matrix<double>::Identity(3, 3));
  std::vector<std::uint8_t> bytes = c.serialize();

  auto code_of = [](const std::vector<std::uint8_t>& data) {
    try {
      Container::deserialize(data);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::kGeneric;
  };
  std::vector<std::uint8_t> truncated(bytes.begin(), bytes.end() - 10);
  CHECK(code_of(truncated) == ErrorCode::kChecksum);
  std::vector<std::uint8_t> flipped = bytes;
  flipped[40] ^= 0x5A;
  CHECK(code_of(flipped) == ErrorCode::kChecksum);
  std::vector<std::uint8_t> bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK(code_of(bad_magic) == ErrorCode::kFormat);

  Container future = c;
  future.version = kContainerVersion + 1;
  CHECK(code_of(future.serialize()) == ErrorCode::kVersion);

  const std::string path = temp_path("truncated.ckpt");
  std::ofstream(path, std::ios::binary).write(reinterpret_cast<const char*>(truncated.data()),
                                              static_cast<std::streamsize>(truncated.size()));
  CHECK_THROWS_AS(Container::read(path), Error);
}

TEST_CASE("fingerprint separates model kinds") {
  CHECK(fingerprint("sre", "a = 1") != fingerprint("synth", "a = 1"));
  CHECK(fingerprint("sre", "a = 1") != fingerprint("sre", "a = 2"));
  CHECK(fingerprint("sre", "a = 1") == fingerprint("sre", "a = 1"));
}
