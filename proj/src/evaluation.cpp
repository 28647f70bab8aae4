#include "acevc/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "acevc/corpus.hpp"
#include "acevc/nn/adam.hpp"
#include "acevc/nn/graph.hpp"
#include "acevc/nn/layers.hpp"

namespace acevc::eval {

int edit_distance(std::string_view a, std::string_view b) {
  std::vector<int> row(b.size() + 1);
  std::iota(row.begin(), row.end(), 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    int diagonal = row[0];
    row[0] = static_cast<int>(i);
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const int above = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diagonal + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diagonal = above;
    }
  }
  return row[b.size()];
}

double char_error_rate(std::string_view reference, std::string_view hypothesis) {
  if (reference.empty()) throw Error("char_error_rate: empty reference", ErrorCode::kInvalidInput);
  return static_cast<double>(edit_distance(reference, hypothesis)) / static_cast<double>(reference.size());
}

double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double n = a.norm() * b.norm();
  return n > 0.0 ? a.dot(b) / n : 0.0;
}

double equal_error_rate(const std::vector<double>& positive, const std::vector<double>& negative) {
  if (positive.empty() || negative.empty())
    throw Error("equal_error_rate: need at least one positive and one negative trial", ErrorCode::kInvalidInput);
  std::vector<double> pos = positive, neg = negative;
  std::sort(pos.begin(), pos.end());
  std::sort(neg.begin(), neg.end());
  std::set<double> distinct(pos.begin(), pos.end());
  distinct.insert(neg.begin(), neg.end());
  std::vector<double> thresholds{-std::numeric_limits<double>::infinity()};
  thresholds.insert(thresholds.end(), distinct.begin(), distinct.end());
  thresholds.push_back(std::numeric_limits<double>::infinity());

  const auto np = static_cast<double>(pos.size()), nn = static_cast<double>(neg.size());
  auto rates = [&](double theta) {
    const auto rejected = std::lower_bound(pos.begin(), pos.end(), theta) - pos.begin();
    const auto accepted = neg.end() - std::lower_bound(neg.begin(), neg.end(), theta);
    return std::make_pair(static_cast<double>(accepted) / nn, static_cast<double>(rejected) / np);
  };
  auto [far_prev, frr_prev] = rates(thresholds.front());
  for (std::size_t i = 1; i < thresholds.size(); ++i) {
    const double d_prev = far_prev - frr_prev;
    if (d_prev == 0.0) return far_prev;
    const auto [far, frr] = rates(thresholds[i]);
    const double d = far - frr;
    if (d <= 0.0) {
      const double t = d_prev / (d_prev - d);
      return far_prev + t * (far - far_prev);
    }
    far_prev = far;
    frr_prev = frr;
  }
  return far_prev;
}

double equal_error_rate(const std::vector<Trial>& trials) {
  std::vector<double> pos, neg;
  for (const auto& t : trials) (t.same_speaker ? pos : neg).push_back(cosine(t.a, t.b));
  return equal_error_rate(pos, neg);
}

double probe_accuracy(const Eigen::MatrixXd& train_x, const std::vector<int>& train_y, const Eigen::MatrixXd& test_x,
                      const std::vector<int>& test_y, const ProbeOptions& options) {
  if (train_x.rows() != static_cast<Eigen::Index>(train_y.size()) ||
      test_x.rows() != static_cast<Eigen::Index>(test_y.size()) || train_x.cols() != test_x.cols())
    throw Error("probe: feature/label shape mismatch", ErrorCode::kInvalidInput);
  if (train_y.empty() || test_y.empty()) throw Error("probe: empty split", ErrorCode::kInvalidInput);
  const std::set<int> classes(train_y.begin(), train_y.end());
  if (classes.size() < 2) throw Error("probe: need at least two classes", ErrorCode::kInvalidInput);
  const int n_classes = *classes.rbegin() + 1;

  const nn::Matrix<float> xs = train_x.cast<float>(), xt = test_x.cast<float>();

  nn::ParameterSet<float> ps;
  Rng rng(derive_seed(options.seed, "probe/init"));
  const auto dim = static_cast<int>(train_x.cols());
  // Probe layers use fan-in scaled init; 0.02 would make a deep ReLU stack
  // start near zero output.
  auto layer = [&](const std::string& name, int in, int out) {
    auto l = nn::Linear<float>::create(ps, name, "probe", in, out, rng);
    ps[l.weight].value = nn::truncated_normal<float>(in, out, std::sqrt(2.0 / in), rng);
    return l;
  };
  auto l1 = layer("probe.l1", dim, options.hidden);
  auto l2 = layer("probe.l2", options.hidden, options.hidden);
  auto l3 = layer("probe.l3", options.hidden, n_classes);
  auto forward = [&](nn::Graph<float>& g, const nn::Matrix<float>& x) {
    return l3(g, nn::relu(l2(g, nn::relu(l1(g, g.constant(x))))));
  };
  nn::AdamConfig cfg;
  cfg.learning_rates = {{"probe", options.lr}};
  nn::Adam<float> adam(ps, cfg);
  for (long step = 0; step < options.steps; ++step) {
    nn::forward_backward(ps, [&](nn::Graph<float>& g) {
      nn::Var<float> loss = nn::cross_entropy(forward(g, xs), train_y);
      return nn::Objective<float>{loss, {{"probe", loss}}};
    });
    adam.step(ps);
  }
  const nn::ParameterSet<float>& frozen = ps;
  nn::Graph<float> g(frozen);
  const nn::Matrix<float> logits = forward(g, xt).value();
  int correct = 0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index arg;
    logits.row(i).maxCoeff(&arg);
    if (arg == test_y[static_cast<std::size_t>(i)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test_y.size());
}

std::string transcribe(const SreModel& sre, const dsp::Waveform& w) {
  const SreOutput out = sre.extract(dsp::mel_spectrogram(w));
  return corpus::decode_tokens(losses::ctc_greedy_decode(out.content.log_probs));
}

double transcribe_cer(const SreModel& sre, const dsp::Waveform& source, const dsp::Waveform& converted) {
  const std::string reference = transcribe(sre, source);
  if (reference.empty()) throw Error("transcribe_cer: empty source decode", ErrorCode::kInvalidInput);
  return char_error_rate(reference, transcribe(sre, converted));
}

}  // namespace acevc::eval
