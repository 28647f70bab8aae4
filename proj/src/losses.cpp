#include "acevc/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "acevc/error.hpp"

namespace acevc::losses {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

}  // namespace

int ctc_min_frames(std::span<const int> target) {
  int n = static_cast<int>(target.size());
  for (std::size_t i = 1; i < target.size(); ++i)
    if (target[i] == target[i - 1]) ++n;
  return n;
}

LossWithGradient ctc(const Eigen::MatrixXd& log_probs, std::span<const int> target) {
  const Eigen::Index frames = log_probs.rows();
  const Eigen::Index classes = log_probs.cols();
  for (int tok : target)
    if (tok <= kBlank || tok >= classes)
      throw Error("ctc: target token " + std::to_string(tok) + " outside 1.." + std::to_string(classes - 1),
                  ErrorCode::kInvalidInput);
  if (frames < 1 || ctc_min_frames(target) > frames)
    throw Error("ctc: inadmissible target length (" + std::to_string(target.size()) + " labels need " +
                    std::to_string(ctc_min_frames(target)) + " frames, have " + std::to_string(frames) + ")",
                ErrorCode::kInvalidInput);

  // Extended label sequence: blank, l1, blank, l2, ..., blank.
  const auto states = static_cast<Eigen::Index>(2 * target.size() + 1);
  std::vector<int> ext(static_cast<std::size_t>(states), kBlank);
  for (std::size_t i = 0; i < target.size(); ++i) ext[2 * i + 1] = target[i];
  auto can_skip = [&ext](Eigen::Index s) {
    return s >= 2 && ext[static_cast<std::size_t>(s)] != kBlank &&
           ext[static_cast<std::size_t>(s)] != ext[static_cast<std::size_t>(s - 2)];
  };
  auto lp = [&](Eigen::Index t, Eigen::Index s) { return log_probs(t, ext[static_cast<std::size_t>(s)]); };

  Eigen::MatrixXd alpha = Eigen::MatrixXd::Constant(frames, states, kNegInf);
  Eigen::MatrixXd beta = Eigen::MatrixXd::Constant(frames, states, kNegInf);
  alpha(0, 0) = lp(0, 0);
  if (states > 1) alpha(0, 1) = lp(0, 1);
  for (Eigen::Index t = 1; t < frames; ++t)
    for (Eigen::Index s = 0; s < states; ++s) {
      double a = alpha(t - 1, s);
      if (s >= 1) a = log_add(a, alpha(t - 1, s - 1));
      if (can_skip(s)) a = log_add(a, alpha(t - 1, s - 2));
      alpha(t, s) = a == kNegInf ? kNegInf : a + lp(t, s);
    }
  beta(frames - 1, states - 1) = lp(frames - 1, states - 1);
  if (states > 1) beta(frames - 1, states - 2) = lp(frames - 1, states - 2);
  for (Eigen::Index t = frames - 2; t >= 0; --t)
    for (Eigen::Index s = 0; s < states; ++s) {
      double b = beta(t + 1, s);
      if (s + 1 < states) b = log_add(b, beta(t + 1, s + 1));
      if (s + 2 < states && can_skip(s + 2)) b = log_add(b, beta(t + 1, s + 2));
      beta(t, s) = b == kNegInf ? kNegInf : b + lp(t, s);
    }

  double log_likelihood = alpha(frames - 1, states - 1);
  if (states > 1) log_likelihood = log_add(log_likelihood, alpha(frames - 1, states - 2));

  LossWithGradient out;
  out.value = -log_likelihood;
  out.grad = Eigen::MatrixXd::Zero(frames, classes);
  if (log_likelihood == kNegInf) return out;
  // d(-ln p)/d logp[t,k] = -sum_{s: ext_s = k} alpha_t(s) beta_t(s) / (y_t(k) p)
  for (Eigen::Index t = 0; t < frames; ++t) {
    std::vector<double> occupancy(static_cast<std::size_t>(classes), kNegInf);
    for (Eigen::Index s = 0; s < states; ++s) {
      const double ab = alpha(t, s) + beta(t, s);
      auto& o = occupancy[static_cast<std::size_t>(ext[static_cast<std::size_t>(s)])];
      o = log_add(o, ab);
    }
    for (Eigen::Index k = 0; k < classes; ++k) {
      const double o = occupancy[static_cast<std::size_t>(k)];
      if (o != kNegInf) out.grad(t, k) = -std::exp(o - log_probs(t, k) - log_likelihood);
    }
  }
  return out;
}

std::vector<int> frame_argmax(const Eigen::MatrixXd& log_probs) {
  std::vector<int> out(static_cast<std::size_t>(log_probs.rows()));
  for (Eigen::Index t = 0; t < log_probs.rows(); ++t) {
    Eigen::Index arg;
    log_probs.row(t).maxCoeff(&arg);
    out[static_cast<std::size_t>(t)] = static_cast<int>(arg);
  }
  return out;
}

std::vector<int> ctc_greedy_decode(const Eigen::MatrixXd& log_probs) {
  std::vector<int> out;
  int previous = -1;
  for (int tok : frame_argmax(log_probs)) {
    if (tok != previous && tok != kBlank) out.push_back(tok);
    previous = tok;
  }
  return out;
}

double angular_margin(double cosine, double margin) {
  const double c = std::clamp(cosine, -1.0, 1.0);
  const double theta = std::acos(c);
  const double k = std::min(std::floor(margin * theta / M_PI), std::ceil(margin) - 1.0);
  const double sign = std::fmod(k, 2.0) == 0.0 ? 1.0 : -1.0;
  return sign * std::cos(margin * theta) - 2.0 * k;
}

double angular_margin_derivative(double cosine, double margin) {
  constexpr double kEdge = 1e-12;
  const double c = std::clamp(cosine, -1.0 + kEdge, 1.0 - kEdge);
  const double theta = std::acos(c);
  const double k = std::min(std::floor(margin * theta / M_PI), std::ceil(margin) - 1.0);
  const double sign = std::fmod(k, 2.0) == 0.0 ? 1.0 : -1.0;
  return sign * margin * std::sin(margin * theta) / std::sin(theta);
}

LossWithGradient angular_softmax_from_cosines(const Eigen::MatrixXd& cosines, std::span<const int> labels,
                                              double margin, double scale) {
  const Eigen::Index n = cosines.rows(), classes = cosines.cols();
  if (static_cast<Eigen::Index>(labels.size()) != n)
    throw Error("angular_softmax: label count mismatch", ErrorCode::kInvalidInput);
  LossWithGradient out;
  out.grad = Eigen::MatrixXd::Zero(n, classes);
  if (n == 0) return out;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= classes)
      throw Error("angular_softmax: label " + std::to_string(y) + " out of range", ErrorCode::kInvalidInput);
    Eigen::VectorXd logits = scale * cosines.row(i).transpose();
    logits(y) = scale * angular_margin(cosines(i, y), margin);
    const double hi = logits.maxCoeff();
    const double lse = hi + std::log((logits.array() - hi).exp().sum());
    out.value += lse - logits(y);
    Eigen::VectorXd p = (logits.array() - lse).exp();
    Eigen::VectorXd dlogit = p;
    dlogit(y) -= 1.0;
    out.grad.row(i) = scale * dlogit.transpose();
    out.grad(i, y) = scale * dlogit(y) * angular_margin_derivative(cosines(i, y), margin);
  }
  out.value /= static_cast<double>(n);
  out.grad /= static_cast<double>(n);
  return out;
}

double angular_softmax_loss(const Eigen::MatrixXd& embeddings, const Eigen::MatrixXd& class_weights,
                            std::span<const int> labels, double margin, double scale) {
  if (embeddings.cols() != class_weights.cols())
    throw Error("angular_softmax: embedding/class-weight width mismatch", ErrorCode::kInvalidInput);
  auto normalized = [](Eigen::MatrixXd m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      const double norm = m.row(i).norm();
      if (norm > 0.0) m.row(i) /= norm;
    }
    return m;
  };
  const Eigen::MatrixXd cos = normalized(embeddings) * normalized(class_weights).transpose();
  return angular_softmax_from_cosines(cos, labels, margin, scale).value;
}

double cosine_disentangle_loss(const Eigen::MatrixXd& content, const Eigen::MatrixXd& shifted_content) {
  if (content.rows() != shifted_content.rows() || content.cols() != shifted_content.cols())
    throw Error("cosine_disentangle_loss: shape mismatch", ErrorCode::kInvalidInput);
  if (content.rows() == 0) throw Error("cosine_disentangle_loss: empty sequences", ErrorCode::kInvalidInput);
  double total = 0.0;
  for (Eigen::Index t = 0; t < content.rows(); ++t) {
    const double na = content.row(t).norm(), nb = shifted_content.row(t).norm();
    if (na > 0.0 && nb > 0.0) total += content.row(t).dot(shifted_content.row(t)) / (na * nb);
  }
  return 1.0 - total / static_cast<double>(content.rows());
}

Eigen::VectorXd log_duration_targets(std::span<const int> durations) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(durations.size()));
  for (std::size_t i = 0; i < durations.size(); ++i) out(static_cast<Eigen::Index>(i)) = std::log1p(durations[i]);
  return out;
}

double synth_loss(const Eigen::MatrixXd& mel_pred, const Eigen::MatrixXd& mel_target,
                  const Eigen::VectorXd& pitch_pred, const Eigen::VectorXd& pitch_target,
                  const Eigen::VectorXd& log_duration_pred, std::span<const int> durations,
                  const SynthLossWeights& w) {
  if (mel_pred.rows() != mel_target.rows() || mel_pred.cols() != mel_target.cols())
    throw Error("synth_loss: mel shape mismatch", ErrorCode::kInvalidInput);
  if (pitch_pred.size() != pitch_target.size())
    throw Error("synth_loss: pitch length mismatch", ErrorCode::kInvalidInput);
  if (log_duration_pred.size() != static_cast<Eigen::Index>(durations.size()))
    throw Error("synth_loss: duration length mismatch", ErrorCode::kInvalidInput);
  auto mean_sq = [](const auto& d) { return d.size() ? d.squaredNorm() / static_cast<double>(d.size()) : 0.0; };
  const double mel = mean_sq((mel_pred - mel_target).eval());
  const double pitch = mean_sq((pitch_pred - pitch_target).eval());
  const double dur = mean_sq((log_duration_pred - log_duration_targets(durations)).eval());
  return mel + w.lambda1 * pitch + w.lambda2 * dur;
}

}  // namespace acevc::losses
