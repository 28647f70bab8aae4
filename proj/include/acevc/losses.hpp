#pragma once

// Training objectives. Each loss has a plain evaluation over Eigen matrices
// (value plus gradient where needed) and a Tape node wrapping it.

#include <Eigen/Core>

#include <span>
#include <vector>

#include "acevc/nn/ops.hpp"

namespace acevc::losses {

/// CTC blank token id; language tokens are 1..V.
inline constexpr int kBlank = 0;

struct SreLossWeights {
  double alpha = 1.0;  // speaker verification
  double beta = 1.0;   // disentanglement
};

struct SynthLossWeights {
  double lambda1 = 0.1;  // pitch
  double lambda2 = 0.1;  // duration
};

struct LossWithGradient {
  double value = 0.0;
  Eigen::MatrixXd grad;
};

/// Minimum number of frames CTC needs for a target: one per label plus one
/// blank between each pair of equal neighbours.
int ctc_min_frames(std::span<const int> target);

/// Negative log-likelihood of `target` under per-frame log-probabilities
/// (T x (V+1), blank at column 0), by the forward-backward recursion in log
/// space. The gradient is with respect to the log-probability entries.
/// Throws if the target cannot be aligned in T frames.
LossWithGradient ctc(const Eigen::MatrixXd& log_probs, std::span<const int> target);

/// Per-frame argmax, merge repeats, drop blanks.
std::vector<int> ctc_greedy_decode(const Eigen::MatrixXd& log_probs);

/// Per-frame argmax token ids.
std::vector<int> frame_argmax(const Eigen::MatrixXd& log_probs);

/// Monotonic angular-margin target logit psi(theta) = (-1)^k cos(m theta) - 2k
/// for theta in [k pi / m, (k+1) pi / m]; equals cos(m theta) on [0, pi/m].
double angular_margin(double cosine, double margin);
double angular_margin_derivative(double cosine, double margin);

/// A-softmax cross-entropy given the cosine matrix between normalized
/// embeddings (rows) and normalized class weights (columns): target logit
/// scale * psi(theta_y), others scale * cos(theta_j). Mean over rows.
/// Gradient is with respect to the cosines.
LossWithGradient angular_softmax_from_cosines(const Eigen::MatrixXd& cosines, std::span<const int> labels,
                                              double margin, double scale);

/// Full A-softmax on raw embeddings (N x D) and class weights (C x D).
double angular_softmax_loss(const Eigen::MatrixXd& embeddings, const Eigen::MatrixXd& class_weights,
                            std::span<const int> labels, double margin, double scale);

/// 1 - mean over frames of the per-frame cosine similarity; frames with a
/// zero-norm vector contribute similarity 0.
double cosine_disentangle_loss(const Eigen::MatrixXd& content, const Eigen::MatrixXd& shifted_content);

inline double sre_loss(double content, double sv, double disentangle, const SreLossWeights& w) {
  return content + w.alpha * sv + w.beta * disentangle;
}

/// Durations are compared in log(1 + d) space.
double synth_loss(const Eigen::MatrixXd& mel_pred, const Eigen::MatrixXd& mel_target,
                  const Eigen::VectorXd& pitch_pred, const Eigen::VectorXd& pitch_target,
                  const Eigen::VectorXd& log_duration_pred, std::span<const int> durations,
                  const SynthLossWeights& w);

/// log(1 + d) targets for integer durations.
Eigen::VectorXd log_duration_targets(std::span<const int> durations);

// -- Tape nodes -------------------------------------------------------------

template <typename Scalar>
nn::Var<Scalar> ctc_loss(nn::Var<Scalar> log_probs, std::vector<int> target) {
  LossWithGradient r = ctc(log_probs.value().template cast<double>(), target);
  nn::Matrix<Scalar> out(1, 1);
  out(0, 0) = static_cast<Scalar>(r.value);
  auto& t = *log_probs.tape;
  const int ip = log_probs.id;
  nn::Matrix<Scalar> grad = r.grad.cast<Scalar>();
  return t.push(std::move(out), t.requires_grad(ip), [ip, grad = std::move(grad)](nn::Tape<Scalar>& t, int self) {
    t.grad(ip) += t.node(self).grad(0, 0) * grad;
  });
}

template <typename Scalar>
nn::Var<Scalar> angular_softmax(nn::Var<Scalar> cosines, std::vector<int> labels, double margin, double scale) {
  LossWithGradient r = angular_softmax_from_cosines(cosines.value().template cast<double>(), labels, margin, scale);
  nn::Matrix<Scalar> out(1, 1);
  out(0, 0) = static_cast<Scalar>(r.value);
  auto& t = *cosines.tape;
  const int ic = cosines.id;
  nn::Matrix<Scalar> grad = r.grad.cast<Scalar>();
  return t.push(std::move(out), t.requires_grad(ic), [ic, grad = std::move(grad)](nn::Tape<Scalar>& t, int self) {
    t.grad(ic) += t.node(self).grad(0, 0) * grad;
  });
}

/// A-softmax over raw embeddings and class-weight rows, normalizing both.
template <typename Scalar>
nn::Var<Scalar> angular_softmax(nn::Var<Scalar> embeddings, nn::Var<Scalar> class_weights, std::vector<int> labels,
                                double margin, double scale) {
  nn::Var<Scalar> cos = nn::matmul_nt(nn::l2_normalize_rows(embeddings), nn::l2_normalize_rows(class_weights));
  return angular_softmax(cos, std::move(labels), margin, scale);
}

template <typename Scalar>
nn::Var<Scalar> cosine_disentangle(nn::Var<Scalar> content, nn::Var<Scalar> shifted_content) {
  nn::Var<Scalar> sim = nn::mean_all(nn::row_dot(nn::l2_normalize_rows(content), nn::l2_normalize_rows(shifted_content)));
  return nn::add_scalar(nn::scale(sim, Scalar(-1)), Scalar(1));
}

}  // namespace acevc::losses
