#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "acevc/nn/tape.hpp"

namespace acevc::nn {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Learning rate per parameter group.
  std::map<std::string, double> learning_rates;
};

/// Adam with one learning rate per parameter group. Moment estimates are
/// kept in the parameter order of the ParameterSet they were created for.
template <typename Scalar>
class Adam {
 public:
  Adam() = default;

  Adam(const ParameterSet<Scalar>& params, AdamConfig config) : config_(std::move(config)) {
    for (const auto& p : params) {
      if (!config_.learning_rates.count(p.group))
        throw Error("no learning rate for parameter group '" + p.group + "'", ErrorCode::kInvalidInput);
      first_.push_back(Matrix<Scalar>::Zero(p.value.rows(), p.value.cols()));
      second_.push_back(Matrix<Scalar>::Zero(p.value.rows(), p.value.cols()));
    }
  }

  /// Applies one update from the gradients stored in params and increments
  /// the step counter.
  void step(ParameterSet<Scalar>& params) {
    if (static_cast<int>(first_.size()) != params.size())
      throw Error("adam: parameter count mismatch", ErrorCode::kInvalidInput);
    ++steps_;
    const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
    const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
    const auto b1 = static_cast<Scalar>(config_.beta1);
    const auto b2 = static_cast<Scalar>(config_.beta2);
    for (int i = 0; i < params.size(); ++i) {
      auto& p = params[i];
      auto& m = first_[static_cast<std::size_t>(i)];
      auto& v = second_[static_cast<std::size_t>(i)];
      if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols() || m.rows() != p.value.rows() ||
          m.cols() != p.value.cols())
        throw Error("adam: shape mismatch for parameter '" + p.name + "'", ErrorCode::kInvalidInput);
      const double lr = learning_rate(p.group);
      m = b1 * m + (Scalar(1) - b1) * p.grad;
      v = b2 * v + (Scalar(1) - b2) * p.grad.cwiseAbs2();
      const auto step_size = static_cast<Scalar>(lr / bc1);
      const auto denom_scale = static_cast<Scalar>(1.0 / std::sqrt(bc2));
      const auto eps = static_cast<Scalar>(config_.eps);
      p.value.array() -= step_size * m.array() / ((v.array().sqrt() * denom_scale) + eps);
    }
  }

  double learning_rate(const std::string& group) const {
    auto it = config_.learning_rates.find(group);
    if (it == config_.learning_rates.end())
      throw Error("no learning rate for parameter group '" + group + "'", ErrorCode::kInvalidInput);
    return it->second;
  }

  long steps() const { return steps_; }
  void set_steps(long s) { steps_ = s; }
  const AdamConfig& config() const { return config_; }
  std::vector<Matrix<Scalar>>& first_moments() { return first_; }
  std::vector<Matrix<Scalar>>& second_moments() { return second_; }
  const std::vector<Matrix<Scalar>>& first_moments() const { return first_; }
  const std::vector<Matrix<Scalar>>& second_moments() const { return second_; }

 private:
  AdamConfig config_;
  std::vector<Matrix<Scalar>> first_;
  std::vector<Matrix<Scalar>> second_;
  long steps_ = 0;
};

}  // namespace acevc::nn
