#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "acevc/nn/tape.hpp"

namespace acevc::nn {

/// One forward pass over a ParameterSet. Parameters are bound lazily and at
/// most once per pass, so a whole mini-batch shares the same leaves.
template <typename Scalar>
class Graph {
 public:
  /// Trainable pass: parameters are differentiable leaves.
  explicit Graph(ParameterSet<Scalar>& params) : params_(&params), mutable_params_(&params), track_(true) {}

  /// Inference pass: parameters are constants and no backward is recorded.
  explicit Graph(const ParameterSet<Scalar>& params) : params_(&params), track_(false) {}

  Var<Scalar> param(int index) {
    if (bound_.size() < static_cast<std::size_t>(params_->size())) bound_.resize(params_->size(), -1);
    int& slot = bound_[static_cast<std::size_t>(index)];
    if (slot < 0) {
      Var<Scalar> v = track_ ? tape_.param(*mutable_params_, index) : tape_.constant((*params_)[index].value);
      slot = v.id;
      return v;
    }
    return Var<Scalar>{&tape_, slot};
  }

  Var<Scalar> constant(Matrix<Scalar> value) { return tape_.constant(std::move(value)); }

  Var<Scalar> scalar(Scalar s) {
    Matrix<Scalar> m(1, 1);
    m(0, 0) = s;
    return tape_.constant(std::move(m));
  }

  /// Backpropagates a 1x1 node and adds leaf gradients to the parameters.
  void backward(Var<Scalar> loss) {
    if (!track_) throw Error("backward called on an inference graph");
    tape_.backward(loss);
    tape_.accumulate(*mutable_params_);
  }

  bool tracking() const { return track_; }
  Tape<Scalar>& tape() { return tape_; }
  const ParameterSet<Scalar>& params() const { return *params_; }

 private:
  Tape<Scalar> tape_;
  const ParameterSet<Scalar>* params_;
  ParameterSet<Scalar>* mutable_params_ = nullptr;
  bool track_;
  std::vector<int> bound_;
};

/// A named scalar loss contribution, kept so failures can name the term.
template <typename Scalar>
struct LossTerm {
  std::string name;
  Var<Scalar> value;
};

template <typename Scalar>
struct Objective {
  Var<Scalar> total;
  std::vector<LossTerm<Scalar>> terms;
};

struct LossValues {
  double total = 0.0;
  std::vector<std::pair<std::string, double>> terms;

  double operator[](const std::string& name) const {
    for (const auto& [n, v] : terms)
      if (n == name) return v;
    throw Error("unknown loss term: " + name);
  }
};

/// Zeroes gradients, builds the objective, checks every term is finite and
/// backpropagates. Gradients are left in params[i].grad.
template <typename Scalar, typename BuildFn>
LossValues forward_backward(ParameterSet<Scalar>& params, BuildFn&& build) {
  params.zero_grad();
  Graph<Scalar> graph(params);
  Objective<Scalar> obj = build(graph);
  LossValues out;
  for (const auto& term : obj.terms) {
    const double v = static_cast<double>(term.value.scalar());
    if (!std::isfinite(v)) throw Error("non-finite loss term: " + term.name, ErrorCode::kNonFinite);
    out.terms.emplace_back(term.name, v);
  }
  out.total = static_cast<double>(obj.total.scalar());
  if (!std::isfinite(out.total)) throw Error("non-finite loss term: total", ErrorCode::kNonFinite);
  graph.backward(obj.total);
  return out;
}

}  // namespace acevc::nn
