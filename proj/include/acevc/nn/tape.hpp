#pragma once

#include <Eigen/Dense>

#include <cassert>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "acevc/error.hpp"

namespace acevc::nn {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

/// A trainable tensor with its accumulated gradient and optimizer group.
template <typename Scalar>
struct Parameter {
  std::string name;
  std::string group;
  Matrix<Scalar> value;
  Matrix<Scalar> grad;
};

/// Ordered, name-addressed parameter storage. Layers refer to entries by
/// index so that models stay copyable.
template <typename Scalar>
class ParameterSet {
 public:
  int add(std::string name, std::string group, Matrix<Scalar> value) {
    if (find(name) >= 0) throw Error("duplicate parameter name: " + name);
    Parameter<Scalar> p{std::move(name), std::move(group), std::move(value), {}};
    p.grad = Matrix<Scalar>::Zero(p.value.rows(), p.value.cols());
    params_.push_back(std::move(p));
    return static_cast<int>(params_.size()) - 1;
  }

  int find(const std::string& name) const {
    for (std::size_t i = 0; i < params_.size(); ++i)
      if (params_[i].name == name) return static_cast<int>(i);
    return -1;
  }

  Parameter<Scalar>& operator[](int i) { return params_[static_cast<std::size_t>(i)]; }
  const Parameter<Scalar>& operator[](int i) const { return params_[static_cast<std::size_t>(i)]; }
  int size() const { return static_cast<int>(params_.size()); }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void zero_grad() {
    for (auto& p : params_) p.grad.setZero();
  }

  Eigen::Index count() const {
    Eigen::Index n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
  }

  template <typename Other>
  ParameterSet<Other> cast() const {
    ParameterSet<Other> out;
    for (const auto& p : params_) out.add(p.name, p.group, p.value.template cast<Other>());
    return out;
  }

 private:
  std::vector<Parameter<Scalar>> params_;
};

template <typename Scalar>
class Tape;

/// Handle to a node on a Tape.
template <typename Scalar>
struct Var {
  Tape<Scalar>* tape = nullptr;
  int id = -1;

  const Matrix<Scalar>& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  Scalar scalar() const { return value()(0, 0); }
};

/// Reverse-mode gradient tape over dense matrices. Nodes are appended in
/// evaluation order, so a reverse sweep is a valid topological order.
template <typename Scalar>
class Tape {
 public:
  using Mat = Matrix<Scalar>;
  using BackwardFn = std::function<void(Tape&, int)>;

  struct Node {
    Mat value;
    Mat grad;
    bool requires_grad = false;
    BackwardFn backward;
  };

  Var<Scalar> constant(Mat value) { return push(std::move(value), false, {}); }

  /// Leaf bound to a parameter; its gradient is added to the parameter by
  /// accumulate().
  Var<Scalar> param(ParameterSet<Scalar>& params, int index) {
    Var<Scalar> v = push(params[index].value, true, {});
    bindings_.emplace_back(v.id, index);
    return v;
  }

  Var<Scalar> push(Mat value, bool requires_grad, BackwardFn backward) {
    nodes_.push_back(Node{std::move(value), Mat(), requires_grad, std::move(backward)});
    return Var<Scalar>{this, static_cast<int>(nodes_.size()) - 1};
  }

  Node& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }
  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }

  bool requires_grad(int id) const { return node(id).requires_grad; }

  /// Gradient buffer of a node, allocated as zeros on first use.
  Mat& grad(int id) {
    Node& n = node(id);
    if (n.grad.size() == 0) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
    return n.grad;
  }

  bool has_grad(int id) const { return node(id).grad.size() != 0; }

  /// Seeds d(out)/d(out) = 1 for a 1x1 output and sweeps backwards.
  void backward(Var<Scalar> out) {
    if (out.value().size() != 1) throw Error("backward requires a scalar output");
    grad(out.id).setOnes();
    for (int id = out.id; id >= 0; --id) {
      Node& n = node(id);
      if (!n.requires_grad || n.grad.size() == 0 || !n.backward) continue;
      n.backward(*this, id);
    }
  }

  /// Adds leaf gradients into the bound ParameterSet.
  void accumulate(ParameterSet<Scalar>& params) const {
    for (const auto& [node_id, index] : bindings_) {
      const Node& n = node(node_id);
      if (n.grad.size() != 0) params[index].grad += n.grad;
    }
  }

  int size() const { return static_cast<int>(nodes_.size()); }

 private:
  std::vector<Node> nodes_;
  std::vector<std::pair<int, int>> bindings_;
};

template <typename Scalar>
const Matrix<Scalar>& Var<Scalar>::value() const {
  return tape->node(id).value;
}

}  // namespace acevc::nn
