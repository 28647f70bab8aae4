#pragma once

// Differentiable operations over Tape nodes. Every op computes its value
// eagerly and records a closure that propagates the output gradient to the
// inputs that require one.

#include <cmath>
#include <numeric>
#include <vector>

#include "acevc/nn/tape.hpp"

namespace acevc::nn {

namespace detail {

template <typename Scalar>
bool any_grad(std::initializer_list<Var<Scalar>> vars) {
  for (const auto& v : vars)
    if (v.tape->requires_grad(v.id)) return true;
  return false;
}

template <typename Scalar>
void check_same_shape(const Var<Scalar>& a, const Var<Scalar>& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw Error(std::string(op) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                    std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                    std::to_string(b.cols()) + ")",
                ErrorCode::kInvalidInput);
}

}  // namespace detail

template <typename Scalar>
Var<Scalar> matmul(Var<Scalar> a, Var<Scalar> b) {
  if (a.cols() != b.rows()) throw Error("matmul: inner dimension mismatch", ErrorCode::kInvalidInput);
  Tape<Scalar>& t = *a.tape;
  Matrix<Scalar> out = a.value() * b.value();
  const int ia = a.id, ib = b.id;
  return t.push(std::move(out), detail::any_grad({a, b}), [ia, ib](Tape<Scalar>& t, int self) {
    const auto& g = t.node(self).grad;
    if (t.requires_grad(ia)) t.grad(ia).noalias() += g * t.node(ib).value.transpose();
    if (t.requires_grad(ib)) t.grad(ib).noalias() += t.node(ia).value.transpose() * g;
  });
}

/// a * b^T
template <typename Scalar>
Var<Scalar> matmul_nt(Var<Scalar> a, Var<Scalar> b) {
  if (a.cols() != b.cols()) throw Error("matmul_nt: inner dimension mismatch", ErrorCode::kInvalidInput);
  Tape<Scalar>& t = *a.tape;
  Matrix<Scalar> out = a.value() * b.value().transpose();
  const int ia = a.id, ib = b.id;
  return t.push(std::move(out), detail::any_grad({a, b}), [ia, ib](Tape<Scalar>& t, int self) {
    const auto& g = t.node(self).grad;
    if (t.requires_grad(ia)) t.grad(ia).noalias() += g * t.node(ib).value;
    if (t.requires_grad(ib)) t.grad(ib).noalias() += g.transpose() * t.node(ia).value;
  });
}

template <typename Scalar>
Var<Scalar> add(Var<Scalar> a, Var<Scalar> b) {
  detail::check_same_shape(a, b, "add");
  Tape<Scalar>& t = *a.tape;
  const int ia = a.id, ib = b.id;
  return t.push(a.value() + b.value(), detail::any_grad({a, b}), [ia, ib](Tape<Scalar>& t, int self) {
    const auto& g = t.node(self).grad;
    if (t.requires_grad(ia)) t.grad(ia) += g;
    if (t.requires_grad(ib)) t.grad(ib) += g;
  });
}

template <typename Scalar>
Var<Scalar> sub(Var<Scalar> a, Var<Scalar> b) {
  detail::check_same_shape(a, b, "sub");
  Tape<Scalar>& t = *a.tape;
  const int ia = a.id, ib = b.id;
  return t.push(a.value() - b.value(), detail::any_grad({a, b}), [ia, ib](Tape<Scalar>& t, int self) {
    const auto& g = t.node(self).grad;
    if (t.requires_grad(ia)) t.grad(ia) += g;
    if (t.requires_grad(ib)) t.grad(ib) -= g;
  });
}

/// Elementwise product.
template <typename Scalar>
Var<Scalar> mul(Var<Scalar> a, Var<Scalar> b) {
  detail::check_same_shape(a, b, "mul");
  Tape<Scalar>& t = *a.tape;
  const int ia = a.id, ib = b.id;
  Matrix<Scalar> out = a.value().cwiseProduct(b.value());
  return t.push(std::move(out), detail::any_grad({a, b}), [ia, ib](Tape<Scalar>& t, int self) {
    const auto& g = t.node(self).grad;
    if (t.requires_grad(ia)) t.grad(ia) += g.cwiseProduct(t.node(ib).value);
    if (t.requires_grad(ib)) t.grad(ib) += g.cwiseProduct(t.node(ia).value);
  });
}

template <typename Scalar>
Var<Scalar> scale(Var<Scalar> a, Scalar s) {
  Tape<Scalar>& t = *a.tape;
  const int ia = a.id;
  return t.push(a.value() * s, detail::any_grad({a}), [ia, s](Tape<Scalar>& t, int self) {
    t.grad(ia) += t.node(self).grad * s;
  });
}

/// a + s for a scalar constant s.
template <typename Scalar>
Var<Scalar> add_scalar(Var<Scalar> a, Scalar s) {
  Tape<Scalar>& t = *a.tape;
  const int ia = a.id;
  Matrix<Scalar> out = a.value().array() + s;
  return t.push(std::move(out), detail::any_grad({a}), [ia](Tape<Scalar>& t, int self) {
    t.grad(ia) += t.node(self).grad;
  });
}

/// Adds a 1xC row to every row of an NxC matrix.
template <typename Scalar>
Var<Scalar> add_row(Var<Scalar> a, Var<Scalar> row) {
  if (row.rows() != 1 || row.cols() != a.cols())
    throw Error("add_row: expected a 1x" + std::to_string(a.cols()) + " row", ErrorCode::kInvalidInput);
  Tape<Scalar>& t = *a.tape;
  const int ia = a.id, ir = row.id;
  Matrix<Scalar> out = a.value().rowwise() + row.value().row(0);
  return t.push(std::move(out), detail::any_grad({a, row}), [ia, ir](Tape<Scalar>& t, int self) {
    const auto& g = t.node(self).grad;
    if (t.requires_grad(ia)) t.grad(ia) += g;
    if (t.requires_grad(ir)) t.grad(ir) += g.colwise().sum();
  });
}

/// x * sigmoid(x)
template <typename Scalar>
Var<Scalar> silu(Var<Scalar> a) {
  Tape<Scalar>& t = *a.tape;
  const int ia = a.id;
  Matrix<Scalar> sig = (Scalar(1) + (-a.value().array()).exp()).inverse().matrix();
  Matrix<Scalar> out = a.value().cwiseProduct(sig);
  return t.push(std::move(out), detail::any_grad({a}), [ia, sig = std::move(sig)](Tape<Scalar>& t, int self) {
    const auto& x = t.node(ia).value.array();
    auto d = sig.array() * (Scalar(1) + x * (Scalar(1) - sig.array()));
    t.grad(ia).array() += t.node(self).grad.array() * d;
  });
}

template <typename Scalar>
Var<Scalar> relu(Var<Scalar> a) {
  Tape<Scalar>& t = *a.tape;
  const int ia = a.id;
  Matrix<Scalar> out = a.value().cwiseMax(Scalar(0));
  return t.push(std::move(out), detail::any_grad({a}), [ia](Tape<Scalar>& t, int self) {
    const auto& x = t.node(ia).value.array();
    t.grad(ia).array() += (x > Scalar(0)).select(t.node(self).grad.array(), Scalar(0));
  });
}

template <typename Scalar>
Var<Scalar> tanh(Var<Scalar> a) {
  Tape<Scalar>& t = *a.tape;
  const int ia = a.id;
  Matrix<Scalar> out = a.value().array().tanh().matrix();
  return t.push(std::move(out), detail::any_grad({a}), [ia](Tape<Scalar>& t, int self) {
    const auto& y = t.node(self).value.array();
    t.grad(ia).array() += t.node(self).grad.array() * (Scalar(1) - y.square());
  });
}

/// Row-wise layer normalization with learned 1xC gain and bias.
template <typename Scalar>
Var<Scalar> layer_norm(Var<Scalar> x, Var<Scalar> gamma, Var<Scalar> beta, Scalar eps = Scalar(1e-5)) {
  Tape<Scalar>& t = *x.tape;
  const Eigen::Index n = x.rows(), c = x.cols();
  if (gamma.rows() != 1 || gamma.cols() != c || beta.rows() != 1 || beta.cols() != c)
    throw Error("layer_norm: gain/bias shape mismatch", ErrorCode::kInvalidInput);
  Matrix<Scalar> xhat(n, c);
  Vector<Scalar> inv_std(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    auto row = x.value().row(i);
    const Scalar mean = row.mean();
    const Scalar var = (row.array() - mean).square().mean();
    inv_std(i) = Scalar(1) / std::sqrt(var + eps);
    xhat.row(i) = (row.array() - mean) * inv_std(i);
  }
  Matrix<Scalar> out = (xhat.array().rowwise() * gamma.value().row(0).array()).rowwise() +
                       beta.value().row(0).array();
  const int ix = x.id, ig = gamma.id, ib = beta.id;
  return t.push(std::move(out), detail::any_grad({x, gamma, beta}),
                [ix, ig, ib, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape<Scalar>& t, int self) {
                  const auto& g = t.node(self).grad;
                  if (t.requires_grad(ig)) t.grad(ig) += g.cwiseProduct(xhat).colwise().sum();
                  if (t.requires_grad(ib)) t.grad(ib) += g.colwise().sum();
                  if (t.requires_grad(ix)) {
                    Matrix<Scalar> gx = g.array().rowwise() * t.node(ig).value.row(0).array();
                    auto& dx = t.grad(ix);
                    for (Eigen::Index i = 0; i < gx.rows(); ++i) {
                      const Scalar mg = gx.row(i).mean();
                      const Scalar mgx = gx.row(i).cwiseProduct(xhat.row(i)).mean();
                      dx.row(i).array() +=
                          inv_std(i) * (gx.row(i).array() - mg - xhat.row(i).array() * mgx);
                    }
                  }
                });
}

/// Row-wise log-softmax.
template <typename Scalar>
Var<Scalar> log_softmax_rows(Var<Scalar> x) {
  Tape<Scalar>& t = *x.tape;
  Matrix<Scalar> out = x.value();
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const Scalar m = out.row(i).maxCoeff();
    const Scalar lse = m + std::log((out.row(i).array() - m).exp().sum());
    out.row(i).array() -= lse;
  }
  const int ix = x.id;
  return t.push(std::move(out), detail::any_grad({x}), [ix](Tape<Scalar>& t, int self) {
    const auto& g = t.node(self).grad;
    const auto& y = t.node(self).value;
    Vector<Scalar> gs = g.rowwise().sum();
    t.grad(ix) += g - (y.array().exp().colwise() * gs.array()).matrix();
  });
}

/// Row-wise softmax.
template <typename Scalar>
Var<Scalar> softmax_rows(Var<Scalar> x) {
  Tape<Scalar>& t = *x.tape;
  Matrix<Scalar> out = x.value();
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const Scalar m = out.row(i).maxCoeff();
    out.row(i) = (out.row(i).array() - m).exp();
    out.row(i) /= out.row(i).sum();
  }
  const int ix = x.id;
  return t.push(std::move(out), detail::any_grad({x}), [ix](Tape<Scalar>& t, int self) {
    const auto& g = t.node(self).grad;
    const auto& y = t.node(self).value;
    Vector<Scalar> dot = g.cwiseProduct(y).rowwise().sum();
    t.grad(ix) += (y.array() * (g.array().colwise() - dot.array())).matrix();
  });
}

/// Sliding-window unfold of an NxC sequence into rows of kernel*C values,
/// the im2col step of a 1-D convolution. Zero padding on both ends.
template <typename Scalar>
Var<Scalar> unfold(Var<Scalar> x, int kernel, int stride, int pad) {
  Tape<Scalar>& t = *x.tape;
  const Eigen::Index n = x.rows(), c = x.cols();
  const Eigen::Index out_n = (n + 2 * pad - kernel) / stride + 1;
  if (out_n < 1) throw Error("unfold: sequence shorter than kernel", ErrorCode::kInvalidInput);
  Matrix<Scalar> out = Matrix<Scalar>::Zero(out_n, kernel * c);
  for (Eigen::Index o = 0; o < out_n; ++o)
    for (int k = 0; k < kernel; ++k) {
      const Eigen::Index src = o * stride - pad + k;
      if (src >= 0 && src < n) out.block(o, k * c, 1, c) = x.value().row(src);
    }
  const int ix = x.id;
  return t.push(std::move(out), detail::any_grad({x}), [ix, kernel, stride, pad](Tape<Scalar>& t, int self) {
    const auto& g = t.node(self).grad;
    auto& dx = t.grad(ix);
    const Eigen::Index n = dx.rows(), c = dx.cols();
    for (Eigen::Index o = 0; o < g.rows(); ++o)
      for (int k = 0; k < kernel; ++k) {
        const Eigen::Index src = o * stride - pad + k;
        if (src >= 0 && src < n) dx.row(src) += g.block(o, k * c, 1, c);
      }
  });
}

template <typename Scalar>
Var<Scalar> slice_rows(Var<Scalar> x, Eigen::Index begin, Eigen::Index count) {
  if (begin < 0 || count < 0 || begin + count > x.rows())
    throw Error("slice_rows: range out of bounds", ErrorCode::kInvalidInput);
  Tape<Scalar>& t = *x.tape;
  const int ix = x.id;
  return t.push(x.value().middleRows(begin, count), detail::any_grad({x}),
                [ix, begin, count](Tape<Scalar>& t, int self) {
                  t.grad(ix).middleRows(begin, count) += t.node(self).grad;
                });
}

template <typename Scalar>
Var<Scalar> slice_cols(Var<Scalar> x, Eigen::Index begin, Eigen::Index count) {
  if (begin < 0 || count < 0 || begin + count > x.cols())
    throw Error("slice_cols: range out of bounds", ErrorCode::kInvalidInput);
  Tape<Scalar>& t = *x.tape;
  const int ix = x.id;
  return t.push(x.value().middleCols(begin, count), detail::any_grad({x}),
                [ix, begin, count](Tape<Scalar>& t, int self) {
                  t.grad(ix).middleCols(begin, count) += t.node(self).grad;
                });
}

template <typename Scalar>
Var<Scalar> concat_cols(const std::vector<Var<Scalar>>& parts) {
  if (parts.empty()) throw Error("concat_cols: no inputs", ErrorCode::kInvalidInput);
  Tape<Scalar>& t = *parts.front().tape;
  const Eigen::Index n = parts.front().rows();
  Eigen::Index total = 0;
  bool rg = false;
  std::vector<int> ids;
  std::vector<Eigen::Index> widths;
  for (const auto& p : parts) {
    if (p.rows() != n) throw Error("concat_cols: row count mismatch", ErrorCode::kInvalidInput);
    total += p.cols();
    rg = rg || t.requires_grad(p.id);
    ids.push_back(p.id);
    widths.push_back(p.cols());
  }
  Matrix<Scalar> out(n, total);
  Eigen::Index off = 0;
  for (const auto& p : parts) {
    out.middleCols(off, p.cols()) = p.value();
    off += p.cols();
  }
  return t.push(std::move(out), rg, [ids, widths](Tape<Scalar>& t, int self) {
    const auto& g = t.node(self).grad;
    Eigen::Index off = 0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (t.requires_grad(ids[i])) t.grad(ids[i]) += g.middleCols(off, widths[i]);
      off += widths[i];
    }
  });
}

template <typename Scalar>
Var<Scalar> concat_rows(const std::vector<Var<Scalar>>& parts) {
  if (parts.empty()) throw Error("concat_rows: no inputs", ErrorCode::kInvalidInput);
  Tape<Scalar>& t = *parts.front().tape;
  const Eigen::Index c = parts.front().cols();
  Eigen::Index total = 0;
  bool rg = false;
  std::vector<int> ids;
  std::vector<Eigen::Index> heights;
  for (const auto& p : parts) {
    if (p.cols() != c) throw Error("concat_rows: column count mismatch", ErrorCode::kInvalidInput);
    total += p.rows();
    rg = rg || t.requires_grad(p.id);
    ids.push_back(p.id);
    heights.push_back(p.rows());
  }
  Matrix<Scalar> out(total, c);
  Eigen::Index off = 0;
  for (const auto& p : parts) {
    out.middleRows(off, p.rows()) = p.value();
    off += p.rows();
  }
  return t.push(std::move(out), rg, [ids, heights](Tape<Scalar>& t, int self) {
    const auto& g = t.node(self).grad;
    Eigen::Index off = 0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (t.requires_grad(ids[i])) t.grad(ids[i]) += g.middleRows(off, heights[i]);
      off += heights[i];
    }
  });
}

/// Column means: NxC -> 1xC.
template <typename Scalar>
Var<Scalar> mean_rows(Var<Scalar> x) {
  Tape<Scalar>& t = *x.tape;
  const int ix = x.id;
  const Scalar inv = Scalar(1) / static_cast<Scalar>(x.rows());
  return t.push(x.value().colwise().mean(), detail::any_grad({x}), [ix, inv](Tape<Scalar>& t, int self) {
    t.grad(ix).rowwise() += t.node(self).grad.row(0) * inv;
  });
}

/// Repeats a 1xC row n times.
template <typename Scalar>
Var<Scalar> broadcast_rows(Var<Scalar> row, Eigen::Index n) {
  if (row.rows() != 1) throw Error("broadcast_rows: expected a single row", ErrorCode::kInvalidInput);
  Tape<Scalar>& t = *row.tape;
  const int ir = row.id;
  return t.push(row.value().replicate(n, 1), detail::any_grad({row}), [ir](Tape<Scalar>& t, int self) {
    t.grad(ir) += t.node(self).grad.colwise().sum();
  });
}

/// Selects rows by index; repeated indices accumulate gradient.
template <typename Scalar>
Var<Scalar> gather_rows(Var<Scalar> x, std::vector<Eigen::Index> index) {
  Tape<Scalar>& t = *x.tape;
  Matrix<Scalar> out(static_cast<Eigen::Index>(index.size()), x.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0 || index[i] >= x.rows()) throw Error("gather_rows: index out of range", ErrorCode::kInvalidInput);
    out.row(static_cast<Eigen::Index>(i)) = x.value().row(index[i]);
  }
  const int ix = x.id;
  return t.push(std::move(out), detail::any_grad({x}), [ix, index = std::move(index)](Tape<Scalar>& t, int self) {
    const auto& g = t.node(self).grad;
    auto& dx = t.grad(ix);
    for (std::size_t i = 0; i < index.size(); ++i) dx.row(index[i]) += g.row(static_cast<Eigen::Index>(i));
  });
}

/// Scales each row to unit L2 norm; zero rows stay zero.
template <typename Scalar>
Var<Scalar> l2_normalize_rows(Var<Scalar> x) {
  Tape<Scalar>& t = *x.tape;
  Vector<Scalar> inv_norm(x.rows());
  Matrix<Scalar> out = x.value();
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const Scalar norm = out.row(i).norm();
    inv_norm(i) = norm > Scalar(0) ? Scalar(1) / norm : Scalar(0);
    out.row(i) *= inv_norm(i);
  }
  const int ix = x.id;
  return t.push(std::move(out), detail::any_grad({x}), [ix, inv_norm = std::move(inv_norm)](Tape<Scalar>& t, int self) {
    const auto& g = t.node(self).grad;
    const auto& y = t.node(self).value;
    auto& dx = t.grad(ix);
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      if (inv_norm(i) == Scalar(0)) continue;
      const Scalar proj = g.row(i).dot(y.row(i));
      dx.row(i) += inv_norm(i) * (g.row(i) - proj * y.row(i));
    }
  });
}

/// Per-row dot products: NxC, NxC -> Nx1.
template <typename Scalar>
Var<Scalar> row_dot(Var<Scalar> a, Var<Scalar> b) {
  detail::check_same_shape(a, b, "row_dot");
  Tape<Scalar>& t = *a.tape;
  const int ia = a.id, ib = b.id;
  Matrix<Scalar> out = a.value().cwiseProduct(b.value()).rowwise().sum();
  return t.push(std::move(out), detail::any_grad({a, b}), [ia, ib](Tape<Scalar>& t, int self) {
    const auto& g = t.node(self).grad;
    if (t.requires_grad(ia)) t.grad(ia) += (t.node(ib).value.array().colwise() * g.col(0).array()).matrix();
    if (t.requires_grad(ib)) t.grad(ib) += (t.node(ia).value.array().colwise() * g.col(0).array()).matrix();
  });
}

/// Mean of all entries -> 1x1.
template <typename Scalar>
Var<Scalar> mean_all(Var<Scalar> x) {
  Tape<Scalar>& t = *x.tape;
  const int ix = x.id;
  const Scalar inv = Scalar(1) / static_cast<Scalar>(x.value().size());
  Matrix<Scalar> out(1, 1);
  out(0, 0) = x.value().mean();
  return t.push(std::move(out), detail::any_grad({x}), [ix, inv](Tape<Scalar>& t, int self) {
    t.grad(ix).array() += t.node(self).grad(0, 0) * inv;
  });
}

/// Sum of all entries -> 1x1.
template <typename Scalar>
Var<Scalar> sum_all(Var<Scalar> x) {
  Tape<Scalar>& t = *x.tape;
  const int ix = x.id;
  Matrix<Scalar> out(1, 1);
  out(0, 0) = x.value().sum();
  return t.push(std::move(out), detail::any_grad({x}), [ix](Tape<Scalar>& t, int self) {
    t.grad(ix).array() += t.node(self).grad(0, 0);
  });
}

/// Mean squared difference of two equally shaped nodes -> 1x1.
template <typename Scalar>
Var<Scalar> mse(Var<Scalar> a, Var<Scalar> b) {
  detail::check_same_shape(a, b, "mse");
  Tape<Scalar>& t = *a.tape;
  const int ia = a.id, ib = b.id;
  Matrix<Scalar> diff = a.value() - b.value();
  Matrix<Scalar> out(1, 1);
  out(0, 0) = diff.size() ? diff.squaredNorm() / static_cast<Scalar>(diff.size()) : Scalar(0);
  return t.push(std::move(out), detail::any_grad({a, b}), [ia, ib, diff = std::move(diff)](Tape<Scalar>& t, int self) {
    if (diff.size() == 0) return;
    const Scalar k = Scalar(2) * t.node(self).grad(0, 0) / static_cast<Scalar>(diff.size());
    if (t.requires_grad(ia)) t.grad(ia) += k * diff;
    if (t.requires_grad(ib)) t.grad(ib) -= k * diff;
  });
}

/// Sum of several 1x1 nodes with constant weights.
template <typename Scalar>
Var<Scalar> weighted_sum(const std::vector<Var<Scalar>>& terms, const std::vector<Scalar>& weights) {
  if (terms.empty() || terms.size() != weights.size())
    throw Error("weighted_sum: terms/weights mismatch", ErrorCode::kInvalidInput);
  Tape<Scalar>& t = *terms.front().tape;
  Matrix<Scalar> out = Matrix<Scalar>::Zero(1, 1);
  bool rg = false;
  std::vector<int> ids;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (terms[i].value().size() != 1) throw Error("weighted_sum: terms must be scalars", ErrorCode::kInvalidInput);
    out(0, 0) += weights[i] * terms[i].scalar();
    rg = rg || t.requires_grad(terms[i].id);
    ids.push_back(terms[i].id);
  }
  return t.push(std::move(out), rg, [ids, weights](Tape<Scalar>& t, int self) {
    const Scalar g = t.node(self).grad(0, 0);
    for (std::size_t i = 0; i < ids.size(); ++i)
      if (t.requires_grad(ids[i])) t.grad(ids[i])(0, 0) += weights[i] * g;
  });
}

/// Softmax cross-entropy of NxK logits against integer labels, averaged.
template <typename Scalar>
Var<Scalar> cross_entropy(Var<Scalar> logits, const std::vector<int>& labels) {
  if (static_cast<Eigen::Index>(labels.size()) != logits.rows())
    throw Error("cross_entropy: label count mismatch", ErrorCode::kInvalidInput);
  for (int y : labels)
    if (y < 0 || y >= logits.cols()) throw Error("cross_entropy: label out of range", ErrorCode::kInvalidInput);
  Var<Scalar> logp = log_softmax_rows(logits);
  Tape<Scalar>& t = *logits.tape;
  Matrix<Scalar> out(1, 1);
  Scalar total = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) total -= logp.value()(static_cast<Eigen::Index>(i), labels[i]);
  out(0, 0) = total / static_cast<Scalar>(labels.size());
  const int il = logp.id;
  return t.push(std::move(out), detail::any_grad({logp}), [il, labels](Tape<Scalar>& t, int self) {
    const Scalar g = t.node(self).grad(0, 0) / static_cast<Scalar>(labels.size());
    auto& d = t.grad(il);
    for (std::size_t i = 0; i < labels.size(); ++i) d(static_cast<Eigen::Index>(i), labels[i]) -= g;
  });
}

}  // namespace acevc::nn
