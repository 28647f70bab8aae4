#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "acevc/nn/graph.hpp"
#include "acevc/nn/ops.hpp"
#include "acevc/random.hpp"

namespace acevc::nn {

constexpr double kInitStd = 0.02;

template <typename Scalar>
Matrix<Scalar> truncated_normal(Eigen::Index rows, Eigen::Index cols, double std, Rng& rng) {
  Matrix<Scalar> m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = static_cast<Scalar>(rng.truncated_normal(std));
  return m;
}

/// y = x W + b, with W stored in x out.
template <typename Scalar>
struct Linear {
  int weight = -1;
  int bias = -1;

  static Linear create(ParameterSet<Scalar>& ps, const std::string& name, const std::string& group, int in,
                       int out, Rng& rng, bool with_bias = true) {
    Linear l;
    l.weight = ps.add(name + ".weight", group, truncated_normal<Scalar>(in, out, kInitStd, rng));
    if (with_bias) l.bias = ps.add(name + ".bias", group, Matrix<Scalar>::Zero(1, out));
    return l;
  }

  Var<Scalar> operator()(Graph<Scalar>& g, Var<Scalar> x) const {
    Var<Scalar> y = matmul(x, g.param(weight));
    return bias >= 0 ? add_row(y, g.param(bias)) : y;
  }
};

/// 1-D convolution over the time (row) axis via unfold + matmul.
template <typename Scalar>
struct Conv1d {
  int weight = -1;
  int bias = -1;
  int kernel = 1;
  int stride = 1;
  int pad = 0;

  static Conv1d create(ParameterSet<Scalar>& ps, const std::string& name, const std::string& group, int in,
                       int out, int kernel, int stride, int pad, Rng& rng) {
    Conv1d c;
    c.kernel = kernel;
    c.stride = stride;
    c.pad = pad;
    c.weight = ps.add(name + ".weight", group, truncated_normal<Scalar>(kernel * in, out, kInitStd, rng));
    c.bias = ps.add(name + ".bias", group, Matrix<Scalar>::Zero(1, out));
    return c;
  }

  /// Length-preserving convolution for odd kernels.
  static Conv1d same(ParameterSet<Scalar>& ps, const std::string& name, const std::string& group, int in, int out,
                     int kernel, Rng& rng) {
    return create(ps, name, group, in, out, kernel, 1, kernel / 2, rng);
  }

  Var<Scalar> operator()(Graph<Scalar>& g, Var<Scalar> x) const {
    Var<Scalar> cols = kernel == 1 && stride == 1 && pad == 0 ? x : unfold(x, kernel, stride, pad);
    return add_row(matmul(cols, g.param(weight)), g.param(bias));
  }
};

template <typename Scalar>
struct LayerNorm {
  int gain = -1;
  int bias = -1;

  static LayerNorm create(ParameterSet<Scalar>& ps, const std::string& name, const std::string& group, int dim) {
    LayerNorm ln;
    ln.gain = ps.add(name + ".gain", group, Matrix<Scalar>::Ones(1, dim));
    ln.bias = ps.add(name + ".bias", group, Matrix<Scalar>::Zero(1, dim));
    return ln;
  }

  Var<Scalar> operator()(Graph<Scalar>& g, Var<Scalar> x) const {
    return layer_norm(x, g.param(gain), g.param(bias));
  }
};

/// Unmasked multi-head scaled dot-product self-attention over one sequence.
template <typename Scalar>
struct MultiHeadAttention {
  Linear<Scalar> query, key, value, output;
  int heads = 1;

  static MultiHeadAttention create(ParameterSet<Scalar>& ps, const std::string& name, const std::string& group,
                                   int dim, int heads, Rng& rng) {
    if (heads < 1 || dim % heads != 0) throw Error("attention width must divide evenly into heads");
    MultiHeadAttention a;
    a.heads = heads;
    a.query = Linear<Scalar>::create(ps, name + ".query", group, dim, dim, rng);
    a.key = Linear<Scalar>::create(ps, name + ".key", group, dim, dim, rng);
    a.value = Linear<Scalar>::create(ps, name + ".value", group, dim, dim, rng);
    a.output = Linear<Scalar>::create(ps, name + ".output", group, dim, dim, rng);
    return a;
  }

  Var<Scalar> operator()(Graph<Scalar>& g, Var<Scalar> x) const {
    const Eigen::Index dim = x.cols();
    const Eigen::Index head_dim = dim / heads;
    const Scalar inv_sqrt = Scalar(1) / std::sqrt(static_cast<Scalar>(head_dim));
    Var<Scalar> q = query(g, x), k = key(g, x), v = value(g, x);
    std::vector<Var<Scalar>> outs;
    outs.reserve(static_cast<std::size_t>(heads));
    for (int h = 0; h < heads; ++h) {
      Var<Scalar> qh = slice_cols(q, h * head_dim, head_dim);
      Var<Scalar> kh = slice_cols(k, h * head_dim, head_dim);
      Var<Scalar> vh = slice_cols(v, h * head_dim, head_dim);
      Var<Scalar> weights = softmax_rows(scale(matmul_nt(qh, kh), inv_sqrt));
      outs.push_back(matmul(weights, vh));
    }
    return output(g, heads == 1 ? outs.front() : concat_cols(outs));
  }
};

/// Fixed sinusoidal position table, n x dim.
template <typename Scalar>
Matrix<Scalar> sinusoidal_positions(Eigen::Index n, Eigen::Index dim) {
  Matrix<Scalar> pe(n, dim);
  for (Eigen::Index pos = 0; pos < n; ++pos)
    for (Eigen::Index i = 0; i < dim; ++i) {
      const double rate = std::pow(10000.0, -2.0 * static_cast<double>(i / 2) / static_cast<double>(dim));
      const double angle = static_cast<double>(pos) * rate;
      pe(pos, i) = static_cast<Scalar>(i % 2 == 0 ? std::sin(angle) : std::cos(angle));
    }
  return pe;
}

template <typename Scalar>
Var<Scalar> add_positions(Graph<Scalar>& g, Var<Scalar> x) {
  return add(x, g.constant(sinusoidal_positions<Scalar>(x.rows(), x.cols())));
}

/// Feed-forward transformer block (post-norm): self-attention and a
/// two-layer convolutional position-wise network, each residual.
template <typename Scalar>
struct FeedForwardTransformerBlock {
  MultiHeadAttention<Scalar> attention;
  LayerNorm<Scalar> attention_norm;
  Conv1d<Scalar> conv_in, conv_out;
  LayerNorm<Scalar> ff_norm;

  static FeedForwardTransformerBlock create(ParameterSet<Scalar>& ps, const std::string& name,
                                            const std::string& group, int dim, int heads, int ff_dim, int kernel,
                                            Rng& rng) {
    FeedForwardTransformerBlock b;
    b.attention = MultiHeadAttention<Scalar>::create(ps, name + ".attn", group, dim, heads, rng);
    b.attention_norm = LayerNorm<Scalar>::create(ps, name + ".attn_norm", group, dim);
    b.conv_in = Conv1d<Scalar>::same(ps, name + ".ff_in", group, dim, ff_dim, kernel, rng);
    b.conv_out = Conv1d<Scalar>::same(ps, name + ".ff_out", group, ff_dim, dim, kernel, rng);
    b.ff_norm = LayerNorm<Scalar>::create(ps, name + ".ff_norm", group, dim);
    return b;
  }

  Var<Scalar> operator()(Graph<Scalar>& g, Var<Scalar> x) const {
    x = attention_norm(g, add(x, attention(g, x)));
    return ff_norm(g, add(x, conv_out(g, relu(conv_in(g, x)))));
  }
};

/// Pre-norm conformer-style block: self-attention, a convolution module and
/// a feed-forward module, each residual, followed by a final layer norm.
template <typename Scalar>
struct ConformerBlock {
  LayerNorm<Scalar> attention_norm;
  MultiHeadAttention<Scalar> attention;
  LayerNorm<Scalar> conv_norm;
  Conv1d<Scalar> conv;
  Linear<Scalar> conv_proj;
  LayerNorm<Scalar> ff_norm;
  Linear<Scalar> ff_in, ff_out;
  LayerNorm<Scalar> out_norm;

  static ConformerBlock create(ParameterSet<Scalar>& ps, const std::string& name, const std::string& group,
                               int dim, int heads, int kernel, Rng& rng) {
    ConformerBlock b;
    b.attention_norm = LayerNorm<Scalar>::create(ps, name + ".attn_norm", group, dim);
    b.attention = MultiHeadAttention<Scalar>::create(ps, name + ".attn", group, dim, heads, rng);
    b.conv_norm = LayerNorm<Scalar>::create(ps, name + ".conv_norm", group, dim);
    b.conv = Conv1d<Scalar>::same(ps, name + ".conv", group, dim, dim, kernel, rng);
    b.conv_proj = Linear<Scalar>::create(ps, name + ".conv_proj", group, dim, dim, rng);
    b.ff_norm = LayerNorm<Scalar>::create(ps, name + ".ff_norm", group, dim);
    b.ff_in = Linear<Scalar>::create(ps, name + ".ff_in", group, dim, 2 * dim, rng);
    b.ff_out = Linear<Scalar>::create(ps, name + ".ff_out", group, 2 * dim, dim, rng);
    b.out_norm = LayerNorm<Scalar>::create(ps, name + ".out_norm", group, dim);
    return b;
  }

  Var<Scalar> operator()(Graph<Scalar>& g, Var<Scalar> x) const {
    x = add(x, attention(g, attention_norm(g, x)));
    x = add(x, conv_proj(g, silu(conv(g, conv_norm(g, x)))));
    x = add(x, ff_out(g, silu(ff_in(g, ff_norm(g, x)))));
    return out_norm(g, x);
  }
};

}  // namespace acevc::nn
