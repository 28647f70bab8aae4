#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "acevc/nn/graph.hpp"
#include "acevc/random.hpp"

namespace acevc::nn {

struct GradCheckOptions {
  double step = 1e-6;
  /// Denominator floor for the relative error, so that near-zero gradients
  /// are compared in absolute terms.
  double floor = 1e-4;
  /// Entries probed per tensor; larger tensors are sampled.
  int max_entries_per_tensor = 24;
  std::uint64_t seed = 7;
};

struct GradCheckEntry {
  std::string name;
  double max_relative_error = 0.0;
  int probed = 0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_relative_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

/// Compares analytic gradients of `loss(graph)` against central finite
/// differences over the parameters of a double-precision ParameterSet.
template <typename LossFn>
GradCheckReport grad_check(ParameterSet<double>& params, LossFn&& loss, double tolerance,
                           const GradCheckOptions& options = {}) {
  params.zero_grad();
  {
    Graph<double> g(params);
    g.backward(loss(g));
  }
  std::vector<Matrix<double>> analytic;
  for (const auto& p : params) analytic.push_back(p.grad);

  auto evaluate = [&]() {
    const ParameterSet<double>& frozen = params;
    Graph<double> g(frozen);
    return loss(g).scalar();
  };

  GradCheckReport report;
  report.tolerance = tolerance;
  Rng rng(options.seed);
  for (int i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    GradCheckEntry entry{p.name, 0.0, 0};
    const Eigen::Index n = p.value.size();
    std::vector<Eigen::Index> probe(static_cast<std::size_t>(n));
    for (Eigen::Index k = 0; k < n; ++k) probe[static_cast<std::size_t>(k)] = k;
    if (n > options.max_entries_per_tensor) {
      rng.shuffle(probe.begin(), probe.end());
      probe.resize(static_cast<std::size_t>(options.max_entries_per_tensor));
    }
    for (Eigen::Index k : probe) {
      double& x = p.value.data()[k];
      const double saved = x;
      x = saved + options.step;
      const double up = evaluate();
      x = saved - options.step;
      const double down = evaluate();
      x = saved;
      const double numeric = (up - down) / (2.0 * options.step);
      const double a = analytic[static_cast<std::size_t>(i)].data()[k];
      const double denom = std::max({std::abs(a), std::abs(numeric), options.floor});
      double err = std::abs(a - numeric) / denom;
      if (!std::isfinite(err)) err = std::numeric_limits<double>::infinity();
      entry.max_relative_error = std::max(entry.max_relative_error, err);
      ++entry.probed;
    }
    report.max_relative_error = std::max(report.max_relative_error, entry.max_relative_error);
    report.entries.push_back(std::move(entry));
  }
  report.passed = report.max_relative_error <= tolerance;
  return report;
}

}  // namespace acevc::nn
