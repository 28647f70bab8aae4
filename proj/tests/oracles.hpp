#pragma once

// Independent reference implementations used by the unit tests and the
// acceptance run. They favor directness over speed.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "acevc/losses.hpp"
#include "acevc/random.hpp"

namespace acevc::oracle {

inline Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng, double scale = 1.0) {
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-scale, scale);
  return m;
}

inline Eigen::MatrixXd log_softmax(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd out = logits;
  for (Eigen::Index t = 0; t < logits.rows(); ++t) {
    const double hi = logits.row(t).maxCoeff();
    const double lse = hi + std::log((logits.row(t).array() - hi).exp().sum());
    out.row(t).array() -= lse;
  }
  return out;
}

inline std::vector<int> collapse(const std::vector<int>& path) {
  std::vector<int> out;
  int prev = -1;
  for (int k : path) {
    if (k != prev && k != losses::kBlank) out.push_back(k);
    prev = k;
  }
  return out;
}

/// Sums the probability of every length-T path over all classes whose
/// collapse equals the target.
inline double brute_force_ctc(const Eigen::MatrixXd& log_probs, const std::vector<int>& target) {
  const auto frames = static_cast<int>(log_probs.rows());
  const auto classes = static_cast<int>(log_probs.cols());
  std::vector<int> path(static_cast<std::size_t>(frames), 0);
  double total = 0.0;
  while (true) {
    if (collapse(path) == target) {
      double lp = 0.0;
      for (int t = 0; t < frames; ++t) lp += log_probs(t, path[static_cast<std::size_t>(t)]);
      total += std::exp(lp);
    }
    int t = 0;
    while (t < frames && ++path[static_cast<std::size_t>(t)] == classes) path[static_cast<std::size_t>(t++)] = 0;
    if (t == frames) break;
  }
  return -std::log(total);
}

/// Direct sweep: for every candidate threshold count accepts and rejects
/// from scratch, then apply the sign-change interpolation rule.
inline double brute_force_eer(const std::vector<double>& pos, const std::vector<double>& neg) {
  std::vector<double> thresholds{-std::numeric_limits<double>::infinity()};
  for (double s : pos) thresholds.push_back(s);
  for (double s : neg) thresholds.push_back(s);
  thresholds.push_back(std::numeric_limits<double>::infinity());
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  std::vector<double> far, frr;
  for (double t : thresholds) {
    int fa = 0, fr = 0;
    for (double s : neg) fa += s >= t;
    for (double s : pos) fr += s < t;
    far.push_back(static_cast<double>(fa) / static_cast<double>(neg.size()));
    frr.push_back(static_cast<double>(fr) / static_cast<double>(pos.size()));
  }
  for (std::size_t i = 0; i + 1 < thresholds.size(); ++i) {
    const double d0 = far[i] - frr[i], d1 = far[i + 1] - frr[i + 1];
    if (d0 == 0.0) return far[i];
    if (d1 <= 0.0) return far[i] + d0 / (d0 - d1) * (far[i + 1] - far[i]);
  }
  return far.back();
}

}  // namespace acevc::oracle
