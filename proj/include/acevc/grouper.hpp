#pragma once

#include <Eigen/Core>

#include <vector>

namespace acevc {

/// Runs of equal predicted token collapsed into one vector each.
struct GroupedContent {
  Eigen::MatrixXd vectors;      // M x D_c, temporal mean of each run
  std::vector<int> durations;   // run lengths in content steps
  std::vector<int> tokens;      // predicted token of each run (blank kept)
  Eigen::VectorXd pitch;        // mean normalized pitch per run (empty until segmented)

  Eigen::Index size() const { return static_cast<Eigen::Index>(durations.size()); }
  int total_duration() const;
};

/// Groups consecutive rows of `content` whose `tokens` entry is equal.
GroupedContent group_content(const Eigen::MatrixXd& content, const std::vector<int>& tokens);

/// Repeats each token by its duration.
std::vector<int> expand_tokens(const std::vector<int>& tokens, const std::vector<int>& durations);

/// Mean of the per-mel-frame normalized pitch over each group's span of
/// `subsample` frames per content step; unvoiced zeros count toward the
/// mean. Frames past the end of `frame_pitch` are ignored.
Eigen::VectorXd segment_pitch(const Eigen::VectorXd& frame_pitch, const std::vector<int>& durations, int subsample);

}  // namespace acevc
