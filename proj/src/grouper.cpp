#include "acevc/grouper.hpp"

#include <algorithm>
#include <numeric>

#include "acevc/error.hpp"

namespace acevc {

int GroupedContent::total_duration() const { return std::accumulate(durations.begin(), durations.end(), 0); }

GroupedContent group_content(const Eigen::MatrixXd& content, const std::vector<int>& tokens) {
  if (content.rows() != static_cast<Eigen::Index>(tokens.size()))
    throw Error("group_content: token count does not match content rows", ErrorCode::kInvalidInput);
  if (tokens.empty()) throw Error("group_content: empty content sequence", ErrorCode::kInvalidInput);
  GroupedContent g;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> runs;
  Eigen::Index start = 0;
  for (Eigen::Index t = 1; t <= content.rows(); ++t) {
    if (t == content.rows() || tokens[static_cast<std::size_t>(t)] != tokens[static_cast<std::size_t>(start)]) {
      runs.emplace_back(start, t - start);
      g.tokens.push_back(tokens[static_cast<std::size_t>(start)]);
      g.durations.push_back(static_cast<int>(t - start));
      start = t;
    }
  }
  g.vectors.resize(static_cast<Eigen::Index>(runs.size()), content.cols());
  for (std::size_t m = 0; m < runs.size(); ++m)
    g.vectors.row(static_cast<Eigen::Index>(m)) = content.middleRows(runs[m].first, runs[m].second).colwise().mean();
  return g;
}

std::vector<int> expand_tokens(const std::vector<int>& tokens, const std::vector<int>& durations) {
  if (tokens.size() != durations.size())
    throw Error("expand_tokens: token/duration count mismatch", ErrorCode::kInvalidInput);
  std::vector<int> out;
  for (std::size_t m = 0; m < tokens.size(); ++m) out.insert(out.end(), static_cast<std::size_t>(durations[m]), tokens[m]);
  return out;
}

Eigen::VectorXd segment_pitch(const Eigen::VectorXd& frame_pitch, const std::vector<int>& durations, int subsample) {
  if (durations.empty()) throw Error("segment_pitch: no groups", ErrorCode::kInvalidInput);
  if (subsample < 1) throw Error("segment_pitch: subsample must be positive", ErrorCode::kInvalidInput);
  Eigen::VectorXd out(static_cast<Eigen::Index>(durations.size()));
  Eigen::Index frame = 0;
  for (std::size_t m = 0; m < durations.size(); ++m) {
    if (durations[m] < 1) throw Error("segment_pitch: empty group", ErrorCode::kInvalidInput);
    const Eigen::Index begin = std::min(frame, frame_pitch.size());
    const Eigen::Index end = std::min(frame + static_cast<Eigen::Index>(durations[m]) * subsample, frame_pitch.size());
    out(static_cast<Eigen::Index>(m)) = end > begin ? frame_pitch.segment(begin, end - begin).mean() : 0.0;
    frame += static_cast<Eigen::Index>(durations[m]) * subsample;
  }
  if (frame_pitch.size() < frame - subsample)
    throw Error("segment_pitch: pitch contour shorter than the grouped span", ErrorCode::kInvalidInput);
  return out;
}

}  // namespace acevc
