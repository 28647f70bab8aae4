#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "acevc/dsp/audio.hpp"
#include "acevc/sre.hpp"

namespace acevc::eval {

/// Unit-cost Levenshtein distance.
int edit_distance(std::string_view a, std::string_view b);

/// edit_distance / len(reference); throws for an empty reference.
double char_error_rate(std::string_view reference, std::string_view hypothesis);

struct Trial {
  Eigen::VectorXd a;
  Eigen::VectorXd b;
  bool same_speaker = false;
};

double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

/// Thresholds are every distinct score plus +/-inf; a trial is accepted
/// when score >= threshold. The EER is read where FAR - FRR changes sign,
/// interpolating linearly between the two adjacent thresholds.
double equal_error_rate(const std::vector<double>& positive, const std::vector<double>& negative);
double equal_error_rate(const std::vector<Trial>& trials);

struct ProbeOptions {
  int hidden = 256;
  long steps = 600;
  double lr = 1e-3;
  std::uint64_t seed = 1234;
};

/// Trains a three-layer MLP classifier on the frozen features as given and
/// returns held-out accuracy.
double probe_accuracy(const Eigen::MatrixXd& train_x, const std::vector<int>& train_y, const Eigen::MatrixXd& test_x,
                      const std::vector<int>& test_y, const ProbeOptions& options);

/// Greedy-decoded transcript of a waveform under the SRE's content head.
std::string transcribe(const SreModel& sre, const dsp::Waveform& w);

/// CER of the converted audio's transcript against the source's.
double transcribe_cer(const SreModel& sre, const dsp::Waveform& source, const dsp::Waveform& converted);

}  // namespace acevc::eval
