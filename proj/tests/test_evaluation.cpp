#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "acevc/error.hpp"
#include "acevc/evaluation.hpp"
#include "acevc/random.hpp"
#include "oracles.hpp"

using namespace acevc;
using namespace acevc::eval;

using oracle::brute_force_eer;

TEST_CASE("char_error_rate examples") {
  CHECK(char_error_rate("abc", "abc") == 0.0);
  CHECK(char_error_rate("abc", "axc") == doctest::Approx(1.0 / 3.0));
  CHECK(char_error_rate("abc", "") == 1.0);
  CHECK(edit_distance("kitten", "sitting") == 3);
  CHECK_THROWS_AS(char_error_rate("", "a"), Error);
}

TEST_CASE("char_error_rate triangle bound (property)") {
  Rng rng(3);
  auto random_string = [&](int max_len) {
    std::string s(static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(max_len)) + 1), 'a');
    for (char& c : s) c = static_cast<char>('a' + rng.below(4));
    return s;
  };
  for (int trial = 0; trial < 300; ++trial) {
    const std::string a = random_string(12), b = random_string(12), c = random_string(12);
    CHECK(char_error_rate(a, c) <=
          static_cast<double>(edit_distance(a, b) + edit_distance(b, c)) / static_cast<double>(a.size()) + 1e-12);
  }
}

TEST_CASE("equal_error_rate examples") {
  CHECK(equal_error_rate({0.9, 0.8}, {0.2, 0.1}) == 0.0);
  CHECK(equal_error_rate({0.9, 0.1}, {0.8, 0.2}) == doctest::Approx(0.5));
  CHECK(equal_error_rate({0.3, 0.5, 0.7}, {0.7, 0.3, 0.5}) == doctest::Approx(0.5));
  CHECK(equal_error_rate({0.1}, {0.9}) == doctest::Approx(1.0));
  CHECK_THROWS_AS(equal_error_rate({0.5}, {}), Error);
  CHECK_THROWS_AS(equal_error_rate({}, {0.5}), Error);
}

TEST_CASE("equal_error_rate from embedding trials") {
  Eigen::VectorXd x(2), y(2), z(2);
  x << 1, 0;
  y << 0.9, 0.1;
  z << 0, 1;
  std::vector<Trial> trials{{x, y, true}, {x, x, true}, {x, z, false}, {y, z, false}};
  CHECK(equal_error_rate(trials) == 0.0);
}

TEST_CASE("equal_error_rate matches brute-force sweep and is monotone invariant (property)") {
  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const int np = 1 + static_cast<int>(rng.below(50)), nn = 1 + static_cast<int>(rng.below(50));
    std::vector<double> pos, neg;
    // Coarse grid produces ties between and within the two sets.
    for (int i = 0; i < np; ++i) pos.push_back(std::round(rng.uniform(-0.2, 1.0) * 20) / 20);
    for (int i = 0; i < nn; ++i) neg.push_back(std::round(rng.uniform(-1.0, 0.5) * 20) / 20);
    const double eer = equal_error_rate(pos, neg);
    CHECK(eer == brute_force_eer(pos, neg));
    std::vector<double> tp, tn;
    for (double s : pos) tp.push_back(std::exp(3.0 * s) - 7.0);
    for (double s : neg) tn.push_back(std::exp(3.0 * s) - 7.0);
    CHECK(equal_error_rate(tp, tn) == eer);
  }
}

TEST_CASE("probe: separable features give perfect accuracy") {
  Rng rng(4);
  Eigen::MatrixXd train(60, 4), test(20, 4);
  std::vector<int> ytr, yte;
  for (int i = 0; i < 80; ++i) {
    const int c = i % 4;
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(4);
    row(c) = 5.0;
    for (int j = 0; j < 4; ++j) row(j) += rng.uniform(-0.3, 0.3);
    if (i < 60) {
      train.row(i) = row;
      ytr.push_back(c);
    } else {
      test.row(i - 60) = row;
      yte.push_back(c);
    }
  }
  ProbeOptions opt;
  opt.steps = 200;
  CHECK(probe_accuracy(train, ytr, test, yte, opt) == 1.0);
}

TEST_CASE("probe: shuffled labels give chance-level accuracy") {
  Rng rng(5);
  const int classes = 4, n_train = 200, n_test = 400;
  Eigen::MatrixXd train(n_train, 6), test(n_test, 6);
  for (Eigen::Index i = 0; i < train.size(); ++i) train.data()[i] = rng.normal();
  for (Eigen::Index i = 0; i < test.size(); ++i) test.data()[i] = rng.normal();
  std::vector<int> ytr(n_train), yte(n_test);
  for (int& y : ytr) y = static_cast<int>(rng.below(classes));
  for (int& y : yte) y = static_cast<int>(rng.below(classes));
  ProbeOptions opt;
  opt.steps = 200;
  const double acc = probe_accuracy(train, ytr, test, yte, opt);
  // 1/4 +- 4 binomial standard deviations for 400 trials.
  CHECK(acc > 0.25 - 4 * std::sqrt(0.25 * 0.75 / n_test));
  CHECK(acc < 0.25 + 4 * std::sqrt(0.25 * 0.75 / n_test));
}

TEST_CASE("probe rejects single-class input") {
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(4, 2);
  CHECK_THROWS_AS(probe_accuracy(x, {1, 1, 1, 1}, x, {1, 1, 1, 1}, {}), Error);
}
