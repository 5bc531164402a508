#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "risa/error.hpp"
#include "risa/metrics.hpp"

using namespace risa;
using metrics::compute_auc;

namespace {

// O(n^2) pairwise probability that a positive outranks a negative, ties 0.5
double brute_force_auc(const Vector& scores, const std::vector<int>& labels) {
  double wins = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      ++pairs;
      if (scores[i] > scores[j])
        wins += 1.0;
      else if (scores[i] == scores[j])
        wins += 0.5;
    }
  }
  return wins / static_cast<double>(pairs);
}

}  // namespace

TEST_CASE("perfectly ordered scores give AUC 1, reversed give 0") {
  const Vector scores = {0.1, 0.2, 0.8, 0.9};
  CHECK(compute_auc(scores, {0, 0, 1, 1}) == 1.0);
  CHECK(compute_auc(scores, {1, 1, 0, 0}) == 0.0);
}

TEST_CASE("all-equal scores give AUC 0.5") {
  CHECK(compute_auc(Vector(10, 0.3), {0, 1, 0, 1, 0, 1, 0, 1, 0, 1}) == 0.5);
}

TEST_CASE("single-class labels are an undefined metric") {
  CHECK_THROWS_AS(compute_auc({0.1, 0.2}, {1, 1}), DataError);
  CHECK_THROWS_AS(compute_auc({0.1, 0.2}, {0, 0}), DataError);
}

TEST_CASE("auc matches the pairwise brute force on 100 random instances") {
  std::mt19937_64 rng(71);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t n = 5 + rng() % 196;  // up to 200 points
    Vector scores(n);
    std::vector<int> labels(n);
    // coarse score grid to force plenty of ties
    std::uniform_int_distribution<int> grid(0, 9);
    std::uniform_int_distribution<int> coin(0, 1);
    bool has_pos = false, has_neg = false;
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = grid(rng) / 10.0;
      labels[i] = coin(rng);
      has_pos |= labels[i] == 1;
      has_neg |= labels[i] == 0;
    }
    if (!has_pos) labels[0] = 1;
    if (!has_neg) labels[1] = 0;
    CHECK(std::abs(compute_auc(scores, labels) - brute_force_auc(scores, labels)) < 1e-12);
  }
}

TEST_CASE("accuracy is correct / total") {
  CHECK(metrics::accuracy({1, 0, 1, 1}, {1, 0, 0, 1}) == doctest::Approx(0.75));
  CHECK_THROWS_AS(metrics::accuracy({}, {}), DataError);
  CHECK_THROWS_AS(metrics::accuracy({1}, {1, 2}), ContractViolation);
}

TEST_CASE("median of odd and even length vectors") {
  CHECK(metrics::median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(metrics::median({4.0, 1.0, 2.0, 3.0}) == 2.5);
  CHECK_THROWS_AS(metrics::median({}), ContractViolation);
}
