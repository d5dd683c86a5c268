#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>

#include "cdm/estimators.hpp"
#include "cdm/loss.hpp"
#include "cdm/metrics.hpp"
#include "cdm/random.hpp"

using namespace cdm;

TEST_CASE("item losses") {
  CHECK(item_loss(1, 0.0, LossKind::L1) == 1.0);
  CHECK(item_loss(1, 0.3, LossKind::L2) == doctest::Approx(0.49));
  CHECK(item_loss(1, 0.5, LossKind::CrossEntropy) == doctest::Approx(std::log(2.0)));
  CHECK(item_loss(0, 0.25, LossKind::L1) == 0.25);
}

TEST_CASE("matching boundary centroids cost nothing") {
  for (auto kind : {LossKind::L1, LossKind::L2, LossKind::CrossEntropy}) {
    CHECK(item_loss(0, 0.0, kind) < 1e-6);
    CHECK(item_loss(1, 1.0, kind) < 1e-6);
  }
  // The clamp keeps the mismatched case finite.
  CHECK(item_loss(1, 0.0, LossKind::CrossEntropy) == doctest::Approx(-std::log(1e-10)));
}

TEST_CASE("penalties") {
  CHECK(penalty_value(0.25, ProportionPenalty::none()) == 0.0);
  CHECK(penalty_value(0.25, ProportionPenalty::neg_log()) == doctest::Approx(std::log(4.0)));
  CHECK(penalty_value(0.25, ProportionPenalty::scaled_neg_log(0.5)) ==
        doctest::Approx(0.5 * std::log(4.0)));
  CHECK(penalty_value(0.0, ProportionPenalty::neg_log()) == kExcludedClassPenalty);
  CHECK_THROWS(ProportionPenalty::scaled_neg_log(-1.0));
}

TEST_CASE("pattern loss") {
  const std::vector<std::uint8_t> x{1, 0};
  const std::vector<double> mu{0.9, 0.1};
  const double ce = pattern_loss(x, mu, 0.25, LossKind::CrossEntropy,
                                 ProportionPenalty::neg_log());
  CHECK(ce == doctest::Approx(-2.0 * std::log(0.9) - std::log(0.25)));
  CHECK(ce == doctest::Approx(1.5970).epsilon(1e-4));
  // Cross entropy plus the log penalty is -log(pi * likelihood).
  CHECK(ce == doctest::Approx(-std::log(0.25 * 0.9 * 0.9)));
  CHECK(pattern_loss(x, mu, 0.25, LossKind::L2, ProportionPenalty::none()) ==
        doctest::Approx(0.02));
  CHECK_THROWS_AS(pattern_loss(x, std::vector<double>{0.5}, 0.5, LossKind::L1,
                               ProportionPenalty::none()),
                  DimensionError);
}

TEST_CASE("proportion vectors") {
  CHECK(ProportionVector::uniform(2).values() == std::vector<double>(4, 0.25));
  const std::vector<std::size_t> counts{1, 0, 3, 0};
  CHECK(ProportionVector::from_counts(counts).values() ==
        std::vector<double>{0.25, 0.0, 0.75, 0.0});
  CHECK_THROWS(ProportionVector({0.5, 0.6}));
  CHECK_THROWS(ProportionVector({-0.5, 1.5}));
}

TEST_CASE("total loss matches the class-partition summation") {
  Rng rng(21);
  for (int t = 0; t < 50; ++t) {
    const int k = 1 + static_cast<int>(rng.uniform_int(3));
    const std::size_t j = 1 + rng.uniform_int(6);
    const std::size_t n = 1 + rng.uniform_int(30);
    BinaryMatrix m(n, j);
    std::vector<PatternIndex> a(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = static_cast<PatternIndex>(rng.uniform_int(num_patterns(k)));
      for (std::size_t c = 0; c < j; ++c) m(i, c) = rng.bernoulli(0.5);
    }
    const ResponseMatrix x(m);
    const PatternAssignment assignment(a, k);
    std::vector<double> values(num_patterns(k) * j);
    for (auto& v : values) v = rng.uniform();
    const CentroidValues mu(k, j, values);
    const auto pi = sample_proportions(assignment);
    for (auto kind : {LossKind::L1, LossKind::L2, LossKind::CrossEntropy}) {
      const auto pen = ProportionPenalty::neg_log();
      double partitioned = 0.0;
      for (PatternIndex c = 0; c < num_patterns(k); ++c) {
        for (std::size_t i = 0; i < n; ++i) {
          if (a[i] != c) continue;
          for (std::size_t q = 0; q < j; ++q) partitioned += item_loss(x(i, q), mu(c, q), kind);
          partitioned += -std::log(pi[c]);
        }
      }
      CHECK(total_loss(x, assignment, mu, pi, kind, pen) ==
            doctest::Approx(partitioned).epsilon(1e-12));
    }
    const PatternAssignment wrong_size(std::vector<PatternIndex>(n + 1, 0), k);
    CHECK_THROWS_AS(total_loss(x, wrong_size, mu, pi, LossKind::L1,
                               ProportionPenalty::none()),
                    DimensionError);
  }
}

namespace {

// Minimum of sum_i l(x_i, mu) over the grid mu = 0, 1e-4, ..., 1.
double grid_minimizer(const std::vector<int>& xs, LossKind kind) {
  double best = 0.0;
  double best_loss = std::numeric_limits<double>::infinity();
  for (int g = 0; g <= 10000; ++g) {
    const double mu = g * 1e-4;
    double s = 0.0;
    for (int x : xs) s += item_loss(x, mu, kind);
    if (s < best_loss - 1e-12) {
      best_loss = s;
      best = mu;
    }
  }
  return best;
}

}  // namespace

TEST_CASE("pooled mean minimizes L2 and cross entropy, pooled median minimizes L1") {
  Rng rng(5);
  int mean_differs_from_median = 0;
  for (int t = 0; t < 40; ++t) {
    const std::size_t n = 3 + rng.uniform_int(15);
    std::vector<int> xs(n);
    int ones = 0;
    for (auto& x : xs) {
      x = rng.bernoulli(0.4) ? 1 : 0;
      ones += x;
    }
    if (ones == 0 || ones == static_cast<int>(n)) continue;
    // Single free group holding every subject.
    BinaryMatrix m(n, 1);
    for (std::size_t i = 0; i < n; ++i) m(i, 0) = static_cast<std::uint8_t>(xs[i]);
    const ResponseMatrix x(m);
    const PatternAssignment all_zero(std::vector<PatternIndex>(n, 0), 1);
    const QMatrix q{{1}};
    const auto constraints = model_constraints(q, ModelKind::Dina);
    const CentroidValues start(1, 1, 0.5);
    const double mean = static_cast<double>(ones) / static_cast<double>(n);

    for (auto kind : {LossKind::L2, LossKind::CrossEntropy}) {
      const double updated = update_centroids(x, all_zero, constraints, kind, start)(0, 0);
      CHECK(updated == doctest::Approx(mean));
      CHECK(std::abs(grid_minimizer(xs, kind) - mean) <= 1e-4);
    }
    if (2 * ones != static_cast<int>(n)) {
      const double median = 2 * ones > static_cast<int>(n) ? 1.0 : 0.0;
      const double updated = update_centroids(x, all_zero, constraints, LossKind::L1, start)(0, 0);
      CHECK(updated == median);
      CHECK(std::abs(grid_minimizer(xs, LossKind::L1) - median) <= 1e-4);
      if (std::abs(median - mean) > 1e-4) ++mean_differs_from_median;
    }
  }
  CHECK(mean_differs_from_median > 0);
}

TEST_CASE("expected item losses") {
  CHECK(expected_item_loss(0.2, 0.3, LossKind::L2) == doctest::Approx(0.17));
  CHECK(expected_item_loss(0.2, 0.0, LossKind::L2) == doctest::Approx(0.2));
  CHECK(expected_item_loss(0.2, 0.3, LossKind::L2) -
            expected_item_loss(0.2, 0.0, LossKind::L2) ==
        doctest::Approx(-0.03).epsilon(1e-12));
  for (double t : {0.0, 0.1, 0.5, 0.8}) {
    CHECK(expected_item_loss(t, t, LossKind::L2) == doctest::Approx(t * (1 - t)));
  }
}

TEST_CASE("cross-entropy gap is a KL divergence and dominates twice the squared gap") {
  Rng rng(17);
  for (int i = 0; i < 10000; ++i) {
    const double p = 0.05 + 0.9 * rng.uniform();
    const double q = 0.05 + 0.9 * rng.uniform();
    const double gap = expected_item_loss(p, q, LossKind::CrossEntropy) -
                       expected_item_loss(p, p, LossKind::CrossEntropy);
    const double kl = p * std::log(p / q) + (1 - p) * std::log((1 - p) / (1 - q));
    REQUIRE(std::abs(gap - kl) < 1e-12);
    REQUIRE(gap >= 2.0 * (p - q) * (p - q));
  }
}
