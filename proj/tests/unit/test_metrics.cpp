#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <bit>
#include <cmath>

#include "cdm/estimators.hpp"
#include "cdm/metrics.hpp"
#include "cdm/simulation.hpp"
#include "cdm/verify.hpp"

using namespace cdm;

TEST_CASE("agreement rates") {
  const PatternAssignment a({0, 5, 7}, 3);
  const auto same = agreement(a, a);
  CHECK(same.par == 1.0);
  CHECK(same.aar == 1.0);

  const auto r = agreement(PatternAssignment({0, 5}, 3), PatternAssignment({0, 4}, 3));
  CHECK(r.par == 0.5);
  CHECK(r.aar == doctest::Approx(5.0 / 6.0));
  CHECK(r.per_attribute == std::vector<double>{0.5, 1.0, 1.0});
  CHECK_THROWS_AS(agreement(PatternAssignment({0}, 3), a), DimensionError);
  CHECK_THROWS_AS(agreement(PatternAssignment({0, 0, 0}, 2), a), DimensionError);
}

TEST_CASE("agreement matches a per-bit recount and PAR never exceeds AAR") {
  Rng rng(1);
  for (int t = 0; t < 1000; ++t) {
    const int k = 1 + static_cast<int>(rng.uniform_int(6));
    const std::size_t n = 1 + rng.uniform_int(20);
    std::vector<PatternIndex> x(n);
    std::vector<PatternIndex> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = static_cast<PatternIndex>(rng.uniform_int(num_patterns(k)));
      y[i] = rng.bernoulli(0.5) ? x[i]
                                : static_cast<PatternIndex>(rng.uniform_int(num_patterns(k)));
    }
    const auto r = agreement(PatternAssignment(x, k), PatternAssignment(y, k));
    double exact = 0;
    double bits = 0;
    for (std::size_t i = 0; i < n; ++i) {
      exact += x[i] == y[i];
      for (int b = 0; b < k; ++b) bits += ((x[i] >> b) & 1u) == ((y[i] >> b) & 1u);
    }
    CHECK(r.par == doctest::Approx(exact / n));
    CHECK(r.aar == doctest::Approx(bits / (n * k)));
    CHECK(r.par <= r.aar);
  }
}

TEST_CASE("oracle agrees with the assignment step") {
  CHECK(checks::oracle_equivalence(2000, 5).passed);
}

TEST_CASE("oracle tie rule on a flat table") {
  const CentroidValues flat(3, 4, 0.5);
  const std::vector<std::uint8_t> x{1, 0, 1, 1};
  CHECK(oracle_classify(x, flat, ProportionVector::uniform(3), LossKind::L2,
                        ProportionPenalty::none()) == 0);
  CHECK(oracle_posterior_argmax(x, flat, ProportionVector::uniform(3)) == 0);
}

TEST_CASE("cross entropy and L2 can disagree") {
  // Recorded only: the two losses are different criteria.
  const CentroidValues mu(1, 3, {0.01, 0.5, 0.5, 0.3, 0.3, 0.3});
  const std::vector<std::uint8_t> x{1, 0, 0};
  const auto pi = ProportionVector::uniform(1);
  const auto l2 = oracle_classify(x, mu, pi, LossKind::L2, ProportionPenalty::none());
  const auto ce = oracle_classify(x, mu, pi, LossKind::CrossEntropy, ProportionPenalty::none());
  MESSAGE("L2 picks " << l2 << ", cross entropy picks " << ce);
}

TEST_CASE("complete-data log-likelihood") {
  const ResponseMatrix x{{1, 0}, {0, 0}};
  const PatternAssignment a({1, 0}, 1);
  const CentroidValues mu(1, 2, {0.0, 0.0, 0.9, 0.2});
  const ProportionVector pi({0.5, 0.5});
  CHECK(complete_data_log_likelihood(x, a, mu, pi) ==
        doctest::Approx(std::log(0.5 * 0.9 * 0.8) + std::log(0.5)));
  const PatternAssignment impossible({0, 0}, 1);
  CHECK(std::isinf(complete_data_log_likelihood(x, impossible, mu, pi)));
}

TEST_CASE("Bernoulli KL") {
  CHECK(bernoulli_kl(0.3, 0.3) == 0.0);
  CHECK(bernoulli_kl(0.0, 0.5) == doctest::Approx(std::log(2.0)));
  CHECK(bernoulli_kl(0.2, 0.4) == doctest::Approx(0.2 * std::log(0.5) + 0.8 * std::log(0.8 / 0.6)));
}

TEST_CASE("expected loss matrix: truth on the diagonal is minimal under CE") {
  Rng rng(2);
  const auto q = gen_qmatrix(3, 12, rng);
  const auto theta = theta_table(ItemModel::gdina_named("small"), q);
  const auto m = expected_loss_matrix(theta, CentroidValues(3, 12, theta.values),
                                      LossKind::CrossEntropy);
  for (PatternIndex t = 0; t < 8; ++t) {
    for (PatternIndex a = 0; a < 8; ++a) CHECK(m(t, a) >= m(t, t) - 1e-12);
  }
  CHECK_THROWS_AS(expected_loss_matrix(theta, CentroidValues(3, 11), LossKind::L2),
                  DimensionError);
}

TEST_CASE("a disjoint true class loses under GNPC constrained centroids") {
  const auto r = checks::disjoint_class_gap();
  INFO(r.detail);
  CHECK(r.passed);
}

TEST_CASE("separation checks") {
  CHECK(checks::true_pattern_minimizes_expected_loss(50, 3).passed);
  CHECK(checks::gnpc_separation_condition(5000, 4).passed);
  CHECK(checks::kl_lower_bound(10000, 5).passed);
}

TEST_CASE("noiseless data gives exact centroids with known memberships") {
  Rng rng(6);
  const std::size_t sizes[] = {64, 500};
  const auto curve = consistency_probe(ModelKind::Dina, 3, 12, 0.0, 0.0, sizes, 3, rng);
  // Every class is occupied with overwhelming probability at these sizes.
  for (const auto& per_size : curve.errors) {
    for (double e : per_size) CHECK(e == 0.0);
  }
}

TEST_CASE("centroid error shrinks with N") {
  const auto r = checks::centroid_consistency(100, 106);
  INFO(r.detail);
  CHECK(r.passed);
}

TEST_CASE("median") {
  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
  CHECK(std::isnan(median({})));
}
