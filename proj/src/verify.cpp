#include "cdm/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "cdm/estimators.hpp"
#include "cdm/metrics.hpp"
#include "cdm/random.hpp"
#include "cdm/simulation.hpp"

namespace cdm {

namespace {

std::string fmt(const char* pattern, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, pattern, args...);
  return buf;
}

CheckResult timed(std::string name, const std::function<CheckResult()>& body) {
  const auto start = std::chrono::steady_clock::now();
  CheckResult r = body();
  r.name = std::move(name);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                  .count();
  return r;
}

ResponseMatrix random_binary(std::size_t rows, std::size_t cols, Rng& rng) {
  BinaryMatrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = rng.bernoulli(0.5) ? 1 : 0;
  }
  return ResponseMatrix(std::move(m));
}

ItemModel alternate_model(int i) {
  return i % 2 == 0 ? ItemModel::dina(0.2, 0.2)
                    : ItemModel::gdina_named("small");
}

double mean_par(const std::vector<ExperimentRow>& rows, std::string_view name,
                std::size_t j = 0) {
  for (const auto& r : rows) {
    if (r.estimator == name && (j == 0 || r.cell.j == j)) return r.mean_par;
  }
  throw std::logic_error("estimator missing from experiment output");
}

}  // namespace

namespace checks {

CheckResult loss_monotonicity(int instances, std::uint64_t seed) {
  return timed("loss monotonicity", [&] {
    const char* methods[] = {"gnpc", "jmle-dina", "cmle-dina", "jmle-gdina",
                             "cmle-gdina"};
    std::size_t trajectories = 0;
    std::size_t violations = 0;
    double worst = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < instances; ++i) {
      Rng rng(combine_seed(seed, static_cast<std::uint64_t>(i)));
      const auto data =
          simulate(3, 30, 100, AttributeDistribution::uniform(), alternate_model(i), rng);
      for (const char* m : methods) {
        const auto result = iterative_fit(data.x, data.q, EstimatorSpec::parse(m));
        ++trajectories;
        const auto& t = result.loss_trajectory;
        for (std::size_t s = 1; s < t.size(); ++s) {
          const double rise = t[s] - t[s - 1];
          worst = std::max(worst, rise);
          if (rise > 1e-9) ++violations;
        }
      }
    }
    return CheckResult{{}, violations == 0,
                       fmt("%zu trajectories, %zu steps rose by >1e-9, largest step change %.3g",
                           trajectories, violations, worst)};
  });
}

CheckResult npc_l1_l2_equivalence(int subjects, std::uint64_t seed) {
  return timed("NPC L1/L2 equivalence", [&] {
    Rng rng(seed);
    const auto q = gen_qmatrix(4, 20, rng);
    const auto x = random_binary(static_cast<std::size_t>(subjects), 20, rng);
    const auto l1 = npc_fit(x, q, IdealKind::Dina, LossKind::L1);
    const auto l2 = npc_fit(x, q, IdealKind::Dina, LossKind::L2);
    std::size_t differ = 0;
    for (std::size_t i = 0; i < x.num_subjects(); ++i) {
      if (l1.assignment[i] != l2.assignment[i]) ++differ;
    }
    return CheckResult{{}, differ == 0,
                       fmt("%zu of %zu subjects differ", differ, x.num_subjects())};
  });
}

CheckResult oracle_equivalence(int cases, std::uint64_t seed) {
  return timed("assignment oracle equivalence", [&] {
    Rng rng(seed);
    const LossKind losses[] = {LossKind::L1, LossKind::L2, LossKind::CrossEntropy};
    std::size_t mismatches = 0;
    for (int c = 0; c < cases; ++c) {
      const int k = 1 + static_cast<int>(rng.uniform_int(4));
      const std::size_t j = 1 + rng.uniform_int(12);
      const std::size_t patterns = num_patterns(k);
      // Values snap to a coarse grid or the boundary often enough to exercise
      // ties and clamped logs.
      std::vector<double> values(patterns * j);
      for (auto& v : values) {
        const auto pick = rng.uniform_int(4);
        v = pick == 0 ? 0.0 : pick == 1 ? 1.0
            : pick == 2 ? static_cast<double>(rng.uniform_int(5)) / 4.0
                        : rng.uniform();
      }
      if (rng.bernoulli(0.2) && patterns > 1) {
        std::copy_n(values.begin(), j, values.begin() + static_cast<long>(j));
      }
      const CentroidValues centroids(k, j, std::move(values));
      std::vector<double> weights(patterns);
      double total = 0.0;
      for (auto& w : weights) {
        w = rng.bernoulli(0.2) ? 0.0 : rng.uniform() + 0.01;
        total += w;
      }
      if (total == 0.0) {
        weights[0] = 1.0;
        total = 1.0;
      }
      for (auto& w : weights) w /= total;
      double sum = 0.0;
      for (std::size_t a = 0; a + 1 < patterns; ++a) sum += weights[a];
      weights[patterns - 1] = std::max(0.0, 1.0 - sum);
      const ProportionVector pi(std::move(weights));
      const ProportionPenalty penalties[] = {
          ProportionPenalty::none(), ProportionPenalty::neg_log(),
          ProportionPenalty::scaled_neg_log(0.1 + 2.0 * rng.uniform())};
      BinaryMatrix row(1, j);
      for (std::size_t t = 0; t < j; ++t) row(0, t) = rng.bernoulli(0.5) ? 1 : 0;
      const ResponseMatrix x(row);
      for (auto kind : losses) {
        for (const auto& pen : penalties) {
          const auto expected = oracle_classify(x.row(0), centroids, pi, kind, pen);
          const auto direct = classify_with_centroids(x.row(0), centroids, pi, kind, pen);
          const auto bulk = assign_all(x, centroids, pi, kind, pen)[0];
          if (direct != expected || bulk != expected) ++mismatches;
        }
      }
    }
    return CheckResult{{}, mismatches == 0,
                       fmt("%d cases x 9 loss/penalty combinations, %zu mismatches",
                           cases, mismatches)};
  });
}

CheckResult disjoint_class_gap() {
  return timed("disjoint-class expected-loss gap", [] {
    // K = 3, one item requiring attributes 1 and 2. The true class (0,0,1)
    // is disjoint from the item, so its GNPC centroid is fixed at 0; the
    // competitor (1,0,0) is a free cell estimated at its own mean 0.3.
    const QMatrix q{{1, 1, 0}};
    const auto truth_pattern = AttributePattern{0, 0, 1}.index();
    const auto rival = AttributePattern{1, 0, 0}.index();
    const auto constraints = gnpc_constraints(q);
    ThetaTable theta{3, 1, std::vector<double>(8, 0.5)};
    theta(truth_pattern, 0) = 0.2;
    theta(rival, 0) = 0.3;
    CentroidValues centroids = initial_centroids(q, constraints);
    centroids(rival, 0) = 0.3;
    const bool fixed_zero =
        constraints(truth_pattern, 0).kind == CellConstraint::Kind::Fixed0 &&
        centroids(truth_pattern, 0) == 0.0;
    const auto m = expected_loss_matrix(theta, centroids, LossKind::L2);
    const double gap = m(truth_pattern, rival) - m(truth_pattern, truth_pattern);
    const bool ok = fixed_zero && std::abs(gap - (-0.03)) <= 1e-12;
    return CheckResult{{}, ok, fmt("gap %.15f (expected -0.03 +/- 1e-12)", gap)};
  });
}

CheckResult kl_lower_bound(int pairs, std::uint64_t seed) {
  return timed("KL lower bound", [&] {
    Rng rng(seed);
    std::size_t failures = 0;
    double min_slack = std::numeric_limits<double>::infinity();
    double worst_identity = 0.0;
    for (int i = 0; i < pairs; ++i) {
      const double p = 0.05 + 0.9 * rng.uniform();
      const double q = 0.05 + 0.9 * rng.uniform();
      const double kl = bernoulli_kl(p, q);
      const double slack = kl - 2.0 * (p - q) * (p - q);
      min_slack = std::min(min_slack, slack);
      if (slack < 0.0) ++failures;
      // The cross-entropy gap to the true parameter is the same divergence.
      const double gap = expected_item_loss(p, q, LossKind::CrossEntropy) -
                         expected_item_loss(p, p, LossKind::CrossEntropy);
      worst_identity = std::max(worst_identity, std::abs(gap - kl));
    }
    const bool ok = failures == 0 && worst_identity < 1e-12;
    return CheckResult{{}, ok,
                       fmt("%zu violations, min slack %.3g, max |CE gap - KL| %.3g",
                           failures, min_slack, worst_identity)};
  });
}

CheckResult centroid_consistency(int reps, std::uint64_t seed) {
  return timed("known-membership centroid consistency", [&] {
    Rng rng(seed);
    const std::size_t sizes[] = {100, 10000};
    const auto curve = consistency_probe(ModelKind::Dina, 3, 30, 0.2, 0.2, sizes,
                                         reps, rng);
    int shrank = 0;
    for (int r = 0; r < reps; ++r) {
      if (curve.errors[1][static_cast<std::size_t>(r)] <
          curve.errors[0][static_cast<std::size_t>(r)]) {
        ++shrank;
      }
    }
    const bool ok = curve.medians[1] < 0.02 && shrank * 100 >= 95 * reps;
    return CheckResult{{}, ok,
                       fmt("median sup error %.4f at N=100, %.4f at N=10000; "
                           "smaller in %d/%d reps",
                           curve.medians[0], curve.medians[1], shrank, reps)};
  });
}

CheckResult par_trend_in_items(int reps, std::uint64_t seed, unsigned threads) {
  return timed("PAR trend in J (JMLE, CMLE)", [&] {
    ExperimentConfig cfg;
    cfg.k = {3};
    cfg.j = {15, 30, 50};
    cfg.n = {500};
    cfg.models = {ItemModel::dina(0.1, 0.1)};
    cfg.estimators = {"jmle-dina", "cmle-dina"};
    cfg.replications = reps;
    cfg.seed = seed;
    const auto rows = run_experiment(cfg, threads);
    bool ok = true;
    std::string detail;
    for (const char* e : {"jmle-dina", "cmle-dina"}) {
      const double a = mean_par(rows, e, 15);
      const double b = mean_par(rows, e, 30);
      const double c = mean_par(rows, e, 50);
      ok = ok && a <= b && b <= c && c >= 0.95;
      detail += fmt("%s %.4f/%.4f/%.4f ", e, a, b, c);
    }
    return CheckResult{{}, ok, detail + "(J=15/30/50)"};
  });
}

CheckResult npc_beats_gnpc_high_noise(int reps, std::uint64_t seed,
                                      unsigned threads) {
  return timed("NPC over GNPC at high noise", [&] {
    ExperimentConfig cfg;
    cfg.k = {5};
    cfg.j = {30};
    cfg.n = {500};
    cfg.models = {ItemModel::dina(0.3, 0.3)};
    cfg.estimators = {"npc", "gnpc"};
    cfg.replications = reps;
    cfg.seed = seed;
    const auto rows = run_experiment(cfg, threads);
    const double npc = mean_par(rows, "npc");
    const double gnpc = mean_par(rows, "gnpc");
    return CheckResult{{}, npc - gnpc >= 0.02,
                       fmt("NPC %.4f, GNPC %.4f, difference %.4f (need >= 0.02)",
                           npc, gnpc, npc - gnpc)};
  });
}

CheckResult gnpc_beats_npc_gdina(int reps, std::uint64_t seed, unsigned threads) {
  return timed("GNPC over NPC under GDINA", [&] {
    ExperimentConfig cfg;
    cfg.k = {3};
    cfg.j = {30};
    cfg.n = {50};
    cfg.models = {ItemModel::gdina_named("small")};
    cfg.estimators = {"npc", "gnpc"};
    cfg.replications = reps;
    cfg.seed = seed;
    const auto rows = run_experiment(cfg, threads);
    const double npc = mean_par(rows, "npc");
    const double gnpc = mean_par(rows, "gnpc");
    return CheckResult{{}, gnpc >= npc,
                       fmt("GNPC %.4f, NPC %.4f", gnpc, npc)};
  });
}

CheckResult em_correctness(int instances, std::uint64_t seed) {
  return timed("EM monotonicity and MAP oracle", [&] {
    std::size_t drops = 0;
    std::size_t map_mismatches = 0;
    std::size_t subjects = 0;
    double worst = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < instances; ++i) {
      Rng rng(combine_seed(seed, static_cast<std::uint64_t>(i)));
      const auto data =
          simulate(3, 20, 200, AttributeDistribution::uniform(), alternate_model(i), rng);
      const auto spec = EstimatorSpec::parse(i % 2 ? "mmle-gdina" : "mmle-dina");
      const auto result = mmle_em_fit(data.x, data.q, spec);
      const auto& t = result.loss_trajectory;  // negative log-likelihood
      for (std::size_t s = 1; s < t.size(); ++s) {
        const double rise = t[s] - t[s - 1];
        worst = std::max(worst, rise);
        if (rise > 1e-8) ++drops;
      }
      for (std::size_t n = 0; n < data.x.num_subjects(); ++n) {
        ++subjects;
        const auto expected = oracle_posterior_argmax(
            data.x.row(n), result.centroids.values(), result.proportions);
        if (expected != result.assignment[n]) ++map_mismatches;
      }
    }
    return CheckResult{{}, drops == 0 && map_mismatches == 0,
                       fmt("%zu log-likelihood drops >1e-8 (largest change in -loglik %.3g), "
                           "%zu/%zu MAP mismatches",
                           drops, worst, map_mismatches, subjects)};
  });
}

CheckResult mvn_marginals(std::size_t subjects, std::uint64_t seed) {
  return timed("MVN threshold marginals", [&] {
    double worst = 0.0;
    for (double r : {0.4, 0.8}) {
      for (int k : {3, 5}) {
        Rng rng(combine_seed(seed, static_cast<std::uint64_t>(k * 10 + static_cast<int>(r * 10))));
        const auto patterns =
            gen_patterns(AttributeDistribution::mvn_threshold(r), k, subjects, rng);
        for (int a = 0; a < k; ++a) {
          std::size_t mastered = 0;
          for (std::size_t i = 0; i < patterns.size(); ++i) {
            mastered += (patterns[i] >> a) & 1u;
          }
          const double observed =
              static_cast<double>(mastered) / static_cast<double>(subjects);
          const double target = 1.0 - static_cast<double>(a + 1) / (k + 1);
          worst = std::max(worst, std::abs(observed - target));
        }
      }
    }
    return CheckResult{{}, worst <= 0.01,
                       fmt("max |P(alpha_k=1) - (1 - k/(K+1))| = %.4f", worst)};
  });
}

CheckResult cmle_likelihood_identity(int fits, std::uint64_t seed) {
  return timed("CMLE loss equals -complete-data log-likelihood", [&] {
    double worst = 0.0;
    for (int i = 0; i < fits; ++i) {
      Rng rng(combine_seed(seed, static_cast<std::uint64_t>(i)));
      const auto data =
          simulate(3, 20, 200, AttributeDistribution::uniform(), alternate_model(i), rng);
      const auto spec = EstimatorSpec::parse(i % 2 ? "cmle-gdina" : "cmle-dina");
      const auto result = iterative_fit(data.x, data.q, spec);
      const double ll = complete_data_log_likelihood(
          data.x, result.assignment, result.centroids.values(), result.proportions);
      worst = std::max(worst, std::abs(result.loss_trajectory.back() + ll));
    }
    return CheckResult{{}, worst <= 1e-9,
                       fmt("max |loss + loglik| = %.3g over %d fits", worst, fits)};
  });
}

CheckResult true_pattern_minimizes_expected_loss(int tables, std::uint64_t seed) {
  return timed("true pattern minimizes expected loss", [&] {
    Rng rng(seed);
    int checked = 0;
    std::size_t failures = 0;
    for (int t = 0; t < tables; ++t) {
      const auto q = gen_qmatrix(3, 30, rng);
      const double s = 0.05 + 0.25 * rng.uniform();
      const double g = 0.05 + 0.25 * rng.uniform();
      const auto theta = theta_table(ItemModel::dina(s, g), q);
      const std::size_t patterns = num_patterns(3);
      double min_gap = std::numeric_limits<double>::infinity();
      for (std::size_t a = 0; a < patterns; ++a) {
        for (std::size_t b = a + 1; b < patterns; ++b) {
          double gap = 0.0;
          for (std::size_t j = 0; j < theta.num_items; ++j) {
            gap += std::abs(theta(static_cast<PatternIndex>(a), j) -
                            theta(static_cast<PatternIndex>(b), j));
          }
          min_gap = std::min(min_gap, gap / static_cast<double>(theta.num_items));
        }
      }
      if (min_gap < 0.1) continue;
      ++checked;
      const CentroidValues centroids(3, theta.num_items, theta.values);
      const auto m = expected_loss_matrix(theta, centroids, LossKind::CrossEntropy);
      for (std::size_t a = 0; a < patterns; ++a) {
        for (std::size_t b = 0; b < patterns; ++b) {
          const auto ta = static_cast<PatternIndex>(a);
          const auto tb = static_cast<PatternIndex>(b);
          if (a != b && !(m(ta, tb) > m(ta, ta) + 1e-12)) ++failures;
        }
      }
    }
    return CheckResult{{}, checked > 0 && failures == 0,
                       fmt("%d separated tables checked, %zu off-diagonal entries not above the diagonal",
                           checked, failures)};
  });
}

CheckResult gnpc_separation_condition(int pairs, std::uint64_t seed) {
  return timed("GNPC separation condition", [&] {
    // Fixed-zero centroid for the true class versus a free centroid at the
    // rival's own mean: the expected L2 gap must be at least delta whenever
    // the separation condition holds with that delta.
    Rng rng(seed);
    constexpr double delta = 1e-3;
    int satisfied = 0;
    std::size_t failures = 0;
    for (int i = 0; i < pairs; ++i) {
      const double theta_min = 0.5 * rng.uniform();
      const double theta_rival = rng.uniform();
      const double lhs = (theta_rival - theta_min) * (theta_rival - theta_min);
      if (lhs < theta_min * theta_min + delta) continue;
      ++satisfied;
      const double gap = expected_item_loss(theta_min, theta_rival, LossKind::L2) -
                         expected_item_loss(theta_min, 0.0, LossKind::L2);
      if (gap < delta - 1e-12) ++failures;
    }
    return CheckResult{{}, satisfied > 0 && failures == 0,
                       fmt("%d pairs met the condition, %zu had gap < delta",
                           satisfied, failures)};
  });
}

}  // namespace checks

std::vector<CheckResult> run_suite(std::string_view suite) {
  const bool all = suite == "all";
  if (!all && suite != "losses" && suite != "algorithm" && suite != "theory") {
    throw std::invalid_argument("unknown suite '" + std::string(suite) +
                                "' (expected all, losses, algorithm or theory)");
  }
  std::vector<CheckResult> out;
  if (all || suite == "losses") {
    out.push_back(checks::npc_l1_l2_equivalence());
    out.push_back(checks::oracle_equivalence());
    out.push_back(checks::cmle_likelihood_identity());
  }
  if (all || suite == "algorithm") {
    out.push_back(checks::loss_monotonicity());
    out.push_back(checks::em_correctness());
    out.push_back(checks::mvn_marginals());
  }
  if (all || suite == "theory") {
    out.push_back(checks::disjoint_class_gap());
    out.push_back(checks::kl_lower_bound());
    out.push_back(checks::true_pattern_minimizes_expected_loss());
    out.push_back(checks::gnpc_separation_condition());
    out.push_back(checks::centroid_consistency());
  }
  return out;
}

bool print_report(const std::vector<CheckResult>& results, std::ostream& out) {
  bool all = true;
  for (const auto& r : results) {
    out << (r.passed ? "PASS  " : "FAIL  ") << r.name << ": " << r.detail << '\n';
    all = all && r.passed;
  }
  out << (all ? "all checks passed" : "some checks FAILED") << '\n';
  return all;
}

}  // namespace cdm
