#include "cdm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cdm/estimators.hpp"
#include "cdm/simulation.hpp"

namespace cdm {

AgreementReport agreement(const PatternAssignment& estimated,
                          const PatternAssignment& truth) {
  if (estimated.size() != truth.size()) {
    throw DimensionError("estimated and true assignments differ in length");
  }
  if (estimated.num_attributes() != truth.num_attributes()) {
    throw DimensionError("estimated and true assignments differ in K");
  }
  const int k = truth.num_attributes();
  AgreementReport report;
  report.per_attribute.assign(static_cast<std::size_t>(k), 0.0);
  const std::size_t n = truth.size();
  if (n == 0) {
    report.par = report.aar = 1.0;
    std::fill(report.per_attribute.begin(), report.per_attribute.end(), 1.0);
    return report;
  }
  std::size_t exact = 0;
  std::vector<std::size_t> per(static_cast<std::size_t>(k), 0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint32_t diff = estimated[i] ^ truth[i];
    if (diff == 0) ++exact;
    for (int b = 0; b < k; ++b) {
      if (((diff >> b) & 1u) == 0) ++per[static_cast<std::size_t>(b)];
    }
  }
  std::size_t matched = 0;
  for (int b = 0; b < k; ++b) {
    const auto count = per[static_cast<std::size_t>(b)];
    matched += count;
    report.per_attribute[static_cast<std::size_t>(b)] =
        static_cast<double>(count) / static_cast<double>(n);
  }
  report.par = static_cast<double>(exact) / static_cast<double>(n);
  report.aar = static_cast<double>(matched) /
               (static_cast<double>(n) * static_cast<double>(k));
  return report;
}

namespace {

double oracle_item_loss(int x, double mu, LossKind kind) {
  if (kind == LossKind::L1) return x == 1 ? std::abs(1.0 - mu) : std::abs(0.0 - mu);
  if (kind == LossKind::L2) return x == 1 ? (1.0 - mu) * (1.0 - mu)
                                          : (0.0 - mu) * (0.0 - mu);
  const double p = x == 1 ? mu : 1.0 - mu;
  return -std::log(p < kCrossEntropyClamp ? kCrossEntropyClamp : p);
}

double oracle_penalty(double pi, const ProportionPenalty& penalty) {
  if (penalty.kind == ProportionPenalty::Kind::None) return 0.0;
  if (pi <= 0.0) return kExcludedClassPenalty;
  return penalty.kind == ProportionPenalty::Kind::NegLog
             ? -std::log(pi)
             : -penalty.lambda * std::log(pi);
}

}  // namespace

PatternIndex oracle_classify(std::span<const std::uint8_t> x,
                             const CentroidValues& centroids,
                             const ProportionVector& proportions,
                             LossKind kind, const ProportionPenalty& penalty) {
  const std::size_t patterns = centroids.num_patterns();
  std::vector<double> losses(patterns);
  for (std::size_t a = 0; a < patterns; ++a) {
    double s = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      s += oracle_item_loss(x[j], centroids(static_cast<PatternIndex>(a), j), kind);
    }
    losses[a] = s + oracle_penalty(proportions[a], penalty);
  }
  // min_element returns the first minimum, i.e. the lowest index on ties.
  return static_cast<PatternIndex>(
      std::min_element(losses.begin(), losses.end()) - losses.begin());
}

PatternIndex oracle_posterior_argmax(std::span<const std::uint8_t> x,
                                     const CentroidValues& theta,
                                     const ProportionVector& proportions) {
  const std::size_t patterns = theta.num_patterns();
  std::vector<double> log_joint(patterns);
  for (std::size_t a = 0; a < patterns; ++a) {
    if (proportions[a] <= 0.0) {
      log_joint[a] = -std::numeric_limits<double>::infinity();
      continue;
    }
    double neg = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      neg += oracle_item_loss(x[j], theta(static_cast<PatternIndex>(a), j),
                              LossKind::CrossEntropy);
    }
    log_joint[a] = -neg + std::log(proportions[a]);
  }
  return static_cast<PatternIndex>(
      std::max_element(log_joint.begin(), log_joint.end()) - log_joint.begin());
}

double complete_data_log_likelihood(const ResponseMatrix& x,
                                    const PatternAssignment& assignment,
                                    const CentroidValues& centroids,
                                    const ProportionVector& proportions) {
  double total = 0.0;
  for (std::size_t i = 0; i < x.num_subjects(); ++i) {
    const PatternIndex a = assignment[i];
    double log_lik = 0.0;
    for (std::size_t j = 0; j < x.num_items(); ++j) {
      const double mu = centroids(a, j);
      if (x(i, j)) {
        if (mu > 0.0) log_lik += std::log(mu);
        else return -std::numeric_limits<double>::infinity();
      } else {
        if (mu < 1.0) log_lik += std::log1p(-mu);
        else return -std::numeric_limits<double>::infinity();
      }
    }
    total += log_lik + std::log(proportions[a]);
  }
  return total;
}

double bernoulli_kl(double p, double q) {
  auto term = [](double a, double b) {
    return a == 0.0 ? 0.0 : a * std::log(a / b);
  };
  return term(p, q) + term(1.0 - p, 1.0 - q);
}

ExpectedLossMatrix expected_loss_matrix(const ThetaTable& theta_true,
                                        const CentroidValues& centroids,
                                        LossKind kind) {
  if (theta_true.num_items != centroids.num_items() ||
      theta_true.num_attributes != centroids.num_attributes()) {
    throw DimensionError("truth and centroid tables differ in shape");
  }
  const std::size_t patterns = centroids.num_patterns();
  std::vector<double> values(patterns * patterns, 0.0);
  for (std::size_t t = 0; t < patterns; ++t) {
    for (std::size_t a = 0; a < patterns; ++a) {
      double s = 0.0;
      for (std::size_t j = 0; j < centroids.num_items(); ++j) {
        s += expected_item_loss(theta_true(static_cast<PatternIndex>(t), j),
                                centroids(static_cast<PatternIndex>(a), j), kind);
      }
      values[t * patterns + a] = s;
    }
  }
  return ExpectedLossMatrix(patterns, std::move(values));
}

double median(std::vector<double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

ErrorCurve consistency_probe(ModelKind model, int num_attributes,
                             std::size_t num_items, double slip, double guess,
                             std::span<const std::size_t> sample_sizes,
                             int replications, Rng& rng) {
  ErrorCurve curve;
  curve.sample_sizes.assign(sample_sizes.begin(), sample_sizes.end());
  curve.errors.assign(sample_sizes.size(), {});
  const auto item_model = ItemModel::dina(slip, guess);
  for (int rep = 0; rep < replications; ++rep) {
    const QMatrix q = gen_qmatrix(num_attributes, num_items, rng);
    const ThetaTable truth = theta_table(item_model, q);
    const auto constraints = model_constraints(q, model);
    const auto start = initial_centroids(q, constraints);
    for (std::size_t s = 0; s < sample_sizes.size(); ++s) {
      const auto patterns = gen_patterns(AttributeDistribution::uniform(),
                                         num_attributes, sample_sizes[s], rng);
      const auto x = gen_responses(patterns, truth, rng);
      const auto mu = update_centroids(x, patterns, constraints,
                                       LossKind::CrossEntropy, start);
      double sup = 0.0;
      for (std::size_t a = 0; a < mu.num_patterns(); ++a) {
        for (std::size_t j = 0; j < num_items; ++j) {
          const auto idx = static_cast<PatternIndex>(a);
          sup = std::max(sup, std::abs(mu(idx, j) - truth(idx, j)));
        }
      }
      curve.errors[s].push_back(sup);
    }
  }
  for (const auto& e : curve.errors) curve.medians.push_back(median(e));
  return curve;
}

}  // namespace cdm
