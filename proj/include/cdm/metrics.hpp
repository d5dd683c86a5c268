#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cdm/ideal_response.hpp"
#include "cdm/latent.hpp"
#include "cdm/loss.hpp"
#include "cdm/random.hpp"

namespace cdm {

struct AgreementReport {
  double par = 0.0;
  double aar = 0.0;
  std::vector<double> per_attribute;
};

AgreementReport agreement(const PatternAssignment& estimated,
                          const PatternAssignment& truth);

// Independent exhaustive argmin used to cross-check the assignment step.
// Shares no code with the estimators: losses are evaluated from their
// definitions.
PatternIndex oracle_classify(std::span<const std::uint8_t> x,
                             const CentroidValues& centroids,
                             const ProportionVector& proportions,
                             LossKind kind, const ProportionPenalty& penalty);

// Independent posterior argmax: log pi_a + sum_j log f(x_j | theta_ja).
PatternIndex oracle_posterior_argmax(std::span<const std::uint8_t> x,
                                     const CentroidValues& theta,
                                     const ProportionVector& proportions);

// sum_i log(pi_{a_i} * Lik(x_i; mu_{a_i})) with 0 log 0 = 0.
double complete_data_log_likelihood(const ResponseMatrix& x,
                                    const PatternAssignment& assignment,
                                    const CentroidValues& centroids,
                                    const ProportionVector& proportions);

// KL(Bernoulli(p) || Bernoulli(q)).
double bernoulli_kl(double p, double q);

// Entry (t, a) = sum_j E[l(x_j, mu_{j,a})] for x_j ~ Bernoulli(theta_{j,t}).
class ExpectedLossMatrix {
 public:
  ExpectedLossMatrix(std::size_t patterns, std::vector<double> values)
      : patterns_(patterns), values_(std::move(values)) {}
  std::size_t size() const { return patterns_; }
  double operator()(PatternIndex truth, PatternIndex candidate) const {
    return values_[truth * patterns_ + candidate];
  }

 private:
  std::size_t patterns_;
  std::vector<double> values_;
};

ExpectedLossMatrix expected_loss_matrix(const ThetaTable& theta_true,
                                        const CentroidValues& centroids,
                                        LossKind kind);

// Sup-norm error of known-membership centroid estimates, per N.
struct ErrorCurve {
  std::vector<std::size_t> sample_sizes;
  std::vector<std::vector<double>> errors;  // [size index][replication]
  std::vector<double> medians;
};

// For each replication: one Q-matrix and uniform true patterns; for each N
// the DINA-pooled means given the true memberships are compared with the
// true item parameters.
ErrorCurve consistency_probe(ModelKind model, int num_attributes,
                             std::size_t num_items, double slip, double guess,
                             std::span<const std::size_t> sample_sizes,
                             int replications, Rng& rng);

double median(std::vector<double> values);

}  // namespace cdm
