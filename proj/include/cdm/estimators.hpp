#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cdm/ideal_response.hpp"
#include "cdm/latent.hpp"
#include "cdm/loss.hpp"

namespace cdm {

enum class Method { Npc, Gnpc, Jmle, Cmle, Mmle };

struct EstimatorSpec {
  Method method = Method::Npc;
  IdealKind ideal = IdealKind::Dina;  // NPC centroids
  ModelKind model = ModelKind::Dina;  // JMLE / CMLE / MMLE constraints
  std::optional<LossKind> loss;       // overrides the method default
  std::optional<ProportionPenalty> penalty;
  int max_iterations = 200;
  double loss_tolerance = 1e-8;
  int em_max_iterations = 500;
  double em_tolerance = 1e-6;

  LossKind loss_kind() const;
  ProportionPenalty penalty_kind() const;
  std::string name() const;

  // Accepts npc, npc-dino, gnpc, jmle[-dina|-gdina], cmle[-dina|-gdina],
  // mmle[-dina|-gdina].
  static EstimatorSpec parse(std::string_view name);
};

// Centroid values together with the constraint tags they obey.
class CentroidTable {
 public:
  CentroidTable(CentroidValues values, CentroidConstraint constraints);

  const CentroidValues& values() const { return values_; }
  const CentroidConstraint& constraints() const { return constraints_; }
  double operator()(PatternIndex a, std::size_t j) const { return values_(a, j); }

 private:
  CentroidValues values_;
  CentroidConstraint constraints_;
};

struct FitResult {
  PatternAssignment assignment;
  CentroidTable centroids;
  ProportionVector proportions;
  // Total loss per iteration; for MMLE the negative marginal log-likelihood.
  std::vector<double> loss_trajectory;
  int iterations = 0;
  bool converged = false;
  // Cells breaking the "capable classes share the highest value, the zero
  // pattern the lowest" ordering. Reported, never enforced.
  std::size_t ordering_violations = 0;
};

// Argmin of pattern_loss over all 2^K patterns; lowest index wins ties.
PatternIndex classify_with_centroids(std::span<const std::uint8_t> x,
                                     const CentroidValues& centroids,
                                     const ProportionVector& proportions,
                                     LossKind kind,
                                     const ProportionPenalty& penalty);

// Assignment step for every subject.
PatternAssignment assign_all(const ResponseMatrix& x,
                             const CentroidValues& centroids,
                             const ProportionVector& proportions,
                             LossKind kind, const ProportionPenalty& penalty);

// Starting centroid values: fixed cells at their value, free cells at a
// neutral guess that rises with the number of required attributes mastered.
CentroidValues initial_centroids(const QMatrix& q,
                                 const CentroidConstraint& constraints);

// Centroid update. Free cells become the pooled mean (L2, cross
// entropy) or pooled median (L1) of their equivalence group; groups with no
// members keep the previous value.
CentroidValues update_centroids(const ResponseMatrix& x,
                                const PatternAssignment& assignment,
                                const CentroidConstraint& constraints,
                                LossKind kind, const CentroidValues& previous);

ProportionVector sample_proportions(const PatternAssignment& assignment);

std::size_t ordering_violations(const CentroidValues& centroids,
                                 const QMatrix& q);

FitResult npc_fit(const ResponseMatrix& x, const QMatrix& q, IdealKind ideal,
                  LossKind kind = LossKind::L1);

// General iterative classification. Starts from the NPC(DINA) assignment
// unless `initial` is supplied.
FitResult iterative_fit(const ResponseMatrix& x, const QMatrix& q,
                        const EstimatorSpec& spec,
                        const std::optional<PatternAssignment>& initial = {});

struct EmState {
  CentroidValues theta;
  ProportionVector proportions;
};

struct EmStepResult {
  EmState next;
  double log_likelihood = 0.0;  // of the state the step started from
};

double marginal_log_likelihood(const ResponseMatrix& x,
                               const CentroidValues& theta,
                               const ProportionVector& proportions);

// One E-step + M-step with item parameters pooled over `constraints` groups.
EmStepResult em_step(const ResponseMatrix& x,
                     const CentroidConstraint& constraints,
                     const EmState& state);

// Maximum a posteriori pattern per subject; lowest index wins ties.
PatternAssignment posterior_map(const ResponseMatrix& x,
                                const CentroidValues& theta,
                                const ProportionVector& proportions);

FitResult mmle_em_fit(const ResponseMatrix& x, const QMatrix& q,
                      const EstimatorSpec& spec,
                      const std::optional<EmState>& initial = {});

// Dispatches on spec.method.
FitResult fit(const ResponseMatrix& x, const QMatrix& q,
              const EstimatorSpec& spec);

}  // namespace cdm
