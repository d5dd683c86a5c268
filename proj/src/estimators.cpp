#include "cdm/estimators.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace cdm {

LossKind EstimatorSpec::loss_kind() const {
  if (loss) return *loss;
  switch (method) {
    case Method::Npc:
      return LossKind::L1;
    case Method::Gnpc:
      return LossKind::L2;
    case Method::Jmle:
    case Method::Cmle:
    case Method::Mmle:
      return LossKind::CrossEntropy;
  }
  return LossKind::L1;
}

ProportionPenalty EstimatorSpec::penalty_kind() const {
  if (penalty) return *penalty;
  return method == Method::Cmle ? ProportionPenalty::neg_log()
                                : ProportionPenalty::none();
}

std::string EstimatorSpec::name() const {
  const std::string model_suffix = model == ModelKind::Dina ? "-dina" : "-gdina";
  switch (method) {
    case Method::Npc:
      return ideal == IdealKind::Dina ? "npc" : "npc-dino";
    case Method::Gnpc:
      return "gnpc";
    case Method::Jmle:
      return "jmle" + model_suffix;
    case Method::Cmle:
      return "cmle" + model_suffix;
    case Method::Mmle:
      return "mmle" + model_suffix;
  }
  return "unknown";
}

EstimatorSpec EstimatorSpec::parse(std::string_view name) {
  EstimatorSpec spec;
  if (name == "npc" || name == "npc-dina") {
    spec.method = Method::Npc;
  } else if (name == "npc-dino") {
    spec.method = Method::Npc;
    spec.ideal = IdealKind::Dino;
  } else if (name == "gnpc") {
    spec.method = Method::Gnpc;
  } else {
    const auto dash = name.find('-');
    const auto base = name.substr(0, dash);
    const auto model = dash == std::string_view::npos ? std::string_view("dina")
                                                      : name.substr(dash + 1);
    if (base == "jmle") {
      spec.method = Method::Jmle;
    } else if (base == "cmle") {
      spec.method = Method::Cmle;
    } else if (base == "mmle") {
      spec.method = Method::Mmle;
    } else {
      throw std::invalid_argument("unknown estimator '" + std::string(name) + "'");
    }
    if (model == "dina") {
      spec.model = ModelKind::Dina;
    } else if (model == "gdina") {
      spec.model = ModelKind::Gdina;
    } else {
      throw std::invalid_argument("unknown model in estimator '" +
                                  std::string(name) + "'");
    }
  }
  return spec;
}

CentroidTable::CentroidTable(CentroidValues values,
                             CentroidConstraint constraints)
    : values_(std::move(values)), constraints_(std::move(constraints)) {
  if (values_.num_items() != constraints_.num_items() ||
      values_.num_attributes() != constraints_.num_attributes()) {
    throw DimensionError("centroid values and constraints disagree in shape");
  }
}

namespace {

void check_dimensions(const ResponseMatrix& x, const QMatrix& q) {
  if (x.num_items() != q.num_items()) {
    throw DimensionError("response matrix has " + std::to_string(x.num_items()) +
                         " items but Q-matrix has " +
                         std::to_string(q.num_items()));
  }
}

// Per-pattern item losses for x = 0 and x = 1 plus the penalty term, so a
// subject's pattern loss is a table lookup per item.
class LossTable {
 public:
  LossTable(const CentroidValues& centroids,
            const ProportionVector& proportions, LossKind kind,
            const ProportionPenalty& penalty)
      : items_(centroids.num_items()),
        patterns_(centroids.num_patterns()),
        zero_(patterns_ * items_),
        one_(patterns_ * items_),
        penalty_(patterns_) {
    if (proportions.size() != patterns_) {
      throw DimensionError("proportion vector length does not match 2^K");
    }
    for (std::size_t a = 0; a < patterns_; ++a) {
      for (std::size_t j = 0; j < items_; ++j) {
        const double mu = centroids(static_cast<PatternIndex>(a), j);
        zero_[a * items_ + j] = item_loss(0, mu, kind);
        one_[a * items_ + j] = item_loss(1, mu, kind);
      }
      penalty_[a] = penalty_value(proportions[a], penalty);
    }
  }

  PatternIndex argmin(std::span<const std::uint8_t> x) const {
    PatternIndex best = 0;
    double best_loss = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < patterns_; ++a) {
      const double* z = zero_.data() + a * items_;
      const double* o = one_.data() + a * items_;
      double sum = 0.0;
      for (std::size_t j = 0; j < items_; ++j) sum += x[j] ? o[j] : z[j];
      sum += penalty_[a];
      if (sum < best_loss) {
        best_loss = sum;
        best = static_cast<PatternIndex>(a);
      }
    }
    return best;
  }

 private:
  std::size_t items_;
  std::size_t patterns_;
  std::vector<double> zero_;
  std::vector<double> one_;
  std::vector<double> penalty_;
};

// Class log-likelihoods log f(x | alpha) share the cross-entropy clamp.
class LogLikelihoodTable {
 public:
  explicit LogLikelihoodTable(const CentroidValues& theta)
      : items_(theta.num_items()),
        patterns_(theta.num_patterns()),
        zero_(patterns_ * items_),
        one_(patterns_ * items_) {
    for (std::size_t a = 0; a < patterns_; ++a) {
      for (std::size_t j = 0; j < items_; ++j) {
        const double t = theta(static_cast<PatternIndex>(a), j);
        zero_[a * items_ + j] = item_loss(0, t, LossKind::CrossEntropy);
        one_[a * items_ + j] = item_loss(1, t, LossKind::CrossEntropy);
      }
    }
  }

  // log pi_a + log f(x | a), or -inf for empty classes.
  void log_joint(std::span<const std::uint8_t> x,
                 const ProportionVector& proportions,
                 std::vector<double>& out) const {
    out.resize(patterns_);
    for (std::size_t a = 0; a < patterns_; ++a) {
      if (!(proportions[a] > 0.0)) {
        out[a] = -std::numeric_limits<double>::infinity();
        continue;
      }
      const double* z = zero_.data() + a * items_;
      const double* o = one_.data() + a * items_;
      double loss = 0.0;
      for (std::size_t j = 0; j < items_; ++j) loss += x[j] ? o[j] : z[j];
      out[a] = -loss + std::log(proportions[a]);
    }
  }

 private:
  std::size_t items_;
  std::size_t patterns_;
  std::vector<double> zero_;
  std::vector<double> one_;
};

double log_sum_exp(std::span<const double> w, double& max_out) {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : w) m = std::max(m, v);
  max_out = m;
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double v : w) s += std::exp(v - m);
  return m + std::log(s);
}

CentroidConstraint constraints_for(const QMatrix& q, const EstimatorSpec& spec) {
  switch (spec.method) {
    case Method::Npc:
      return ideal_constraints(q, spec.ideal);
    case Method::Gnpc:
      return gnpc_constraints(q);
    case Method::Jmle:
    case Method::Cmle:
    case Method::Mmle:
      return model_constraints(q, spec.model);
  }
  throw std::logic_error("unhandled estimator method");
}

}  // namespace

PatternIndex classify_with_centroids(std::span<const std::uint8_t> x,
                                     const CentroidValues& centroids,
                                     const ProportionVector& proportions,
                                     LossKind kind,
                                     const ProportionPenalty& penalty) {
  if (proportions.size() != centroids.num_patterns()) {
    throw DimensionError("proportion vector length does not match 2^K");
  }
  PatternIndex best = 0;
  double best_loss = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < centroids.num_patterns(); ++a) {
    const auto idx = static_cast<PatternIndex>(a);
    const double loss =
        pattern_loss(x, centroids.row(idx), proportions[a], kind, penalty);
    if (loss < best_loss) {
      best_loss = loss;
      best = idx;
    }
  }
  return best;
}

PatternAssignment assign_all(const ResponseMatrix& x,
                             const CentroidValues& centroids,
                             const ProportionVector& proportions,
                             LossKind kind, const ProportionPenalty& penalty) {
  if (x.num_items() != centroids.num_items()) {
    throw DimensionError("centroid table items do not match responses");
  }
  const LossTable table(centroids, proportions, kind, penalty);
  std::vector<PatternIndex> out(x.num_subjects());
  for (std::size_t i = 0; i < x.num_subjects(); ++i) {
    out[i] = table.argmin(x.row(i));
  }
  return PatternAssignment(std::move(out), centroids.num_attributes());
}

CentroidValues initial_centroids(const QMatrix& q,
                                 const CentroidConstraint& constraints) {
  CentroidValues mu(q.num_attributes(), q.num_items());
  for (std::size_t a = 0; a < mu.num_patterns(); ++a) {
    const auto idx = static_cast<PatternIndex>(a);
    for (std::size_t j = 0; j < q.num_items(); ++j) {
      const auto& cell = constraints(idx, j);
      switch (cell.kind) {
        case CellConstraint::Kind::Fixed0:
          mu(idx, j) = 0.0;
          break;
        case CellConstraint::Kind::Fixed1:
          mu(idx, j) = 1.0;
          break;
        case CellConstraint::Kind::Free: {
          const double mastered = std::popcount(idx & q.row_mask(j));
          mu(idx, j) = 0.2 + 0.6 * mastered / q.required_count(j);
          break;
        }
      }
    }
  }
  return mu;
}

CentroidValues update_centroids(const ResponseMatrix& x,
                                const PatternAssignment& assignment,
                                const CentroidConstraint& constraints,
                                LossKind kind, const CentroidValues& previous) {
  const std::size_t items = constraints.num_items();
  if (x.num_items() != items || x.num_subjects() != assignment.size()) {
    throw DimensionError("centroid update inputs disagree in shape");
  }
  CentroidValues mu = previous;
  for (std::size_t j = 0; j < items; ++j) {
    const auto groups = static_cast<std::size_t>(constraints.num_groups(j));
    if (groups == 0) continue;
    std::vector<double> positives(groups, 0.0);
    std::vector<double> members(groups, 0.0);
    for (std::size_t i = 0; i < x.num_subjects(); ++i) {
      const auto& cell = constraints(assignment[i], j);
      if (cell.kind != CellConstraint::Kind::Free) continue;
      const auto g = static_cast<std::size_t>(cell.group);
      members[g] += 1.0;
      positives[g] += x(i, j);
    }
    for (std::size_t a = 0; a < mu.num_patterns(); ++a) {
      const auto idx = static_cast<PatternIndex>(a);
      const auto& cell = constraints(idx, j);
      switch (cell.kind) {
        case CellConstraint::Kind::Fixed0:
          mu(idx, j) = 0.0;
          break;
        case CellConstraint::Kind::Fixed1:
          mu(idx, j) = 1.0;
          break;
        case CellConstraint::Kind::Free: {
          const auto g = static_cast<std::size_t>(cell.group);
          if (members[g] == 0.0) break;
          if (kind == LossKind::L1) {
            // Binary data: the median is 1 or 0 unless the split is even.
            const double twice = 2.0 * positives[g];
            mu(idx, j) = twice > members[g] ? 1.0
                         : twice < members[g] ? 0.0
                                              : 0.5;
          } else {
            mu(idx, j) = positives[g] / members[g];
          }
          break;
        }
      }
    }
  }
  return mu;
}

ProportionVector sample_proportions(const PatternAssignment& assignment) {
  const auto counts = class_counts(assignment);
  return ProportionVector::from_counts(counts);
}

std::size_t ordering_violations(const CentroidValues& centroids,
                                const QMatrix& q) {
  std::size_t violations = 0;
  const std::size_t patterns = centroids.num_patterns();
  for (std::size_t j = 0; j < q.num_items(); ++j) {
    const std::uint32_t qm = q.row_mask(j);
    double capable_min = std::numeric_limits<double>::infinity();
    double capable_max = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < patterns; ++a) {
      if ((a & qm) != qm) continue;
      const double v = centroids(static_cast<PatternIndex>(a), j);
      capable_min = std::min(capable_min, v);
      capable_max = std::max(capable_max, v);
    }
    if (capable_max != capable_min) ++violations;
    const double floor = centroids(0, j);
    for (std::size_t a = 0; a < patterns; ++a) {
      if ((a & qm) == qm) continue;
      const double v = centroids(static_cast<PatternIndex>(a), j);
      if (v > capable_min || v < floor) ++violations;
    }
  }
  return violations;
}

FitResult npc_fit(const ResponseMatrix& x, const QMatrix& q, IdealKind ideal,
                  LossKind kind) {
  check_dimensions(x, q);
  auto constraints = ideal_constraints(q, ideal);
  auto mu = initial_centroids(q, constraints);
  const auto uniform = ProportionVector::uniform(q.num_attributes());
  auto assignment =
      assign_all(x, mu, uniform, kind, ProportionPenalty::none());
  const double loss = total_loss(x, assignment, mu, uniform, kind,
                                 ProportionPenalty::none());
  auto proportions = sample_proportions(assignment);
  const auto violations = ordering_violations(mu, q);
  return FitResult{std::move(assignment),
                   CentroidTable(std::move(mu), std::move(constraints)),
                   std::move(proportions),
                   {loss},
                   1,
                   true,
                   violations};
}

FitResult iterative_fit(const ResponseMatrix& x, const QMatrix& q,
                        const EstimatorSpec& spec,
                        const std::optional<PatternAssignment>& initial) {
  check_dimensions(x, q);
  if (spec.method == Method::Npc) return npc_fit(x, q, spec.ideal, spec.loss_kind());
  if (spec.method == Method::Mmle) {
    throw std::invalid_argument("MMLE is fitted by EM, not the iterative classifier");
  }
  const LossKind kind = spec.loss_kind();
  const ProportionPenalty penalty = spec.penalty_kind();
  auto constraints = constraints_for(q, spec);

  PatternAssignment assignment =
      initial ? *initial : npc_fit(x, q, IdealKind::Dina).assignment;
  if (assignment.size() != x.num_subjects() ||
      assignment.num_attributes() != q.num_attributes()) {
    throw DimensionError("initial assignment does not match the data");
  }
  auto mu = update_centroids(x, assignment, constraints, kind,
                             initial_centroids(q, constraints));
  auto proportions = sample_proportions(assignment);
  std::vector<double> trajectory{
      total_loss(x, assignment, mu, proportions, kind, penalty)};

  int iterations = 0;
  bool converged = false;
  while (iterations < spec.max_iterations) {
    auto next = assign_all(x, mu, proportions, kind, penalty);
    ++iterations;
    if (next == assignment) {
      trajectory.push_back(
          total_loss(x, assignment, mu, proportions, kind, penalty));
      converged = true;
      break;
    }
    assignment = std::move(next);
    mu = update_centroids(x, assignment, constraints, kind, mu);
    proportions = sample_proportions(assignment);
    const double loss =
        total_loss(x, assignment, mu, proportions, kind, penalty);
    const double decrease = trajectory.back() - loss;
    trajectory.push_back(loss);
    if (decrease < spec.loss_tolerance) {
      converged = true;
      break;
    }
  }
  const auto violations = ordering_violations(mu, q);
  return FitResult{std::move(assignment),
                   CentroidTable(std::move(mu), std::move(constraints)),
                   std::move(proportions),
                   std::move(trajectory),
                   iterations,
                   converged,
                   violations};
}

double marginal_log_likelihood(const ResponseMatrix& x,
                               const CentroidValues& theta,
                               const ProportionVector& proportions) {
  const LogLikelihoodTable table(theta);
  std::vector<double> w;
  double total = 0.0;
  for (std::size_t i = 0; i < x.num_subjects(); ++i) {
    table.log_joint(x.row(i), proportions, w);
    double m = 0.0;
    total += log_sum_exp(w, m);
  }
  return total;
}

EmStepResult em_step(const ResponseMatrix& x,
                     const CentroidConstraint& constraints,
                     const EmState& state) {
  const auto& theta = state.theta;
  const std::size_t patterns = theta.num_patterns();
  const std::size_t items = theta.num_items();
  if (x.num_items() != items || constraints.num_items() != items ||
      state.proportions.size() != patterns) {
    throw DimensionError("EM inputs disagree in shape");
  }
  const LogLikelihoodTable table(theta);
  std::vector<double> weight_sum(patterns, 0.0);
  std::vector<double> positive_sum(patterns * items, 0.0);
  std::vector<double> w;
  double log_likelihood = 0.0;
  for (std::size_t i = 0; i < x.num_subjects(); ++i) {
    const auto row = x.row(i);
    table.log_joint(row, state.proportions, w);
    double m = 0.0;
    const double lse = log_sum_exp(w, m);
    log_likelihood += lse;
    for (std::size_t a = 0; a < patterns; ++a) {
      if (!std::isfinite(w[a])) continue;
      const double r = std::exp(w[a] - lse);
      if (r == 0.0) continue;
      weight_sum[a] += r;
      double* pos = positive_sum.data() + a * items;
      for (std::size_t j = 0; j < items; ++j) {
        if (row[j]) pos[j] += r;
      }
    }
  }

  const double n = static_cast<double>(x.num_subjects());
  std::vector<double> pi(patterns);
  double pi_total = 0.0;
  for (std::size_t a = 0; a < patterns; ++a) {
    pi[a] = n > 0 ? weight_sum[a] / n : 1.0 / static_cast<double>(patterns);
    pi_total += pi[a];
  }
  for (auto& p : pi) p /= pi_total;

  CentroidValues next_theta = theta;
  for (std::size_t j = 0; j < items; ++j) {
    const auto groups = static_cast<std::size_t>(constraints.num_groups(j));
    std::vector<double> num(groups, 0.0);
    std::vector<double> den(groups, 0.0);
    for (std::size_t a = 0; a < patterns; ++a) {
      const auto& cell = constraints(static_cast<PatternIndex>(a), j);
      if (cell.kind != CellConstraint::Kind::Free) continue;
      const auto g = static_cast<std::size_t>(cell.group);
      num[g] += positive_sum[a * items + j];
      den[g] += weight_sum[a];
    }
    for (std::size_t a = 0; a < patterns; ++a) {
      const auto idx = static_cast<PatternIndex>(a);
      const auto& cell = constraints(idx, j);
      if (cell.kind == CellConstraint::Kind::Fixed0) {
        next_theta(idx, j) = 0.0;
      } else if (cell.kind == CellConstraint::Kind::Fixed1) {
        next_theta(idx, j) = 1.0;
      } else {
        const auto g = static_cast<std::size_t>(cell.group);
        if (den[g] > 0.0) next_theta(idx, j) = num[g] / den[g];
      }
    }
  }
  return EmStepResult{EmState{std::move(next_theta), ProportionVector(std::move(pi))},
                      log_likelihood};
}

PatternAssignment posterior_map(const ResponseMatrix& x,
                                const CentroidValues& theta,
                                const ProportionVector& proportions) {
  const LogLikelihoodTable table(theta);
  std::vector<double> w;
  std::vector<PatternIndex> out(x.num_subjects());
  for (std::size_t i = 0; i < x.num_subjects(); ++i) {
    table.log_joint(x.row(i), proportions, w);
    PatternIndex best = 0;
    double best_w = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < w.size(); ++a) {
      if (w[a] > best_w) {
        best_w = w[a];
        best = static_cast<PatternIndex>(a);
      }
    }
    out[i] = best;
  }
  return PatternAssignment(std::move(out), theta.num_attributes());
}

FitResult mmle_em_fit(const ResponseMatrix& x, const QMatrix& q,
                      const EstimatorSpec& spec,
                      const std::optional<EmState>& initial) {
  check_dimensions(x, q);
  auto constraints = model_constraints(q, spec.model);
  EmState state = [&] {
    if (initial) return *initial;
    const auto start = npc_fit(x, q, IdealKind::Dina).assignment;
    auto theta = update_centroids(x, start, constraints, LossKind::CrossEntropy,
                                  initial_centroids(q, constraints));
    return EmState{std::move(theta), ProportionVector::uniform(q.num_attributes())};
  }();
  if (state.theta.num_items() != q.num_items() ||
      state.theta.num_attributes() != q.num_attributes()) {
    throw DimensionError("initial EM parameters do not match the Q-matrix");
  }

  std::vector<double> trajectory;
  int iterations = 0;
  bool converged = false;
  while (iterations < spec.em_max_iterations) {
    auto step = em_step(x, constraints, state);
    ++iterations;
    const bool small_gain =
        !trajectory.empty() &&
        step.log_likelihood - (-trajectory.back()) < spec.em_tolerance;
    trajectory.push_back(-step.log_likelihood);
    state = std::move(step.next);
    if (small_gain) {
      converged = true;
      break;
    }
  }
  trajectory.push_back(
      -marginal_log_likelihood(x, state.theta, state.proportions));

  auto assignment = posterior_map(x, state.theta, state.proportions);
  const auto violations = ordering_violations(state.theta, q);
  return FitResult{std::move(assignment),
                   CentroidTable(std::move(state.theta), std::move(constraints)),
                   std::move(state.proportions),
                   std::move(trajectory),
                   iterations,
                   converged,
                   violations};
}

FitResult fit(const ResponseMatrix& x, const QMatrix& q,
              const EstimatorSpec& spec) {
  switch (spec.method) {
    case Method::Npc:
      return npc_fit(x, q, spec.ideal, spec.loss_kind());
    case Method::Mmle:
      return mmle_em_fit(x, q, spec);
    default:
      return iterative_fit(x, q, spec);
  }
}

}  // namespace cdm
