#include "cdm/loss.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace cdm {

ProportionPenalty ProportionPenalty::scaled_neg_log(double lambda) {
  if (!(lambda > 0.0)) {
    throw std::invalid_argument("penalty scale must be positive");
  }
  return {Kind::ScaledNegLog, lambda};
}

double item_loss(int x, double mu, LossKind kind) {
  switch (kind) {
    case LossKind::L1:
      return std::abs(x - mu);
    case LossKind::L2: {
      const double d = x - mu;
      return d * d;
    }
    case LossKind::CrossEntropy:
      return x ? -std::log(std::max(mu, kCrossEntropyClamp))
               : -std::log(std::max(1.0 - mu, kCrossEntropyClamp));
  }
  return 0.0;
}

double penalty_value(double proportion, const ProportionPenalty& penalty) {
  switch (penalty.kind) {
    case ProportionPenalty::Kind::None:
      return 0.0;
    case ProportionPenalty::Kind::NegLog:
      return proportion > 0.0 ? -std::log(proportion) : kExcludedClassPenalty;
    case ProportionPenalty::Kind::ScaledNegLog:
      return proportion > 0.0 ? -penalty.lambda * std::log(proportion)
                              : kExcludedClassPenalty;
  }
  return 0.0;
}

double pattern_loss(std::span<const std::uint8_t> x,
                    std::span<const double> centroid, double proportion,
                    LossKind kind, const ProportionPenalty& penalty) {
  if (x.size() != centroid.size()) {
    throw DimensionError("response row has " + std::to_string(x.size()) +
                         " items but centroid has " +
                         std::to_string(centroid.size()));
  }
  double sum = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    sum += item_loss(x[j], centroid[j], kind);
  }
  return sum + penalty_value(proportion, penalty);
}

ProportionVector::ProportionVector(std::vector<double> values)
    : values_(std::move(values)) {
  double total = 0.0;
  for (double v : values_) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw std::invalid_argument("proportion outside [0, 1]");
    }
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw std::invalid_argument("proportions sum to " + std::to_string(total));
  }
}

ProportionVector ProportionVector::uniform(int num_attributes) {
  const auto n = num_patterns(num_attributes);
  return ProportionVector(std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

ProportionVector ProportionVector::from_counts(
    std::span<const std::size_t> counts) {
  const std::size_t total = std::accumulate(counts.begin(), counts.end(),
                                            std::size_t{0});
  ProportionVector out;
  if (total == 0) {
    out.values_.assign(counts.size(), 1.0 / static_cast<double>(counts.size()));
    return out;
  }
  out.values_.resize(counts.size());
  for (std::size_t a = 0; a < counts.size(); ++a) {
    out.values_[a] = static_cast<double>(counts[a]) / static_cast<double>(total);
  }
  return out;
}

CentroidValues::CentroidValues(int num_attributes, std::size_t num_items,
                               double fill)
    : num_attributes_(num_attributes),
      num_items_(num_items),
      values_(cdm::num_patterns(num_attributes) * num_items, fill) {}

CentroidValues::CentroidValues(int num_attributes, std::size_t num_items,
                               std::vector<double> values)
    : num_attributes_(num_attributes),
      num_items_(num_items),
      values_(std::move(values)) {
  if (values_.size() != cdm::num_patterns(num_attributes) * num_items) {
    throw DimensionError("centroid table size mismatch");
  }
}

double total_loss(const ResponseMatrix& x, const PatternAssignment& assignment,
                  const CentroidValues& centroids,
                  const ProportionVector& proportions, LossKind kind,
                  const ProportionPenalty& penalty) {
  if (x.num_subjects() != assignment.size()) {
    throw DimensionError("assignment length does not match subjects");
  }
  if (x.num_items() != centroids.num_items()) {
    throw DimensionError("centroid table items do not match responses");
  }
  if (proportions.size() != centroids.num_patterns() ||
      assignment.num_attributes() != centroids.num_attributes()) {
    throw DimensionError("pattern count mismatch between inputs");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < x.num_subjects(); ++i) {
    const PatternIndex a = assignment[i];
    sum += pattern_loss(x.row(i), centroids.row(a), proportions[a], kind,
                        penalty);
  }
  return sum;
}

double expected_item_loss(double theta_true, double mu, LossKind kind) {
  return theta_true * item_loss(1, mu, kind) +
         (1.0 - theta_true) * item_loss(0, mu, kind);
}

}  // namespace cdm
