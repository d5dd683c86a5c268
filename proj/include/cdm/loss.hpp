#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cdm/latent.hpp"

namespace cdm {

enum class LossKind { L1, L2, CrossEntropy };

struct ProportionPenalty {
  enum class Kind { None, NegLog, ScaledNegLog };
  Kind kind = Kind::None;
  double lambda = 1.0;

  static ProportionPenalty none() { return {}; }
  static ProportionPenalty neg_log() { return {Kind::NegLog, 1.0}; }
  static ProportionPenalty scaled_neg_log(double lambda);
};

// Centroids feeding the cross-entropy log are kept at least this far from
// the boundary on the side that would otherwise yield log(0).
inline constexpr double kCrossEntropyClamp = 1e-10;
// Stand-in for h(0) = +inf under the log penalties.
inline constexpr double kExcludedClassPenalty = 1e18;

double item_loss(int x, double mu, LossKind kind);
double penalty_value(double proportion, const ProportionPenalty& penalty);

double pattern_loss(std::span<const std::uint8_t> x,
                    std::span<const double> centroid, double proportion,
                    LossKind kind, const ProportionPenalty& penalty);

// Class proportions over the 2^K patterns.
class ProportionVector {
 public:
  ProportionVector() = default;
  explicit ProportionVector(std::vector<double> values);

  static ProportionVector uniform(int num_attributes);
  static ProportionVector from_counts(std::span<const std::size_t> counts);

  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t a) const { return values_[a]; }
  const std::vector<double>& values() const { return values_; }

 private:
  std::vector<double> values_;
};

// (2^K) x J centroid values, row-major by pattern.
class CentroidValues {
 public:
  CentroidValues() = default;
  CentroidValues(int num_attributes, std::size_t num_items, double fill = 0.0);
  CentroidValues(int num_attributes, std::size_t num_items,
                 std::vector<double> values);

  int num_attributes() const { return num_attributes_; }
  std::size_t num_patterns() const { return cdm::num_patterns(num_attributes_); }
  std::size_t num_items() const { return num_items_; }
  double operator()(PatternIndex a, std::size_t j) const {
    return values_[a * num_items_ + j];
  }
  double& operator()(PatternIndex a, std::size_t j) {
    return values_[a * num_items_ + j];
  }
  std::span<const double> row(PatternIndex a) const {
    return {values_.data() + a * num_items_, num_items_};
  }
  const std::vector<double>& values() const { return values_; }

 private:
  int num_attributes_ = 0;
  std::size_t num_items_ = 0;
  std::vector<double> values_;
};

// Sum over subjects of pattern_loss under their assigned class, accumulated
// in subject order.
double total_loss(const ResponseMatrix& x, const PatternAssignment& assignment,
                  const CentroidValues& centroids,
                  const ProportionVector& proportions, LossKind kind,
                  const ProportionPenalty& penalty);

// E[l(x, mu)] for x ~ Bernoulli(theta_true).
double expected_item_loss(double theta_true, double mu, LossKind kind);

}  // namespace cdm
