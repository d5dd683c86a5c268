#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cdm/latent.hpp"

namespace cdm {

// Thrown for item parameters that imply a probability outside [0, 1].
class InvalidParameter : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

int ideal_dina(std::span<const std::uint8_t> q_row,
               const AttributePattern& pattern);
int ideal_dino(std::span<const std::uint8_t> q_row,
               const AttributePattern& pattern);

// Mask forms used on hot paths.
inline int ideal_dina_mask(std::uint32_t q_mask, std::uint32_t pattern_mask) {
  return (pattern_mask & q_mask) == q_mask ? 1 : 0;
}
inline int ideal_dino_mask(std::uint32_t q_mask, std::uint32_t pattern_mask) {
  return (pattern_mask & q_mask) != 0 ? 1 : 0;
}

struct DinaItemParams {
  double slip = 0.0;
  double guess = 0.0;
};

void validate(const DinaItemParams& params);

// 1 - s when the ideal response is 1, g otherwise.
double dina_theta(const DinaItemParams& params, int ideal);

// GDINA item with identity link. The item is stored as one success
// probability per sub-pattern of its required attributes (sub-pattern index
// packs the lowest required attribute into the least-significant bit);
// interaction coefficients are derived by Moebius inversion.
class GdinaItemParams {
 public:
  GdinaItemParams(std::uint32_t q_mask, std::vector<double> probabilities);

  // Coefficients indexed by subset S of K_j in sub-pattern encoding. Every
  // implied probability must land in [0, 1].
  static GdinaItemParams from_betas(std::uint32_t q_mask,
                                    std::vector<double> betas);

  std::uint32_t q_mask() const { return q_mask_; }
  int required_count() const;
  const std::vector<double>& probabilities() const { return probabilities_; }
  std::vector<double> betas() const;

 private:
  std::uint32_t q_mask_;
  std::vector<double> probabilities_;
};

// Sum of beta_S over the subsets S of K_j contained in the mastered set.
double gdina_theta(const GdinaItemParams& params,
                   const AttributePattern& pattern);

// Full (2^K) x J table of true success probabilities, row-major by pattern.
struct ThetaTable {
  int num_attributes = 0;
  std::size_t num_items = 0;
  std::vector<double> values;

  double operator()(PatternIndex pattern, std::size_t j) const {
    return values[pattern * num_items + j];
  }
  double& operator()(PatternIndex pattern, std::size_t j) {
    return values[pattern * num_items + j];
  }
};

ThetaTable dina_theta_table(const QMatrix& q,
                            std::span<const DinaItemParams> items);
ThetaTable gdina_theta_table(const QMatrix& q,
                             std::span<const GdinaItemParams> items);

// Rows of a GDINA parameter table: each row holds 2^m probabilities for an
// item measuring m attributes.
using GdinaTable = std::vector<std::vector<double>>;

GdinaTable gdina_table_small_noise();
GdinaTable gdina_table_large_noise();

// Items are grouped by |K_j|; within a group the table rows with the same
// attribute count are handed out cyclically in item order.
std::vector<GdinaItemParams> assign_gdina_rows(const QMatrix& q,
                                               const GdinaTable& table);

struct CellConstraint {
  enum class Kind : std::uint8_t { Fixed0, Fixed1, Free };
  Kind kind = Kind::Free;
  int group = 0;  // only meaningful for Free cells

  friend bool operator==(const CellConstraint&, const CellConstraint&) = default;
};

// Per (pattern, item) tags. Free cells in the same (item, group) share a value.
class CentroidConstraint {
 public:
  CentroidConstraint(int num_attributes, std::size_t num_items,
                     std::vector<CellConstraint> cells,
                     std::vector<int> groups_per_item);

  int num_attributes() const { return num_attributes_; }
  std::size_t num_items() const { return num_items_; }
  const CellConstraint& operator()(PatternIndex pattern, std::size_t j) const {
    return cells_[pattern * num_items_ + j];
  }
  int num_groups(std::size_t j) const { return groups_per_item_[j]; }

 private:
  int num_attributes_;
  std::size_t num_items_;
  std::vector<CellConstraint> cells_;
  std::vector<int> groups_per_item_;
};

enum class IdealKind { Dina, Dino };

// Every cell fixed to the ideal response (NPC centroids).
CentroidConstraint ideal_constraints(const QMatrix& q, IdealKind ideal);
// Fixed(1) for dominating patterns, Fixed(0) for disjoint ones, a singleton
// free group per remaining pattern.
CentroidConstraint gnpc_constraints(const QMatrix& q);
// All cells free, grouped by the model's equivalence classes.
CentroidConstraint model_constraints(const QMatrix& q, ModelKind model);

double gnpc_weighted_ideal(double weight, int ideal_dina_value,
                           int ideal_dino_value);

}  // namespace cdm
