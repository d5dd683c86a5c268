#include "cdm/ideal_response.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

namespace cdm {

namespace {

constexpr double kProbabilitySlack = 1e-12;

std::uint32_t mask_of(std::span<const std::uint8_t> q_row,
                      const AttributePattern& pattern) {
  if (static_cast<int>(q_row.size()) != pattern.size()) {
    throw DimensionError("q-row length " + std::to_string(q_row.size()) +
                         " does not match K=" + std::to_string(pattern.size()));
  }
  std::uint32_t m = 0;
  for (std::size_t k = 0; k < q_row.size(); ++k) {
    if (q_row[k]) m |= 1u << k;
  }
  return m;
}

void check_probability(double p, const char* what) {
  if (!(p >= -kProbabilitySlack && p <= 1.0 + kProbabilitySlack)) {
    throw InvalidParameter(std::string(what) + " " + std::to_string(p) +
                           " outside [0, 1]");
  }
}

}  // namespace

int ideal_dina(std::span<const std::uint8_t> q_row,
               const AttributePattern& pattern) {
  return ideal_dina_mask(mask_of(q_row, pattern), pattern.mask());
}

int ideal_dino(std::span<const std::uint8_t> q_row,
               const AttributePattern& pattern) {
  return ideal_dino_mask(mask_of(q_row, pattern), pattern.mask());
}

void validate(const DinaItemParams& params) {
  check_probability(params.slip, "slipping parameter");
  check_probability(params.guess, "guessing parameter");
}

double dina_theta(const DinaItemParams& params, int ideal) {
  return ideal ? 1.0 - params.slip : params.guess;
}

GdinaItemParams::GdinaItemParams(std::uint32_t q_mask,
                                 std::vector<double> probabilities)
    : q_mask_(q_mask), probabilities_(std::move(probabilities)) {
  if (q_mask_ == 0) throw std::invalid_argument("GDINA item requires no attribute");
  const std::size_t expected = std::size_t{1} << std::popcount(q_mask_);
  if (probabilities_.size() != expected) {
    throw DimensionError("GDINA item measuring " +
                         std::to_string(std::popcount(q_mask_)) +
                         " attributes needs " + std::to_string(expected) +
                         " probabilities, got " +
                         std::to_string(probabilities_.size()));
  }
  for (double p : probabilities_) check_probability(p, "GDINA probability");
}

GdinaItemParams GdinaItemParams::from_betas(std::uint32_t q_mask,
                                            std::vector<double> betas) {
  const std::size_t n = betas.size();
  if (n != (std::size_t{1} << std::popcount(q_mask))) {
    throw DimensionError("beta vector length does not match |K_j|");
  }
  // Zeta transform: P(T) = sum_{S subset T} beta_S.
  std::vector<double> probs(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t s = t;; s = (s - 1) & t) {
      probs[t] += betas[s];
      if (s == 0) break;
    }
  }
  for (double p : probs) check_probability(p, "implied GDINA probability");
  return GdinaItemParams(q_mask, std::move(probs));
}

int GdinaItemParams::required_count() const { return std::popcount(q_mask_); }

std::vector<double> GdinaItemParams::betas() const {
  const std::size_t n = probabilities_.size();
  std::vector<double> betas(n, 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    const int size_s = std::popcount(static_cast<unsigned>(s));
    for (std::size_t t = s;; t = (t - 1) & s) {
      const int size_t_ = std::popcount(static_cast<unsigned>(t));
      betas[s] += ((size_s - size_t_) % 2 ? -1.0 : 1.0) * probabilities_[t];
      if (t == 0) break;
    }
  }
  return betas;
}

double gdina_theta(const GdinaItemParams& params,
                   const AttributePattern& pattern) {
  const std::uint32_t mastered = sub_pattern(pattern.mask(), params.q_mask());
  const auto betas = params.betas();
  double theta = 0.0;
  for (std::uint32_t s = mastered;; s = (s - 1) & mastered) {
    theta += betas[s];
    if (s == 0) break;
  }
  check_probability(theta, "GDINA success probability");
  return std::clamp(theta, 0.0, 1.0);
}

ThetaTable dina_theta_table(const QMatrix& q,
                            std::span<const DinaItemParams> items) {
  if (items.size() != q.num_items()) {
    throw DimensionError("DINA parameter count does not match Q-matrix items");
  }
  ThetaTable table{q.num_attributes(), q.num_items(), {}};
  const auto patterns = num_patterns(q.num_attributes());
  table.values.resize(patterns * q.num_items());
  for (std::size_t p = 0; p < patterns; ++p) {
    for (std::size_t j = 0; j < q.num_items(); ++j) {
      validate(items[j]);
      table(static_cast<PatternIndex>(p), j) = dina_theta(
          items[j], ideal_dina_mask(q.row_mask(j), static_cast<std::uint32_t>(p)));
    }
  }
  return table;
}

ThetaTable gdina_theta_table(const QMatrix& q,
                             std::span<const GdinaItemParams> items) {
  if (items.size() != q.num_items()) {
    throw DimensionError("GDINA parameter count does not match Q-matrix items");
  }
  ThetaTable table{q.num_attributes(), q.num_items(), {}};
  const auto patterns = num_patterns(q.num_attributes());
  table.values.resize(patterns * q.num_items());
  for (std::size_t j = 0; j < q.num_items(); ++j) {
    if (items[j].q_mask() != q.row_mask(j)) {
      throw DimensionError("GDINA item " + std::to_string(j + 1) +
                           " measures different attributes than its Q row");
    }
    for (std::size_t p = 0; p < patterns; ++p) {
      table(static_cast<PatternIndex>(p), j) = gdina_theta(
          items[j], AttributePattern::from_index(static_cast<PatternIndex>(p),
                                                 q.num_attributes()));
    }
  }
  return table;
}

GdinaTable gdina_table_small_noise() {
  return {
      {0.2, 0.9},
      {0.1, 0.8},
      {0.1, 0.9},
      {0.2, 0.5, 0.4, 0.9},
      {0.1, 0.3, 0.5, 0.9},
      {0.1, 0.2, 0.6, 0.8},
      {0.1, 0.2, 0.3, 0.4, 0.4, 0.5, 0.7, 0.9},
  };
}

GdinaTable gdina_table_large_noise() {
  return {
      {0.3, 0.7},
      {0.3, 0.8},
      {0.3, 0.4, 0.7, 0.8},
      {0.3, 0.4, 0.6, 0.7},
      {0.2, 0.3, 0.6, 0.7},
      {0.2, 0.3, 0.3, 0.4, 0.4, 0.5, 0.6, 0.7},
  };
}

std::vector<GdinaItemParams> assign_gdina_rows(const QMatrix& q,
                                               const GdinaTable& table) {
  std::vector<std::vector<std::size_t>> rows_by_count(kMaxAttributes + 1);
  for (std::size_t r = 0; r < table.size(); ++r) {
    const std::size_t n = table[r].size();
    if (n < 2 || !std::has_single_bit(n)) {
      throw std::invalid_argument("GDINA table row " + std::to_string(r + 1) +
                                  " must hold a power-of-two count >= 2");
    }
    const int m = std::countr_zero(n);
    if (m > kMaxAttributes) throw std::invalid_argument("GDINA table row too long");
    rows_by_count[static_cast<std::size_t>(m)].push_back(r);
  }
  std::vector<std::size_t> next(kMaxAttributes + 1, 0);
  std::vector<GdinaItemParams> items;
  items.reserve(q.num_items());
  for (std::size_t j = 0; j < q.num_items(); ++j) {
    const auto m = static_cast<std::size_t>(q.required_count(j));
    const auto& candidates = rows_by_count[m];
    if (candidates.empty()) {
      throw std::invalid_argument("GDINA table has no row for items measuring " +
                                  std::to_string(m) + " attributes");
    }
    const std::size_t row = candidates[next[m]++ % candidates.size()];
    items.emplace_back(q.row_mask(j), table[row]);
  }
  return items;
}

CentroidConstraint::CentroidConstraint(int num_attributes,
                                       std::size_t num_items,
                                       std::vector<CellConstraint> cells,
                                       std::vector<int> groups_per_item)
    : num_attributes_(num_attributes),
      num_items_(num_items),
      cells_(std::move(cells)),
      groups_per_item_(std::move(groups_per_item)) {
  if (cells_.size() != num_patterns(num_attributes) * num_items_ ||
      groups_per_item_.size() != num_items_) {
    throw DimensionError("centroid constraint shape mismatch");
  }
}

CentroidConstraint ideal_constraints(const QMatrix& q, IdealKind ideal) {
  const auto patterns = num_patterns(q.num_attributes());
  const std::size_t items = q.num_items();
  std::vector<CellConstraint> cells(patterns * items);
  for (std::size_t p = 0; p < patterns; ++p) {
    for (std::size_t j = 0; j < items; ++j) {
      const auto pm = static_cast<std::uint32_t>(p);
      const int eta = ideal == IdealKind::Dina
                          ? ideal_dina_mask(q.row_mask(j), pm)
                          : ideal_dino_mask(q.row_mask(j), pm);
      cells[p * items + j].kind =
          eta ? CellConstraint::Kind::Fixed1 : CellConstraint::Kind::Fixed0;
    }
  }
  return CentroidConstraint(q.num_attributes(), items, std::move(cells),
                            std::vector<int>(items, 0));
}

CentroidConstraint gnpc_constraints(const QMatrix& q) {
  const auto patterns = num_patterns(q.num_attributes());
  const std::size_t items = q.num_items();
  std::vector<CellConstraint> cells(patterns * items);
  std::vector<int> groups(items, 0);
  for (std::size_t j = 0; j < items; ++j) {
    const std::uint32_t qm = q.row_mask(j);
    for (std::size_t p = 0; p < patterns; ++p) {
      const auto pm = static_cast<std::uint32_t>(p);
      auto& cell = cells[p * items + j];
      if ((pm & qm) == qm) {
        cell.kind = CellConstraint::Kind::Fixed1;
      } else if ((pm & qm) == 0) {
        cell.kind = CellConstraint::Kind::Fixed0;
      } else {
        cell.kind = CellConstraint::Kind::Free;
        cell.group = groups[j]++;
      }
    }
  }
  return CentroidConstraint(q.num_attributes(), items, std::move(cells),
                            std::move(groups));
}

CentroidConstraint model_constraints(const QMatrix& q, ModelKind model) {
  const auto classes = equivalence_classes(q, model);
  const auto patterns = num_patterns(q.num_attributes());
  const std::size_t items = q.num_items();
  std::vector<CellConstraint> cells(patterns * items);
  std::vector<int> groups(items);
  for (std::size_t j = 0; j < items; ++j) {
    groups[j] = classes.num_groups(j);
    for (std::size_t p = 0; p < patterns; ++p) {
      cells[p * items + j] = {CellConstraint::Kind::Free,
                              classes.group(j, static_cast<PatternIndex>(p))};
    }
  }
  return CentroidConstraint(q.num_attributes(), items, std::move(cells),
                            std::move(groups));
}

double gnpc_weighted_ideal(double weight, int ideal_dina_value,
                           int ideal_dino_value) {
  if (!(weight >= 0.0 && weight <= 1.0)) {
    throw std::invalid_argument("GNPC weight " + std::to_string(weight) +
                                " outside [0, 1]");
  }
  return weight * ideal_dina_value + (1.0 - weight) * ideal_dino_value;
}

}  // namespace cdm
