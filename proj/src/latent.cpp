#include "cdm/latent.hpp"

#include <bit>

namespace cdm {

void check_num_attributes(int num_attributes) {
  if (num_attributes < 1 || num_attributes > kMaxAttributes) {
    throw std::out_of_range("number of attributes must be in [1, " +
                            std::to_string(kMaxAttributes) + "], got " +
                            std::to_string(num_attributes));
  }
}

AttributePattern::AttributePattern(std::span<const std::uint8_t> bits)
    : num_attributes_(static_cast<int>(bits.size())) {
  check_num_attributes(num_attributes_);
  for (std::size_t k = 0; k < bits.size(); ++k) {
    if (bits[k] > 1) throw std::invalid_argument("attribute must be 0 or 1");
    mask_ |= static_cast<std::uint32_t>(bits[k]) << k;
  }
}

AttributePattern::AttributePattern(std::initializer_list<int> bits)
    : num_attributes_(static_cast<int>(bits.size())) {
  check_num_attributes(num_attributes_);
  int k = 0;
  for (int b : bits) {
    if (b != 0 && b != 1) throw std::invalid_argument("attribute must be 0 or 1");
    mask_ |= static_cast<std::uint32_t>(b) << k++;
  }
}

AttributePattern AttributePattern::from_index(PatternIndex index,
                                              int num_attributes) {
  check_num_attributes(num_attributes);
  if (index >= num_patterns(num_attributes)) {
    throw std::out_of_range("pattern index " + std::to_string(index) +
                            " out of range for K=" +
                            std::to_string(num_attributes));
  }
  AttributePattern p;
  p.mask_ = index;
  p.num_attributes_ = num_attributes;
  return p;
}

int AttributePattern::popcount() const { return std::popcount(mask_); }

std::vector<std::uint8_t> AttributePattern::bits() const {
  std::vector<std::uint8_t> out(static_cast<std::size_t>(num_attributes_));
  for (int k = 0; k < num_attributes_; ++k) {
    out[static_cast<std::size_t>(k)] = static_cast<std::uint8_t>((*this)[k]);
  }
  return out;
}

std::string AttributePattern::to_string() const {
  std::string s(static_cast<std::size_t>(num_attributes_), '0');
  for (int k = 0; k < num_attributes_; ++k) {
    if ((*this)[k]) s[static_cast<std::size_t>(k)] = '1';
  }
  return s;
}

PatternIndex pattern_to_index(const AttributePattern& pattern) {
  return pattern.index();
}

AttributePattern index_to_pattern(PatternIndex index, int num_attributes) {
  return AttributePattern::from_index(index, num_attributes);
}

namespace {

std::uint32_t q_row_mask(const AttributePattern& pattern,
                         std::span<const std::uint8_t> q_row) {
  if (static_cast<int>(q_row.size()) != pattern.size()) {
    throw DimensionError("pattern has " + std::to_string(pattern.size()) +
                         " attributes but q-row has " +
                         std::to_string(q_row.size()));
  }
  std::uint32_t mask = 0;
  for (std::size_t k = 0; k < q_row.size(); ++k) {
    if (q_row[k]) mask |= 1u << k;
  }
  return mask;
}

}  // namespace

bool dominates(const AttributePattern& pattern,
               std::span<const std::uint8_t> q_row) {
  const std::uint32_t q = q_row_mask(pattern, q_row);
  return (pattern.mask() & q) == q;
}

bool disjoint(const AttributePattern& pattern,
              std::span<const std::uint8_t> q_row) {
  return (pattern.mask() & q_row_mask(pattern, q_row)) == 0;
}

BinaryMatrix::BinaryMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), entries_(rows * cols, 0) {}

BinaryMatrix::BinaryMatrix(std::size_t rows, std::size_t cols,
                           std::vector<std::uint8_t> entries)
    : rows_(rows), cols_(cols), entries_(std::move(entries)) {
  if (entries_.size() != rows_ * cols_) {
    throw DimensionError("binary matrix storage does not match " +
                         std::to_string(rows_) + "x" + std::to_string(cols_));
  }
  for (auto e : entries_) {
    if (e > 1) throw std::invalid_argument("binary matrix entry must be 0 or 1");
  }
}

BinaryMatrix::BinaryMatrix(
    std::initializer_list<std::initializer_list<int>> rows)
    : rows_(rows.size()), cols_(rows.size() ? rows.begin()->size() : 0) {
  entries_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw DimensionError("ragged binary matrix rows");
    for (int v : r) {
      if (v != 0 && v != 1) {
        throw std::invalid_argument("binary matrix entry must be 0 or 1");
      }
      entries_.push_back(static_cast<std::uint8_t>(v));
    }
  }
}

QMatrix::QMatrix(BinaryMatrix entries) : entries_(std::move(entries)) {
  check_num_attributes(static_cast<int>(entries_.cols()));
  if (entries_.rows() == 0) throw std::invalid_argument("Q-matrix has no items");
  masks_.resize(entries_.rows());
  for (std::size_t j = 0; j < entries_.rows(); ++j) {
    std::uint32_t mask = 0;
    for (std::size_t k = 0; k < entries_.cols(); ++k) {
      if (entries_(j, k)) mask |= 1u << k;
    }
    if (mask == 0) {
      throw std::invalid_argument("Q-matrix row " + std::to_string(j + 1) +
                                  " requires no attribute");
    }
    masks_[j] = mask;
  }
}

int QMatrix::required_count(std::size_t j) const {
  return std::popcount(masks_[j]);
}

std::vector<int> QMatrix::required_attributes(std::size_t j) const {
  std::vector<int> out;
  for (int k = 0; k < num_attributes(); ++k) {
    if ((masks_[j] >> k) & 1u) out.push_back(k);
  }
  return out;
}

ResponseMatrix::ResponseMatrix(BinaryMatrix entries)
    : entries_(std::move(entries)) {}

PatternAssignment::PatternAssignment(std::vector<PatternIndex> assignment,
                                     int num_attributes)
    : assignment_(std::move(assignment)), num_attributes_(num_attributes) {
  check_num_attributes(num_attributes);
  const auto limit = num_patterns(num_attributes);
  for (auto a : assignment_) {
    if (a >= limit) {
      throw std::out_of_range("assigned pattern index " + std::to_string(a) +
                              " out of range for K=" +
                              std::to_string(num_attributes));
    }
  }
}

std::vector<std::size_t> class_counts(const PatternAssignment& assignment) {
  std::vector<std::size_t> counts(num_patterns(assignment.num_attributes()), 0);
  for (auto a : assignment.values()) ++counts[a];
  return counts;
}

EquivalenceClasses::EquivalenceClasses(std::vector<std::vector<int>> group_of,
                                       std::vector<int> group_counts)
    : group_of_(std::move(group_of)), group_counts_(std::move(group_counts)) {}

std::vector<PatternIndex> EquivalenceClasses::members(std::size_t j,
                                                      int g) const {
  std::vector<PatternIndex> out;
  const auto& groups = group_of_[j];
  for (std::size_t p = 0; p < groups.size(); ++p) {
    if (groups[p] == g) out.push_back(static_cast<PatternIndex>(p));
  }
  return out;
}

std::uint32_t sub_pattern(std::uint32_t pattern_mask, std::uint32_t q_mask) {
  std::uint32_t out = 0;
  int bit = 0;
  while (q_mask) {
    const std::uint32_t low = q_mask & (~q_mask + 1u);
    if (pattern_mask & low) out |= 1u << bit;
    ++bit;
    q_mask &= q_mask - 1u;
  }
  return out;
}

EquivalenceClasses equivalence_classes(const QMatrix& q, ModelKind model) {
  const std::size_t num_items = q.num_items();
  const std::size_t patterns = num_patterns(q.num_attributes());
  std::vector<std::vector<int>> group_of(num_items, std::vector<int>(patterns));
  std::vector<int> counts(num_items);
  for (std::size_t j = 0; j < num_items; ++j) {
    const std::uint32_t qm = q.row_mask(j);
    for (std::size_t p = 0; p < patterns; ++p) {
      const auto pm = static_cast<std::uint32_t>(p);
      group_of[j][p] = model == ModelKind::Dina
                           ? static_cast<int>((pm & qm) == qm)
                           : static_cast<int>(sub_pattern(pm, qm));
    }
    counts[j] = model == ModelKind::Dina ? 2 : (1 << q.required_count(j));
  }
  return EquivalenceClasses(std::move(group_of), std::move(counts));
}

}  // namespace cdm
