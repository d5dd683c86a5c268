#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cdm {

// Raised when two inputs disagree on a dimension (K, J or N). Kept distinct
// from other invalid input so the CLI can report it with its own exit code.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr int kMaxAttributes = 15;

using PatternIndex = std::uint32_t;

inline std::size_t num_patterns(int num_attributes) {
  return std::size_t{1} << num_attributes;
}

void check_num_attributes(int num_attributes);

// Binary mastery profile. Attribute k (0-based) is bit k of the index, so the
// first attribute is the least-significant bit.
class AttributePattern {
 public:
  AttributePattern() = default;
  explicit AttributePattern(std::span<const std::uint8_t> bits);
  AttributePattern(std::initializer_list<int> bits);

  static AttributePattern from_index(PatternIndex index, int num_attributes);

  PatternIndex index() const { return mask_; }
  std::uint32_t mask() const { return mask_; }
  int size() const { return num_attributes_; }
  int operator[](int k) const { return static_cast<int>((mask_ >> k) & 1u); }
  int popcount() const;
  std::vector<std::uint8_t> bits() const;

  // Human-readable form: first attribute leftmost, e.g. "100" for (1,0,0).
  std::string to_string() const;

  friend bool operator==(const AttributePattern&,
                         const AttributePattern&) = default;

 private:
  std::uint32_t mask_ = 0;
  int num_attributes_ = 0;
};

PatternIndex pattern_to_index(const AttributePattern& pattern);
AttributePattern index_to_pattern(PatternIndex index, int num_attributes);

bool dominates(const AttributePattern& pattern,
               std::span<const std::uint8_t> q_row);
bool disjoint(const AttributePattern& pattern,
              std::span<const std::uint8_t> q_row);

// Row-major dense 0/1 matrix.
class BinaryMatrix {
 public:
  BinaryMatrix() = default;
  BinaryMatrix(std::size_t rows, std::size_t cols);
  BinaryMatrix(std::size_t rows, std::size_t cols,
               std::vector<std::uint8_t> entries);
  BinaryMatrix(std::initializer_list<std::initializer_list<int>> rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::uint8_t operator()(std::size_t r, std::size_t c) const {
    return entries_[r * cols_ + c];
  }
  std::uint8_t& operator()(std::size_t r, std::size_t c) {
    return entries_[r * cols_ + c];
  }
  std::span<const std::uint8_t> row(std::size_t r) const {
    return {entries_.data() + r * cols_, cols_};
  }
  const std::vector<std::uint8_t>& entries() const { return entries_; }

  friend bool operator==(const BinaryMatrix&, const BinaryMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::uint8_t> entries_;
};

// J x K structure matrix. Every row must require at least one attribute.
class QMatrix {
 public:
  QMatrix() = default;
  explicit QMatrix(BinaryMatrix entries);
  QMatrix(std::initializer_list<std::initializer_list<int>> rows)
      : QMatrix(BinaryMatrix(rows)) {}

  std::size_t num_items() const { return entries_.rows(); }
  int num_attributes() const { return static_cast<int>(entries_.cols()); }
  std::span<const std::uint8_t> row(std::size_t j) const {
    return entries_.row(j);
  }
  std::uint32_t row_mask(std::size_t j) const { return masks_[j]; }
  // |K_j|
  int required_count(std::size_t j) const;
  // Attribute indices k with q_jk = 1, ascending.
  std::vector<int> required_attributes(std::size_t j) const;
  const BinaryMatrix& entries() const { return entries_; }

 private:
  BinaryMatrix entries_;
  std::vector<std::uint32_t> masks_;
};

// N x J observed responses.
class ResponseMatrix {
 public:
  ResponseMatrix() = default;
  explicit ResponseMatrix(BinaryMatrix entries);
  ResponseMatrix(std::initializer_list<std::initializer_list<int>> rows)
      : ResponseMatrix(BinaryMatrix(rows)) {}

  std::size_t num_subjects() const { return entries_.rows(); }
  std::size_t num_items() const { return entries_.cols(); }
  std::uint8_t operator()(std::size_t i, std::size_t j) const {
    return entries_(i, j);
  }
  std::span<const std::uint8_t> row(std::size_t i) const {
    return entries_.row(i);
  }
  const BinaryMatrix& entries() const { return entries_; }

 private:
  BinaryMatrix entries_;
};

// Latent pattern index per subject (the membership matrix A).
class PatternAssignment {
 public:
  PatternAssignment() = default;
  PatternAssignment(std::vector<PatternIndex> assignment, int num_attributes);

  std::size_t size() const { return assignment_.size(); }
  int num_attributes() const { return num_attributes_; }
  PatternIndex operator[](std::size_t i) const { return assignment_[i]; }
  const std::vector<PatternIndex>& values() const { return assignment_; }

  friend bool operator==(const PatternAssignment&,
                         const PatternAssignment&) = default;

 private:
  std::vector<PatternIndex> assignment_;
  int num_attributes_ = 0;
};

std::vector<std::size_t> class_counts(const PatternAssignment& assignment);

enum class ModelKind { Dina, Gdina };

// Per-item partition of the 2^K patterns into groups sharing one centroid.
class EquivalenceClasses {
 public:
  EquivalenceClasses(std::vector<std::vector<int>> group_of,
                     std::vector<int> group_counts);

  std::size_t num_items() const { return group_of_.size(); }
  int num_groups(std::size_t j) const { return group_counts_[j]; }
  int group(std::size_t j, PatternIndex pattern) const {
    return group_of_[j][pattern];
  }
  std::span<const int> groups_for_item(std::size_t j) const {
    return group_of_[j];
  }
  // Patterns in group g of item j, ascending.
  std::vector<PatternIndex> members(std::size_t j, int g) const;

 private:
  std::vector<std::vector<int>> group_of_;
  std::vector<int> group_counts_;
};

// DINA: group 1 = {alpha dominating q_j}, group 0 = the rest.
// GDINA: group id = sub-pattern index of alpha restricted to K_j.
EquivalenceClasses equivalence_classes(const QMatrix& q, ModelKind model);

// Sub-pattern of alpha on the set K_j, packed with the lowest required
// attribute as the least-significant bit.
std::uint32_t sub_pattern(std::uint32_t pattern_mask, std::uint32_t q_mask);

}  // namespace cdm
