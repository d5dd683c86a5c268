#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <set>

#include "cdm/latent.hpp"
#include "cdm/random.hpp"

using namespace cdm;

TEST_CASE("pattern index encoding puts attribute 1 in the low bit") {
  CHECK(pattern_to_index(AttributePattern{0, 0, 0}) == 0);
  CHECK(pattern_to_index(AttributePattern{1, 0, 0}) == 1);
  CHECK(pattern_to_index(AttributePattern{0, 0, 1}) == 4);
  CHECK(AttributePattern{1, 0, 0}.to_string() == "100");
  CHECK(index_to_pattern(6, 3).to_string() == "011");
}

TEST_CASE("index and pattern maps are inverse for every K up to 10") {
  for (int k = 1; k <= 10; ++k) {
    for (PatternIndex i = 0; i < num_patterns(k); ++i) {
      const auto p = index_to_pattern(i, k);
      REQUIRE(pattern_to_index(p) == i);
      REQUIRE(AttributePattern(p.bits()) == p);
    }
  }
}

TEST_CASE("K outside [1, 15] is rejected") {
  CHECK_THROWS_AS(check_num_attributes(0), std::out_of_range);
  CHECK_THROWS_AS(check_num_attributes(16), std::out_of_range);
  CHECK_NOTHROW(check_num_attributes(15));
  CHECK_THROWS_AS(index_to_pattern(8, 3), std::out_of_range);
}

TEST_CASE("dominates and disjoint") {
  const std::vector<std::uint8_t> q{1, 1, 0};
  CHECK(dominates(AttributePattern{1, 1, 1}, q));
  CHECK_FALSE(dominates(AttributePattern{0, 0, 1}, q));
  CHECK(dominates(AttributePattern{1, 1, 0}, q));
  CHECK(disjoint(AttributePattern{0, 0, 1}, q));
  CHECK_FALSE(disjoint(AttributePattern{1, 0, 0}, q));
  CHECK(disjoint(AttributePattern{0, 0, 0}, std::vector<std::uint8_t>{1, 1, 1}));
  CHECK_THROWS_AS(dominates(AttributePattern{1, 0}, q), DimensionError);
}

TEST_CASE("dominating and disjoint at once only for a zero row") {
  for (std::uint32_t qm = 1; qm < 16; ++qm) {
    std::vector<std::uint8_t> q(4);
    for (int b = 0; b < 4; ++b) q[static_cast<std::size_t>(b)] = (qm >> b) & 1u;
    for (PatternIndex a = 0; a < 16; ++a) {
      const auto p = index_to_pattern(a, 4);
      CHECK_FALSE((dominates(p, q) && disjoint(p, q)));
    }
  }
}

TEST_CASE("Q-matrix validation") {
  CHECK_THROWS_AS(QMatrix({{1, 0}, {0, 0}}), std::invalid_argument);
  CHECK_THROWS(QMatrix({{1, 0}, {0, 2}}));
  const QMatrix q{{1, 0, 1}, {0, 1, 0}};
  CHECK(q.num_items() == 2);
  CHECK(q.num_attributes() == 3);
  CHECK(q.row_mask(0) == 0b101);
  CHECK(q.required_count(0) == 2);
  CHECK(q.required_attributes(0) == std::vector<int>{0, 2});
}

TEST_CASE("class counts") {
  CHECK(class_counts(PatternAssignment({0, 0, 1, 3}, 2)) ==
        std::vector<std::size_t>{2, 1, 0, 1});
  CHECK(class_counts(PatternAssignment({}, 2)) == std::vector<std::size_t>{0, 0, 0, 0});
  CHECK_THROWS(PatternAssignment({4}, 2));

  Rng rng(7);
  std::vector<PatternIndex> draws(100000);
  for (auto& d : draws) d = static_cast<PatternIndex>(rng.uniform_int(8));
  for (auto c : class_counts(PatternAssignment(draws, 3))) {
    CHECK(std::abs(static_cast<double>(c) - 12500.0) <= 0.02 * 12500.0);
  }
}

TEST_CASE("DINA equivalence classes for a single-attribute item") {
  const QMatrix q{{1, 0}};
  const auto ec = equivalence_classes(q, ModelKind::Dina);
  CHECK(ec.num_groups(0) == 2);
  // {(0,0),(0,1)} and {(1,0),(1,1)}: indices {0, 2} and {1, 3}.
  CHECK(ec.members(0, 0) == std::vector<PatternIndex>{0, 2});
  CHECK(ec.members(0, 1) == std::vector<PatternIndex>{1, 3});
}

TEST_CASE("DINA with an all-ones row isolates full mastery") {
  const QMatrix q{{1, 1, 1}};
  const auto ec = equivalence_classes(q, ModelKind::Dina);
  CHECK(ec.members(0, 1) == std::vector<PatternIndex>{7});
  CHECK(ec.members(0, 0).size() == 7);
}

TEST_CASE("GDINA groups are keyed by the restriction to the required set") {
  const QMatrix q{{1, 1, 0}};
  const auto ec = equivalence_classes(q, ModelKind::Gdina);
  REQUIRE(ec.num_groups(0) == 4);
  for (int g = 0; g < 4; ++g) {
    const auto m = ec.members(0, g);
    REQUIRE(m.size() == 2);
    CHECK((m[0] & 3u) == (m[1] & 3u));
  }
  CHECK(sub_pattern(0b101, 0b110) == 0b10);
  CHECK(sub_pattern(0b111, 0b101) == 0b11);
}

TEST_CASE("equivalence-class membership properties on random Q") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const int k = 1 + static_cast<int>(rng.uniform_int(5));
    BinaryMatrix m(6, static_cast<std::size_t>(k));
    for (std::size_t j = 0; j < 6; ++j) {
      const auto mask = 1 + rng.uniform_int(num_patterns(k) - 1);
      for (int b = 0; b < k; ++b) m(j, static_cast<std::size_t>(b)) = (mask >> b) & 1u;
    }
    const QMatrix q(m);
    const auto dina = equivalence_classes(q, ModelKind::Dina);
    const auto gdina = equivalence_classes(q, ModelKind::Gdina);
    for (std::size_t j = 0; j < q.num_items(); ++j) {
      const auto qm = q.row_mask(j);
      for (PatternIndex a = 0; a < num_patterns(k); ++a) {
        CHECK((dina.group(j, a) == 1) == ((a & qm) == qm));
        for (PatternIndex b = 0; b < num_patterns(k); ++b) {
          CHECK((gdina.group(j, a) == gdina.group(j, b)) == ((a & qm) == (b & qm)));
        }
      }
    }
  }
}
