#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace cdm {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;  // measured values
  double seconds = 0.0;
};

// Sizes default to the full acceptance workload; tests pass smaller ones.
namespace checks {

CheckResult loss_monotonicity(int instances = 100, std::uint64_t seed = 101);
CheckResult npc_l1_l2_equivalence(int subjects = 1000, std::uint64_t seed = 102);
CheckResult oracle_equivalence(int cases = 10000, std::uint64_t seed = 103);
CheckResult disjoint_class_gap();
CheckResult kl_lower_bound(int pairs = 10000, std::uint64_t seed = 105);
CheckResult centroid_consistency(int reps = 100, std::uint64_t seed = 106);
CheckResult par_trend_in_items(int reps = 100, std::uint64_t seed = 107,
                               unsigned threads = 1);
CheckResult npc_beats_gnpc_high_noise(int reps = 100, std::uint64_t seed = 108,
                                      unsigned threads = 1);
CheckResult gnpc_beats_npc_gdina(int reps = 100, std::uint64_t seed = 109,
                                 unsigned threads = 1);
CheckResult em_correctness(int instances = 50, std::uint64_t seed = 110);
CheckResult mvn_marginals(std::size_t subjects = 100000, std::uint64_t seed = 111);
CheckResult cmle_likelihood_identity(int fits = 50, std::uint64_t seed = 112);

CheckResult true_pattern_minimizes_expected_loss(int tables = 200,
                                                 std::uint64_t seed = 113);
CheckResult gnpc_separation_condition(int pairs = 10000, std::uint64_t seed = 114);

}  // namespace checks

// Suite names: losses, algorithm, theory, all. Throws std::invalid_argument
// for anything else.
std::vector<CheckResult> run_suite(std::string_view suite);

// One line per check; returns true iff every check passed.
bool print_report(const std::vector<CheckResult>& results, std::ostream& out);

}  // namespace cdm
