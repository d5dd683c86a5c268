#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "cdm/estimators.hpp"
#include "cdm/ideal_response.hpp"
#include "cdm/latent.hpp"
#include "cdm/random.hpp"

namespace cdm {

struct AttributeDistribution {
  enum class Kind { Uniform, MvnThreshold };
  Kind kind = Kind::Uniform;
  double correlation = 0.0;  // MvnThreshold only, in [0, 1)

  static AttributeDistribution uniform() { return {}; }
  static AttributeDistribution mvn_threshold(double r);
  std::string label() const;  // "uniform" or "mvn"
};

// Uniform: i.i.d. pattern indices. MvnThreshold: equicorrelated normals from
// one shared factor, attribute k (1-based) mastered when
// z_k >= Phi^{-1}(k / (K + 1)).
// One draw of the equicorrelated standard normals behind MvnThreshold:
// z_k = sqrt(r) w_0 + sqrt(1 - r) w_k, so cov(z_k, z_l) = r for k != l.
void draw_mvn_latent(double correlation, Rng& rng, std::span<double> out);

PatternAssignment gen_patterns(const AttributeDistribution& dist,
                               int num_attributes, std::size_t num_subjects,
                               Rng& rng);

// Two stacked identity blocks, then rows drawn uniformly from the nonzero
// patterns with at most min(K, 3) attributes.
QMatrix gen_qmatrix(int num_attributes, std::size_t num_items, Rng& rng);

struct ItemModel {
  enum class Kind { Dina, Gdina };
  Kind kind = Kind::Dina;
  double slip = 0.1;
  double guess = 0.1;
  std::string table_name;  // "small", "large", or a file path
  GdinaTable table;

  static ItemModel dina(double slip, double guess);
  static ItemModel gdina(std::string name, GdinaTable table);
  // "small" and "large" resolve to the built-in tables.
  static ItemModel gdina_named(const std::string& name);
  std::string noise_label() const;
};

ThetaTable theta_table(const ItemModel& model, const QMatrix& q);

ResponseMatrix gen_responses(const PatternAssignment& patterns,
                             const ThetaTable& theta, Rng& rng);
ResponseMatrix gen_responses(const PatternAssignment& patterns,
                             const QMatrix& q, const ItemModel& model,
                             Rng& rng);

struct SimulatedData {
  QMatrix q;
  PatternAssignment truth;
  ThetaTable theta;
  ResponseMatrix x;
};

SimulatedData simulate(int num_attributes, std::size_t num_items,
                       std::size_t num_subjects,
                       const AttributeDistribution& dist,
                       const ItemModel& model, Rng& rng);

struct ExperimentCell {
  int k = 3;
  std::size_t j = 30;
  std::size_t n = 500;
  AttributeDistribution dist;
  ItemModel model;
};

struct ExperimentConfig {
  std::vector<int> k{3};
  std::vector<std::size_t> j{30};
  std::vector<std::size_t> n{500};
  std::vector<AttributeDistribution> dists{AttributeDistribution::uniform()};
  std::vector<ItemModel> models{ItemModel::dina(0.1, 0.1)};
  std::vector<std::string> estimators{"npc", "gnpc", "jmle-dina", "cmle-dina",
                                      "mmle-dina"};
  int replications = 100;
  std::uint64_t seed = 1;
  // Start the iterative estimators from the true memberships instead of NPC.
  bool start_from_truth = false;

  std::vector<ExperimentCell> cells() const;
};

// Thrown for configs that violate the documented schema.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

ExperimentConfig parse_experiment_config(const std::string& json_text);

std::uint64_t cell_seed(std::uint64_t master_seed, const ExperimentCell& cell);
std::uint64_t replication_seed(std::uint64_t master_seed,
                               const ExperimentCell& cell, int replication);

struct ExperimentRow {
  ExperimentCell cell;
  std::string estimator;
  double mean_par = 0.0;
  double se_par = 0.0;
  double mean_aar = 0.0;
  double se_aar = 0.0;
  int reps = 0;  // successful replications
  int failures = 0;
};

// Every (cell, replication) pair is an independent task; results are
// aggregated in a fixed order so output does not depend on thread count.
std::vector<ExperimentRow> run_experiment(const ExperimentConfig& config,
                                          unsigned threads = 1);

void write_experiment_csv(const std::vector<ExperimentRow>& rows,
                          std::uint64_t master_seed, std::ostream& out);

}  // namespace cdm
