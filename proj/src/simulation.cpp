#include "cdm/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <exception>
#include <limits>
#include <ostream>
#include <thread>

#include "json.hpp"

#include "cdm/io.hpp"
#include "cdm/metrics.hpp"

namespace cdm {

AttributeDistribution AttributeDistribution::mvn_threshold(double r) {
  if (!(r >= 0.0 && r < 1.0)) {
    throw std::invalid_argument("attribute correlation must be in [0, 1), got " +
                                std::to_string(r));
  }
  return {Kind::MvnThreshold, r};
}

std::string AttributeDistribution::label() const {
  return kind == Kind::Uniform ? "uniform" : "mvn";
}

void draw_mvn_latent(double correlation, Rng& rng, std::span<double> out) {
  const double shared = std::sqrt(correlation);
  const double own = std::sqrt(1.0 - correlation);
  const double w0 = rng.normal();
  for (auto& z : out) z = shared * w0 + own * rng.normal();
}

PatternAssignment gen_patterns(const AttributeDistribution& dist,
                               int num_attributes, std::size_t num_subjects,
                               Rng& rng) {
  check_num_attributes(num_attributes);
  std::vector<PatternIndex> out(num_subjects);
  if (dist.kind == AttributeDistribution::Kind::Uniform) {
    const auto m = num_patterns(num_attributes);
    for (auto& a : out) a = static_cast<PatternIndex>(rng.uniform_int(m));
    return PatternAssignment(std::move(out), num_attributes);
  }
  if (!(dist.correlation >= 0.0 && dist.correlation < 1.0)) {
    throw std::invalid_argument("attribute correlation must be in [0, 1)");
  }
  std::vector<double> cut(static_cast<std::size_t>(num_attributes));
  for (int k = 0; k < num_attributes; ++k) {
    cut[static_cast<std::size_t>(k)] =
        inverse_normal_cdf(static_cast<double>(k + 1) / (num_attributes + 1));
  }
  std::vector<double> z(static_cast<std::size_t>(num_attributes));
  for (auto& a : out) {
    draw_mvn_latent(dist.correlation, rng, z);
    PatternIndex p = 0;
    for (int k = 0; k < num_attributes; ++k) {
      if (z[static_cast<std::size_t>(k)] >= cut[static_cast<std::size_t>(k)]) p |= 1u << k;
    }
    a = p;
  }
  return PatternAssignment(std::move(out), num_attributes);
}

QMatrix gen_qmatrix(int num_attributes, std::size_t num_items, Rng& rng) {
  check_num_attributes(num_attributes);
  const auto k = static_cast<std::size_t>(num_attributes);
  if (num_items < 2 * k) {
    throw std::invalid_argument("need at least 2K = " + std::to_string(2 * k) +
                                " items, got " + std::to_string(num_items));
  }
  const int max_required = std::min(num_attributes, 3);
  std::vector<std::uint32_t> pool;
  for (std::uint32_t m = 1; m < num_patterns(num_attributes); ++m) {
    if (std::popcount(m) <= max_required) pool.push_back(m);
  }
  BinaryMatrix entries(num_items, k);
  for (std::size_t j = 0; j < num_items; ++j) {
    const std::uint32_t mask =
        j < 2 * k ? (1u << (j % k))
                  : pool[static_cast<std::size_t>(rng.uniform_int(pool.size()))];
    for (std::size_t b = 0; b < k; ++b) entries(j, b) = (mask >> b) & 1u;
  }
  return QMatrix(std::move(entries));
}

ItemModel ItemModel::dina(double slip, double guess) {
  validate(DinaItemParams{slip, guess});
  ItemModel m;
  m.kind = Kind::Dina;
  m.slip = slip;
  m.guess = guess;
  return m;
}

ItemModel ItemModel::gdina(std::string name, GdinaTable table) {
  ItemModel m;
  m.kind = Kind::Gdina;
  m.table_name = std::move(name);
  m.table = std::move(table);
  return m;
}

ItemModel ItemModel::gdina_named(const std::string& name) {
  if (name == "small") return gdina(name, gdina_table_small_noise());
  if (name == "large") return gdina(name, gdina_table_large_noise());
  return gdina(name, read_gdina_table(name));
}

namespace {

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

std::string ItemModel::noise_label() const {
  if (kind == Kind::Gdina) return table_name;
  if (slip == guess) return format_number(slip);
  return "s" + format_number(slip) + "/g" + format_number(guess);
}

ThetaTable theta_table(const ItemModel& model, const QMatrix& q) {
  if (model.kind == ItemModel::Kind::Dina) {
    std::vector<DinaItemParams> items(q.num_items(),
                                      DinaItemParams{model.slip, model.guess});
    return dina_theta_table(q, items);
  }
  const auto items = assign_gdina_rows(q, model.table);
  return gdina_theta_table(q, items);
}

ResponseMatrix gen_responses(const PatternAssignment& patterns,
                             const ThetaTable& theta, Rng& rng) {
  if (patterns.num_attributes() != theta.num_attributes) {
    throw DimensionError("pattern K does not match item parameter table");
  }
  BinaryMatrix x(patterns.size(), theta.num_items);
  for (std::size_t i = 0; i < patterns.size(); ++i) {
    for (std::size_t j = 0; j < theta.num_items; ++j) {
      const double p = theta(patterns[i], j);
      if (!(p >= 0.0 && p <= 1.0)) {
        throw InvalidParameter("item probability outside [0, 1]");
      }
      x(i, j) = rng.bernoulli(p) ? 1 : 0;
    }
  }
  return ResponseMatrix(std::move(x));
}

ResponseMatrix gen_responses(const PatternAssignment& patterns,
                             const QMatrix& q, const ItemModel& model,
                             Rng& rng) {
  return gen_responses(patterns, theta_table(model, q), rng);
}

SimulatedData simulate(int num_attributes, std::size_t num_items,
                       std::size_t num_subjects,
                       const AttributeDistribution& dist,
                       const ItemModel& model, Rng& rng) {
  auto q = gen_qmatrix(num_attributes, num_items, rng);
  auto truth = gen_patterns(dist, num_attributes, num_subjects, rng);
  auto theta = theta_table(model, q);
  auto x = gen_responses(truth, theta, rng);
  return SimulatedData{std::move(q), std::move(truth), std::move(theta),
                       std::move(x)};
}

std::vector<ExperimentCell> ExperimentConfig::cells() const {
  std::vector<ExperimentCell> out;
  for (int kk : k) {
    for (auto jj : j) {
      for (auto nn : n) {
        for (const auto& d : dists) {
          for (const auto& m : models) out.push_back({kk, jj, nn, d, m});
        }
      }
    }
  }
  return out;
}

namespace {

using nlohmann::json;

const json& require(const json& doc, const char* key) {
  if (!doc.contains(key)) {
    throw ConfigError(std::string("missing required key '") + key + "'");
  }
  return doc.at(key);
}

template <typename T>
std::vector<T> positive_int_list(const json& v, const char* key) {
  std::vector<T> out;
  auto take = [&](const json& e) {
    if (!e.is_number_integer() || e.get<long long>() <= 0) {
      throw ConfigError(std::string("'") + key +
                        "' must be a positive integer or a list of them");
    }
    out.push_back(static_cast<T>(e.get<long long>()));
  };
  if (v.is_array()) {
    if (v.empty()) throw ConfigError(std::string("'") + key + "' is empty");
    for (const auto& e : v) take(e);
  } else {
    take(v);
  }
  return out;
}

template <typename F>
void for_each_object(const json& v, const char* key, F&& f) {
  auto one = [&](const json& e) {
    if (!e.is_object()) {
      throw ConfigError(std::string("'") + key + "' entries must be objects");
    }
    f(e);
  };
  if (v.is_array()) {
    if (v.empty()) throw ConfigError(std::string("'") + key + "' is empty");
    for (const auto& e : v) one(e);
  } else {
    one(v);
  }
}

void reject_unknown(const json& obj, std::initializer_list<const char*> allowed,
                    const std::string& where) {
  for (const auto& [key, _] : obj.items()) {
    if (std::none_of(allowed.begin(), allowed.end(),
                     [&](const char* a) { return key == a; })) {
      throw ConfigError("unknown key '" + key + "' in " + where);
    }
  }
}

double number_in(const json& obj, const char* key, double lo, double hi) {
  const auto& v = require(obj, key);
  if (!v.is_number()) throw ConfigError(std::string("'") + key + "' must be a number");
  const double d = v.get<double>();
  if (!(d >= lo && d <= hi)) {
    throw ConfigError(std::string("'") + key + "' out of range");
  }
  return d;
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  reject_unknown(doc,
                 {"k", "j", "n", "reps", "seed", "dist", "model", "estimators",
                  "start_from_truth"},
                 "config");
  ExperimentConfig cfg;
  cfg.k = positive_int_list<int>(require(doc, "k"), "k");
  for (int k : cfg.k) {
    if (k > kMaxAttributes) throw ConfigError("'k' exceeds the supported maximum");
  }
  cfg.j = positive_int_list<std::size_t>(require(doc, "j"), "j");
  cfg.n = positive_int_list<std::size_t>(require(doc, "n"), "n");
  for (int k : cfg.k) {
    for (auto j : cfg.j) {
      if (j < 2 * static_cast<std::size_t>(k)) {
        throw ConfigError("'j' must be at least 2k for every grid cell");
      }
    }
  }
  const auto& reps = require(doc, "reps");
  if (!reps.is_number_integer() || reps.get<long long>() < 1) {
    throw ConfigError("'reps' must be an integer >= 1");
  }
  cfg.replications = static_cast<int>(reps.get<long long>());
  const auto& seed = require(doc, "seed");
  if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<long long>() >= 0)) {
    throw ConfigError("'seed' must be a non-negative integer");
  }
  cfg.seed = seed.get<std::uint64_t>();

  cfg.dists.clear();
  for_each_object(require(doc, "dist"), "dist", [&](const json& d) {
    reject_unknown(d, {"kind", "r"}, "dist");
    const auto& kind = require(d, "kind");
    if (kind == "uniform") {
      cfg.dists.push_back(AttributeDistribution::uniform());
    } else if (kind == "mvn") {
      const double r = number_in(d, "r", 0.0, 1.0);
      if (r >= 1.0) throw ConfigError("'r' must be below 1");
      cfg.dists.push_back(AttributeDistribution::mvn_threshold(r));
    } else {
      throw ConfigError("dist kind must be 'uniform' or 'mvn'");
    }
  });

  cfg.models.clear();
  for_each_object(require(doc, "model"), "model", [&](const json& m) {
    reject_unknown(m, {"kind", "s", "g", "table"}, "model");
    const auto& kind = require(m, "kind");
    if (kind == "dina") {
      const double s = number_in(m, "s", 0.0, 1.0);
      const double g = m.contains("g") ? number_in(m, "g", 0.0, 1.0) : s;
      cfg.models.push_back(ItemModel::dina(s, g));
    } else if (kind == "gdina") {
      const auto& table = require(m, "table");
      if (!table.is_string()) throw ConfigError("'table' must be a string");
      try {
        cfg.models.push_back(ItemModel::gdina_named(table.get<std::string>()));
      } catch (const std::exception& e) {
        throw ConfigError(std::string("cannot load GDINA table: ") + e.what());
      }
    } else {
      throw ConfigError("model kind must be 'dina' or 'gdina'");
    }
  });

  const auto& estimators = require(doc, "estimators");
  if (!estimators.is_array() || estimators.empty()) {
    throw ConfigError("'estimators' must be a non-empty list");
  }
  cfg.estimators.clear();
  for (const auto& e : estimators) {
    if (!e.is_string()) throw ConfigError("estimator names must be strings");
    try {
      EstimatorSpec::parse(e.get<std::string>());
    } catch (const std::exception& ex) {
      throw ConfigError(ex.what());
    }
    cfg.estimators.push_back(e.get<std::string>());
  }
  if (doc.contains("start_from_truth")) {
    if (!doc["start_from_truth"].is_boolean()) {
      throw ConfigError("'start_from_truth' must be a boolean");
    }
    cfg.start_from_truth = doc["start_from_truth"].get<bool>();
  }
  return cfg;
}

namespace {

std::uint64_t double_bits(double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  return bits;
}

std::uint64_t string_hash(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::uint64_t cell_seed(std::uint64_t master_seed, const ExperimentCell& cell) {
  std::uint64_t h = mix_seed(master_seed);
  h = combine_seed(h, static_cast<std::uint64_t>(cell.k));
  h = combine_seed(h, cell.j);
  h = combine_seed(h, cell.n);
  h = combine_seed(h, static_cast<std::uint64_t>(cell.dist.kind));
  h = combine_seed(h, double_bits(cell.dist.correlation));
  h = combine_seed(h, static_cast<std::uint64_t>(cell.model.kind));
  if (cell.model.kind == ItemModel::Kind::Dina) {
    h = combine_seed(h, double_bits(cell.model.slip));
    h = combine_seed(h, double_bits(cell.model.guess));
  } else {
    h = combine_seed(h, string_hash(cell.model.table_name));
  }
  return h;
}

std::uint64_t replication_seed(std::uint64_t master_seed,
                               const ExperimentCell& cell, int replication) {
  return combine_seed(cell_seed(master_seed, cell),
                      static_cast<std::uint64_t>(replication));
}

namespace {

struct RepOutcome {
  std::vector<double> par;
  std::vector<double> aar;
  std::vector<bool> ok;
};

RepOutcome run_replication(const ExperimentConfig& config,
                           const ExperimentCell& cell,
                           const std::vector<EstimatorSpec>& specs,
                           int replication) {
  RepOutcome out;
  out.par.assign(specs.size(), 0.0);
  out.aar.assign(specs.size(), 0.0);
  out.ok.assign(specs.size(), false);
  Rng rng(replication_seed(config.seed, cell, replication));
  const auto data = simulate(cell.k, cell.j, cell.n, cell.dist, cell.model, rng);
  for (std::size_t e = 0; e < specs.size(); ++e) {
    try {
      const auto& spec = specs[e];
      FitResult result =
          config.start_from_truth &&
                  (spec.method == Method::Gnpc || spec.method == Method::Jmle ||
                   spec.method == Method::Cmle)
              ? iterative_fit(data.x, data.q, spec, data.truth)
              : fit(data.x, data.q, spec);
      const auto report = agreement(result.assignment, data.truth);
      out.par[e] = report.par;
      out.aar[e] = report.aar;
      out.ok[e] = true;
    } catch (const std::exception&) {
      out.ok[e] = false;
    }
  }
  return out;
}

void mean_and_se(const std::vector<double>& v, double& mean, double& se) {
  if (v.empty()) {
    mean = se = std::numeric_limits<double>::quiet_NaN();
    return;
  }
  double s = 0.0;
  for (double x : v) s += x;
  mean = s / static_cast<double>(v.size());
  if (v.size() < 2) {
    se = 0.0;
    return;
  }
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  se = std::sqrt(ss / static_cast<double>(v.size() - 1) /
                 static_cast<double>(v.size()));
}

}  // namespace

std::vector<ExperimentRow> run_experiment(const ExperimentConfig& config,
                                          unsigned threads) {
  if (config.replications < 1) throw std::invalid_argument("replications must be >= 1");
  std::vector<EstimatorSpec> specs;
  for (const auto& name : config.estimators) specs.push_back(EstimatorSpec::parse(name));
  const auto cells = config.cells();
  const std::size_t reps = static_cast<std::size_t>(config.replications);
  const std::size_t tasks = cells.size() * reps;
  std::vector<RepOutcome> outcomes(tasks);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t t = next++; t < tasks; t = next++) {
      outcomes[t] = run_replication(config, cells[t / reps], specs,
                                    static_cast<int>(t % reps));
    }
  };
  const unsigned pool = std::max(1u, std::min<unsigned>(
                                         threads, static_cast<unsigned>(tasks)));
  if (pool == 1) {
    worker();
  } else {
    std::vector<std::jthread> workers;
    for (unsigned w = 0; w < pool; ++w) workers.emplace_back(worker);
  }

  std::vector<ExperimentRow> rows;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    for (std::size_t e = 0; e < specs.size(); ++e) {
      std::vector<double> par;
      std::vector<double> aar;
      int failures = 0;
      for (std::size_t r = 0; r < reps; ++r) {
        const auto& o = outcomes[c * reps + r];
        if (!o.ok[e]) {
          ++failures;
          continue;
        }
        par.push_back(o.par[e]);
        aar.push_back(o.aar[e]);
      }
      ExperimentRow row;
      row.cell = cells[c];
      row.estimator = config.estimators[e];
      mean_and_se(par, row.mean_par, row.se_par);
      mean_and_se(aar, row.mean_aar, row.se_aar);
      row.reps = static_cast<int>(par.size());
      row.failures = failures;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

void write_experiment_csv(const std::vector<ExperimentRow>& rows,
                          std::uint64_t master_seed, std::ostream& out) {
  out << "# seed=" << master_seed << '\n';
  out << "k,j,n,dist,r,noise,estimator,mean_par,se_par,mean_aar,se_aar,reps\n";
  for (const auto& row : rows) {
    const auto& c = row.cell;
    out << c.k << ',' << c.j << ',' << c.n << ',' << c.dist.label() << ','
        << format_number(c.dist.correlation) << ',' << c.model.noise_label()
        << ',' << row.estimator << ',' << format_number(row.mean_par) << ','
        << format_number(row.se_par) << ',' << format_number(row.mean_aar)
        << ',' << format_number(row.se_aar) << ',' << row.reps << '\n';
  }
}

}  // namespace cdm
