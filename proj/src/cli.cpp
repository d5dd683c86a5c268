#include "cdm/cli.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "cdm/estimators.hpp"
#include "cdm/io.hpp"
#include "cdm/metrics.hpp"
#include "cdm/simulation.hpp"
#include "cdm/verify.hpp"

namespace cdm {

namespace fs = std::filesystem;
using nlohmann::json;

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const DimensionError*>(&e)) return kExitDimension;
  if (dynamic_cast<const ParseError*>(&e) || dynamic_cast<const ConfigError*>(&e) ||
      dynamic_cast<const InvalidParameter*>(&e) ||
      dynamic_cast<const std::invalid_argument*>(&e) ||
      dynamic_cast<const std::out_of_range*>(&e)) {
    return kExitBadInput;
  }
  return kExitFailure;
}

namespace {

constexpr const char* kEncodingNote =
    "pattern strings list attribute 1 first (leftmost character)";

std::string full_precision(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json finite_or_null(double v) {
  return std::isfinite(v) ? json(v) : json(nullptr);
}

std::string patterns_csv(const PatternAssignment& a) {
  std::string s = "pattern\n";
  for (std::size_t i = 0; i < a.size(); ++i) {
    s += AttributePattern::from_index(a[i], a.num_attributes()).to_string();
    s += '\n';
  }
  return s;
}

std::string centroids_csv(const CentroidValues& mu) {
  std::string s = "pattern";
  for (std::size_t j = 0; j < mu.num_items(); ++j) s += ",item" + std::to_string(j + 1);
  s += '\n';
  for (std::size_t a = 0; a < mu.num_patterns(); ++a) {
    const auto p = static_cast<PatternIndex>(a);
    s += AttributePattern::from_index(p, mu.num_attributes()).to_string();
    for (std::size_t j = 0; j < mu.num_items(); ++j) s += ',' + full_precision(mu(p, j));
    s += '\n';
  }
  return s;
}

std::string proportions_csv(const ProportionVector& pi, int k) {
  std::string s = "pattern,proportion\n";
  for (std::size_t a = 0; a < pi.size(); ++a) {
    s += AttributePattern::from_index(static_cast<PatternIndex>(a), k).to_string() +
         ',' + full_precision(pi[a]) + '\n';
  }
  return s;
}

std::string binary_csv(const BinaryMatrix& m) {
  std::ostringstream os;
  write_binary_csv(m, os);
  return os.str();
}

// Every file is staged as a sibling temporary before any rename happens, so
// a failure leaves no partial output behind.
void write_outputs(const fs::path& dir,
                   const std::vector<std::pair<std::string, std::string>>& files) {
  fs::create_directories(dir);
  std::vector<fs::path> staged;
  try {
    for (const auto& [name, contents] : files) {
      const auto tmp = dir / (name + ".partial");
      staged.push_back(tmp);
      write_file_atomically(tmp, contents);
    }
  } catch (...) {
    std::error_code ignored;
    for (const auto& p : staged) fs::remove(p, ignored);
    throw;
  }
  for (std::size_t f = 0; f < files.size(); ++f) {
    fs::rename(staged[f], dir / files[f].first);
  }
}

LossKind parse_loss(const std::string& s) {
  if (s == "l1") return LossKind::L1;
  if (s == "l2") return LossKind::L2;
  if (s == "ce") return LossKind::CrossEntropy;
  throw std::invalid_argument("unknown loss '" + s + "' (expected l1, l2 or ce)");
}

ProportionPenalty parse_penalty(const std::string& s) {
  if (s == "none") return ProportionPenalty::none();
  if (s == "neglog") return ProportionPenalty::neg_log();
  throw std::invalid_argument("unknown penalty '" + s + "' (expected none or neglog)");
}

const char* loss_name(LossKind k) {
  switch (k) {
    case LossKind::L1: return "l1";
    case LossKind::L2: return "l2";
    case LossKind::CrossEntropy: return "ce";
  }
  return "?";
}

std::string penalty_name(const ProportionPenalty& p) {
  switch (p.kind) {
    case ProportionPenalty::Kind::None: return "none";
    case ProportionPenalty::Kind::NegLog: return "neglog";
    case ProportionPenalty::Kind::ScaledNegLog: return "neglog*" + full_precision(p.lambda);
  }
  return "?";
}

unsigned resolve_threads(unsigned requested) {
  if (const char* env = std::getenv("CDM_THREADS")) {
    try {
      const long n = std::stol(env);
      if (n > 0) return static_cast<unsigned>(n);
    } catch (const std::exception&) {
    }
    throw std::invalid_argument(std::string("CDM_THREADS must be a positive integer, got '") +
                                env + "'");
  }
  if (requested > 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

struct FitArgs {
  std::string x, q, method = "npc", loss, penalty, out = "fit_out";
};

int cmd_fit(const FitArgs& a, std::ostream& out) {
  auto spec = EstimatorSpec::parse(a.method);
  if (!a.loss.empty()) spec.loss = parse_loss(a.loss);
  if (!a.penalty.empty()) spec.penalty = parse_penalty(a.penalty);
  const auto q = read_qmatrix(a.q);
  const auto x = read_responses(a.x);
  if (x.num_items() != q.num_items()) {
    throw DimensionError("responses have " + std::to_string(x.num_items()) +
                         " items but the Q-matrix has " + std::to_string(q.num_items()));
  }
  const auto result = fit(x, q, spec);
  const auto& mu = result.centroids.values();
  const double final_loss = result.loss_trajectory.back();
  json manifest = {
      {"method", spec.name()},
      {"loss", spec.method == Method::Mmle ? "negative marginal log-likelihood"
                                           : loss_name(spec.loss_kind())},
      {"penalty", spec.method == Method::Mmle ? "none" : penalty_name(spec.penalty_kind())},
      {"subjects", x.num_subjects()},
      {"items", x.num_items()},
      {"attributes", q.num_attributes()},
      {"iterations", result.iterations},
      {"converged", result.converged},
      {"final_loss", finite_or_null(final_loss)},
      {"complete_data_log_likelihood",
       finite_or_null(complete_data_log_likelihood(x, result.assignment, mu,
                                                   result.proportions))},
      {"ordering_violations", result.ordering_violations},
      {"pattern_encoding", kEncodingNote},
  };
  json trajectory = json::array();
  for (double v : result.loss_trajectory) trajectory.push_back(finite_or_null(v));
  manifest["loss_trajectory"] = trajectory;
  write_outputs(a.out, {{"assignment.csv", patterns_csv(result.assignment)},
                        {"centroids.csv", centroids_csv(mu)},
                        {"proportions.csv",
                         proportions_csv(result.proportions, q.num_attributes())},
                        {"manifest.json", manifest.dump(2) + "\n"}});
  out << spec.name() << ": " << result.iterations << " iterations, "
      << (result.converged ? "converged" : "not converged") << ", final loss "
      << full_precision(final_loss) << "\n";
  return kExitOk;
}

struct SimulateArgs {
  int k = 3;
  std::size_t j = 30, n = 500;
  std::string dist = "uniform";
  double r = 0.0;
  std::string model = "dina";
  double s = 0.1, g = 0.1;
  std::string table = "small";
  std::uint64_t seed = 1;
  std::string out = "sim_out";
};

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  AttributeDistribution dist;
  if (a.dist == "uniform") {
    dist = AttributeDistribution::uniform();
  } else if (a.dist == "mvn") {
    dist = AttributeDistribution::mvn_threshold(a.r);
  } else {
    throw std::invalid_argument("--dist must be uniform or mvn");
  }
  ItemModel model;
  if (a.model == "dina") {
    model = ItemModel::dina(a.s, a.g);
  } else if (a.model == "gdina") {
    model = ItemModel::gdina_named(a.table);
  } else {
    throw std::invalid_argument("--model must be dina or gdina");
  }
  Rng rng(a.seed);
  const auto data = simulate(a.k, a.j, a.n, dist, model, rng);
  json manifest = {{"k", a.k},
                   {"j", a.j},
                   {"n", a.n},
                   {"dist", dist.label()},
                   {"r", dist.correlation},
                   {"model", a.model},
                   {"noise", model.noise_label()},
                   {"seed", a.seed},
                   {"pattern_encoding", kEncodingNote}};
  write_outputs(a.out, {{"q.csv", binary_csv(data.q.entries())},
                        {"responses.csv", binary_csv(data.x.entries())},
                        {"truth.csv", patterns_csv(data.truth)},
                        {"manifest.json", manifest.dump(2) + "\n"}});
  out << "wrote " << a.n << " subjects x " << a.j << " items to " << a.out << "\n";
  return kExitOk;
}

int cmd_experiment(const std::string& config_path, const std::string& out_path,
                   unsigned threads, std::ostream& out) {
  std::ifstream in(config_path);
  if (!in) throw ConfigError("cannot open config " + config_path);
  std::stringstream buf;
  buf << in.rdbuf();
  const auto config = parse_experiment_config(buf.str());
  const auto rows = run_experiment(config, resolve_threads(threads));
  std::ostringstream csv;
  write_experiment_csv(rows, config.seed, csv);
  const fs::path target(out_path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  write_file_atomically(target, csv.str());
  int failures = 0;
  for (const auto& r : rows) failures += r.failures;
  out << rows.size() << " rows written to " << out_path;
  if (failures) out << " (" << failures << " failed fits excluded)";
  out << "\n";
  return kExitOk;
}

int cmd_verify(const std::string& suite, std::ostream& out) {
  const auto results = run_suite(suite);
  return print_report(results, out) ? kExitOk : kExitFailure;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"Cognitive diagnosis estimation: fit, simulate, experiment, verify"};
  app.require_subcommand(1);

  FitArgs fit_args;
  auto* fit_cmd = app.add_subcommand("fit", "Classify subjects from response data");
  fit_cmd->add_option("--x", fit_args.x, "N x J response CSV (0/1, no header)")->required();
  fit_cmd->add_option("--q", fit_args.q, "J x K Q-matrix CSV (0/1, no header)")->required();
  fit_cmd->add_option("--method", fit_args.method,
                      "npc, npc-dino, gnpc, jmle[-dina|-gdina], cmle[...], mmle[...]")
      ->capture_default_str();
  fit_cmd->add_option("--loss", fit_args.loss, "Override the loss: l1, l2 or ce");
  fit_cmd->add_option("--penalty", fit_args.penalty, "Override the penalty: none or neglog");
  fit_cmd->add_option("--out", fit_args.out, "Output directory")->capture_default_str();

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Generate one synthetic data set");
  sim_cmd->add_option("--k", sim.k, "Number of attributes")->capture_default_str();
  sim_cmd->add_option("--j", sim.j, "Number of items")->capture_default_str();
  sim_cmd->add_option("--n", sim.n, "Number of subjects")->capture_default_str();
  sim_cmd->add_option("--dist", sim.dist, "uniform or mvn")->capture_default_str();
  sim_cmd->add_option("--r", sim.r, "Attribute correlation for mvn");
  sim_cmd->add_option("--model", sim.model, "dina or gdina")->capture_default_str();
  sim_cmd->add_option("--s", sim.s, "DINA slipping")->capture_default_str();
  sim_cmd->add_option("--g", sim.g, "DINA guessing")->capture_default_str();
  sim_cmd->add_option("--table", sim.table, "GDINA table: small, large or a CSV path")
      ->capture_default_str();
  sim_cmd->add_option("--seed", sim.seed, "Master seed")->capture_default_str();
  sim_cmd->add_option("--out", sim.out, "Output directory")->capture_default_str();

  std::string config_path, csv_path;
  unsigned threads = 0;
  auto* exp_cmd = app.add_subcommand("experiment", "Run a simulation grid");
  exp_cmd->add_option("--config", config_path, "JSON experiment config")->required();
  exp_cmd->add_option("--out", csv_path, "Output CSV")->required();
  exp_cmd->add_option("--threads", threads,
                      "Worker threads (default: all cores; CDM_THREADS overrides)");

  std::string suite = "all";
  auto* verify_cmd = app.add_subcommand("verify", "Run the property suites");
  verify_cmd->add_option("--suite", suite, "all, losses, algorithm or theory")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitBadInput;
  }

  try {
    if (*fit_cmd) return cmd_fit(fit_args, out);
    if (*sim_cmd) return cmd_simulate(sim, out);
    if (*exp_cmd) return cmd_experiment(config_path, csv_path, threads, out);
    if (*verify_cmd) return cmd_verify(suite, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return kExitFailure;
}

}  // namespace cdm
