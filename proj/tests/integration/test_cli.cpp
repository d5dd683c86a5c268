#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "cdm/cli.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "cdm");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  const int code = cdm::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name)
      : path(fs::temp_directory_path() / ("cdm_cli_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& f) const { return (path / f).string(); }
};

// Two identity blocks for K = 3 and one ideal-response row per pattern.
void write_toy(const TempDir& d) {
  std::ofstream(d / "q.csv") << "1,0,0\n0,1,0\n0,0,1\n1,0,0\n0,1,0\n0,0,1\n";
  std::ofstream x(d / "x.csv");
  for (int a = 0; a < 8; ++a) {
    for (int j = 0; j < 6; ++j) x << (j ? "," : "") << ((a >> (j % 3)) & 1);
    x << "\n";
  }
}

}  // namespace

TEST_CASE("noiseless toy: NPC recovers all eight patterns") {
  TempDir d("toy");
  write_toy(d);
  const auto r = cli({"fit", "--x", d / "x.csv", "--q", d / "q.csv", "--method", "npc",
                      "--out", d / "out"});
  REQUIRE(r.code == 0);
  CHECK(slurp(d / "out/assignment.csv") ==
        "pattern\n000\n100\n010\n110\n001\n101\n011\n111\n");
  const auto manifest = nlohmann::json::parse(slurp(d / "out/manifest.json"));
  CHECK(manifest["final_loss"].get<double>() == 0.0);
  CHECK(manifest["converged"].get<bool>());
}

TEST_CASE("CMLE manifest reports the complete-data log-likelihood identity") {
  TempDir d("cmle");
  REQUIRE(cli({"simulate", "--k", "3", "--j", "20", "--n", "150", "--s", "0.2", "--g",
               "0.2", "--seed", "4", "--out", d / "sim"})
              .code == 0);
  const auto r = cli({"fit", "--x", d / "sim/responses.csv", "--q", d / "sim/q.csv",
                      "--method", "cmle", "--out", d / "fit"});
  REQUIRE(r.code == 0);
  const auto m = nlohmann::json::parse(slurp(d / "fit/manifest.json"));
  CHECK(std::abs(m["final_loss"].get<double>() +
                 m["complete_data_log_likelihood"].get<double>()) <= 1e-9);
  CHECK(m["loss_trajectory"].size() >= 2);
  CHECK(m["method"] == "cmle-dina");
}

TEST_CASE("fit is byte-for-byte deterministic") {
  TempDir d("det");
  REQUIRE(cli({"simulate", "--n", "120", "--seed", "8", "--model", "gdina", "--out",
               d / "sim"})
              .code == 0);
  for (const char* method : {"gnpc", "jmle-gdina", "mmle"}) {
    for (const char* out : {"a", "b"}) {
      REQUIRE(cli({"fit", "--x", d / "sim/responses.csv", "--q", d / "sim/q.csv",
                   "--method", method, "--out", d / out})
                  .code == 0);
    }
    for (const char* f : {"assignment.csv", "centroids.csv", "proportions.csv",
                          "manifest.json"}) {
      CHECK(slurp(d.path / "a" / f) == slurp(d.path / "b" / f));
    }
  }
}

TEST_CASE("loss and penalty overrides") {
  TempDir d("override");
  write_toy(d);
  const auto r = cli({"fit", "--x", d / "x.csv", "--q", d / "q.csv", "--method", "jmle",
                      "--loss", "l2", "--penalty", "neglog", "--out", d / "out"});
  REQUIRE(r.code == 0);
  const auto m = nlohmann::json::parse(slurp(d / "out/manifest.json"));
  CHECK(m["loss"] == "l2");
  CHECK(m["penalty"] == "neglog");
  CHECK(cli({"fit", "--x", d / "x.csv", "--q", d / "q.csv", "--loss", "huber"}).code == 2);
}

TEST_CASE("malformed input exits 2 and writes nothing") {
  TempDir d("bad");
  write_toy(d);
  std::ofstream(d / "bad.csv") << "1,0,0,1,0,2\n";
  std::ofstream(d / "zero_q.csv") << "1,0,0\n0,0,0\n0,0,1\n1,0,0\n0,1,0\n0,0,1\n";
  CHECK(cli({"fit", "--x", d / "bad.csv", "--q", d / "q.csv", "--out", d / "o1"}).code == 2);
  CHECK(cli({"fit", "--x", d / "x.csv", "--q", d / "zero_q.csv", "--out", d / "o2"}).code == 2);
  CHECK(cli({"fit", "--x", d / "missing.csv", "--q", d / "q.csv", "--out", d / "o3"}).code == 2);
  CHECK(cli({"fit", "--x", d / "x.csv", "--q", d / "q.csv", "--method", "magic", "--out",
             d / "o4"})
            .code == 2);
  CHECK(cli({"fit", "--q", d / "q.csv"}).code == 2);
  CHECK(cli({"bogus"}).code == 2);
  CHECK(cli({"simulate", "--k", "20", "--j", "60", "--out", d / "o5"}).code == 2);
  for (const char* o : {"o1", "o2", "o3", "o4", "o5"}) CHECK_FALSE(fs::exists(d.path / o));
}

TEST_CASE("dimension mismatch exits 3") {
  TempDir d("dim");
  write_toy(d);
  std::ofstream(d / "short.csv") << "1,0,1\n0,0,1\n";
  const auto r = cli({"fit", "--x", d / "short.csv", "--q", d / "q.csv", "--out", d / "o"});
  CHECK(r.code == 3);
  CHECK(r.err.find("items") != std::string::npos);
  CHECK_FALSE(fs::exists(d.path / "o"));
}

TEST_CASE("experiment: single cell, one replication, seed in the header") {
  TempDir d("exp");
  std::ofstream(d / "cfg.json") << R"({"k": 3, "j": 20, "n": 60, "reps": 1, "seed": 31,
    "dist": {"kind": "mvn", "r": 0.4}, "model": {"kind": "dina", "s": 0.1, "g": 0.1},
    "estimators": ["npc"]})";
  REQUIRE(cli({"experiment", "--config", d / "cfg.json", "--out", d / "res.csv"}).code == 0);
  const auto csv = slurp(d / "res.csv");
  std::istringstream lines(csv);
  std::vector<std::string> rows;
  for (std::string l; std::getline(lines, l);) rows.push_back(l);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0] == "# seed=31");
  CHECK(rows[2].rfind("3,20,60,mvn,0.4,0.1,npc,", 0) == 0);
  CHECK(rows[2].substr(rows[2].size() - 2) == ",1");

  REQUIRE(cli({"experiment", "--config", d / "cfg.json", "--out", d / "again.csv",
               "--threads", "3"})
              .code == 0);
  CHECK(slurp(d / "again.csv") == csv);
}

TEST_CASE("experiment schema violations exit 2") {
  TempDir d("exp_bad");
  std::ofstream(d / "cfg.json") << R"({"k": 3, "j": 20, "n": 60, "reps": 1, "seed": 1,
    "dist": {"kind": "beta"}, "model": {"kind": "dina", "s": 0.1}, "estimators": ["npc"]})";
  CHECK(cli({"experiment", "--config", d / "cfg.json", "--out", d / "res.csv"}).code == 2);
  CHECK(cli({"experiment", "--config", d / "none.json", "--out", d / "res.csv"}).code == 2);
  CHECK_FALSE(fs::exists(d.path / "res.csv"));
}

TEST_CASE("verify suites") {
  const auto theory = cli({"verify", "--suite", "theory"});
  CHECK(theory.code == 0);
  CHECK(theory.out.find("-0.030000000000000") != std::string::npos);
  const auto algorithm = cli({"verify", "--suite", "algorithm"});
  CHECK(algorithm.code == 0);
  CHECK(algorithm.out.find("500 trajectories") != std::string::npos);
  CHECK(cli({"verify", "--suite", "losses"}).code == 0);
  CHECK(cli({"verify", "--suite", "nope"}).code == 2);
}
