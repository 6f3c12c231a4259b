// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "json.hpp"

#include "irnn/cli.hpp"
#include "irnn/model.hpp"
#include "irnn/serialize.hpp"
#include "support.hpp"

using namespace irnn;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int rc;
  std::string out, err;
};

Outcome irnn_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "irnn");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  auto* old_out = std::cout.rdbuf(out.rdbuf());
  auto* old_err = std::cerr.rdbuf(err.rdbuf());
  const int rc = cli::run(static_cast<int>(argv.size()), argv.data());
  std::cout.rdbuf(old_out);
  std::cerr.rdbuf(old_err);
  return {rc, out.str(), err.str()};
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

nlohmann::json artifacts(const fs::path& dir) {
  return io::read_json(dir / "manifest.json").at("artifacts");
}

// Small synthetic dataset, prepared, shared by the command tests below.
fs::path prepared_fixture() {
  static const fs::path dir = [] {
    const fs::path root = oracle::temp_dir("cli_fixture");
    write_file(root / "synth.cfg", "n_samples = 300\n");
    REQUIRE(irnn_cli({"synth", "--config", (root / "synth.cfg").string(), "--seed", "5",
                      "--out", (root / "raw").string()})
                .rc == 0);
    REQUIRE(irnn_cli({"prepare", "--data", (root / "raw").string(), "--seed", "5", "--out",
                      (root / "prep").string()})
                .rc == 0);
    write_file(root / "train.cfg", "max_epochs = 3\npatience = 3\nbatch_size = 32\n");
    return root;
  }();
  return dir;
}

}  // namespace

TEST_CASE("sha256 of known vectors") {
  CHECK(cli::sha256_hex("") ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(cli::sha256_hex("abc") ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("split protocol is deterministic and stratified") {
  std::vector<int> y(500, 0);
  for (std::size_t i = 0; i < y.size(); i += 5) y[i] = 1;
  const auto a = cli::hold_out(y, 42);
  const auto b = cli::hold_out(y, 42);
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
  CHECK(a.first.size() + a.second.size() == y.size());
  CHECK(a.second.size() == 100);
  std::size_t pos = 0;
  for (auto i : a.second) pos += y[i];
  CHECK(pos == 20);
  CHECK(cli::hold_out(y, 43).second != a.second);
  const auto s0 = cli::seed_split(y, 42, 0);
  const auto s1 = cli::seed_split(y, 42, 1);
  CHECK(s0.second != s1.second);
  CHECK(cli::seed_split(y, 42, 1).second == s1.second);
  CHECK(cli::run_seed(42, 0) != cli::run_seed(42, 1));
  CHECK(cli::run_seed(42, 3) == cli::run_seed(42, 3));
}

TEST_CASE("synth is checksum-identical for the same seed") {
  const fs::path root = oracle::temp_dir("cli_synth");
  write_file(root / "c.cfg", "n_samples = 80\n");
  const std::string cfg = (root / "c.cfg").string();
  REQUIRE(irnn_cli({"synth", "--config", cfg, "--seed", "3", "--out", (root / "a").string()}).rc == 0);
  REQUIRE(irnn_cli({"synth", "--config", cfg, "--seed", "3", "--out", (root / "b").string()}).rc == 0);
  REQUIRE(irnn_cli({"synth", "--config", cfg, "--seed", "4", "--out", (root / "c").string()}).rc == 0);
  CHECK(artifacts(root / "a") == artifacts(root / "b"));
  CHECK(artifacts(root / "a").size() == 4);
  CHECK(artifacts(root / "a").at("events.csv") != artifacts(root / "c").at("events.csv"));
  const auto m = io::read_json(root / "a" / "manifest.json");
  CHECK(m.at("master_seed") == 3);
  CHECK(m.at("command") == "synth");
}

TEST_CASE("synth config errors") {
  const fs::path root = oracle::temp_dir("cli_synth_bad");
  write_file(root / "d0.cfg", "names =\n");
  auto r = irnn_cli({"synth", "--config", (root / "d0.cfg").string(), "--out",
                     (root / "o").string()});
  CHECK(r.rc == cli::kExitUsage);
  CHECK(r.err.find("D") != std::string::npos);
  write_file(root / "rate.cfg", "rates = 1,1,1,0,1,1,1,1\n");
  r = irnn_cli({"synth", "--config", (root / "rate.cfg").string(), "--out", (root / "o").string()});
  CHECK(r.rc == cli::kExitUsage);
  CHECK(r.err.find("rate") != std::string::npos);
  CHECK(irnn_cli({"synth"}).rc == cli::kExitUsage);
  CHECK(irnn_cli({"frobnicate"}).rc == cli::kExitUsage);
}

TEST_CASE("train usage and data errors") {
  const fs::path root = prepared_fixture();
  auto r = irnn_cli({"train", "--data", (root / "prep").string(), "--model", "transformer",
                     "--out", (root / "bad").string()});
  CHECK(r.rc == cli::kExitUsage);
  const std::string missing = (root / "nowhere").string();
  r = irnn_cli({"train", "--data", missing, "--model", "logistic", "--out",
                (root / "bad").string()});
  CHECK(r.rc == cli::kExitData);
  CHECK(r.err.find(missing) != std::string::npos);
  write_file(root / "unknown.cfg", "learning_rat = 0.1\n");
  r = irnn_cli({"train", "--data", (root / "prep").string(), "--model", "logistic", "--config",
                (root / "unknown.cfg").string(), "--out", (root / "bad").string()});
  CHECK(r.rc == cli::kExitUsage);
}

TEST_CASE("train, evaluate, compare") {
  const fs::path root = prepared_fixture();
  const std::string prep = (root / "prep").string();
  const std::string cfg = (root / "train.cfg").string();
  auto r = irnn_cli({"train", "--data", prep, "--model", "logistic", "--config", cfg, "--seeds",
                     "3", "--out", (root / "lr").string()});
  REQUIRE(r.rc == 0);
  for (int k = 0; k < 3; ++k) {
    const fs::path d = root / "lr" / ("seed_" + std::to_string(k));
    CHECK(fs::is_regular_file(d / "model.json"));
    CHECK(fs::is_regular_file(d / "history.csv"));
  }
  const auto summary = io::read_json(root / "lr" / "summary.json");
  CHECK(summary.at("runs").size() == 3);
  const std::string row = slurp(root / "lr" / "summary.csv");
  CHECK(row.rfind("model,auc,ppv,specificity,runs\nlogistic,\"0.", 0) == 0);
  CHECK(row.find(" (0.") != std::string::npos);

  // Idempotent given identical inputs and seeds.
  REQUIRE(irnn_cli({"train", "--data", prep, "--model", "logistic", "--config", cfg, "--seeds",
                    "3", "--out", (root / "lr2").string()})
              .rc == 0);
  CHECK(artifacts(root / "lr") == artifacts(root / "lr2"));

  r = irnn_cli({"train", "--data", prep, "--model", "irnn", "--config", cfg, "--seeds", "1",
                "--out", (root / "ir").string()});
  REQUIRE(r.rc == 0);
  CHECK(io::read_json(root / "ir" / "summary.json").at("runs").size() == 1);
  CHECK_FALSE(fs::exists(root / "ir" / "seed_1"));

  r = irnn_cli({"evaluate", "--weights", (root / "lr").string(), "--data", prep, "--out",
                (root / "ev").string()});
  REQUIRE(r.rc == 0);
  CHECK(r.err.find("warning") == std::string::npos);
  CHECK(fs::is_regular_file(root / "ev" / "eval_test_2.json"));
  CHECK(slurp(root / "ev" / "comparison.csv").find(",3\n") != std::string::npos);
  // Test metrics reproduce the ones recorded at training time.
  CHECK(io::read_json(root / "ev" / "eval_test_0.json").at("auc") ==
        summary.at("runs").at(0).at("test").at("auc"));

  r = irnn_cli({"evaluate", "--weights", (root / "ir" / "seed_0" / "model.json").string(),
                "--data", prep, "--split", "train", "--out", (root / "ev_train").string()});
  REQUIRE(r.rc == 0);
  CHECK(r.err.find("warning") != std::string::npos);

  r = irnn_cli({"compare", "--runs", (root / "lr").string(), (root / "ir").string(), "--out",
                (root / "table.csv").string()});
  REQUIRE(r.rc == 0);
  const std::string table = slurp(root / "table.csv");
  CHECK(table.find("\nlogistic,") != std::string::npos);
  CHECK(table.find("\nirnn,") != std::string::npos);
}

TEST_CASE("perfect weights on separable data score AUC 1") {
  const fs::path root = oracle::temp_dir("cli_perfect");
  write_file(root / "s.cfg",
             "names = a\nrisks = linear\ncoefs = 3\nrates = 4\nthetas = 0.3\noffsets = 0\n"
             "scales = 1\ntrend = false\nintercept = 0\ntemperature = 1e-9\nn_samples = 400\n");
  REQUIRE(irnn_cli({"synth", "--config", (root / "s.cfg").string(), "--out",
                    (root / "raw").string()})
              .rc == 0);
  REQUIRE(irnn_cli({"prepare", "--data", (root / "raw").string(), "--out",
                    (root / "prep").string()})
              .rc == 0);
  model::Model m = model::make_logistic(1, 0);
  model::zero_parameters(m);
  m.params["w"].data[4] = 1.0;  // last observed value
  io::save_model(root / "model.json", m);
  const auto r = irnn_cli({"evaluate", "--weights", (root / "model.json").string(), "--data",
                           (root / "prep").string(), "--out", (root / "ev").string()});
  REQUIRE(r.rc == 0);
  CHECK(io::read_json(root / "ev" / "eval_test.json").at("auc") == 1.0);
}

TEST_CASE("explain outputs and guards") {
  const fs::path root = prepared_fixture();
  const std::string prep = (root / "prep").string();
  if (!fs::exists(root / "ir" / "seed_0" / "model.json")) {
    REQUIRE(irnn_cli({"train", "--data", prep, "--model", "irnn", "--config",
                      (root / "train.cfg").string(), "--seeds", "1", "--out",
                      (root / "ir").string()})
                .rc == 0);
  }
  const std::string weights = (root / "ir" / "seed_0" / "model.json").string();
  const std::string sample = io::read_json(root / "prep" / "split.json").at("test").at(0);
  auto r = irnn_cli({"explain", "--weights", weights, "--data", prep, "--global",
                     "--risk-curves", "--decay", "--sample", sample, "--out",
                     (root / "ex").string()});
  REQUIRE(r.rc == 0);
  const auto gi = io::read_json(root / "ex" / "importance.json");
  CHECK(gi.at("schema_version").is_number());
  CHECK(fs::is_regular_file(root / "ex" / ("trace_" + sample + ".csv")));
  CHECK(io::read_json(root / "ex" / "risk_curves.json").at("curves").size() == 8);
  CHECK(io::read_json(root / "ex" / "decay_curves.json").at("curves").size() == 8);
  CHECK(artifacts(root / "ex").size() == 4);

  model::Model dense = model::make_irnn(8, {true, false, false}, 1);
  io::save_model(root / "dense.json", dense);
  r = irnn_cli({"explain", "--weights", (root / "dense.json").string(), "--data", prep,
                "--decay", "--out", (root / "ex_dense").string()});
  CHECK(r.rc == cli::kExitUsage);
  CHECK(r.err.find("unsupported") != std::string::npos);

  r = irnn_cli({"explain", "--weights", weights, "--data", prep, "--out",
                (root / "ex_none").string()});
  CHECK(r.rc == cli::kExitUsage);
  r = irnn_cli({"explain", "--weights", weights, "--data", prep, "--sample", "nobody", "--out",
                (root / "ex_none").string()});
  CHECK(r.rc == cli::kExitData);
}

TEST_CASE("exit code mapping") {
  CHECK(cli::exit_code_for(ConfigError("x")) == 2);
  CHECK(cli::exit_code_for(ContractError("x")) == 2);
  CHECK(cli::exit_code_for(DataError("x")) == 3);
  CHECK(cli::exit_code_for(DimensionError("x")) == 3);
  CHECK(cli::exit_code_for(NumericError("x")) == 4);
  CHECK(cli::exit_code_for(std::runtime_error("x")) == 1);
}

#ifdef IRNN_TOOL
TEST_CASE("installed binary runs") {
  CHECK(std::system(IRNN_TOOL " --version > /dev/null") == 0);
  CHECK(std::system(IRNN_TOOL " train > /dev/null 2>&1") != 0);
}
#endif
