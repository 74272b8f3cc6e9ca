// Copyright 2026 The Semisens Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "semisens/config.hpp"
#include "semisens/metrics.hpp"
#include "semisens/sweep.hpp"

using namespace semisens;
using nlohmann::json;

namespace {

namespace fs = std::filesystem;

struct CliResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string Slurp(const fs::path& path) {
  std::ifstream in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path Scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "semisens_cli_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

CliResult RunCli(const std::string& args, const fs::path& dir) {
  const fs::path out = dir / "stdout.txt";
  const fs::path err = dir / "stderr.txt";
  const std::string command = std::string(SEMISENS_CLI_PATH) + " " + args +
                              " >" + out.string() + " 2>" + err.string();
  const int status = std::system(command.c_str());
  CliResult result;
  result.exit_code = (status >= 0) ? ((status >> 8) & 0xff) : -1;
  result.out = Slurp(out);
  result.err = Slurp(err);
  return result;
}

json BaseSyntheticConfig() {
  json doc;
  doc["dataset"]["synthetic"] = {
      {"n_examples", 800},         {"n_users", 60},
      {"nonsensitive_vocab_sizes", {16, 16}}, {"sensitive_vocab_sizes", {16}},
      {"nonsensitive_signal_weight", 1.0},    {"sensitive_signal_weight", 1.5},
      {"label_noise", 0.05},       {"seed", 4}};
  doc["split"] = {{"test_fraction", 0.25}, {"mode", "random"}, {"seed", 3}};
  doc["model"] = {{"ns_hidden", {8}}, {"s_hidden", {4}}, {"common_hidden", {8}}};
  doc["train"] = {
      {"algorithm", "hybrid"},
      {"budget", {{"epsilon", 3.0}, {"delta", 1e-6}}},
      {"rr",
       {{"epochs", 1},
        {"batch_size", 128},
        {"optimizer", {{"kind", "adam"}, {"learning_rate", 0.01}}}}},
      {"dpsgd",
       {{"epochs", 1},
        {"expected_batch", 128},
        {"clip_norm", 1.0},
        {"optimizer",
         {{"kind", "momentum"}, {"learning_rate", 0.05}, {"momentum", 0.9}}}}},
      {"seeds", {{"data", 1}, {"rr", 2}, {"noise", 3}, {"init", 4}}}};
  return doc;
}

fs::path WriteConfig(const fs::path& dir, const json& doc) {
  const fs::path path = dir / "config.json";
  std::ofstream out(path);
  out << doc.dump(2);
  return path;
}

// Strips fields that legitimately differ between identical runs.
json CanonicalReport(json report) {
  report.erase("wall_clock_sec");
  return report;
}

}  // namespace

TEST_CASE("run config validation") {
  json doc = BaseSyntheticConfig();
  CHECK_NOTHROW(ParseRunConfig(doc));

  json both = doc;
  both["dataset"]["delimited"] = {{"path", "x.csv"}};
  CHECK_THROWS_AS(ParseRunConfig(both), ConfigError);

  json neither = doc;
  neither["dataset"].erase("synthetic");
  CHECK_THROWS_AS(ParseRunConfig(neither), ConfigError);

  json no_algo = doc;
  no_algo["train"].erase("algorithm");
  CHECK_THROWS_AS(ParseRunConfig(no_algo), ConfigError);

  json missing_file = doc;
  missing_file["dataset"].erase("synthetic");
  missing_file["dataset"]["delimited"] = {
      {"path", "/definitely/not/here.csv"},
      {"schema",
       {{"fields", {{{"name", "a"}, {"kind", "categorical"}, {"vocab_size", 4}}}},
        {"label_field", "y"}}},
      {"column_map", {{"a", "a"}, {"y", "y"}}}};
  CHECK_THROWS_AS(ParseRunConfig(missing_file), ConfigError);
}

TEST_CASE("cli synth: deterministic files that round-trip through the loader") {
  const fs::path dir = Scratch("synth");
  json spec = {{"n_examples", 300},
               {"n_users", 25},
               {"nonsensitive_vocab_sizes", {12}},
               {"sensitive_vocab_sizes", {6}},
               {"seed", 11}};
  const fs::path spec_path = dir / "spec.json";
  {
    std::ofstream out(spec_path);
    out << spec.dump();
  }

  const fs::path out_a = dir / "a";
  const fs::path out_b = dir / "b";
  const CliResult a = RunCli("synth --spec " + spec_path.string() + " --out " +
                                 out_a.string(), dir);
  REQUIRE(a.exit_code == 0);
  const CliResult b = RunCli("synth --spec " + spec_path.string() + " --out " +
                                 out_b.string(), dir);
  REQUIRE(b.exit_code == 0);
  CHECK(Slurp(out_a / "data.csv") == Slurp(out_b / "data.csv"));
  CHECK(Slurp(out_a / "schema.json") == Slurp(out_b / "schema.json"));

  // Row count: header + n_examples.
  std::ifstream data(out_a / "data.csv");
  std::size_t lines = 0;
  std::string line;
  while (std::getline(data, line)) ++lines;
  CHECK(lines == 301);

  // Reload through the emitted schema document and compare examples.
  const json schema_doc = json::parse(Slurp(out_a / "schema.json"));
  json run;
  run["dataset"]["delimited"] = schema_doc;
  run["train"] = {{"algorithm", "nonprivate"}};
  const RunConfig config = ParseRunConfig(run, (out_a).string());
  LoadReport report;
  const Dataset loaded = LoadConfiguredDataset(config, &report);
  CHECK(report.rows_skipped == 0);

  SyntheticSpec sspec;
  sspec.n_examples = 300;
  sspec.n_users = 25;
  sspec.nonsensitive_vocab_sizes = {12};
  sspec.sensitive_vocab_sizes = {6};
  sspec.seed = 11;
  const Dataset original = GenerateSynthetic(sspec);
  REQUIRE(loaded.size() == original.size());
  bool identical = true;
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    identical = identical &&
                loaded.examples[i].cat_values == original.examples[i].cat_values &&
                loaded.examples[i].label == original.examples[i].label &&
                loaded.user_ids[loaded.examples[i].user] ==
                    original.user_ids[original.examples[i].user];
  }
  CHECK(identical);
}

TEST_CASE("cli train: writes report + checkpoint, reruns identically") {
  const fs::path dir = Scratch("train");
  const fs::path config_path = WriteConfig(dir, BaseSyntheticConfig());

  const fs::path out_a = dir / "a";
  const fs::path out_b = dir / "b";
  const CliResult a = RunCli(
      "train --config " + config_path.string() + " --out " + out_a.string(), dir);
  REQUIRE_MESSAGE(a.exit_code == 0, a.err);
  const CliResult b = RunCli(
      "train --config " + config_path.string() + " --out " + out_b.string(), dir);
  REQUIRE(b.exit_code == 0);

  const json report_a = json::parse(Slurp(out_a / "report.json"));
  const json report_b = json::parse(Slurp(out_b / "report.json"));
  CHECK(CanonicalReport(report_a) == CanonicalReport(report_b));
  CHECK(Slurp(out_a / "checkpoint.json") == Slurp(out_b / "checkpoint.json"));

  // Budget bookkeeping survives serialization.
  CHECK(report_a.at("ledger").at("total_epsilon").get<double>() <= 3.0);
  CHECK(report_a.at("ledger").at("entries").size() == 2);
  CHECK(report_a.at("test_auc").get<double>() > 0.0);
}

TEST_CASE("cli train: missing dataset file exits 1 naming the path") {
  const fs::path dir = Scratch("train_missing");
  json doc = BaseSyntheticConfig();
  doc["dataset"].erase("synthetic");
  doc["dataset"]["delimited"] = {
      {"path", "/no/such/dataset.csv"},
      {"schema",
       {{"fields", {{{"name", "a"}, {"kind", "categorical"}, {"vocab_size", 4}}}},
        {"label_field", "y"}}},
      {"column_map", {{"a", "a"}, {"y", "y"}}}};
  const fs::path config_path = WriteConfig(dir, doc);
  const CliResult r = RunCli("train --config " + config_path.string(), dir);
  CHECK(r.exit_code == 1);
  CHECK(r.err.find("error: config:") != std::string::npos);
  CHECK(r.err.find("/no/such/dataset.csv") != std::string::npos);
}

TEST_CASE("cli exit codes: usage 1, runtime failure 2") {
  const fs::path dir = Scratch("codes");
  const CliResult usage = RunCli("train", dir);  // missing required --config
  CHECK(usage.exit_code == 1);
  CHECK(usage.err.find("error: usage:") != std::string::npos);

  // A target epsilon far below what the maximum bracketed noise reaches.
  const CliResult runtime = RunCli(
      "accountant calibrate --eps 1e-9 --delta 1e-6 --q 1 --steps 100000", dir);
  CHECK(runtime.exit_code == 2);
  CHECK(runtime.err.find("error: runtime:") != std::string::npos);
}

TEST_CASE("cli accountant: worked examples") {
  const fs::path dir = Scratch("accountant");

  const CliResult rdp = RunCli("accountant rdp --q 1 --sigma 1 --order 2", dir);
  REQUIRE(rdp.exit_code == 0);
  CHECK(json::parse(rdp.out).at("eps_rdp").get<double>() == 1.0);

  const CliResult group = RunCli(
      "accountant group --eps 0.6931471805599453 --delta 1e-8 --k 2", dir);
  REQUIRE(group.exit_code == 0);
  const json g = json::parse(group.out);
  CHECK(g.at("epsilon").get<double>() == doctest::Approx(1.3862943611198906));
  CHECK(g.at("delta").get<double>() == doctest::Approx(3e-8).epsilon(1e-12));

  const CliResult cal = RunCli(
      "accountant calibrate --eps 2 --delta 1e-6 --q 0.01 --steps 1000", dir);
  REQUIRE(cal.exit_code == 0);
  const json c = json::parse(cal.out);
  CHECK(c.at("achieved_epsilon").get<double>() <= 2.0);
  CHECK(c.at("achieved_epsilon").get<double>() >= 2.0 - 1e-3);

  const CliResult convert = RunCli(
      "accountant convert --q 1 --sigma 1 --steps 1 --delta 1e-6", dir);
  REQUIRE(convert.exit_code == 0);
  CHECK(json::parse(convert.out).at("order").get<int>() == 6);
}

TEST_CASE("cli sweep: row counts, summary contract, re-derivable selection") {
  const fs::path dir = Scratch("sweep");
  json doc = BaseSyntheticConfig();
  doc["sweep"] = {{"epsilons", {1.0, 3.0}},
                  {"algorithms", {"hybrid", "rr_only"}},
                  {"seeds", {1, 2}},
                  {"rr_epochs", {1, 2}},
                  {"parallelism", 2},
                  {"root_seed", 5}};
  const fs::path config_path = WriteConfig(dir, doc);
  const fs::path out = dir / "out";
  const CliResult r = RunCli(
      "sweep --config " + config_path.string() + " --out " + out.string(), dir);
  REQUIRE_MESSAGE(r.exit_code == 0, r.err);

  // 2 eps x 2 algorithms x 2 seeds x 2 rr_epochs = 16 rows.
  const std::string results = Slurp(out / "results.csv");
  std::vector<std::string> lines;
  {
    std::istringstream ss(results);
    std::string line;
    while (std::getline(ss, line)) {
      if (!line.empty()) lines.push_back(line);
    }
  }
  REQUIRE(lines.size() == 17);  // header + 16
  CHECK(lines[0] == kResultsHeader);

  // Every emitted table row splits to the header's column count with the
  // artifact's own delimited-line reader.
  const std::size_t n_cols = internal::SplitLine(lines[0], ',').size();
  for (const std::string& line : lines) {
    CHECK(internal::SplitLine(line, ',').size() == n_cols);
  }

  // Summary: exactly one row per (epsilon, algorithm).
  const std::string summary = Slurp(out / "summary.csv");
  std::vector<std::string> sum_lines;
  {
    std::istringstream ss(summary);
    std::string line;
    while (std::getline(ss, line)) {
      if (!line.empty()) sum_lines.push_back(line);
    }
  }
  REQUIRE(sum_lines.size() == 5);  // header + 2 eps x 2 algorithms
  std::set<std::pair<std::string, std::string>> cells;
  for (std::size_t i = 1; i < sum_lines.size(); ++i) {
    const std::vector<std::string> cols = internal::SplitLine(sum_lines[i], ',');
    cells.insert({cols[0], cols[1]});
  }
  CHECK(cells.size() == 4);

  // Independent recomputation of the best-per-cell selection from the
  // long-form table.
  std::map<std::pair<std::string, std::string>,
           std::map<std::string, std::vector<double>>>
      by_cell;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::vector<std::string> cols = internal::SplitLine(lines[i], ',');
    const std::string combo = cols[2] + "|" + cols[3] + "|" + cols[4] + "|" + cols[5];
    by_cell[{cols[0], cols[1]}][combo].push_back(std::stod(cols[8]));
  }
  for (std::size_t i = 1; i < sum_lines.size(); ++i) {
    const std::vector<std::string> cols = internal::SplitLine(sum_lines[i], ',');
    double best_mean = 1e300;
    for (const auto& [combo, values] : by_cell[{cols[0], cols[1]}]) {
      best_mean = std::min(best_mean, Aggregate(values).mean);
    }
    // The written mean is rounded to six decimals.
    CHECK(std::abs(std::stod(cols[6]) - best_mean) <= 5e-7);
  }

  // Baseline table exists and has one row per seed.
  const std::string baseline = Slurp(out / "baseline.csv");
  CHECK(std::count(baseline.begin(), baseline.end(), '\n') == 3);  // header + 2

  // Per-row determinism is independent of the parallelism level.
  const fs::path out_serial = dir / "out_serial";
  const CliResult serial = RunCli("sweep --config " + config_path.string() +
                                      " --out " + out_serial.string() +
                                      " --parallelism 1",
                                  dir);
  REQUIRE(serial.exit_code == 0);
  CHECK(Slurp(out_serial / "results.csv") == results);
  CHECK(Slurp(out_serial / "summary.csv") == summary);
}

TEST_CASE("cli sweep: row failures are recorded, total failure exits 2") {
  const fs::path dir = Scratch("sweep_fail");
  // eps = 1e9 drives the DP-SGD calibration outside its bracket, so those
  // rows fail while rr_only rows succeed.
  json doc = BaseSyntheticConfig();
  doc["dataset"]["synthetic"]["n_examples"] = 400;
  doc["sweep"] = {{"epsilons", {3.0, 1e9}},
                  {"algorithms", {"rr_only", "dpsgd_only"}},
                  {"seeds", {1}}};
  const fs::path config_path = WriteConfig(dir, doc);
  const fs::path out = dir / "out";
  const CliResult mixed = RunCli(
      "sweep --config " + config_path.string() + " --out " + out.string(), dir);
  CHECK(mixed.exit_code == 0);
  const std::string errors = Slurp(out / "errors.csv");
  CHECK(errors.find("dpsgd_only") != std::string::npos);
  const std::string results = Slurp(out / "results.csv");
  CHECK(results.find("rr_only") != std::string::npos);
  CHECK(std::count(results.begin(), results.end(), '\n') == 4);  // header + 3

  // All rows failing is a runtime failure.
  json all_fail = doc;
  all_fail["sweep"] = {{"epsilons", {1e9}},
                       {"algorithms", {"dpsgd_only"}},
                       {"seeds", {1}}};
  const fs::path fail_path = dir / "fail.json";
  {
    std::ofstream f(fail_path);
    f << all_fail.dump();
  }
  const fs::path out2 = dir / "out2";
  const CliResult total = RunCli(
      "sweep --config " + fail_path.string() + " --out " + out2.string(), dir);
  CHECK(total.exit_code == 2);
}

TEST_CASE("output directory precedence: flag over config over environment") {
  const fs::path dir = Scratch("outdir");
  json spec = {{"n_examples", 50}, {"n_users", 5}, {"seed", 2}};
  const fs::path spec_path = dir / "spec.json";
  {
    std::ofstream out(spec_path);
    out << spec.dump();
  }

  // Environment default applies when no flag or config value is present.
  const fs::path env_dir = dir / "from_env";
  const std::string env_cmd =
      "SEMISENS_OUT_DIR=" + env_dir.string() + " " + SEMISENS_CLI_PATH +
      " synth --spec " + spec_path.string() + " >/dev/null 2>&1";
  REQUIRE(std::system(env_cmd.c_str()) == 0);
  CHECK(fs::exists(env_dir / "data.csv"));

  // An explicit flag wins over the environment.
  const fs::path flag_dir = dir / "from_flag";
  const std::string flag_cmd =
      "SEMISENS_OUT_DIR=" + (dir / "ignored").string() + " " +
      SEMISENS_CLI_PATH + " synth --spec " + spec_path.string() + " --out " +
      flag_dir.string() + " >/dev/null 2>&1";
  REQUIRE(std::system(flag_cmd.c_str()) == 0);
  CHECK(fs::exists(flag_dir / "data.csv"));
  CHECK(!fs::exists(dir / "ignored" / "data.csv"));

  // A config output_dir wins over the environment for train runs.
  const fs::path cfg_dir = dir / "from_config";
  json doc = BaseSyntheticConfig();
  doc["output_dir"] = cfg_dir.string();
  const fs::path config_path = WriteConfig(dir, doc);
  const std::string cfg_cmd =
      "SEMISENS_OUT_DIR=" + (dir / "ignored2").string() + " " +
      SEMISENS_CLI_PATH + " train --config " + config_path.string() +
      " >/dev/null 2>&1";
  REQUIRE(std::system(cfg_cmd.c_str()) == 0);
  CHECK(fs::exists(cfg_dir / "report.json"));
  CHECK(!fs::exists(dir / "ignored2" / "report.json"));
}
