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
//
// Command line entry point. Subcommands:
//   train       run one training configuration, write report + checkpoint
//   sweep       run a grid of configurations, write plot-ready CSV tables
//   accountant  privacy accounting queries (rdp / convert / calibrate / group)
//   synth       generate a synthetic dataset + schema document
//
// Exit codes: 0 success, 1 usage/config error, 2 runtime failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "semisens/config.hpp"
#include "semisens/data.hpp"
#include "semisens/metrics.hpp"
#include "semisens/model.hpp"
#include "semisens/privacy.hpp"
#include "semisens/sweep.hpp"
#include "semisens/train.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kOutDirEnvVar = "SEMISENS_OUT_DIR";

// Precedence: explicit --out flag, then the config document, then the
// environment default, then the working directory.
std::string ResolveOutputDir(const std::string& flag_value,
                             const std::string& config_value) {
  if (!flag_value.empty()) return flag_value;
  if (!config_value.empty()) return config_value;
  if (const char* env = std::getenv(kOutDirEnvVar); env && *env) return env;
  return ".";
}

semisens::Seeds SeedsFromRoot(std::uint64_t root) {
  return semisens::DeriveSeeds(root, 0);
}

struct SplitData {
  semisens::Dataset train;
  semisens::Dataset test;
};

SplitData LoadAndSplit(const semisens::RunConfig& config) {
  semisens::LoadReport report;
  const semisens::Dataset all = semisens::LoadConfiguredDataset(config, &report);
  if (report.rows_skipped > 0) {
    std::cerr << "note: skipped " << report.rows_skipped << " malformed rows of "
              << report.rows_read << '\n';
  }
  auto [train, test] = semisens::SplitTrainTest(
      all, config.test_fraction, config.split_mode, config.split_seed);
  return {std::move(train), std::move(test)};
}

int CmdTrain(const std::string& config_path, const std::string& out_flag,
             std::optional<std::uint64_t> seed_flag) {
  semisens::RunConfig config = semisens::LoadRunConfig(config_path);
  if (seed_flag) config.train.seeds = SeedsFromRoot(*seed_flag);
  const std::string out_dir = ResolveOutputDir(out_flag, config.output_dir);
  fs::create_directories(out_dir);

  SplitData data = LoadAndSplit(config);
  const semisens::TrainOutcome outcome =
      semisens::Train(data.train, data.test, config.model, config.train);

  const fs::path report_path = fs::path(out_dir) / "report.json";
  const fs::path checkpoint_path = fs::path(out_dir) / "checkpoint.json";
  {
    std::ofstream out(report_path);
    if (!out) throw semisens::IoError("cannot write '" + report_path.string() + "'");
    out << semisens::ReportToJson(outcome.report).dump(2) << '\n';
  }
  semisens::SaveCheckpoint(outcome.params, checkpoint_path.string());

  std::cout << "algorithm: " << outcome.report.algorithm << '\n'
            << "test_auc: " << outcome.report.eval.auc << '\n'
            << "total_epsilon: " << outcome.report.ledger.TotalEpsilon() << '\n'
            << "report: " << report_path.string() << '\n'
            << "checkpoint: " << checkpoint_path.string() << '\n';
  return 0;
}

int CmdSweep(const std::string& config_path, const std::string& out_flag,
             std::optional<int> parallelism_flag,
             std::optional<std::uint64_t> seed_flag) {
  semisens::RunConfig config = semisens::LoadRunConfig(config_path);
  if (!config.sweep) {
    throw semisens::ConfigError("config has no sweep section");
  }
  if (parallelism_flag) config.sweep->parallelism = *parallelism_flag;
  if (seed_flag) config.sweep->root_seed = *seed_flag;
  const std::string out_dir = ResolveOutputDir(out_flag, config.output_dir);
  fs::create_directories(out_dir);

  SplitData data = LoadAndSplit(config);
  const semisens::SweepOutput output =
      semisens::RunSweep(config, data.train, data.test);

  const fs::path results_path = fs::path(out_dir) / "results.csv";
  const fs::path summary_path = fs::path(out_dir) / "summary.csv";
  semisens::WriteResultsCsv(output, results_path.string());
  const std::vector<semisens::SummaryRow> summary =
      semisens::SummarizeResultsCsv(results_path.string());
  semisens::WriteSummaryCsv(summary, output.baseline_auc, summary_path.string());
  if (!output.baseline_aucs.empty()) {
    semisens::WriteBaselineCsv(output, *config.sweep,
                               (fs::path(out_dir) / "baseline.csv").string());
  }
  if (output.failures > 0) {
    semisens::WriteErrorsCsv(output,
                             (fs::path(out_dir) / "errors.csv").string());
    std::cerr << "note: " << output.failures << " sweep rows failed\n";
  }

  std::cout << "rows: " << output.rows.size() - output.failures << '\n'
            << "failures: " << output.failures << '\n'
            << "baseline_auc: " << output.baseline_auc << '\n'
            << "results: " << results_path.string() << '\n'
            << "summary: " << summary_path.string() << '\n';
  for (const semisens::SummaryRow& row : summary) {
    std::cout << "  eps=" << row.epsilon << ' ' << row.algorithm
              << " rel_loss% " << semisens::FormatMeanStd(row.rel_loss) << '\n';
  }
  return 0;
}

int CmdSynth(const std::string& spec_path, const std::string& out_flag) {
  std::ifstream in(spec_path);
  if (!in) throw semisens::ConfigError("cannot open spec file '" + spec_path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const std::exception& e) {
    throw semisens::ConfigError(std::string("spec is not valid JSON: ") + e.what());
  }
  // Accept a full run config, a {"synthetic": ...} wrapper, or a bare spec.
  const json& spec_json = doc.contains("dataset")
                              ? doc.at("dataset").at("synthetic")
                              : (doc.contains("synthetic") ? doc.at("synthetic") : doc);
  const semisens::SyntheticSpec spec = semisens::internal::SyntheticFromJson(spec_json);

  const std::string out_dir = ResolveOutputDir(out_flag, "");
  fs::create_directories(out_dir);
  const semisens::Dataset dataset = semisens::GenerateSynthetic(spec);

  const fs::path data_path = fs::path(out_dir) / "data.csv";
  semisens::SaveDelimited(dataset, data_path.string());

  // Identity vocabulary files: line i holds token "i+1", so the written
  // token indices reload to themselves and "0" stays the reserved bucket.
  json vocab_files = json::object();
  for (std::size_t s = 0; s < dataset.schema.num_cat_fields(); ++s) {
    const semisens::FieldSpec& f = dataset.schema.cat_field(s);
    const std::string vocab_name = "vocab_" + f.name + ".txt";
    std::ofstream vf(fs::path(out_dir) / vocab_name);
    if (!vf) throw semisens::IoError("cannot write vocabulary '" + vocab_name + "'");
    for (std::uint32_t v = 1; v < f.vocab_size; ++v) vf << v << '\n';
    vocab_files[f.name] = vocab_name;
  }

  json schema_doc;
  schema_doc["path"] = "data.csv";
  schema_doc["delimiter"] = ",";
  schema_doc["has_header"] = true;
  schema_doc["schema"] = semisens::internal::SchemaToJson(dataset.schema);
  json column_map = json::object();
  for (const semisens::FieldSpec& f : dataset.schema.fields()) {
    column_map[f.name] = f.name;
  }
  column_map[dataset.schema.label_field()] = dataset.schema.label_field();
  if (dataset.schema.user_id_field()) {
    column_map[*dataset.schema.user_id_field()] = *dataset.schema.user_id_field();
  }
  schema_doc["column_map"] = std::move(column_map);
  schema_doc["vocab_files"] = std::move(vocab_files);

  const fs::path schema_path = fs::path(out_dir) / "schema.json";
  {
    std::ofstream out(schema_path);
    if (!out) throw semisens::IoError("cannot write '" + schema_path.string() + "'");
    out << schema_doc.dump(2) << '\n';
  }

  std::cout << "examples: " << dataset.size() << '\n'
            << "data: " << data_path.string() << '\n'
            << "schema: " << schema_path.string() << '\n';
  return 0;
}

void PrintJson(const json& doc) { std::cout << doc.dump(2) << '\n'; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DP training with semi-sensitive features"};
  app.require_subcommand(1);

  std::string config_path, out_dir, spec_path;
  std::optional<std::uint64_t> seed_flag;
  std::optional<int> parallelism_flag;

  CLI::App* train = app.add_subcommand("train", "run one training configuration");
  train->add_option("--config", config_path, "run config JSON path")->required();
  train->add_option("--out", out_dir, "output directory");
  train->add_option("--seed", seed_flag, "override the run seeds from one root seed");

  CLI::App* sweep = app.add_subcommand("sweep", "run a configuration grid");
  sweep->add_option("--config", config_path, "run config JSON path")->required();
  sweep->add_option("--out", out_dir, "output directory");
  sweep->add_option("--parallelism", parallelism_flag, "concurrent sweep rows");
  sweep->add_option("--seed", seed_flag, "override the sweep root seed");

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  synth->add_option("--spec", spec_path, "synthetic spec JSON path")->required();
  synth->add_option("--out", out_dir, "output directory");

  CLI::App* acc = app.add_subcommand("accountant", "privacy accounting queries");
  acc->require_subcommand(1);
  double q = 1.0, sigma = 1.0, delta = 1e-6, eps = 1.0;
  std::int64_t steps = 1, order = 2, group_k = 1;
  bool invert = false;

  CLI::App* rdp = acc->add_subcommand("rdp", "per-step RDP at one order");
  rdp->add_option("--q", q, "Poisson sampling rate")->required();
  rdp->add_option("--sigma", sigma, "noise multiplier")->required();
  rdp->add_option("--order", order, "integer order alpha >= 2")->required();

  CLI::App* convert = acc->add_subcommand("convert", "compose T steps and convert to (eps, delta)");
  convert->add_option("--q", q)->required();
  convert->add_option("--sigma", sigma)->required();
  convert->add_option("--steps", steps)->required();
  convert->add_option("--delta", delta)->required();

  CLI::App* calibrate = acc->add_subcommand("calibrate", "noise multiplier for a target epsilon");
  calibrate->add_option("--eps", eps)->required();
  calibrate->add_option("--delta", delta)->required();
  calibrate->add_option("--q", q)->required();
  calibrate->add_option("--steps", steps)->required();

  CLI::App* group = acc->add_subcommand("group", "group privacy under a per-user cap");
  group->add_option("--eps", eps)->required();
  group->add_option("--delta", delta)->required();
  group->add_option("--k", group_k)->required();
  group->add_flag("--invert", invert,
                  "calibrate an example-level budget for a user-level target");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
    std::cerr << "error: usage: " << e.what() << '\n';
    return 1;
  }

  try {
    if (train->parsed()) return CmdTrain(config_path, out_dir, seed_flag);
    if (sweep->parsed()) return CmdSweep(config_path, out_dir, parallelism_flag, seed_flag);
    if (synth->parsed()) return CmdSynth(spec_path, out_dir);
    if (acc->parsed()) {
      if (rdp->parsed()) {
        const semisens::RdpCurve curve = semisens::RdpSubsampledGaussian(
            q, sigma, {static_cast<int>(order)});
        PrintJson({{"q", q},
                   {"sigma", sigma},
                   {"order", order},
                   {"eps_rdp", curve.eps_rdp[0]}});
      } else if (convert->parsed()) {
        const semisens::ConvertedEpsilon c = semisens::AccountantEpsilon(
            q, sigma, steps, delta, semisens::DefaultRdpOrders());
        PrintJson({{"q", q},
                   {"sigma", sigma},
                   {"steps", steps},
                   {"delta", delta},
                   {"epsilon", c.epsilon},
                   {"order", c.order}});
      } else if (calibrate->parsed()) {
        const double s = semisens::CalibrateSigma(eps, delta, q, steps);
        const semisens::ConvertedEpsilon c = semisens::AccountantEpsilon(
            q, s, steps, delta, semisens::DefaultRdpOrders());
        PrintJson({{"target_epsilon", eps},
                   {"delta", delta},
                   {"q", q},
                   {"steps", steps},
                   {"sigma", s},
                   {"achieved_epsilon", c.epsilon},
                   {"order", c.order}});
      } else if (group->parsed()) {
        const semisens::PrivacyBudget in{eps, delta};
        const semisens::PrivacyBudget out =
            invert ? semisens::UserLevelCalibrate(in, group_k)
                   : semisens::GroupPrivacy(in, group_k);
        PrintJson({{"input_epsilon", eps},
                   {"input_delta", delta},
                   {"k", group_k},
                   {"inverted", invert},
                   {"epsilon", out.epsilon},
                   {"delta", out.delta}});
      }
      return 0;
    }
  } catch (const semisens::ConfigError& e) {
    std::cerr << "error: config: " << e.what() << '\n';
    return 1;
  } catch (const semisens::SchemaError& e) {
    std::cerr << "error: config: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: runtime: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
