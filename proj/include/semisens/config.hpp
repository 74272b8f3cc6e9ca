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
// Run configuration documents. A run config is one JSON file naming exactly
// one dataset source (delimited file or synthetic spec), the split, the model
// and training settings, and optionally a sweep grid. See README.md for the
// full format.

#ifndef SEMISENS_CONFIG_HPP_
#define SEMISENS_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "semisens/common.hpp"
#include "semisens/data.hpp"
#include "semisens/model.hpp"
#include "semisens/train.hpp"

namespace semisens {

struct DelimitedSource {
  std::string path;
  FeatureSchema schema;
  ColumnMap column_map;
  LoadOptions options;
};

struct SweepGrid {
  std::vector<double> epsilons = {1, 3, 5, 10, 20, 30, 50};
  std::vector<Algorithm> algorithms = {Algorithm::kHybrid, Algorithm::kRrOnly,
                                       Algorithm::kDpsgdOnly};
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  // Empty axes fall back to the base config's single value.
  std::vector<double> clip_norms;
  std::vector<std::int64_t> rr_epochs;
  std::vector<std::int64_t> dpsgd_epochs;
  std::vector<std::int64_t> caps;
  int parallelism = 1;
  std::uint64_t root_seed = 1;
};

struct RunConfig {
  std::optional<DelimitedSource> delimited;
  std::optional<SyntheticSpec> synthetic;
  double test_fraction = 0.2;
  SplitMode split_mode = SplitMode::kRandom;
  std::uint64_t split_seed = 7;
  ModelConfig model;
  TrainConfig train;
  std::optional<SweepGrid> sweep;
  std::string output_dir;
};

namespace internal {

template <typename T>
T GetOr(const nlohmann::json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const std::exception& e) {
    throw ConfigError("bad value for '" + key + "': " + e.what());
  }
}

template <typename T>
T Require(const nlohmann::json& j, const std::string& key) {
  if (!j.contains(key)) throw ConfigError("missing required key '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const std::exception& e) {
    throw ConfigError("bad value for '" + key + "': " + e.what());
  }
}

inline FeatureSchema SchemaFromJson(const nlohmann::json& j) {
  std::vector<FieldSpec> fields;
  for (const nlohmann::json& f : Require<nlohmann::json>(j, "fields")) {
    FieldSpec spec;
    spec.name = Require<std::string>(f, "name");
    spec.kind = FieldKindFromString(Require<std::string>(f, "kind"));
    spec.sensitive = GetOr<bool>(f, "sensitive", false);
    if (spec.kind == FieldKind::kCategorical) {
      spec.vocab_size = Require<std::uint32_t>(f, "vocab_size");
    }
    fields.push_back(std::move(spec));
  }
  std::optional<std::string> user_field;
  if (j.contains("user_id_field") && !j.at("user_id_field").is_null()) {
    user_field = j.at("user_id_field").get<std::string>();
  }
  return FeatureSchema(std::move(fields), Require<std::string>(j, "label_field"),
                       std::move(user_field));
}

inline nlohmann::json SchemaToJson(const FeatureSchema& schema) {
  nlohmann::json j;
  j["fields"] = nlohmann::json::array();
  for (const FieldSpec& f : schema.fields()) {
    nlohmann::json fj;
    fj["name"] = f.name;
    fj["kind"] = ToString(f.kind);
    fj["sensitive"] = f.sensitive;
    if (f.kind == FieldKind::kCategorical) fj["vocab_size"] = f.vocab_size;
    j["fields"].push_back(std::move(fj));
  }
  j["label_field"] = schema.label_field();
  if (schema.user_id_field()) j["user_id_field"] = *schema.user_id_field();
  return j;
}

inline OptimizerConfig OptimizerFromJson(const nlohmann::json& j) {
  OptimizerConfig opt;
  opt.kind = OptimizerKindFromString(GetOr<std::string>(j, "kind", "sgd"));
  opt.learning_rate = GetOr<double>(j, "learning_rate", opt.learning_rate);
  opt.momentum = GetOr<double>(j, "momentum", opt.momentum);
  opt.beta1 = GetOr<double>(j, "beta1", opt.beta1);
  opt.beta2 = GetOr<double>(j, "beta2", opt.beta2);
  opt.rho = GetOr<double>(j, "rho", opt.rho);
  opt.stability = GetOr<double>(j, "stability", opt.stability);
  return opt;
}

inline SyntheticSpec SyntheticFromJson(const nlohmann::json& j) {
  SyntheticSpec spec;
  spec.n_examples = Require<std::size_t>(j, "n_examples");
  spec.n_users = GetOr<std::size_t>(j, "n_users", std::max<std::size_t>(1, spec.n_examples / 10));
  spec.nonsensitive_vocab_sizes = GetOr<std::vector<std::uint32_t>>(
      j, "nonsensitive_vocab_sizes", spec.nonsensitive_vocab_sizes);
  spec.sensitive_vocab_sizes = GetOr<std::vector<std::uint32_t>>(
      j, "sensitive_vocab_sizes", spec.sensitive_vocab_sizes);
  spec.nonsensitive_signal_weight =
      GetOr<double>(j, "nonsensitive_signal_weight", spec.nonsensitive_signal_weight);
  spec.sensitive_signal_weight =
      GetOr<double>(j, "sensitive_signal_weight", spec.sensitive_signal_weight);
  spec.label_noise = GetOr<double>(j, "label_noise", spec.label_noise);
  spec.seed = GetOr<std::uint64_t>(j, "seed", spec.seed);
  spec.Validate();
  return spec;
}

}  // namespace internal

inline RunConfig ParseRunConfig(const nlohmann::json& doc,
                                const std::string& base_dir = ".") {
  RunConfig config;

  const nlohmann::json& dataset = internal::Require<nlohmann::json>(doc, "dataset");
  const bool has_delimited = dataset.contains("delimited");
  const bool has_synth = dataset.contains("synthetic");
  if (has_delimited == has_synth) {
    throw ConfigError("dataset must name exactly one source: delimited or synthetic");
  }
  auto resolve_path = [&](const std::string& p) {
    std::filesystem::path fp(p);
    if (fp.is_relative()) fp = std::filesystem::path(base_dir) / fp;
    return fp.string();
  };
  if (has_delimited) {
    const nlohmann::json& d = dataset.at("delimited");
    DelimitedSource src;
    src.path = resolve_path(internal::Require<std::string>(d, "path"));
    src.schema = internal::SchemaFromJson(internal::Require<nlohmann::json>(d, "schema"));
    for (const auto& [field, column] :
         internal::Require<std::map<std::string, std::string>>(d, "column_map")) {
      src.column_map.columns[field] = column;
    }
    const std::string delim = internal::GetOr<std::string>(d, "delimiter", ",");
    if (delim.size() != 1) throw ConfigError("delimiter must be a single character");
    src.options.delimiter = delim[0];
    src.options.has_header = internal::GetOr<bool>(d, "has_header", true);
    if (d.contains("vocab_files")) {
      for (const auto& [field, path] :
           d.at("vocab_files").get<std::map<std::string, std::string>>()) {
        src.options.vocab_files[field] = resolve_path(path);
      }
    }
    if (d.contains("order_field") && !d.at("order_field").is_null()) {
      src.options.order_field = d.at("order_field").get<std::string>();
    }
    if (!std::filesystem::exists(src.path)) {
      throw ConfigError("dataset file does not exist: '" + src.path + "'");
    }
    for (const auto& [field, path] : src.options.vocab_files) {
      if (!std::filesystem::exists(path)) {
        throw ConfigError("vocabulary file does not exist: '" + path + "'");
      }
    }
    config.delimited = std::move(src);
  } else {
    config.synthetic = internal::SyntheticFromJson(dataset.at("synthetic"));
  }

  if (doc.contains("split")) {
    const nlohmann::json& s = doc.at("split");
    config.test_fraction = internal::GetOr<double>(s, "test_fraction", 0.2);
    const std::string mode = internal::GetOr<std::string>(s, "mode", "random");
    if (mode == "random") {
      config.split_mode = SplitMode::kRandom;
    } else if (mode == "chronological") {
      config.split_mode = SplitMode::kChronological;
    } else {
      throw ConfigError("unknown split mode '" + mode + "'");
    }
    config.split_seed = internal::GetOr<std::uint64_t>(s, "seed", 7);
  }

  if (doc.contains("model")) {
    const nlohmann::json& m = doc.at("model");
    config.model.embedding_dims = internal::GetOr<std::vector<std::uint32_t>>(
        m, "embedding_dims", {});
    config.model.ns_hidden =
        internal::GetOr<std::vector<std::uint32_t>>(m, "ns_hidden", {});
    config.model.s_hidden =
        internal::GetOr<std::vector<std::uint32_t>>(m, "s_hidden", {});
    config.model.common_hidden =
        internal::GetOr<std::vector<std::uint32_t>>(m, "common_hidden", {});
  }

  const nlohmann::json& t = internal::Require<nlohmann::json>(doc, "train");
  config.train.algorithm =
      AlgorithmFromString(internal::Require<std::string>(t, "algorithm"));
  if (t.contains("budget")) {
    config.train.budget.epsilon =
        internal::GetOr<double>(t.at("budget"), "epsilon", 1.0);
    config.train.budget.delta =
        internal::GetOr<double>(t.at("budget"), "delta", 1e-6);
  }
  if (t.contains("rr")) {
    const nlohmann::json& r = t.at("rr");
    config.train.rr.epochs = internal::GetOr<std::int64_t>(r, "epochs", 1);
    config.train.rr.batch_size = internal::GetOr<std::size_t>(r, "batch_size", 1024);
    if (r.contains("optimizer")) {
      config.train.rr.optimizer = internal::OptimizerFromJson(r.at("optimizer"));
    }
    config.train.rr.schedule =
        ScheduleKindFromString(internal::GetOr<std::string>(r, "schedule", "cosine"));
  }
  if (t.contains("dpsgd")) {
    const nlohmann::json& d = t.at("dpsgd");
    config.train.dpsgd.epochs = internal::GetOr<std::int64_t>(d, "epochs", 1);
    if (d.contains("steps") && !d.at("steps").is_null()) {
      config.train.dpsgd.steps = d.at("steps").get<std::int64_t>();
    }
    config.train.dpsgd.expected_batch =
        internal::GetOr<double>(d, "expected_batch", 1024.0);
    config.train.dpsgd.clip_norm = internal::GetOr<double>(d, "clip_norm", 1.0);
    if (d.contains("optimizer")) {
      config.train.dpsgd.optimizer = internal::OptimizerFromJson(d.at("optimizer"));
    }
    config.train.dpsgd.schedule =
        ScheduleKindFromString(internal::GetOr<std::string>(d, "schedule", "cosine"));
    if (d.contains("sigma_override") && !d.at("sigma_override").is_null()) {
      config.train.dpsgd.sigma_override = d.at("sigma_override").get<double>();
    }
  }
  if (t.contains("user_level") && !t.at("user_level").is_null()) {
    const nlohmann::json& u = t.at("user_level");
    UserLevelConfig ul;
    ul.cap_rr = internal::GetOr<std::int64_t>(u, "cap_rr", 1);
    ul.cap_dpsgd = internal::GetOr<std::int64_t>(u, "cap_dpsgd", 1);
    if (u.contains("fixed_steps") && !u.at("fixed_steps").is_null()) {
      ul.fixed_steps = u.at("fixed_steps").get<std::int64_t>();
    }
    config.train.user_level = ul;
  }
  if (t.contains("seeds")) {
    const nlohmann::json& s = t.at("seeds");
    config.train.seeds.data = internal::GetOr<std::uint64_t>(s, "data", 1);
    config.train.seeds.rr = internal::GetOr<std::uint64_t>(s, "rr", 2);
    config.train.seeds.noise = internal::GetOr<std::uint64_t>(s, "noise", 3);
    config.train.seeds.init = internal::GetOr<std::uint64_t>(s, "init", 4);
  }

  if (doc.contains("metrics") && doc.at("metrics").contains("baseline_auc") &&
      !doc.at("metrics").at("baseline_auc").is_null()) {
    config.train.baseline_auc = doc.at("metrics").at("baseline_auc").get<double>();
  }

  if (doc.contains("sweep")) {
    const nlohmann::json& s = doc.at("sweep");
    SweepGrid grid;
    grid.epsilons = internal::GetOr<std::vector<double>>(s, "epsilons", grid.epsilons);
    if (s.contains("algorithms")) {
      grid.algorithms.clear();
      for (const std::string& a : s.at("algorithms").get<std::vector<std::string>>()) {
        grid.algorithms.push_back(AlgorithmFromString(a));
      }
    }
    grid.seeds = internal::GetOr<std::vector<std::uint64_t>>(s, "seeds", grid.seeds);
    grid.clip_norms = internal::GetOr<std::vector<double>>(s, "clip_norms", {});
    grid.rr_epochs = internal::GetOr<std::vector<std::int64_t>>(s, "rr_epochs", {});
    grid.dpsgd_epochs =
        internal::GetOr<std::vector<std::int64_t>>(s, "dpsgd_epochs", {});
    grid.caps = internal::GetOr<std::vector<std::int64_t>>(s, "caps", {});
    grid.parallelism = internal::GetOr<int>(s, "parallelism", 1);
    grid.root_seed = internal::GetOr<std::uint64_t>(s, "root_seed", 1);
    if (grid.epsilons.empty() || grid.algorithms.empty() || grid.seeds.empty()) {
      throw ConfigError("sweep grids for epsilons/algorithms/seeds must be non-empty");
    }
    if (grid.parallelism < 1) throw ConfigError("parallelism must be >= 1");
    config.sweep = std::move(grid);
  }

  config.output_dir = internal::GetOr<std::string>(doc, "output_dir", "");
  return config;
}

inline RunConfig LoadRunConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const std::exception& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return ParseRunConfig(doc,
                        std::filesystem::path(path).parent_path().string());
}

// Materializes the configured dataset source.
inline Dataset LoadConfiguredDataset(const RunConfig& config,
                                     LoadReport* report = nullptr) {
  if (config.synthetic) return GenerateSynthetic(*config.synthetic);
  const DelimitedSource& src = *config.delimited;
  return LoadDelimited(src.path, src.schema, src.column_map, src.options, report);
}

}  // namespace semisens

#endif  // SEMISENS_CONFIG_HPP_
