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

#ifndef SEMISENS_DATA_HPP_
#define SEMISENS_DATA_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "semisens/common.hpp"
#include "semisens/rng.hpp"

namespace semisens {

enum class FieldKind { kCategorical, kInteger, kFloat };

inline std::string ToString(FieldKind kind) {
  switch (kind) {
    case FieldKind::kCategorical: return "categorical";
    case FieldKind::kInteger: return "integer";
    case FieldKind::kFloat: return "float";
  }
  return "?";
}

inline FieldKind FieldKindFromString(const std::string& s) {
  if (s == "categorical") return FieldKind::kCategorical;
  if (s == "integer") return FieldKind::kInteger;
  if (s == "float") return FieldKind::kFloat;
  throw SchemaError("unknown field kind '" + s + "'");
}

struct FieldSpec {
  std::string name;
  FieldKind kind = FieldKind::kCategorical;
  bool sensitive = false;
  // Categorical fields only. Index 0 is the shared out-of-vocabulary bucket.
  std::uint32_t vocab_size = 1;
};

// Ordered description of one example row. Categorical and numeric fields keep
// their schema order within their own kind; `cat_field_indices` /
// `num_field_indices` give the schema position of each slot.
class FeatureSchema {
 public:
  FeatureSchema() = default;
  FeatureSchema(std::vector<FieldSpec> fields, std::string label_field,
                std::optional<std::string> user_id_field = std::nullopt)
      : fields_(std::move(fields)),
        label_field_(std::move(label_field)),
        user_id_field_(std::move(user_id_field)) {
    Validate();
    for (std::size_t i = 0; i < fields_.size(); ++i) {
      if (fields_[i].kind == FieldKind::kCategorical) {
        cat_field_indices_.push_back(i);
      } else {
        num_field_indices_.push_back(i);
      }
    }
  }

  const std::vector<FieldSpec>& fields() const { return fields_; }
  const std::string& label_field() const { return label_field_; }
  const std::optional<std::string>& user_id_field() const {
    return user_id_field_;
  }
  const std::vector<std::size_t>& cat_field_indices() const {
    return cat_field_indices_;
  }
  const std::vector<std::size_t>& num_field_indices() const {
    return num_field_indices_;
  }

  std::size_t num_cat_fields() const { return cat_field_indices_.size(); }
  std::size_t num_num_fields() const { return num_field_indices_.size(); }

  const FieldSpec& cat_field(std::size_t slot) const {
    return fields_[cat_field_indices_[slot]];
  }
  const FieldSpec& num_field(std::size_t slot) const {
    return fields_[num_field_indices_[slot]];
  }

 private:
  void Validate() const {
    if (fields_.empty()) throw SchemaError("schema has no fields");
    bool has_non_sensitive = false;
    std::map<std::string, int> seen;
    for (const FieldSpec& f : fields_) {
      if (f.name.empty()) throw SchemaError("schema field with empty name");
      if (++seen[f.name] > 1) {
        throw SchemaError("duplicate field name '" + f.name + "'");
      }
      if (f.kind == FieldKind::kCategorical && f.vocab_size < 1) {
        throw SchemaError("field '" + f.name + "' has vocab_size < 1");
      }
      if (!f.sensitive) has_non_sensitive = true;
    }
    if (!has_non_sensitive) {
      throw SchemaError("schema must contain at least one non-sensitive field");
    }
    if (label_field_.empty()) throw SchemaError("schema has no label field");
  }

  std::vector<FieldSpec> fields_;
  std::string label_field_;
  std::optional<std::string> user_id_field_;
  std::vector<std::size_t> cat_field_indices_;
  std::vector<std::size_t> num_field_indices_;
};

constexpr std::uint32_t kNoUser = std::numeric_limits<std::uint32_t>::max();

struct Example {
  std::uint32_t user = kNoUser;  // index into Dataset::user_ids, or kNoUser
  std::vector<std::uint32_t> cat_values;  // one slot per categorical field
  std::vector<double> num_values;         // one slot per numeric field
  std::uint8_t label = 0;
};

struct Dataset {
  FeatureSchema schema;
  std::vector<Example> examples;
  std::vector<std::string> user_ids;  // unique ids, Example::user indexes here
  // Raw key of the designated order column; present only when one was
  // configured at ingestion. Used by the chronological split.
  std::optional<std::vector<std::int64_t>> order_keys;

  std::size_t size() const { return examples.size(); }

  bool HasUserIds() const { return !user_ids.empty(); }

  void CheckConformance() const {
    for (const Example& e : examples) {
      if (e.cat_values.size() != schema.num_cat_fields() ||
          e.num_values.size() != schema.num_num_fields()) {
        throw SchemaError("example field count does not match schema");
      }
      for (std::size_t s = 0; s < e.cat_values.size(); ++s) {
        if (e.cat_values[s] >= schema.cat_field(s).vocab_size) {
          throw SchemaError("token index out of vocab bounds in field '" +
                            schema.cat_field(s).name + "'");
        }
      }
      if (e.label > 1) throw SchemaError("label outside {0,1}");
    }
  }
};

// ln(1 + max(x, 0)): the transform applied to integer features at ingestion.
// Monotone on non-negative inputs; all negatives collapse to 0.
inline double LogTransform(double x) { return std::log1p(std::max(x, 0.0)); }

// Maps a raw categorical token to an index in [0, vocab_size).
// With a vocabulary, file line i maps to index i + 1 and unseen tokens fall
// into the reserved bucket 0. Without one, tokens are hashed mod vocab_size.
class TokenMapper {
 public:
  explicit TokenMapper(std::uint32_t vocab_size) : vocab_size_(vocab_size) {}

  TokenMapper(std::uint32_t vocab_size, const std::vector<std::string>& vocab)
      : vocab_size_(vocab_size) {
    lookup_.emplace();
    for (std::size_t i = 0; i < vocab.size(); ++i) {
      const std::uint32_t index = static_cast<std::uint32_t>(i) + 1;
      if (index >= vocab_size_) {
        throw SchemaError("vocabulary larger than vocab_size - 1");
      }
      lookup_->emplace(vocab[i], index);
    }
  }

  std::uint32_t Map(const std::string& token) const {
    if (lookup_) {
      auto it = lookup_->find(token);
      return it == lookup_->end() ? 0u : it->second;
    }
    return static_cast<std::uint32_t>(Fnv1a64(token) % vocab_size_);
  }

 private:
  std::uint32_t vocab_size_;
  std::optional<std::unordered_map<std::string, std::uint32_t>> lookup_;
};

// One token per line; line i becomes index i + 1 (index 0 stays reserved).
inline std::vector<std::string> LoadVocabulary(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open vocabulary file '" + path + "'");
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  return tokens;
}

struct ColumnMap {
  // schema field name -> column. Columns are names when the file has a
  // header, otherwise 0-based indices rendered as decimal strings.
  std::map<std::string, std::string> columns;
};

struct LoadOptions {
  char delimiter = ',';
  bool has_header = true;
  // Field name -> vocabulary file path; fields without one use hashing.
  std::map<std::string, std::string> vocab_files;
  // Integer field whose raw value orders examples for chronological splits.
  std::optional<std::string> order_field;
};

struct LoadReport {
  std::size_t rows_read = 0;
  std::size_t rows_skipped = 0;
};

namespace internal {

inline std::vector<std::string> SplitLine(const std::string& line,
                                          char delimiter) {
  std::vector<std::string> cells;
  std::string cell;
  for (char c : line) {
    if (c == delimiter) {
      cells.push_back(std::move(cell));
      cell.clear();
    } else {
      cell.push_back(c);
    }
  }
  cells.push_back(std::move(cell));
  return cells;
}

inline bool ParseDouble(const std::string& s, double* out) {
  if (s.empty()) return false;
  std::size_t pos = 0;
  try {
    *out = std::stod(s, &pos);
  } catch (const std::exception&) {
    return false;
  }
  return pos == s.size() && std::isfinite(*out);
}

inline bool ParseLabel(const std::string& s, std::uint8_t* out) {
  if (s == "0") {
    *out = 0;
    return true;
  }
  if (s == "1") {
    *out = 1;
    return true;
  }
  return false;
}

}  // namespace internal

// Reads a delimited text file into a Dataset. Categorical strings are mapped
// through TokenMapper, integer fields go through LogTransform, float fields
// are taken verbatim. Malformed rows (wrong cell count, unparsable values,
// labels outside {0,1}) are skipped and counted in `report`.
inline Dataset LoadDelimited(const std::string& path,
                             const FeatureSchema& schema,
                             const ColumnMap& column_map,
                             const LoadOptions& options = {},
                             LoadReport* report = nullptr) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset file '" + path + "'");

  // Resolve every schema field (plus label / user id / order field) to a
  // column index before reading any data rows.
  std::string line;
  std::unordered_map<std::string, std::size_t> header_index;
  if (options.has_header) {
    if (!std::getline(in, line)) throw IoError("empty dataset file '" + path + "'");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::vector<std::string> names =
        internal::SplitLine(line, options.delimiter);
    for (std::size_t i = 0; i < names.size(); ++i) header_index[names[i]] = i;
  }

  auto resolve = [&](const std::string& field) -> std::size_t {
    auto it = column_map.columns.find(field);
    if (it == column_map.columns.end()) {
      throw SchemaError("no column mapped for field '" + field + "'");
    }
    if (options.has_header) {
      auto h = header_index.find(it->second);
      if (h == header_index.end()) {
        throw SchemaError("column '" + it->second + "' for field '" + field +
                          "' not present in header");
      }
      return h->second;
    }
    try {
      return static_cast<std::size_t>(std::stoul(it->second));
    } catch (const std::exception&) {
      throw SchemaError("column index '" + it->second + "' for field '" +
                        field + "' is not a number");
    }
  };

  std::vector<std::size_t> field_col(schema.fields().size());
  for (std::size_t i = 0; i < schema.fields().size(); ++i) {
    field_col[i] = resolve(schema.fields()[i].name);
  }
  const std::size_t label_col = resolve(schema.label_field());
  std::optional<std::size_t> user_col;
  if (schema.user_id_field()) user_col = resolve(*schema.user_id_field());
  std::optional<std::size_t> order_col;
  if (options.order_field) {
    order_col = resolve(*options.order_field);
  }

  std::vector<TokenMapper> mappers;
  mappers.reserve(schema.num_cat_fields());
  for (std::size_t s = 0; s < schema.num_cat_fields(); ++s) {
    const FieldSpec& f = schema.cat_field(s);
    auto vf = options.vocab_files.find(f.name);
    if (vf != options.vocab_files.end()) {
      mappers.emplace_back(f.vocab_size, LoadVocabulary(vf->second));
    } else {
      mappers.emplace_back(f.vocab_size);
    }
  }

  Dataset ds;
  ds.schema = schema;
  if (order_col) ds.order_keys.emplace();
  std::unordered_map<std::string, std::uint32_t> user_index;
  LoadReport local;

  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++local.rows_read;
    const std::vector<std::string> cells =
        internal::SplitLine(line, options.delimiter);

    auto cell_ok = [&](std::size_t col) { return col < cells.size(); };
    bool malformed = false;

    Example e;
    e.cat_values.resize(schema.num_cat_fields());
    e.num_values.resize(schema.num_num_fields());

    for (std::size_t s = 0; s < schema.num_cat_fields() && !malformed; ++s) {
      const std::size_t col = field_col[schema.cat_field_indices()[s]];
      if (!cell_ok(col)) {
        malformed = true;
        break;
      }
      e.cat_values[s] = mappers[s].Map(cells[col]);
    }
    for (std::size_t s = 0; s < schema.num_num_fields() && !malformed; ++s) {
      const std::size_t field = schema.num_field_indices()[s];
      const std::size_t col = field_col[field];
      double value = 0.0;
      if (!cell_ok(col) || !internal::ParseDouble(cells[col], &value)) {
        malformed = true;
        break;
      }
      e.num_values[s] = schema.fields()[field].kind == FieldKind::kInteger
                            ? LogTransform(value)
                            : value;
    }
    std::int64_t order_key = 0;
    if (!malformed && order_col) {
      double raw = 0.0;
      if (!cell_ok(*order_col) || !internal::ParseDouble(cells[*order_col], &raw)) {
        malformed = true;
      } else {
        order_key = static_cast<std::int64_t>(raw);
      }
    }
    if (!malformed && (!cell_ok(label_col) ||
                       !internal::ParseLabel(cells[label_col], &e.label))) {
      malformed = true;
    }
    if (!malformed && user_col) {
      if (!cell_ok(*user_col)) {
        malformed = true;
      } else {
        const std::string& uid = cells[*user_col];
        auto it = user_index.find(uid);
        if (it == user_index.end()) {
          const auto idx = static_cast<std::uint32_t>(ds.user_ids.size());
          user_index.emplace(uid, idx);
          ds.user_ids.push_back(uid);
          e.user = idx;
        } else {
          e.user = it->second;
        }
      }
    }

    if (malformed) {
      ++local.rows_skipped;
      continue;
    }
    ds.examples.push_back(std::move(e));
    if (ds.order_keys) ds.order_keys->push_back(order_key);
  }

  if (report) *report = local;
  return ds;
}

// Specification for the synthetic binary-classification generator. Labels
// follow Bernoulli(sigmoid(w_ns . phi_ns + w_s . phi_s)) where each
// categorical token carries a hidden standard-normal weight and the two
// signal knobs scale the contribution of each side; a final coin flips the
// label with probability `label_noise`.
struct SyntheticSpec {
  std::size_t n_examples = 10000;
  std::size_t n_users = 1000;
  std::vector<std::uint32_t> nonsensitive_vocab_sizes = {64, 64};
  std::vector<std::uint32_t> sensitive_vocab_sizes = {64, 64};
  double nonsensitive_signal_weight = 1.0;
  double sensitive_signal_weight = 1.0;
  double label_noise = 0.05;
  std::uint64_t seed = 1;

  void Validate() const {
    if (n_examples == 0) throw ConfigError("synthetic: n_examples must be > 0");
    if (n_users == 0 || n_users > n_examples) {
      throw ConfigError("synthetic: need 1 <= n_users <= n_examples");
    }
    if (nonsensitive_vocab_sizes.empty()) {
      throw ConfigError("synthetic: need at least one non-sensitive field");
    }
    if (!(nonsensitive_signal_weight >= 0.0) ||
        !std::isfinite(nonsensitive_signal_weight) ||
        !(sensitive_signal_weight >= 0.0) ||
        !std::isfinite(sensitive_signal_weight)) {
      throw ConfigError("synthetic: signal weights must be finite and >= 0");
    }
    if (!(label_noise >= 0.0 && label_noise < 0.5)) {
      throw ConfigError("synthetic: label_noise must lie in [0, 0.5)");
    }
  }
};

inline FeatureSchema SyntheticSchema(const SyntheticSpec& spec) {
  std::vector<FieldSpec> fields;
  for (std::size_t i = 0; i < spec.nonsensitive_vocab_sizes.size(); ++i) {
    fields.push_back({"ns_cat" + std::to_string(i), FieldKind::kCategorical,
                      false, spec.nonsensitive_vocab_sizes[i]});
  }
  for (std::size_t i = 0; i < spec.sensitive_vocab_sizes.size(); ++i) {
    fields.push_back({"s_cat" + std::to_string(i), FieldKind::kCategorical,
                      true, spec.sensitive_vocab_sizes[i]});
  }
  return FeatureSchema(std::move(fields), "label", std::string("user_id"));
}

inline Dataset GenerateSynthetic(const SyntheticSpec& spec) {
  spec.Validate();
  Dataset ds;
  ds.schema = SyntheticSchema(spec);

  const std::size_t n_ns = spec.nonsensitive_vocab_sizes.size();
  const std::size_t n_s = spec.sensitive_vocab_sizes.size();

  // Hidden per-token weights defining the label distribution.
  std::vector<std::vector<double>> token_weight(n_ns + n_s);
  for (std::size_t f = 0; f < n_ns + n_s; ++f) {
    const std::uint32_t vocab = f < n_ns
                                    ? spec.nonsensitive_vocab_sizes[f]
                                    : spec.sensitive_vocab_sizes[f - n_ns];
    CounterRng rng = CounterRng::Keyed(spec.seed, Stream::kSynthetic, {1, f});
    token_weight[f].resize(vocab);
    for (std::uint32_t v = 0; v < vocab; ++v) {
      token_weight[f][v] = rng.NextGaussian();
    }
  }
  const double ns_scale =
      spec.nonsensitive_signal_weight / std::sqrt(static_cast<double>(n_ns));
  const double s_scale =
      n_s == 0 ? 0.0
               : spec.sensitive_signal_weight / std::sqrt(static_cast<double>(n_s));

  // Zipf-like user popularity: user u drawn with probability ~ 1 / (u+1)^1.1.
  std::vector<double> user_cdf(spec.n_users);
  {
    double acc = 0.0;
    for (std::size_t u = 0; u < spec.n_users; ++u) {
      acc += 1.0 / std::pow(static_cast<double>(u + 1), 1.1);
      user_cdf[u] = acc;
    }
    for (double& c : user_cdf) c /= acc;
  }

  ds.user_ids.reserve(spec.n_users);
  for (std::size_t u = 0; u < spec.n_users; ++u) {
    ds.user_ids.push_back("u" + std::to_string(u));
  }

  ds.examples.reserve(spec.n_examples);
  for (std::size_t i = 0; i < spec.n_examples; ++i) {
    CounterRng rng = CounterRng::Keyed(spec.seed, Stream::kSynthetic, {2, i});
    Example e;
    e.cat_values.resize(n_ns + n_s);
    double logit = 0.0;
    for (std::size_t f = 0; f < n_ns + n_s; ++f) {
      const std::uint32_t vocab = f < n_ns
                                      ? spec.nonsensitive_vocab_sizes[f]
                                      : spec.sensitive_vocab_sizes[f - n_ns];
      const auto v = static_cast<std::uint32_t>(rng.NextBounded(vocab));
      e.cat_values[f] = v;
      logit += (f < n_ns ? ns_scale : s_scale) * token_weight[f][v];
    }
    const double p = 1.0 / (1.0 + std::exp(-logit));
    e.label = rng.NextDouble() < p ? 1 : 0;
    if (rng.NextDouble() < spec.label_noise) e.label ^= 1;

    const double z = rng.NextDouble();
    const auto it = std::lower_bound(user_cdf.begin(), user_cdf.end(), z);
    e.user = static_cast<std::uint32_t>(
        std::min<std::size_t>(it - user_cdf.begin(), spec.n_users - 1));
    ds.examples.push_back(std::move(e));
  }
  return ds;
}

enum class SplitMode { kRandom, kChronological };

// Disjoint train/test partition. Random mode shuffles indices with the seed;
// chronological mode sorts by the ingested order key (ties keep file order)
// and reserves the trailing fraction for test.
inline std::pair<Dataset, Dataset> SplitTrainTest(const Dataset& dataset,
                                                  double test_fraction,
                                                  SplitMode mode,
                                                  std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ConfigError("test_fraction must lie strictly between 0 and 1");
  }
  const std::size_t n = dataset.size();
  if (n < 2) throw ConfigError("need at least 2 examples to split");
  const std::size_t n_test = std::min<std::size_t>(
      n - 1, std::max<std::size_t>(
                 1, static_cast<std::size_t>(std::llround(
                        static_cast<double>(n) * test_fraction))));

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  if (mode == SplitMode::kChronological) {
    if (!dataset.order_keys) {
      throw ConfigError(
          "chronological split requires a designated order column");
    }
    const std::vector<std::int64_t>& keys = *dataset.order_keys;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) {
                       return keys[a] < keys[b];
                     });
  } else {
    CounterRng rng = CounterRng::Keyed(seed, Stream::kSplit);
    FisherYatesShuffle(order, rng);
  }

  auto subset = [&](std::size_t begin, std::size_t end) {
    Dataset out;
    out.schema = dataset.schema;
    out.user_ids = dataset.user_ids;
    if (dataset.order_keys) out.order_keys.emplace();
    out.examples.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) {
      out.examples.push_back(dataset.examples[order[i]]);
      if (dataset.order_keys) {
        out.order_keys->push_back((*dataset.order_keys)[order[i]]);
      }
    }
    return out;
  };

  return {subset(0, n - n_test), subset(n - n_test, n)};
}

// Per-user example cap: returns a dataset with exactly k examples for every
// user present in the input, sampled independently with replacement from that
// user's own pool. Users are processed in user-table order and each draws
// from its own stream, so the result is independent of input ordering.
inline Dataset CapExamplesPerUser(const Dataset& dataset, std::size_t k,
                                  std::uint64_t seed) {
  if (k < 1) throw ConfigError("example cap must be >= 1");
  if (!dataset.HasUserIds()) {
    throw ConfigError("per-user capping requires user ids");
  }
  std::vector<std::vector<std::size_t>> by_user(dataset.user_ids.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const std::uint32_t u = dataset.examples[i].user;
    if (u == kNoUser) throw ConfigError("example without user id in capped run");
    by_user[u].push_back(i);
  }

  Dataset out;
  out.schema = dataset.schema;
  out.user_ids = dataset.user_ids;
  for (std::size_t u = 0; u < by_user.size(); ++u) {
    if (by_user[u].empty()) continue;
    CounterRng rng = CounterRng::Keyed(seed, Stream::kUserCap, {u});
    for (std::size_t j = 0; j < k; ++j) {
      const std::size_t pick = static_cast<std::size_t>(
          rng.NextBounded(by_user[u].size()));
      out.examples.push_back(dataset.examples[by_user[u][pick]]);
    }
  }
  return out;
}

// Writes a dataset in the delimited format LoadDelimited reads back:
// header row, categorical tokens as bare indices, float values printed with
// round-trip precision. Integer fields hold the ingested log transform, so
// they are written back as the recovered raw count exp(v) - 1 (exact for
// counts below 2^52) and re-transform to the same stored value on reload.
inline void SaveDelimited(const Dataset& dataset, const std::string& path,
                          char delimiter = ',') {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write dataset file '" + path + "'");
  const FeatureSchema& schema = dataset.schema;

  std::vector<std::string> header;
  if (schema.user_id_field()) header.push_back(*schema.user_id_field());
  for (const FieldSpec& f : schema.fields()) header.push_back(f.name);
  header.push_back(schema.label_field());
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) out << delimiter;
    out << header[i];
  }
  out << '\n';

  std::ostringstream cell;
  cell.precision(17);
  for (const Example& e : dataset.examples) {
    bool first = true;
    auto emit = [&](const std::string& s) {
      if (!first) out << delimiter;
      first = false;
      out << s;
    };
    if (schema.user_id_field()) {
      emit(e.user == kNoUser ? "" : dataset.user_ids[e.user]);
    }
    std::size_t cat_slot = 0, num_slot = 0;
    for (const FieldSpec& f : schema.fields()) {
      if (f.kind == FieldKind::kCategorical) {
        emit(std::to_string(e.cat_values[cat_slot++]));
      } else if (f.kind == FieldKind::kInteger) {
        emit(std::to_string(std::llround(std::expm1(e.num_values[num_slot++]))));
      } else {
        cell.str("");
        cell << e.num_values[num_slot++];
        emit(cell.str());
      }
    }
    emit(std::to_string(static_cast<int>(e.label)));
    out << '\n';
  }
  if (!out) throw IoError("failed writing dataset file '" + path + "'");
}

}  // namespace semisens

#endif  // SEMISENS_DATA_HPP_
