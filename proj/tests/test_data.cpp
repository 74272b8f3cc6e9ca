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

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "semisens/data.hpp"

using namespace semisens;

namespace {

namespace fs = std::filesystem;

// Scratch directory unique to this test binary run.
fs::path ScratchDir() {
  const fs::path dir = fs::temp_directory_path() / "semisens_data_tests";
  fs::create_directories(dir);
  return dir;
}

fs::path WriteFile(const std::string& name, const std::string& contents) {
  const fs::path path = ScratchDir() / name;
  std::ofstream out(path);
  out << contents;
  return path;
}

FeatureSchema AttributionLikeSchema() {
  return FeatureSchema(
      {
          {"campaign", FieldKind::kCategorical, false, 100},
          {"cat1", FieldKind::kCategorical, true, 50},
          {"clicks", FieldKind::kInteger, false, 1},
      },
      "conversion", std::string("uid"));
}

}  // namespace

TEST_CASE("schema validation") {
  CHECK_THROWS_AS(FeatureSchema({{"a", FieldKind::kCategorical, true, 4}}, "y"),
                  SchemaError);  // everything sensitive
  CHECK_THROWS_AS(FeatureSchema({{"a", FieldKind::kCategorical, false, 4},
                                 {"a", FieldKind::kFloat, false, 1}},
                                "y"),
                  SchemaError);  // duplicate names
  CHECK_THROWS_AS(FeatureSchema({{"a", FieldKind::kCategorical, false, 0}}, "y"),
                  SchemaError);  // vocab too small
}

TEST_CASE("log transform shape") {
  CHECK(LogTransform(0.0) == 0.0);
  CHECK(LogTransform(-5.0) == 0.0);
  CHECK(LogTransform(std::exp(1.0) - 1.0) == doctest::Approx(1.0));
  double prev = -1.0;
  for (double x = 0.0; x < 50.0; x += 0.25) {
    const double y = LogTransform(x);
    CHECK(y >= prev);
    prev = y;
  }
}

TEST_CASE("load_delimited maps rows, transforms ints, and counts bad rows") {
  const fs::path path = WriteFile("basic.csv",
                                  "uid,campaign,cat1,clicks,conversion\n"
                                  "u1,camp7,3,0,1\n"
                                  "u2,camp9,4,-5,0\n"
                                  "u1,camp7,3,6,1\n"
                                  "bad,row,only\n"
                                  "u3,camp1,9,notanumber,1\n"
                                  "u4,camp1,9,2,7\n");
  const FeatureSchema schema = AttributionLikeSchema();
  ColumnMap cmap;
  cmap.columns = {{"campaign", "campaign"},
                  {"cat1", "cat1"},
                  {"clicks", "clicks"},
                  {"conversion", "conversion"},
                  {"uid", "uid"}};
  LoadReport report;
  const Dataset ds = LoadDelimited(path.string(), schema, cmap, {}, &report);

  REQUIRE(ds.size() == 3);
  CHECK(report.rows_read == 6);
  CHECK(report.rows_skipped == 3);
  ds.CheckConformance();

  // Hashed tokens are stable: the same raw token maps to the same index.
  CHECK(ds.examples[0].cat_values[0] == ds.examples[2].cat_values[0]);
  CHECK(ds.examples[0].cat_values[0] ==
        static_cast<std::uint32_t>(Fnv1a64("camp7") % 100));
  CHECK(ds.examples[0].label == 1);
  // Integer transform: 0 -> ln(1) = 0, negative clamps to 0.
  CHECK(ds.examples[0].num_values[0] == 0.0);
  CHECK(ds.examples[1].num_values[0] == 0.0);
  CHECK(ds.examples[2].num_values[0] == doctest::Approx(std::log(7.0)));
  // User interning: u1 appears twice with one id.
  CHECK(ds.examples[0].user == ds.examples[2].user);
  CHECK(ds.user_ids[ds.examples[0].user] == "u1");
}

TEST_CASE("load_delimited error paths") {
  const fs::path path = WriteFile("tiny.csv", "a,b\n1,0\n");
  FeatureSchema schema({{"a", FieldKind::kCategorical, false, 4}}, "b");
  ColumnMap incomplete;
  incomplete.columns = {{"b", "b"}};
  CHECK_THROWS_WITH_AS(
      LoadDelimited(path.string(), schema, incomplete, {}, nullptr),
      doctest::Contains("'a'"), SchemaError);

  ColumnMap wrong;
  wrong.columns = {{"a", "zzz"}, {"b", "b"}};
  CHECK_THROWS_AS(LoadDelimited(path.string(), schema, wrong, {}, nullptr),
                  SchemaError);

  ColumnMap ok;
  ok.columns = {{"a", "a"}, {"b", "b"}};
  CHECK_THROWS_AS(
      LoadDelimited("/nonexistent/nope.csv", schema, ok, {}, nullptr), IoError);
}

TEST_CASE("vocabulary files map line i to index i+1 with 0 reserved") {
  const fs::path vocab = WriteFile("tokens.vocab", "alpha\nbeta\ngamma\n");
  const fs::path data = WriteFile("vocab_data.csv",
                                  "tok,y\nalpha,0\ngamma,1\nunknown,1\n");
  FeatureSchema schema({{"tok", FieldKind::kCategorical, false, 8}}, "y");
  ColumnMap cmap;
  cmap.columns = {{"tok", "tok"}, {"y", "y"}};
  LoadOptions options;
  options.vocab_files["tok"] = vocab.string();
  const Dataset ds = LoadDelimited(data.string(), schema, cmap, options);
  REQUIRE(ds.size() == 3);
  CHECK(ds.examples[0].cat_values[0] == 1);  // alpha -> line 0 -> index 1
  CHECK(ds.examples[1].cat_values[0] == 3);  // gamma -> line 2 -> index 3
  CHECK(ds.examples[2].cat_values[0] == 0);  // unseen -> reserved bucket
}

TEST_CASE("ingestion fuzz: random byte rows never break vocab bounds") {
  CounterRng rng = CounterRng::Keyed(77, Stream::kSynthetic);
  std::string contents = "a,b,y\n";
  for (int row = 0; row < 300; ++row) {
    std::string line;
    const std::size_t len = rng.NextBounded(30);
    for (std::size_t i = 0; i < len; ++i) {
      // Printable-ish bytes incl. delimiters and digits.
      line.push_back(static_cast<char>(32 + rng.NextBounded(95)));
    }
    contents += line + "\n";
  }
  const fs::path path = WriteFile("fuzz.csv", contents);
  FeatureSchema schema({{"a", FieldKind::kCategorical, false, 5},
                        {"b", FieldKind::kCategorical, true, 3}},
                       "y");
  ColumnMap cmap;
  cmap.columns = {{"a", "0"}, {"b", "1"}, {"y", "2"}};
  LoadOptions options;
  options.has_header = false;
  LoadReport report;
  const Dataset ds = LoadDelimited(path.string(), schema, cmap, options, &report);
  CHECK_NOTHROW(ds.CheckConformance());
  CHECK(report.rows_read == report.rows_skipped + ds.size());
}

TEST_CASE("synthetic generation is reproducible and respects knobs") {
  SyntheticSpec spec;
  spec.n_examples = 5000;
  spec.n_users = 200;
  spec.nonsensitive_vocab_sizes = {32, 32};
  spec.sensitive_vocab_sizes = {20};
  spec.sensitive_signal_weight = 0.0;
  spec.nonsensitive_signal_weight = 2.0;
  spec.label_noise = 0.0;
  spec.seed = 123;

  const Dataset a = GenerateSynthetic(spec);
  const Dataset b = GenerateSynthetic(spec);
  REQUIRE(a.size() == spec.n_examples);
  REQUIRE(b.size() == spec.n_examples);
  bool identical = true;
  for (std::size_t i = 0; i < a.size(); ++i) {
    identical = identical && a.examples[i].cat_values == b.examples[i].cat_values &&
                a.examples[i].label == b.examples[i].label &&
                a.examples[i].user == b.examples[i].user;
  }
  CHECK(identical);

  // sensitive_signal_weight = 0: the sensitive token carries no label
  // information. Plug-in mutual information over the contingency table
  // should be near zero (bias is about (V-1)/(2n) nats).
  const std::size_t vocab = spec.sensitive_vocab_sizes[0];
  const std::size_t s_slot = spec.nonsensitive_vocab_sizes.size();
  std::vector<std::vector<double>> joint(vocab, std::vector<double>(2, 0.0));
  std::vector<double> pv(vocab, 0.0);
  double py[2] = {0.0, 0.0};
  for (const Example& e : a.examples) {
    const std::uint32_t v = e.cat_values[s_slot];
    joint[v][e.label] += 1.0;
    pv[v] += 1.0;
    py[e.label] += 1.0;
  }
  const double n = static_cast<double>(a.size());
  double mi = 0.0;
  for (std::size_t v = 0; v < vocab; ++v) {
    for (int y = 0; y < 2; ++y) {
      if (joint[v][y] == 0.0) continue;
      const double pj = joint[v][y] / n;
      mi += pj * std::log(pj / ((pv[v] / n) * (py[y] / n)));
    }
  }
  CHECK(mi < 0.01);

  // The skewed user distribution should give the head user far more
  // examples than a uniform share.
  std::map<std::uint32_t, std::size_t> per_user;
  for (const Example& e : a.examples) ++per_user[e.user];
  CHECK(per_user[0] > 2 * (spec.n_examples / spec.n_users));
}

TEST_CASE("split_train_test: sizes, determinism, chronological order") {
  SyntheticSpec spec;
  spec.n_examples = 10;
  spec.n_users = 2;
  const Dataset ds = GenerateSynthetic(spec);

  auto [train, test] = SplitTrainTest(ds, 0.2, SplitMode::kRandom, 9);
  CHECK(train.size() == 8);
  CHECK(test.size() == 2);
  auto [train2, test2] = SplitTrainTest(ds, 0.2, SplitMode::kRandom, 9);
  bool same = train2.size() == train.size();
  for (std::size_t i = 0; same && i < train.size(); ++i) {
    same = train.examples[i].cat_values == train2.examples[i].cat_values;
  }
  CHECK(same);

  // Chronological: attach order keys and check the test set is the tail.
  Dataset ordered = ds;
  ordered.order_keys.emplace();
  for (std::size_t i = 0; i < ordered.size(); ++i) {
    ordered.order_keys->push_back(static_cast<std::int64_t>(100 - i));
  }
  auto [ctrain, ctest] = SplitTrainTest(ordered, 0.2, SplitMode::kChronological, 0);
  REQUIRE(ctest.size() == 2);
  // Largest keys were at the smallest indices, so the test split holds keys
  // 99 and 100.
  std::set<std::int64_t> test_keys(ctest.order_keys->begin(),
                                   ctest.order_keys->end());
  CHECK(test_keys == std::set<std::int64_t>{99, 100});

  CHECK_THROWS_AS(SplitTrainTest(ds, 0.2, SplitMode::kChronological, 0),
                  ConfigError);
  CHECK_THROWS_AS(SplitTrainTest(ds, 0.0, SplitMode::kRandom, 0), ConfigError);
  CHECK_THROWS_AS(SplitTrainTest(ds, 1.0, SplitMode::kRandom, 0), ConfigError);
}

TEST_CASE("cap_examples_per_user draws exactly k with replacement") {
  SyntheticSpec spec;
  spec.n_examples = 3000;
  spec.n_users = 50;
  spec.seed = 5;
  const Dataset ds = GenerateSynthetic(spec);

  const Dataset capped = CapExamplesPerUser(ds, 3, 42);
  std::set<std::uint32_t> users_in;
  for (const Example& e : ds.examples) users_in.insert(e.user);
  CHECK(capped.size() == 3 * users_in.size());

  // Per-user multisets must be sub-multisets (with repetition) of the pool.
  std::map<std::uint32_t, std::multiset<std::string>> pool;
  auto fingerprint = [](const Example& e) {
    std::string fp;
    for (std::uint32_t v : e.cat_values) fp += std::to_string(v) + ":";
    fp += std::to_string(static_cast<int>(e.label));
    return fp;
  };
  for (const Example& e : ds.examples) pool[e.user].insert(fingerprint(e));
  std::map<std::uint32_t, std::size_t> counts;
  for (const Example& e : capped.examples) {
    ++counts[e.user];
    CHECK(pool[e.user].count(fingerprint(e)) > 0);
  }
  for (const auto& [user, count] : counts) CHECK(count == 3);

  // A user with one example repeats it k times.
  Dataset single;
  single.schema = ds.schema;
  single.user_ids = {"solo"};
  Example e = ds.examples[0];
  e.user = 0;
  single.examples = {e};
  const Dataset capped_single = CapExamplesPerUser(single, 3, 1);
  REQUIRE(capped_single.size() == 3);
  for (const Example& c : capped_single.examples) {
    CHECK(c.cat_values == e.cat_values);
  }

  // k = 1 picks one example per user from that user's own pool.
  const Dataset capped_one = CapExamplesPerUser(ds, 1, 7);
  CHECK(capped_one.size() == users_in.size());

  // Determinism.
  const Dataset capped_b = CapExamplesPerUser(ds, 3, 42);
  bool identical = capped_b.size() == capped.size();
  for (std::size_t i = 0; identical && i < capped.size(); ++i) {
    identical = capped.examples[i].cat_values == capped_b.examples[i].cat_values;
  }
  CHECK(identical);

  Dataset no_users = ds;
  no_users.user_ids.clear();
  CHECK_THROWS_AS(CapExamplesPerUser(no_users, 2, 0), ConfigError);
}

TEST_CASE("save recovers raw integer counts from the stored transform") {
  FeatureSchema schema({{"clicks", FieldKind::kInteger, false, 1}}, "y");
  Dataset ds;
  ds.schema = schema;
  for (std::int64_t raw : {0, 1, 7, 123456}) {
    Example e;
    e.num_values = {LogTransform(static_cast<double>(raw))};
    e.label = 1;
    ds.examples.push_back(e);
  }
  const fs::path path = ScratchDir() / "ints.csv";
  SaveDelimited(ds, path.string());

  ColumnMap cmap;
  cmap.columns = {{"clicks", "clicks"}, {"y", "y"}};
  const Dataset back = LoadDelimited(path.string(), schema, cmap);
  REQUIRE(back.size() == ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK(back.examples[i].num_values[0] == ds.examples[i].num_values[0]);
  }
}

TEST_CASE("save/load delimited round trip via identity vocabularies") {
  SyntheticSpec spec;
  spec.n_examples = 500;
  spec.n_users = 20;
  spec.nonsensitive_vocab_sizes = {16};
  spec.sensitive_vocab_sizes = {8};
  const Dataset ds = GenerateSynthetic(spec);

  const fs::path dir = ScratchDir() / "roundtrip";
  fs::create_directories(dir);
  const fs::path data_path = dir / "data.csv";
  SaveDelimited(ds, data_path.string());

  LoadOptions options;
  for (std::size_t s = 0; s < ds.schema.num_cat_fields(); ++s) {
    const FieldSpec& f = ds.schema.cat_field(s);
    const fs::path vocab_path = dir / ("vocab_" + f.name + ".txt");
    std::ofstream vf(vocab_path);
    for (std::uint32_t v = 1; v < f.vocab_size; ++v) vf << v << '\n';
    options.vocab_files[f.name] = vocab_path.string();
  }
  ColumnMap cmap;
  for (const FieldSpec& f : ds.schema.fields()) cmap.columns[f.name] = f.name;
  cmap.columns["label"] = "label";
  cmap.columns["user_id"] = "user_id";

  LoadReport report;
  const Dataset back =
      LoadDelimited(data_path.string(), ds.schema, cmap, options, &report);
  REQUIRE(back.size() == ds.size());
  CHECK(report.rows_skipped == 0);
  bool identical = true;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    identical = identical &&
                back.examples[i].cat_values == ds.examples[i].cat_values &&
                back.examples[i].label == ds.examples[i].label &&
                back.user_ids[back.examples[i].user] ==
                    ds.user_ids[ds.examples[i].user];
  }
  CHECK(identical);
}
