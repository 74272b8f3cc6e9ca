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
// Experiment sweep: runs the cross product of the configured grids, emits a
// long-form CSV of every run, and a best-per-(epsilon, algorithm) summary
// following the figure-construction rule: for each cell, the hyperparameter
// combination with the lowest mean relative AUC loss across seeds wins.
// The summary is recomputed from the written long-form table, so it is a pure
// function of that file.

#ifndef SEMISENS_SWEEP_HPP_
#define SEMISENS_SWEEP_HPP_

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "semisens/config.hpp"
#include "semisens/data.hpp"
#include "semisens/metrics.hpp"
#include "semisens/train.hpp"

namespace semisens {

struct SweepRow {
  double epsilon = 0.0;
  Algorithm algorithm = Algorithm::kHybrid;
  std::int64_t cap = 0;  // 0 = example-level run (no cap axis)
  double clip_norm = 1.0;
  std::int64_t rr_epochs = 1;
  std::int64_t dpsgd_epochs = 1;
  std::uint64_t seed = 1;
};

struct SweepRowResult {
  SweepRow row;
  double auc = 0.0;
  double rel_loss = 0.0;
  bool failed = false;
  std::string error;
};

struct SweepOutput {
  std::vector<SweepRowResult> rows;
  std::vector<double> baseline_aucs;  // per seed, when the baseline was run
  double baseline_auc = 0.0;
  std::size_t failures = 0;
};

// Per-seed train seeds derived from the sweep root seed; the seed column of
// the results table is the logical seed s, so rows with the same s share
// their data/init/noise streams across algorithms.
inline Seeds DeriveSeeds(std::uint64_t root, std::uint64_t s) {
  auto sub = [&](std::uint64_t j) {
    CounterRng rng = CounterRng::Keyed(root, Stream::kSweepRow, {s, j});
    return rng.NextU64();
  };
  return Seeds{sub(0), sub(1), sub(2), sub(3)};
}

namespace internal {

inline std::vector<SweepRow> ExpandGrid(const SweepGrid& grid,
                                        const RunConfig& base) {
  const std::vector<double> clips =
      grid.clip_norms.empty() ? std::vector<double>{base.train.dpsgd.clip_norm}
                              : grid.clip_norms;
  const std::vector<std::int64_t> rr_epochs =
      grid.rr_epochs.empty() ? std::vector<std::int64_t>{base.train.rr.epochs}
                             : grid.rr_epochs;
  const std::vector<std::int64_t> dp_epochs =
      grid.dpsgd_epochs.empty()
          ? std::vector<std::int64_t>{base.train.dpsgd.epochs}
          : grid.dpsgd_epochs;
  std::vector<std::int64_t> caps = grid.caps;
  if (caps.empty()) {
    caps = {base.train.user_level ? base.train.user_level->cap_dpsgd
                                  : std::int64_t{0}};
  }

  std::vector<SweepRow> rows;
  for (double eps : grid.epsilons) {
    for (Algorithm algo : grid.algorithms) {
      for (std::int64_t cap : caps) {
        for (double clip : clips) {
          for (std::int64_t e_rr : rr_epochs) {
            for (std::int64_t e_dp : dp_epochs) {
              for (std::uint64_t seed : grid.seeds) {
                rows.push_back({eps, algo, cap, clip, e_rr, e_dp, seed});
              }
            }
          }
        }
      }
    }
  }
  return rows;
}

inline TrainConfig ConfigForRow(const RunConfig& base, const SweepGrid& grid,
                                const SweepRow& row,
                                std::optional<std::int64_t> fixed_steps,
                                double baseline_auc) {
  TrainConfig cfg = base.train;
  cfg.algorithm = row.algorithm;
  cfg.budget.epsilon = row.epsilon;
  cfg.dpsgd.clip_norm = row.clip_norm;
  cfg.rr.epochs = row.rr_epochs;
  cfg.dpsgd.epochs = row.dpsgd_epochs;
  cfg.seeds = DeriveSeeds(grid.root_seed, row.seed);
  cfg.baseline_auc = baseline_auc;
  if (cfg.user_level && row.cap > 0) {
    // The cap axis varies the phase that consumes it: RR-only runs cap their
    // RR data, everything else caps the DP-SGD data (hybrid keeps the
    // configured RR cap, normally 1).
    if (row.algorithm == Algorithm::kRrOnly) {
      cfg.user_level->cap_rr = row.cap;
    } else {
      cfg.user_level->cap_dpsgd = row.cap;
    }
    cfg.user_level->fixed_steps = fixed_steps;
  }
  return cfg;
}

inline std::string FormatDouble(double v, int precision = 6) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(precision);
  os << v;
  return os.str();
}

inline std::string FormatEps(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace internal

// Runs the sweep. The non-private baseline is trained once per seed (unless
// metrics.baseline_auc pins it) and its mean AUC anchors every rel_loss.
// Row failures are recorded and skipped; the sweep only fails outright when
// every row failed.
inline SweepOutput RunSweep(const RunConfig& base, const Dataset& train_set,
                            const Dataset& test_set) {
  if (!base.sweep) throw ConfigError("config has no sweep section");
  const SweepGrid& grid = *base.sweep;
  SweepOutput out;

  if (base.train.baseline_auc) {
    out.baseline_auc = *base.train.baseline_auc;
  } else {
    for (std::uint64_t s : grid.seeds) {
      TrainConfig cfg = base.train;
      cfg.algorithm = Algorithm::kNonprivate;
      cfg.seeds = DeriveSeeds(grid.root_seed, s);
      cfg.baseline_auc.reset();
      const TrainOutcome outcome = Train(train_set, test_set, base.model, cfg);
      out.baseline_aucs.push_back(outcome.report.eval.auc);
    }
    out.baseline_auc = Aggregate(out.baseline_aucs).mean;
  }

  // Fixed-step protocol for user-level sweeps: every cap trains for the step
  // count of the largest cap at one epoch.
  std::optional<std::int64_t> fixed_steps;
  if (base.train.user_level && !grid.caps.empty()) {
    std::vector<bool> seen(train_set.user_ids.size(), false);
    std::size_t users_in_train = 0;
    for (const Example& e : train_set.examples) {
      if (e.user != kNoUser && !seen[e.user]) {
        seen[e.user] = true;
        ++users_in_train;
      }
    }
    const std::int64_t max_cap = *std::max_element(grid.caps.begin(), grid.caps.end());
    const double n_max = static_cast<double>(users_in_train) *
                         static_cast<double>(max_cap);
    fixed_steps = std::max<std::int64_t>(
        1, static_cast<std::int64_t>(
               std::ceil(n_max / base.train.dpsgd.expected_batch)));
  }

  const std::vector<SweepRow> rows = internal::ExpandGrid(grid, base);
  out.rows.resize(rows.size());

  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> failures{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= rows.size()) return;
      SweepRowResult& result = out.rows[i];
      result.row = rows[i];
      try {
        const TrainConfig cfg = internal::ConfigForRow(
            base, grid, rows[i], fixed_steps, out.baseline_auc);
        const TrainOutcome outcome = Train(train_set, test_set, base.model, cfg);
        result.auc = outcome.report.eval.auc;
        result.rel_loss = outcome.report.eval.relative_auc_loss_pct.value_or(0.0);
      } catch (const std::exception& e) {
        result.failed = true;
        result.error = e.what();
        failures.fetch_add(1);
      }
    }
  };

  const int n_threads = std::min<int>(grid.parallelism,
                                      static_cast<int>(rows.size()));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  out.failures = failures.load();
  if (!rows.empty() && out.failures == rows.size()) {
    throw CalibrationError("every sweep row failed; see errors.csv");
  }
  return out;
}

inline const char* kResultsHeader =
    "epsilon,algorithm,cap,clip_norm,rr_epochs,dpsgd_epochs,seed,auc,rel_loss";

inline void WriteResultsCsv(const SweepOutput& out, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write results table '" + path + "'");
  f << kResultsHeader << '\n';
  for (const SweepRowResult& r : out.rows) {
    if (r.failed) continue;
    f << internal::FormatEps(r.row.epsilon) << ','
      << ToString(r.row.algorithm) << ',' << r.row.cap << ','
      << internal::FormatEps(r.row.clip_norm) << ',' << r.row.rr_epochs << ','
      << r.row.dpsgd_epochs << ',' << r.row.seed << ','
      << internal::FormatDouble(r.auc) << ','
      << internal::FormatDouble(r.rel_loss) << '\n';
  }
}

inline void WriteErrorsCsv(const SweepOutput& out, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write errors table '" + path + "'");
  f << "epsilon,algorithm,cap,clip_norm,rr_epochs,dpsgd_epochs,seed,error\n";
  for (const SweepRowResult& r : out.rows) {
    if (!r.failed) continue;
    std::string message = r.error;
    for (char& c : message) {
      if (c == ',' || c == '\n') c = ';';
    }
    f << internal::FormatEps(r.row.epsilon) << ','
      << ToString(r.row.algorithm) << ',' << r.row.cap << ','
      << internal::FormatEps(r.row.clip_norm) << ',' << r.row.rr_epochs << ','
      << r.row.dpsgd_epochs << ',' << r.row.seed << ',' << message << '\n';
  }
}

inline void WriteBaselineCsv(const SweepOutput& out, const SweepGrid& grid,
                             const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write baseline table '" + path + "'");
  f << "seed,auc\n";
  for (std::size_t i = 0; i < out.baseline_aucs.size(); ++i) {
    f << grid.seeds[i] << ',' << internal::FormatDouble(out.baseline_aucs[i])
      << '\n';
  }
}

struct SummaryRow {
  double epsilon = 0.0;
  std::string algorithm;
  std::int64_t cap = 0;
  double clip_norm = 0.0;
  std::int64_t rr_epochs = 0;
  std::int64_t dpsgd_epochs = 0;
  MeanStd rel_loss;
  MeanStd auc;
};

// Recomputes the best-per-(epsilon, algorithm) summary from a written
// long-form results table: group rows by every non-seed axis, average over
// seeds, and keep the combination with the minimum mean rel_loss.
inline std::vector<SummaryRow> SummarizeResultsCsv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open results table '" + path + "'");
  std::string line;
  if (!std::getline(f, line)) throw IoError("results table is empty");
  if (line != kResultsHeader) {
    throw IoError("unexpected results header: " + line);
  }

  // combo key: (epsilon, algorithm, cap, clip, e_rr, e_dp)
  using ComboKey = std::tuple<double, std::string, std::int64_t, double,
                              std::int64_t, std::int64_t>;
  std::map<ComboKey, std::pair<std::vector<double>, std::vector<double>>> combos;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> cells = internal::SplitLine(line, ',');
    if (cells.size() != 9) throw IoError("malformed results row: " + line);
    const ComboKey key{std::stod(cells[0]), cells[1], std::stoll(cells[2]),
                       std::stod(cells[3]), std::stoll(cells[4]),
                       std::stoll(cells[5])};
    combos[key].first.push_back(std::stod(cells[8]));   // rel_loss
    combos[key].second.push_back(std::stod(cells[7]));  // auc
  }

  std::map<std::pair<double, std::string>, SummaryRow> best;
  for (const auto& [key, values] : combos) {
    SummaryRow row;
    row.epsilon = std::get<0>(key);
    row.algorithm = std::get<1>(key);
    row.cap = std::get<2>(key);
    row.clip_norm = std::get<3>(key);
    row.rr_epochs = std::get<4>(key);
    row.dpsgd_epochs = std::get<5>(key);
    row.rel_loss = Aggregate(values.first);
    row.auc = Aggregate(values.second);
    const std::pair<double, std::string> cell{row.epsilon, row.algorithm};
    auto it = best.find(cell);
    if (it == best.end() || row.rel_loss.mean < it->second.rel_loss.mean) {
      best[cell] = row;
    }
  }
  std::vector<SummaryRow> rows;
  rows.reserve(best.size());
  for (const auto& [cell, row] : best) rows.push_back(row);
  return rows;
}

inline void WriteSummaryCsv(const std::vector<SummaryRow>& rows,
                            double baseline_auc, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write summary table '" + path + "'");
  f << "epsilon,algorithm,cap,clip_norm,rr_epochs,dpsgd_epochs,"
       "mean_rel_loss,std_rel_loss,mean_auc,std_auc,n_seeds,baseline_auc\n";
  for (const SummaryRow& r : rows) {
    f << internal::FormatEps(r.epsilon) << ',' << r.algorithm << ',' << r.cap
      << ',' << internal::FormatEps(r.clip_norm) << ',' << r.rr_epochs << ','
      << r.dpsgd_epochs << ',' << internal::FormatDouble(r.rel_loss.mean) << ','
      << internal::FormatDouble(r.rel_loss.std) << ','
      << internal::FormatDouble(r.auc.mean) << ','
      << internal::FormatDouble(r.auc.std) << ',' << r.rel_loss.n << ','
      << internal::FormatDouble(baseline_auc) << '\n';
  }
}

}  // namespace semisens

#endif  // SEMISENS_SWEEP_HPP_
