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
// Training orchestration. The Hybrid algorithm runs two sequential phases on
// the same parameters: a label-DP phase that trains the truncated model on a
// randomized-response release of the data, then a DP-SGD phase that trains
// the full model starting from the phase-1 parameters. The two baselines are
// the special cases that spend the entire budget in one phase, and the
// non-private reference trains the full model with plain mini-batch SGD.
//
// Reproducibility contract: every random choice is drawn from a counter-based
// stream keyed by a run seed, a Stream tag, and structural indices:
//   shuffles     (seeds.data,  kShuffle, {phase_tag, epoch})   phase_tag 0 =
//                non-private, 1 = label-DP phase
//   Poisson step (seeds.data,  kPoisson, {t})
//   noise step   (seeds.noise, kNoise,   {t})
//   RR draw      (seeds.rr,    kRandomizedResponse)
// so identical configs reproduce identical trajectories bit for bit.

#ifndef SEMISENS_TRAIN_HPP_
#define SEMISENS_TRAIN_HPP_

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "semisens/common.hpp"
#include "semisens/data.hpp"
#include "semisens/metrics.hpp"
#include "semisens/model.hpp"
#include "semisens/optim.hpp"
#include "semisens/privacy.hpp"
#include "semisens/rng.hpp"

namespace semisens {

enum class Algorithm { kHybrid, kRrOnly, kDpsgdOnly, kNonprivate };

inline std::string ToString(Algorithm a) {
  switch (a) {
    case Algorithm::kHybrid: return "hybrid";
    case Algorithm::kRrOnly: return "rr_only";
    case Algorithm::kDpsgdOnly: return "dpsgd_only";
    case Algorithm::kNonprivate: return "nonprivate";
  }
  return "?";
}

inline Algorithm AlgorithmFromString(const std::string& s) {
  if (s == "hybrid") return Algorithm::kHybrid;
  if (s == "rr_only") return Algorithm::kRrOnly;
  if (s == "dpsgd_only") return Algorithm::kDpsgdOnly;
  if (s == "nonprivate") return Algorithm::kNonprivate;
  throw ConfigError("unknown algorithm '" + s + "'");
}

struct RrPhaseConfig {
  std::int64_t epochs = 1;
  std::size_t batch_size = 1024;
  OptimizerConfig optimizer;
  ScheduleKind schedule = ScheduleKind::kCosine;
};

struct DpsgdPhaseConfig {
  std::int64_t epochs = 1;
  std::optional<std::int64_t> steps;  // explicit step count wins over epochs
  double expected_batch = 1024.0;
  double clip_norm = 1.0;
  OptimizerConfig optimizer;
  ScheduleKind schedule = ScheduleKind::kCosine;
  // Diagnostics only: bypass calibration with a fixed noise multiplier.
  // Zero disables noise entirely and the ledger reports an unbounded epsilon.
  std::optional<double> sigma_override;
};

struct UserLevelConfig {
  std::int64_t cap_rr = 1;
  std::int64_t cap_dpsgd = 1;
  // Step count shared across caps (the fixed-step protocol). When absent the
  // phase derives steps from its own capped dataset size.
  std::optional<std::int64_t> fixed_steps;
};

struct Seeds {
  std::uint64_t data = 1;
  std::uint64_t rr = 2;
  std::uint64_t noise = 3;
  std::uint64_t init = 4;
};

struct TrainConfig {
  Algorithm algorithm = Algorithm::kHybrid;
  PrivacyBudget budget{1.0, 1e-6};
  RrPhaseConfig rr;
  DpsgdPhaseConfig dpsgd;
  std::optional<UserLevelConfig> user_level;
  Seeds seeds;
  std::vector<int> rdp_orders = DefaultRdpOrders();
  std::optional<double> baseline_auc;  // enables relative AUC loss reporting

  void Validate() const {
    budget.Validate();
    if (rr.epochs < 1 || dpsgd.epochs < 1) {
      throw ConfigError("phase epochs must be >= 1");
    }
    if (rr.batch_size < 1) throw ConfigError("rr batch_size must be >= 1");
    if (!(dpsgd.expected_batch >= 1.0)) {
      throw ConfigError("dpsgd expected_batch must be >= 1");
    }
    if (!(dpsgd.clip_norm > 0.0)) throw ConfigError("clip_norm must be > 0");
    if (dpsgd.steps && *dpsgd.steps < 1) {
      throw ConfigError("dpsgd steps must be >= 1");
    }
    if (user_level) {
      if (user_level->cap_rr < 1 || user_level->cap_dpsgd < 1) {
        throw ConfigError("example caps must be >= 1");
      }
      if (user_level->fixed_steps && *user_level->fixed_steps < 1) {
        throw ConfigError("fixed_steps must be >= 1");
      }
    }
    const bool needs_epsilon = algorithm != Algorithm::kNonprivate;
    if (needs_epsilon && !(budget.epsilon > 0.0)) {
      throw ConfigError("private algorithms require epsilon > 0");
    }
    const bool needs_delta = algorithm == Algorithm::kHybrid ||
                             algorithm == Algorithm::kDpsgdOnly;
    if (needs_delta && !(budget.delta > 0.0)) {
      throw ConfigError("DP-SGD phase requires delta > 0");
    }
  }
};

struct LedgerEntry {
  std::string mechanism;
  double epsilon = 0.0;
  double delta = 0.0;
  std::map<std::string, double> parameters;
};

struct PrivacyLedger {
  std::vector<LedgerEntry> entries;

  double TotalEpsilon() const {
    double total = 0.0;
    for (const LedgerEntry& e : entries) total += e.epsilon;
    return total;
  }
  double TotalDelta() const {
    double total = 0.0;
    for (const LedgerEntry& e : entries) total += e.delta;
    return total;
  }
};

struct TrainReport {
  std::string algorithm;
  EvalResult eval;
  std::string eval_scope;  // "full" or "truncated"
  PrivacyLedger ledger;
  PrivacyBudget budget;
  std::int64_t phase1_steps = 0;
  std::int64_t phase2_steps = 0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  Seeds seeds;
  double wall_clock_sec = 0.0;
};

// --- Label-DP phase ---------------------------------------------------------

// The randomized-response release: non-sensitive features plus noisy labels.
// Sensitive slots are actively invalidated (categorical -> 0, numeric -> NaN)
// so any accidental read downstream surfaces immediately instead of silently
// using protected values.
inline Dataset RrRelease(const Dataset& dataset, double eps1,
                         std::uint64_t rr_seed) {
  std::vector<std::uint8_t> labels(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    labels[i] = dataset.examples[i].label;
  }
  const std::vector<std::uint8_t> noisy =
      RandomizedResponse(labels, eps1, rr_seed);

  Dataset release;
  release.schema = dataset.schema;
  release.user_ids = dataset.user_ids;
  release.examples = dataset.examples;
  const double poison = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 0; i < release.size(); ++i) {
    Example& e = release.examples[i];
    e.label = noisy[i];
    for (std::size_t s = 0; s < release.schema.num_cat_fields(); ++s) {
      if (release.schema.cat_field(s).sensitive) e.cat_values[s] = 0;
    }
    for (std::size_t s = 0; s < release.schema.num_num_fields(); ++s) {
      if (release.schema.num_field(s).sensitive) e.num_values[s] = poison;
    }
  }
  return release;
}

namespace internal {

inline std::vector<std::size_t> EpochOrder(std::size_t n, std::uint64_t data_seed,
                                           std::uint64_t phase_tag,
                                           std::int64_t epoch) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  CounterRng rng = CounterRng::Keyed(
      data_seed, Stream::kShuffle,
      {phase_tag, static_cast<std::uint64_t>(epoch)});
  FisherYatesShuffle(order, rng);
  return order;
}

// One epoch-driven pass of plain mini-batch training. `target_of` maps an
// example index to its training target.
template <typename TargetFn>
std::int64_t MiniBatchSgd(const Dataset& data, ModelParams& params, Scope scope,
                          std::int64_t epochs, std::size_t batch_size,
                          const OptimizerConfig& opt_config,
                          ScheduleKind schedule_kind, std::uint64_t data_seed,
                          std::uint64_t phase_tag, TargetFn&& target_of) {
  const std::size_t n = data.size();
  if (n == 0) throw ConfigError("cannot train on an empty dataset");
  const std::int64_t steps_per_epoch =
      static_cast<std::int64_t>((n + batch_size - 1) / batch_size);
  Schedule schedule{schedule_kind, opt_config.learning_rate,
                    epochs * steps_per_epoch};
  Optimizer optimizer(opt_config, params.layout, scope);

  ForwardCache cache;
  GradVector per_example;
  GradVector batch_grad;
  batch_grad.scope = scope;
  std::int64_t step = 0;
  for (std::int64_t epoch = 0; epoch < epochs; ++epoch) {
    const std::vector<std::size_t> order =
        EpochOrder(n, data_seed, phase_tag, epoch);
    for (std::size_t begin = 0; begin < n; begin += batch_size) {
      const std::size_t end = std::min(n, begin + batch_size);
      batch_grad.values.assign(params.layout.ScopeSize(scope), 0.0);
      for (std::size_t b = begin; b < end; ++b) {
        const std::size_t i = order[b];
        PerExampleGradInto(params, data.examples[i], target_of(i), scope,
                           cache, per_example);
        for (std::size_t c = 0; c < batch_grad.values.size(); ++c) {
          batch_grad.values[c] += per_example.values[c];
        }
      }
      const double inv = 1.0 / static_cast<double>(end - begin);
      for (double& g : batch_grad.values) g *= inv;
      optimizer.ApplyUpdate(params, batch_grad, LrAt(schedule, step));
      ++step;
    }
  }
  return step;
}

}  // namespace internal

// Label-DP phase: randomize labels once with RR_eps1, then train the
// truncated scope for E_RR epochs of shuffled mini-batches on the debiased
// objective. The per-example debiased gradient c0 * grad(z, 0) +
// c1 * grad(z, 1) equals the BCE gradient at the effective target c1 because
// the loss family is affine in the target. w_s is never part of the scope,
// so it leaves the phase bit-identical.
inline LedgerEntry RunLabelDpPhase(const Dataset& train_set,
                                   ModelParams& params,
                                   const TrainConfig& config, double eps1) {
  if (!(eps1 > 0.0)) {
    throw ConfigError(
        "label-DP phase requires eps1 > 0; use algorithm=dpsgd_only to spend "
        "the whole budget in the DP-SGD phase");
  }
  const Dataset release = RrRelease(train_set, eps1, config.seeds.rr);

  const double effective_target[2] = {DebiasForLabel(eps1, 0).c1,
                                      DebiasForLabel(eps1, 1).c1};
  const std::int64_t steps = internal::MiniBatchSgd(
      release, params, Scope::kTruncated, config.rr.epochs,
      config.rr.batch_size, config.rr.optimizer, config.rr.schedule,
      config.seeds.data, /*phase_tag=*/1,
      [&](std::size_t i) { return effective_target[release.examples[i].label]; });

  LedgerEntry entry;
  entry.mechanism = "randomized_response";
  entry.epsilon = eps1;
  entry.delta = 0.0;
  entry.parameters["keep_probability"] = RrKeepProbability(eps1);
  entry.parameters["epochs"] = static_cast<double>(config.rr.epochs);
  entry.parameters["steps"] = static_cast<double>(steps);
  return entry;
}

// DP-SGD phase: Poisson-sampled batches, per-example clipping to C, Gaussian
// noise calibrated so the phase meets (eps2, delta). Updates divide by the
// expected batch size, so an empty batch still applies a noise-only step.
inline LedgerEntry RunDpsgdPhase(const Dataset& train_set, ModelParams& params,
                                 const TrainConfig& config, double eps2,
                                 double delta,
                                 std::optional<std::int64_t> fixed_steps =
                                     std::nullopt) {
  if (!(eps2 > 0.0) && !config.dpsgd.sigma_override) {
    throw ConfigError("DP-SGD phase requires eps2 > 0");
  }
  const std::size_t n = train_set.size();
  if (n == 0) throw ConfigError("cannot train on an empty dataset");

  DpSgdParams mech;
  mech.clip_norm = config.dpsgd.clip_norm;
  mech.expected_batch = config.dpsgd.expected_batch;
  mech.sampling_rate = mech.expected_batch / static_cast<double>(n);
  if (mech.sampling_rate > 1.0) {
    mech.sampling_rate = 1.0;
    mech.expected_batch = static_cast<double>(n);
  }
  const std::int64_t steps_per_epoch = static_cast<std::int64_t>(
      std::ceil(static_cast<double>(n) / mech.expected_batch));
  mech.steps = fixed_steps.value_or(
      config.dpsgd.steps.value_or(config.dpsgd.epochs * steps_per_epoch));

  // The ledger records the phase budget; the accountant's certificate for
  // the actual sigma (at most the budget, by re-verification) rides along in
  // the parameters. Diagnostic sigma overrides report the certificate itself.
  double achieved_eps;
  double ledger_eps;
  if (config.dpsgd.sigma_override) {
    mech.noise_multiplier = *config.dpsgd.sigma_override;
    achieved_eps = mech.noise_multiplier > 0.0
                       ? AccountantEpsilon(mech.sampling_rate,
                                           mech.noise_multiplier, mech.steps,
                                           delta, config.rdp_orders).epsilon
                       : std::numeric_limits<double>::infinity();
    ledger_eps = achieved_eps;
  } else {
    mech.noise_multiplier = CalibrateSigma(eps2, delta, mech.sampling_rate,
                                           mech.steps, config.rdp_orders);
    achieved_eps =
        AccountantEpsilon(mech.sampling_rate, mech.noise_multiplier, mech.steps,
                          delta, config.rdp_orders).epsilon;
    if (achieved_eps > eps2) {
      throw CalibrationError("calibrated sigma failed re-verification");
    }
    ledger_eps = eps2;
  }

  Schedule schedule{config.dpsgd.schedule, config.dpsgd.optimizer.learning_rate,
                    mech.steps};
  Optimizer optimizer(config.dpsgd.optimizer, params.layout, Scope::kFull);

  ForwardCache cache;
  GradVector per_example;
  GradVector update;
  update.scope = Scope::kFull;
  for (std::int64_t t = 0; t < mech.steps; ++t) {
    CounterRng batch_rng = CounterRng::Keyed(
        config.seeds.data, Stream::kPoisson, {static_cast<std::uint64_t>(t)});
    const std::vector<std::size_t> batch =
        PoissonSample(n, mech.sampling_rate, batch_rng);

    NoisyGradAccumulator acc(params.layout.total_full, mech.clip_norm);
    for (std::size_t i : batch) {
      PerExampleGradInto(params, train_set.examples[i],
                         static_cast<double>(train_set.examples[i].label),
                         Scope::kFull, cache, per_example);
      acc.Add(per_example.values);
    }
    CounterRng noise_rng = CounterRng::Keyed(
        config.seeds.noise, Stream::kNoise, {static_cast<std::uint64_t>(t)});
    update.values =
        acc.Finalize(mech.noise_multiplier, mech.expected_batch, noise_rng);
    optimizer.ApplyUpdate(params, update, LrAt(schedule, t));
  }

  LedgerEntry entry;
  entry.mechanism = "dp_sgd";
  entry.epsilon = ledger_eps;
  entry.delta = delta;
  entry.parameters["sigma"] = mech.noise_multiplier;
  entry.parameters["sampling_rate"] = mech.sampling_rate;
  entry.parameters["steps"] = static_cast<double>(mech.steps);
  entry.parameters["clip_norm"] = mech.clip_norm;
  entry.parameters["expected_batch"] = mech.expected_batch;
  entry.parameters["accounted_epsilon"] = achieved_eps;
  return entry;
}

// Non-private reference: plain mini-batch training of the full model with the
// RR-phase optimizer settings. Reads nothing from the privacy budget.
inline std::int64_t RunNonprivatePhase(const Dataset& train_set,
                                       ModelParams& params,
                                       const TrainConfig& config) {
  return internal::MiniBatchSgd(
      train_set, params, Scope::kFull, config.rr.epochs, config.rr.batch_size,
      config.rr.optimizer, config.rr.schedule, config.seeds.data,
      /*phase_tag=*/0, [&](std::size_t i) {
        return static_cast<double>(train_set.examples[i].label);
      });
}

struct TrainOutcome {
  ModelParams params;
  TrainReport report;
};

// Full training entry point. Hybrid splits the budget and runs both phases
// sequentially on the same parameters (phase 2 warm-starts from phase 1);
// rr_only and dpsgd_only are the corner cases spending everything in one
// phase. User-level runs cap each phase's dataset at that phase's cap and
// convert the user-level budget to example level before running it; the
// ledger then records user-level guarantees.
inline TrainOutcome Train(const Dataset& train_set, const Dataset& test_set,
                          ModelConfig model_config, const TrainConfig& config) {
  config.Validate();
  const auto t_start = std::chrono::steady_clock::now();

  model_config.init_seed = config.seeds.init;
  TrainOutcome out;
  out.params = InitParams(train_set.schema, model_config);
  TrainReport& report = out.report;
  report.algorithm = ToString(config.algorithm);
  report.budget = config.budget;
  report.seeds = config.seeds;
  report.n_train = train_set.size();
  report.n_test = test_set.size();

  const bool user_level = config.user_level.has_value();
  auto capped_for_phase = [&](std::int64_t cap, std::uint64_t phase_tag) {
    const std::uint64_t cap_seed =
        internal::Mix64(config.seeds.data ^ internal::Mix64(phase_tag));
    return CapExamplesPerUser(train_set, static_cast<std::size_t>(cap), cap_seed);
  };

  // Runs the label-DP phase at a user- or example-level budget as configured.
  // Ledger entries carry the phase budget at the run's privacy unit, so the
  // totals compose to exactly the configured split.
  auto label_dp = [&](double eps1) {
    if (!user_level) {
      report.ledger.entries.push_back(
          RunLabelDpPhase(train_set, out.params, config, eps1));
    } else {
      const std::int64_t cap = config.user_level->cap_rr;
      const Dataset capped = capped_for_phase(cap, 1);
      const PrivacyBudget example_budget =
          UserLevelCalibrate(PrivacyBudget{eps1, 0.0}, cap);
      LedgerEntry entry =
          RunLabelDpPhase(capped, out.params, config, example_budget.epsilon);
      entry.parameters["example_epsilon"] = example_budget.epsilon;
      entry.parameters["example_cap"] = static_cast<double>(cap);
      entry.epsilon = eps1;
      report.ledger.entries.push_back(std::move(entry));
    }
    report.phase1_steps =
        static_cast<std::int64_t>(report.ledger.entries.back().parameters["steps"]);
  };

  auto dpsgd = [&](double eps2, double delta) {
    if (!user_level) {
      report.ledger.entries.push_back(
          RunDpsgdPhase(train_set, out.params, config, eps2, delta));
    } else {
      const std::int64_t cap = config.user_level->cap_dpsgd;
      const Dataset capped = capped_for_phase(cap, 2);
      const PrivacyBudget example_budget =
          UserLevelCalibrate(PrivacyBudget{eps2, delta}, cap);
      LedgerEntry entry = RunDpsgdPhase(capped, out.params, config,
                                        example_budget.epsilon,
                                        example_budget.delta,
                                        config.user_level->fixed_steps);
      entry.parameters["example_epsilon"] = example_budget.epsilon;
      entry.parameters["example_delta"] = example_budget.delta;
      entry.parameters["example_cap"] = static_cast<double>(cap);
      if (!config.dpsgd.sigma_override) {
        entry.epsilon = eps2;
        entry.delta = delta;
      }
      report.ledger.entries.push_back(std::move(entry));
    }
    report.phase2_steps =
        static_cast<std::int64_t>(report.ledger.entries.back().parameters["steps"]);
  };

  Scope eval_scope = Scope::kFull;
  switch (config.algorithm) {
    case Algorithm::kHybrid: {
      const BudgetSplit split = SplitBudget(config.budget.epsilon, config.budget.delta);
      label_dp(split.eps1);
      dpsgd(split.eps2, split.delta);
      break;
    }
    case Algorithm::kRrOnly:
      label_dp(config.budget.epsilon);
      eval_scope = Scope::kTruncated;
      break;
    case Algorithm::kDpsgdOnly:
      dpsgd(config.budget.epsilon, config.budget.delta);
      break;
    case Algorithm::kNonprivate:
      report.phase1_steps = RunNonprivatePhase(train_set, out.params, config);
      break;
  }

  report.eval_scope = eval_scope == Scope::kFull ? "full" : "truncated";
  std::vector<double> scores(test_set.size());
  std::vector<std::uint8_t> labels(test_set.size());
  ForwardCache cache;
  for (std::size_t i = 0; i < test_set.size(); ++i) {
    scores[i] = ForwardWithCache(out.params, test_set.examples[i], eval_scope, cache);
    labels[i] = test_set.examples[i].label;
  }
  report.eval.auc = Auc(scores, labels);
  for (std::uint8_t y : labels) report.eval.n_pos += y;
  report.eval.n_neg = labels.size() - report.eval.n_pos;
  if (config.baseline_auc) {
    report.eval.relative_auc_loss_pct =
        RelativeAucLoss(report.eval.auc, *config.baseline_auc);
  }

  report.wall_clock_sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();
  return out;
}

// --- Report serialization ---------------------------------------------------

namespace internal {

inline nlohmann::json FiniteOrString(double v) {
  if (std::isfinite(v)) return v;
  return v > 0 ? "inf" : "-inf";
}

}  // namespace internal

inline nlohmann::json ReportToJson(const TrainReport& report) {
  nlohmann::json doc;
  doc["algorithm"] = report.algorithm;
  doc["test_auc"] = report.eval.auc;
  doc["n_pos"] = report.eval.n_pos;
  doc["n_neg"] = report.eval.n_neg;
  if (report.eval.relative_auc_loss_pct) {
    doc["relative_auc_loss_pct"] = *report.eval.relative_auc_loss_pct;
  }
  doc["eval_scope"] = report.eval_scope;
  doc["budget"] = {{"epsilon", report.budget.epsilon},
                   {"delta", report.budget.delta}};
  nlohmann::json entries = nlohmann::json::array();
  for (const LedgerEntry& e : report.ledger.entries) {
    nlohmann::json j;
    j["mechanism"] = e.mechanism;
    j["epsilon"] = internal::FiniteOrString(e.epsilon);
    j["delta"] = e.delta;
    for (const auto& [k, v] : e.parameters) j["parameters"][k] = internal::FiniteOrString(v);
    entries.push_back(std::move(j));
  }
  doc["ledger"]["entries"] = std::move(entries);
  doc["ledger"]["total_epsilon"] = internal::FiniteOrString(report.ledger.TotalEpsilon());
  doc["ledger"]["total_delta"] = report.ledger.TotalDelta();
  doc["phase1_steps"] = report.phase1_steps;
  doc["phase2_steps"] = report.phase2_steps;
  doc["n_train"] = report.n_train;
  doc["n_test"] = report.n_test;
  doc["seeds"] = {{"data", report.seeds.data},
                  {"rr", report.seeds.rr},
                  {"noise", report.seeds.noise},
                  {"init", report.seeds.init}};
  doc["wall_clock_sec"] = report.wall_clock_sec;
  return doc;
}

}  // namespace semisens

#endif  // SEMISENS_TRAIN_HPP_
