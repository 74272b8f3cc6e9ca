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
// Differential privacy mechanisms and accounting: binary randomized response
// with its debiasing coefficients, per-example gradient clipping with
// Gaussian noise, Poisson subsampling, an integer-order RDP accountant for
// the subsampled Gaussian mechanism, noise calibration, the two-phase budget
// split, and the group-privacy transformation for user-level guarantees.

#ifndef SEMISENS_PRIVACY_HPP_
#define SEMISENS_PRIVACY_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "semisens/common.hpp"
#include "semisens/model.hpp"
#include "semisens/rng.hpp"

namespace semisens {

struct PrivacyBudget {
  double epsilon = 0.0;
  double delta = 0.0;

  void Validate() const {
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) {
      throw ConfigError("epsilon must be finite and >= 0");
    }
    if (!(delta >= 0.0 && delta < 1.0)) {
      throw ConfigError("delta must lie in [0, 1)");
    }
  }
};

// Phase budgets: (eps1, 0) for the randomized-response phase and
// (eps2, delta) for the DP-SGD phase; eps1 + eps2 equals the parent epsilon.
struct BudgetSplit {
  double eps1 = 0.0;
  double eps2 = 0.0;
  double delta = 0.0;
};

// eps1 := min(0.6 * eps, 3), eps2 := eps - eps1, all of delta on phase 2.
// Since eps1 >= eps / 2, the subtraction is exact and eps1 + eps2 == eps.
inline BudgetSplit SplitBudget(double epsilon, double delta) {
  if (!(epsilon > 0.0)) throw ConfigError("budget split requires epsilon > 0");
  BudgetSplit split;
  split.eps1 = std::min(0.6 * epsilon, 3.0);
  split.eps2 = epsilon - split.eps1;
  split.delta = delta;
  return split;
}

// Resolved DP-SGD mechanism parameters for one phase. The sampling rate is
// exactly expected_batch / n; an expected batch larger than the dataset
// clamps to full-batch (q = 1, B = n).
struct DpSgdParams {
  double sampling_rate = 1.0;
  double noise_multiplier = 0.0;
  std::int64_t steps = 1;
  double clip_norm = 1.0;
  double expected_batch = 1.0;
};

// --- Randomized response ----------------------------------------------------

// Probability that a label survives RR unchanged: e^eps / (1 + e^eps).
inline double RrKeepProbability(double eps) {
  return 1.0 / (1.0 + std::exp(-eps));
}

inline double RrFlipProbability(double eps) {
  return 1.0 / (1.0 + std::exp(eps));
}

// Flips each bit independently with probability 1 / (1 + e^eps1). The labels
// are randomized exactly once per dataset; reusing the noisy labels across
// epochs is post-processing and costs no extra budget.
inline std::vector<std::uint8_t> RandomizedResponse(
    std::span<const std::uint8_t> labels, double eps1, std::uint64_t seed) {
  if (!(eps1 > 0.0)) {
    throw std::domain_error("randomized response requires eps1 > 0");
  }
  const double keep = RrKeepProbability(eps1);
  CounterRng rng = CounterRng::Keyed(seed, Stream::kRandomizedResponse);
  std::vector<std::uint8_t> noisy(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool kept = rng.NextDouble() < keep;
    noisy[i] = kept ? labels[i] : static_cast<std::uint8_t>(1 - labels[i]);
  }
  return noisy;
}

// Debiasing coefficients (c0, c1) for a noisy label: the phase-1 objective is
// c0 * loss(z, 0) + c1 * loss(z, 1), whose expectation over the RR draw
// equals the clean-label loss. With p := 1 / (1 + e^-eps1), the observed
// label carries -p / (1 - 2p) and the flipped one (1 - p) / (1 - 2p); the
// second is computed as one minus the first so the pair sums to 1 exactly.
struct DebiasCoefficients {
  double c0 = 0.0;
  double c1 = 0.0;
};

inline DebiasCoefficients DebiasForLabel(double eps1, std::uint8_t noisy_label) {
  if (!(eps1 > 0.0)) {
    throw std::domain_error("debiasing requires eps1 > 0 (1 - 2p vanishes)");
  }
  const double p = 1.0 / (1.0 + std::exp(-eps1));
  const double c_observed = -p / (1.0 - 2.0 * p);
  const double c_flipped = 1.0 - c_observed;
  DebiasCoefficients c;
  c.c0 = noisy_label == 0 ? c_observed : c_flipped;
  c.c1 = noisy_label == 1 ? c_observed : c_flipped;
  return c;
}

// Debiased loss value at logit z for a noisy label.
inline double DebiasedLoss(double logit, double eps1, std::uint8_t noisy_label) {
  const DebiasCoefficients c = DebiasForLabel(eps1, noisy_label);
  return c.c0 * BceLoss(logit, 0.0) + c.c1 * BceLoss(logit, 1.0);
}

// --- Clipping and noise -----------------------------------------------------

// Streaming form of the DP-SGD gradient aggregate: per-example gradients are
// clipped to L2 norm C as they arrive and summed in arrival order (the fixed
// sequential reduction keeps runs bit-reproducible); Finalize divides by the
// expected batch size B and adds N(0, C^2 sigma^2 / B^2) per coordinate.
// An empty batch yields the pure noise update with B still the divisor.
class NoisyGradAccumulator {
 public:
  NoisyGradAccumulator(std::size_t dim, double clip_norm)
      : clip_norm_(clip_norm), sum_(dim, 0.0) {
    if (!(clip_norm > 0.0)) throw ConfigError("clip norm must be > 0");
  }

  void Add(std::span<const double> grad) {
    if (grad.size() != sum_.size()) {
      throw ShapeError("gradient length " + std::to_string(grad.size()) +
                       " does not match accumulator dimension " +
                       std::to_string(sum_.size()));
    }
    double sq = 0.0;
    for (double v : grad) sq += v * v;
    const double norm = std::sqrt(sq);
    if (!std::isfinite(norm)) throw NumericError("non-finite gradient norm");
    const double factor = std::min(1.0, clip_norm_ / std::max(norm, 1e-300));
    for (std::size_t i = 0; i < grad.size(); ++i) sum_[i] += factor * grad[i];
    ++count_;
  }

  std::size_t count() const { return count_; }

  std::vector<double> Finalize(double sigma, double expected_batch,
                               CounterRng& rng) const {
    if (!(expected_batch > 0.0)) throw ConfigError("expected batch must be > 0");
    std::vector<double> out(sum_.size());
    const double inv_b = 1.0 / expected_batch;
    const double noise_scale = clip_norm_ * sigma * inv_b;
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] = sum_[i] * inv_b;
      if (sigma > 0.0) out[i] += noise_scale * rng.NextGaussian();
    }
    return out;
  }

 private:
  double clip_norm_;
  std::vector<double> sum_;
  std::size_t count_ = 0;
};

// One-shot form over materialized per-example gradients.
inline GradVector ClipAndNoise(const std::vector<GradVector>& grads,
                               double clip_norm, double sigma,
                               double expected_batch, CounterRng& rng) {
  if (grads.empty()) throw ShapeError("clip_and_noise needs the scope dimension");
  NoisyGradAccumulator acc(grads.front().values.size(), clip_norm);
  for (const GradVector& g : grads) {
    if (g.scope != grads.front().scope) {
      throw ShapeError("mixed gradient scopes in one batch");
    }
    acc.Add(g.values);
  }
  GradVector out;
  out.scope = grads.front().scope;
  out.values = acc.Finalize(sigma, expected_batch, rng);
  return out;
}

// --- Poisson sampling -------------------------------------------------------

// Each index enters the batch independently with probability q. The empty
// batch is a legitimate outcome.
inline std::vector<std::size_t> PoissonSample(std::size_t n, double q,
                                              CounterRng& rng) {
  if (!(q > 0.0 && q <= 1.0)) throw ConfigError("sampling rate must lie in (0, 1]");
  std::vector<std::size_t> picked;
  if (q >= 1.0) {
    picked.resize(n);
    for (std::size_t i = 0; i < n; ++i) picked[i] = i;
    return picked;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (rng.NextDouble() < q) picked.push_back(i);
  }
  return picked;
}

// --- RDP accounting ---------------------------------------------------------

// Renyi-DP curve: integer orders alpha >= 2 paired with per-step RDP epsilon
// values. Orders where the bound overflows are flagged +infinity rather than
// raising.
struct RdpCurve {
  std::vector<int> orders;
  std::vector<double> eps_rdp;
};

inline std::vector<int> DefaultRdpOrders() {
  std::vector<int> orders;
  for (int a = 2; a <= 256; ++a) orders.push_back(a);
  return orders;
}

namespace internal {

inline double LogBinomial(int n, int k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

// One order of the Poisson-subsampled Gaussian bound at integer alpha:
//   eps(alpha) = ln( sum_{j=0..alpha} C(alpha,j) (1-q)^(alpha-j) q^j
//                    e^{j(j-1)/(2 sigma^2)} ) / (alpha - 1).
// Small exponents use the excess form log1p(sum of expm1 terms) to keep full
// relative precision when the sum is 1 + tiny; large exponents fall back to
// log-sum-exp.
inline double SubsampledGaussianOrderEps(double q, double sigma, int alpha) {
  const double sig2 = 2.0 * sigma * sigma;
  if (q >= 1.0) return static_cast<double>(alpha) / sig2;

  const double log_q = std::log(q);
  const double log_1mq = std::log1p(-q);

  double max_full = -std::numeric_limits<double>::infinity();
  double max_growth = 0.0;
  std::vector<double> log_base(alpha + 1);
  std::vector<double> growth(alpha + 1);
  for (int j = 0; j <= alpha; ++j) {
    const double g = static_cast<double>(j) * (j - 1) / sig2;
    const double base = LogBinomial(alpha, j) + (alpha - j) * log_1mq + j * log_q;
    log_base[j] = base;
    growth[j] = g;
    max_full = std::max(max_full, base + g);
    max_growth = std::max(max_growth, g);
  }
  if (!std::isfinite(max_full)) {
    return std::numeric_limits<double>::infinity();
  }

  // base_j is a log binomial probability, so exp(base_j) <= 1; the excess
  // form is safe whenever expm1(growth) itself cannot overflow.
  if (max_growth < 700.0) {
    // sum = 1 + sum_j base_j * (e^{g_j} - 1); the j = 0, 1 terms drop out.
    double excess = 0.0;
    for (int j = 2; j <= alpha; ++j) {
      excess += std::exp(log_base[j]) * std::expm1(growth[j]);
    }
    return std::log1p(excess) / (alpha - 1);
  }

  double acc = 0.0;
  for (int j = 0; j <= alpha; ++j) {
    acc += std::exp(log_base[j] + growth[j] - max_full);
  }
  return (max_full + std::log(acc)) / (alpha - 1);
}

}  // namespace internal

// Per-step RDP of the Poisson-subsampled Gaussian mechanism over the given
// integer orders. q = 1 uses the exact Gaussian value alpha / (2 sigma^2).
inline RdpCurve RdpSubsampledGaussian(double q, double sigma,
                                      const std::vector<int>& orders) {
  if (!(q > 0.0 && q <= 1.0)) throw ConfigError("sampling rate must lie in (0, 1]");
  if (!(sigma > 0.0)) throw ConfigError("noise multiplier must be > 0");
  RdpCurve curve;
  curve.orders = orders;
  curve.eps_rdp.reserve(orders.size());
  for (int alpha : orders) {
    if (alpha < 2) throw ConfigError("RDP orders must be integers >= 2");
    curve.eps_rdp.push_back(
        internal::SubsampledGaussianOrderEps(q, sigma, alpha));
  }
  return curve;
}

struct ConvertedEpsilon {
  double epsilon = std::numeric_limits<double>::infinity();
  int order = 0;  // argmin order; 0 when every order was infinite
};

// Linear composition over T steps followed by the classical RDP->(eps,delta)
// conversion: eps = min_alpha [ T * eps_rdp(alpha) + ln(1/delta)/(alpha-1) ].
// Returns an infinite epsilon (order 0) when no order is finite.
inline ConvertedEpsilon ComposeAndConvert(const RdpCurve& curve,
                                          std::int64_t steps, double delta) {
  if (steps < 1) throw ConfigError("steps must be >= 1");
  if (!(delta > 0.0 && delta < 1.0)) {
    throw ConfigError("conversion requires delta in (0, 1)");
  }
  const double log_inv_delta = std::log(1.0 / delta);
  ConvertedEpsilon best;
  for (std::size_t i = 0; i < curve.orders.size(); ++i) {
    const double e = curve.eps_rdp[i];
    if (!std::isfinite(e)) continue;
    const double candidate =
        static_cast<double>(steps) * e + log_inv_delta / (curve.orders[i] - 1);
    if (candidate < best.epsilon) {
      best.epsilon = candidate;
      best.order = curve.orders[i];
    }
  }
  return best;
}

// Convenience: accountant epsilon for a (q, sigma, T, delta) configuration.
inline ConvertedEpsilon AccountantEpsilon(double q, double sigma,
                                          std::int64_t steps, double delta,
                                          const std::vector<int>& orders) {
  return ComposeAndConvert(RdpSubsampledGaussian(q, sigma, orders), steps, delta);
}

// Smallest noise multiplier in [0.3, 1000] whose accounted epsilon lands in
// [eps2 - 1e-3, eps2]. Bisection on sigma; the accountant is strictly
// decreasing in sigma so the window is always reachable when it lies between
// the bracket endpoints.
inline double CalibrateSigma(double eps2, double delta, double q,
                             std::int64_t steps,
                             const std::vector<int>& orders = DefaultRdpOrders(),
                             double sigma_min = 0.3, double sigma_max = 1000.0) {
  if (!(eps2 > 0.0)) throw ConfigError("calibration requires eps2 > 0");
  constexpr double kSlack = 1e-3;
  auto eps_at = [&](double sigma) {
    return AccountantEpsilon(q, sigma, steps, delta, orders).epsilon;
  };
  const double eps_lo = eps_at(sigma_min);
  const double eps_hi = eps_at(sigma_max);
  if (eps_lo <= eps2) {
    if (eps_lo >= eps2 - kSlack) return sigma_min;
    throw CalibrationError(
        "target eps " + std::to_string(eps2) + " unreachable: bracket yields [" +
        std::to_string(eps_hi) + ", " + std::to_string(eps_lo) + "]");
  }
  if (eps_hi > eps2) {
    throw CalibrationError(
        "target eps " + std::to_string(eps2) + " unreachable: bracket yields [" +
        std::to_string(eps_hi) + ", " + std::to_string(eps_lo) + "]");
  }
  double lo = sigma_min, hi = sigma_max;
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo + hi);
    const double e = eps_at(mid);
    if (e > eps2) {
      lo = mid;
    } else {
      if (e >= eps2 - kSlack) return mid;
      hi = mid;
    }
  }
  throw CalibrationError("sigma bisection failed to bracket the target eps");
}

// --- Group privacy ----------------------------------------------------------

namespace internal {

// (e^{k eps} - 1) / (e^{eps} - 1) = sum_{j<k} e^{j eps}; continuous limit k
// at eps = 0. Overflows to +infinity for large k * eps.
inline double GroupDeltaFactor(double eps, std::int64_t k) {
  if (eps == 0.0) return static_cast<double>(k);
  return std::expm1(static_cast<double>(k) * eps) / std::expm1(eps);
}

}  // namespace internal

// Example-level (eps, delta)-DP plus an at-most-k-examples-per-user cap gives
// (k eps, delta * (e^{k eps} - 1) / (e^{eps} - 1))-user-level DP.
inline PrivacyBudget GroupPrivacy(const PrivacyBudget& example_level,
                                  std::int64_t k) {
  if (k < 1) throw ConfigError("group privacy requires k >= 1");
  if (k == 1) return example_level;
  PrivacyBudget user_level;
  user_level.epsilon = static_cast<double>(k) * example_level.epsilon;
  user_level.delta =
      example_level.delta * internal::GroupDeltaFactor(example_level.epsilon, k);
  return user_level;
}

// Inverse of GroupPrivacy: the example-level budget whose group-privacy image
// under cap k reproduces the user-level target. Both components are nudged by
// at most a couple of ulps so the round trip is bit-exact whenever an exact
// preimage exists in double precision.
inline PrivacyBudget UserLevelCalibrate(const PrivacyBudget& user_level,
                                        std::int64_t k) {
  if (k < 1) throw ConfigError("user-level calibration requires k >= 1");
  if (k == 1) return user_level;
  if (!(user_level.epsilon > 0.0)) {
    throw ConfigError("user-level calibration requires epsilon > 0");
  }

  auto nudge_to_preimage = [](double start, double target,
                              auto&& forward) -> double {
    double best = start;
    double best_err = std::abs(forward(start) - target);
    double lo = start, hi = start;
    for (int step = 0; step < 4 && best_err != 0.0; ++step) {
      lo = std::nextafter(lo, -std::numeric_limits<double>::infinity());
      hi = std::nextafter(hi, std::numeric_limits<double>::infinity());
      for (double c : {lo, hi}) {
        const double err = std::abs(forward(c) - target);
        if (err < best_err || (err == best_err && forward(c) <= target &&
                               forward(best) > target)) {
          best = c;
          best_err = err;
        }
      }
    }
    return best;
  };

  const double kd = static_cast<double>(k);
  const double eps_e = nudge_to_preimage(
      user_level.epsilon / kd, user_level.epsilon,
      [kd](double e) { return kd * e; });
  const double factor = internal::GroupDeltaFactor(eps_e, k);
  PrivacyBudget example_level;
  example_level.epsilon = eps_e;
  example_level.delta =
      user_level.delta == 0.0
          ? 0.0
          : nudge_to_preimage(user_level.delta / factor, user_level.delta,
                              [factor](double d) { return d * factor; });
  return example_level;
}

}  // namespace semisens

#endif  // SEMISENS_PRIVACY_HPP_
