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

#ifndef SEMISENS_OPTIM_HPP_
#define SEMISENS_OPTIM_HPP_

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "semisens/common.hpp"
#include "semisens/model.hpp"

namespace semisens {

enum class OptimizerKind { kSgd, kMomentum, kRmsprop, kAdam, kYogi };

inline std::string ToString(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::kSgd: return "sgd";
    case OptimizerKind::kMomentum: return "momentum";
    case OptimizerKind::kRmsprop: return "rmsprop";
    case OptimizerKind::kAdam: return "adam";
    case OptimizerKind::kYogi: return "yogi";
  }
  return "?";
}

inline OptimizerKind OptimizerKindFromString(const std::string& s) {
  if (s == "sgd") return OptimizerKind::kSgd;
  if (s == "momentum") return OptimizerKind::kMomentum;
  if (s == "rmsprop") return OptimizerKind::kRmsprop;
  if (s == "adam") return OptimizerKind::kAdam;
  if (s == "yogi") return OptimizerKind::kYogi;
  throw ConfigError("unknown optimizer '" + s + "'");
}

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kSgd;
  double learning_rate = 0.1;
  double momentum = 0.9;  // momentum kind only
  double beta1 = 0.9;     // adam / yogi first moment
  double beta2 = 0.999;   // adam / yogi second moment
  double rho = 0.9;       // rmsprop decay
  double stability = 1e-8;
};

enum class ScheduleKind { kCosine, kConstant };

inline ScheduleKind ScheduleKindFromString(const std::string& s) {
  if (s == "cosine") return ScheduleKind::kCosine;
  if (s == "constant") return ScheduleKind::kConstant;
  throw ConfigError("unknown schedule '" + s + "'");
}

struct Schedule {
  ScheduleKind kind = ScheduleKind::kCosine;
  double base_lr = 0.1;
  std::int64_t total_steps = 1;
};

// Half-cosine decay from base_lr to 0 over total_steps; steps past the end
// clamp to the final value.
inline double LrAt(const Schedule& schedule, std::int64_t t) {
  if (t < 0) throw ConfigError("schedule step must be >= 0");
  if (schedule.kind == ScheduleKind::kConstant) return schedule.base_lr;
  const double frac =
      std::min(1.0, static_cast<double>(t) /
                        static_cast<double>(std::max<std::int64_t>(1, schedule.total_steps)));
  return schedule.base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
}

// First-order optimizer over one parameter scope. Accumulators live in scope
// coordinates; updates write through the scope's runs, so parameters outside
// the scope are never touched (the truncated scope leaves w_s bit-identical).
class Optimizer {
 public:
  Optimizer(const OptimizerConfig& config, const ModelLayout& layout, Scope scope)
      : config_(config), scope_(scope), dim_(layout.ScopeSize(scope)) {
    switch (config.kind) {
      case OptimizerKind::kSgd:
        break;
      case OptimizerKind::kMomentum:
      case OptimizerKind::kRmsprop:
        v_.assign(dim_, 0.0);
        break;
      case OptimizerKind::kAdam:
      case OptimizerKind::kYogi:
        m_.assign(dim_, 0.0);
        v_.assign(dim_, 0.0);
        break;
    }
  }

  Scope scope() const { return scope_; }
  std::int64_t step() const { return step_; }

  void ApplyUpdate(ModelParams& params, const GradVector& grad, double lr) {
    if (grad.scope != scope_ || grad.values.size() != dim_) {
      throw ShapeError("gradient scope/length does not match optimizer scope");
    }
    ++step_;
    const std::vector<double>& g = grad.values;
    std::vector<double>& w = params.values;
    switch (config_.kind) {
      case OptimizerKind::kSgd:
        ForEachScopeRun(params.layout, scope_,
                        [&](std::size_t full, std::size_t sc, std::size_t len) {
                          for (std::size_t i = 0; i < len; ++i) {
                            w[full + i] -= lr * g[sc + i];
                          }
                        });
        break;
      case OptimizerKind::kMomentum: {
        const double mu = config_.momentum;
        ForEachScopeRun(params.layout, scope_,
                        [&](std::size_t full, std::size_t sc, std::size_t len) {
                          for (std::size_t i = 0; i < len; ++i) {
                            v_[sc + i] = mu * v_[sc + i] + g[sc + i];
                            w[full + i] -= lr * v_[sc + i];
                          }
                        });
        break;
      }
      case OptimizerKind::kRmsprop: {
        const double rho = config_.rho;
        const double eps = config_.stability;
        ForEachScopeRun(params.layout, scope_,
                        [&](std::size_t full, std::size_t sc, std::size_t len) {
                          for (std::size_t i = 0; i < len; ++i) {
                            const double gi = g[sc + i];
                            v_[sc + i] = rho * v_[sc + i] + (1.0 - rho) * gi * gi;
                            w[full + i] -= lr * gi / (std::sqrt(v_[sc + i]) + eps);
                          }
                        });
        break;
      }
      case OptimizerKind::kAdam: {
        const double b1 = config_.beta1, b2 = config_.beta2;
        const double eps = config_.stability;
        const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
        const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
        ForEachScopeRun(params.layout, scope_,
                        [&](std::size_t full, std::size_t sc, std::size_t len) {
                          for (std::size_t i = 0; i < len; ++i) {
                            const double gi = g[sc + i];
                            m_[sc + i] = b1 * m_[sc + i] + (1.0 - b1) * gi;
                            v_[sc + i] = b2 * v_[sc + i] + (1.0 - b2) * gi * gi;
                            const double mhat = m_[sc + i] / c1;
                            const double vhat = v_[sc + i] / c2;
                            w[full + i] -= lr * mhat / (std::sqrt(vhat) + eps);
                          }
                        });
        break;
      }
      case OptimizerKind::kYogi: {
        // Sign-based second moment: v <- v - (1-b2) sign(v - g^2) g^2.
        const double b1 = config_.beta1, b2 = config_.beta2;
        const double eps = config_.stability;
        ForEachScopeRun(params.layout, scope_,
                        [&](std::size_t full, std::size_t sc, std::size_t len) {
                          for (std::size_t i = 0; i < len; ++i) {
                            const double gi = g[sc + i];
                            const double g2 = gi * gi;
                            m_[sc + i] = b1 * m_[sc + i] + (1.0 - b1) * gi;
                            const double diff = v_[sc + i] - g2;
                            const double sign = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
                            v_[sc + i] -= (1.0 - b2) * sign * g2;
                            w[full + i] -= lr * m_[sc + i] / (std::sqrt(v_[sc + i]) + eps);
                          }
                        });
        break;
      }
    }
  }

  // Accumulator snapshots, exposed for tests.
  const std::vector<double>& first_moment() const { return m_; }
  const std::vector<double>& second_moment() const { return v_; }

 private:
  OptimizerConfig config_;
  Scope scope_;
  std::size_t dim_;
  std::vector<double> m_, v_;
  std::int64_t step_ = 0;
};

}  // namespace semisens

#endif  // SEMISENS_OPTIM_HPP_
