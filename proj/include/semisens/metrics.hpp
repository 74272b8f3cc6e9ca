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

#ifndef SEMISENS_METRICS_HPP_
#define SEMISENS_METRICS_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "semisens/common.hpp"

namespace semisens {

struct EvalResult {
  double auc = 0.0;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
  std::optional<double> relative_auc_loss_pct;
};

// Mann-Whitney AUC with average ranks on tied scores: the probability that a
// random positive outscores a random negative, ties counting one half.
inline double Auc(std::span<const double> scores,
                  std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) {
    throw ShapeError("scores and labels must have equal length");
  }
  std::size_t n_pos = 0;
  for (std::uint8_t y : labels) n_pos += y;
  const std::size_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    throw NumericError("AUC undefined: need at least one example of each class");
  }

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });

  // Sum the average ranks (1-based) of the positive examples, walking tie
  // groups so equal scores share one rank.
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]]) rank_sum_pos += avg_rank;
    }
    i = j;
  }
  const double np = static_cast<double>(n_pos);
  const double nn = static_cast<double>(n_neg);
  return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

// 100 * ((1 - auc) - (1 - auc_np)) / (1 - auc_np): AUC loss relative to the
// non-private baseline, in percent.
inline double RelativeAucLoss(double auc, double auc_np) {
  if (!(auc_np < 1.0)) {
    throw std::domain_error("relative AUC loss undefined at auc_np = 1");
  }
  return 100.0 * ((1.0 - auc) - (1.0 - auc_np)) / (1.0 - auc_np);
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // unbiased sample std; 0 for a single value
  std::size_t n = 0;
};

inline MeanStd Aggregate(std::span<const double> values) {
  if (values.empty()) throw ConfigError("cannot aggregate zero results");
  MeanStd out;
  out.n = values.size();
  for (double v : values) out.mean += v;
  out.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return out;
}

// "m ± s" with three decimals, the convention used in results tables.
inline std::string FormatMeanStd(const MeanStd& ms) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(3);
  os << ms.mean << " ± " << ms.std;
  return os.str();
}

}  // namespace semisens

#endif  // SEMISENS_METRICS_HPP_
