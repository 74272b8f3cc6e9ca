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
// Two-tower model: a non-sensitive tower g and a sensitive tower h embed
// their feature groups, the concatenated outputs feed a common tower f that
// produces a scalar logit. The truncated variant replaces h's output with
// zeros, so it depends only on non-sensitive inputs and on the (w_ns, w_c)
// parameter partitions. Gradients are exact backpropagation for this fixed
// architecture family; there is no general autodiff here.

#ifndef SEMISENS_MODEL_HPP_
#define SEMISENS_MODEL_HPP_

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "json.hpp"
#include "semisens/common.hpp"
#include "semisens/data.hpp"
#include "semisens/rng.hpp"

namespace semisens {

enum class Scope { kFull, kTruncated };

enum class Partition { kNonSensitive, kSensitive, kCommon };

// Embedding dimension heuristic: int[2 * V^(1/4)], at least 1.
inline std::uint32_t EmbedDim(std::uint32_t vocab_size) {
  if (vocab_size < 1) throw ConfigError("vocab_size must be >= 1");
  const double d = 2.0 * std::pow(static_cast<double>(vocab_size), 0.25);
  // Guard against pow() landing a hair under an exact integer result.
  return std::max(1u, static_cast<std::uint32_t>(std::floor(d + 1e-9)));
}

struct ModelConfig {
  // One entry per categorical field in schema order; empty means "use the
  // EmbedDim heuristic for every field".
  std::vector<std::uint32_t> embedding_dims;
  std::vector<std::uint32_t> ns_hidden;
  std::vector<std::uint32_t> s_hidden;
  std::vector<std::uint32_t> common_hidden;
  std::uint64_t init_seed = 0;
};

constexpr std::size_t kNotInScope = std::numeric_limits<std::size_t>::max();

struct EmbeddingDesc {
  std::size_t offset_full = 0;
  std::size_t offset_trunc = kNotInScope;
  std::uint32_t vocab = 0;
  std::uint32_t dim = 0;
  bool sensitive = false;
};

struct LayerDesc {
  std::size_t w_full = 0, b_full = 0;
  std::size_t w_trunc = kNotInScope, b_trunc = kNotInScope;
  std::uint32_t in = 0, out = 0;
};

// Flat parameter layout. Ordering: embedding tables in schema field order,
// then non-sensitive tower layers, sensitive tower layers, common tower
// layers (hidden then head); within a layer, weights row-major then bias.
// The truncated scope is the same ordering with every sensitive-owned block
// removed.
struct ModelLayout {
  std::vector<EmbeddingDesc> embeddings;  // per categorical slot
  std::vector<std::size_t> ns_cat_slots, s_cat_slots;
  std::vector<std::size_t> ns_num_slots, s_num_slots;
  std::vector<LayerDesc> ns_layers, s_layers, common_layers;
  std::size_t d_ns_input = 0, d_s_input = 0;
  std::size_t d_ns = 0, d_s = 0;  // tower output widths
  std::size_t total_full = 0, total_truncated = 0;
  std::size_t ns_size = 0, s_size = 0, c_size = 0;

  std::size_t ScopeSize(Scope scope) const {
    return scope == Scope::kFull ? total_full : total_truncated;
  }
};

namespace internal {

inline std::vector<LayerDesc> PlanLayers(std::size_t input_dim,
                                         const std::vector<std::uint32_t>& hidden,
                                         bool with_head, Partition part,
                                         std::size_t* full, std::size_t* trunc) {
  std::vector<LayerDesc> layers;
  std::size_t in = input_dim;
  auto add = [&](std::uint32_t out) {
    LayerDesc d;
    d.in = static_cast<std::uint32_t>(in);
    d.out = out;
    d.w_full = *full;
    *full += static_cast<std::size_t>(d.in) * d.out;
    d.b_full = *full;
    *full += d.out;
    if (part != Partition::kSensitive) {
      d.w_trunc = *trunc;
      *trunc += static_cast<std::size_t>(d.in) * d.out;
      d.b_trunc = *trunc;
      *trunc += d.out;
    }
    layers.push_back(d);
    in = out;
  };
  for (std::uint32_t h : hidden) {
    if (h < 1) throw ConfigError("hidden layer sizes must be >= 1");
    add(h);
  }
  if (with_head) add(1);
  return layers;
}

}  // namespace internal

inline ModelLayout BuildLayout(const FeatureSchema& schema,
                               const ModelConfig& config) {
  ModelLayout layout;
  const std::size_t n_cat = schema.num_cat_fields();
  if (!config.embedding_dims.empty() &&
      config.embedding_dims.size() != n_cat) {
    throw ConfigError("embedding_dims must have one entry per categorical field");
  }

  std::size_t full = 0, trunc = 0;
  for (std::size_t s = 0; s < n_cat; ++s) {
    const FieldSpec& f = schema.cat_field(s);
    EmbeddingDesc e;
    e.vocab = f.vocab_size;
    e.dim = config.embedding_dims.empty() ? EmbedDim(f.vocab_size)
                                          : config.embedding_dims[s];
    if (e.dim < 1) throw ConfigError("embedding dims must be >= 1");
    e.sensitive = f.sensitive;
    e.offset_full = full;
    full += static_cast<std::size_t>(e.vocab) * e.dim;
    if (!e.sensitive) {
      e.offset_trunc = trunc;
      trunc += static_cast<std::size_t>(e.vocab) * e.dim;
    }
    layout.embeddings.push_back(e);
    (e.sensitive ? layout.s_cat_slots : layout.ns_cat_slots).push_back(s);
    layout.d_ns_input += e.sensitive ? 0 : e.dim;
    layout.d_s_input += e.sensitive ? e.dim : 0;
  }
  for (std::size_t s = 0; s < schema.num_num_fields(); ++s) {
    const bool sensitive = schema.num_field(s).sensitive;
    (sensitive ? layout.s_num_slots : layout.ns_num_slots).push_back(s);
    (sensitive ? layout.d_s_input : layout.d_ns_input) += 1;
  }

  const std::size_t ns_begin = full;
  layout.ns_layers = internal::PlanLayers(layout.d_ns_input, config.ns_hidden,
                                          false, Partition::kNonSensitive,
                                          &full, &trunc);
  const std::size_t s_begin = full;
  // A sensitive tower only exists when sensitive inputs do.
  const std::vector<std::uint32_t> s_hidden =
      layout.d_s_input == 0 ? std::vector<std::uint32_t>{} : config.s_hidden;
  layout.s_layers = internal::PlanLayers(layout.d_s_input, s_hidden, false,
                                         Partition::kSensitive, &full, &trunc);
  const std::size_t c_begin = full;

  layout.d_ns = config.ns_hidden.empty() ? layout.d_ns_input
                                         : config.ns_hidden.back();
  layout.d_s = s_hidden.empty() ? layout.d_s_input : s_hidden.back();
  layout.common_layers = internal::PlanLayers(
      layout.d_ns + layout.d_s, config.common_hidden, true, Partition::kCommon,
      &full, &trunc);

  layout.total_full = full;
  layout.total_truncated = trunc;
  std::size_t ns_emb = 0, s_emb = 0;
  for (const EmbeddingDesc& e : layout.embeddings) {
    (e.sensitive ? s_emb : ns_emb) += static_cast<std::size_t>(e.vocab) * e.dim;
  }
  layout.ns_size = ns_emb + (s_begin - ns_begin);
  layout.s_size = s_emb + (c_begin - s_begin);
  layout.c_size = full - c_begin;
  return layout;
}

struct ModelParams {
  ModelLayout layout;
  ModelConfig config;
  std::vector<double> values;  // full-scope flat vector
};

// Fan-in variance-scaled uniform init for dense layers (std 1/sqrt(fan_in)),
// U[-0.05, 0.05] for embeddings, zero biases. Deterministic in the seed.
inline ModelParams InitParams(const FeatureSchema& schema,
                              const ModelConfig& config) {
  ModelParams params;
  params.layout = BuildLayout(schema, config);
  params.config = config;
  params.values.assign(params.layout.total_full, 0.0);

  std::uint64_t segment = 0;
  for (const EmbeddingDesc& e : params.layout.embeddings) {
    CounterRng rng = CounterRng::Keyed(config.init_seed, Stream::kInit, {segment++});
    const std::size_t n = static_cast<std::size_t>(e.vocab) * e.dim;
    for (std::size_t i = 0; i < n; ++i) {
      params.values[e.offset_full + i] = (rng.NextDouble() * 2.0 - 1.0) * 0.05;
    }
  }
  auto init_layers = [&](const std::vector<LayerDesc>& layers) {
    for (const LayerDesc& d : layers) {
      CounterRng rng = CounterRng::Keyed(config.init_seed, Stream::kInit, {segment++});
      const double limit = std::sqrt(3.0 / static_cast<double>(std::max(1u, d.in)));
      const std::size_t n = static_cast<std::size_t>(d.in) * d.out;
      for (std::size_t i = 0; i < n; ++i) {
        params.values[d.w_full + i] = (rng.NextDouble() * 2.0 - 1.0) * limit;
      }
      // biases stay zero
    }
  };
  init_layers(params.layout.ns_layers);
  init_layers(params.layout.s_layers);
  init_layers(params.layout.common_layers);
  return params;
}

// Numerically stable softplus: never overflows for finite inputs.
inline double Softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double Sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                  : std::exp(x) / (1.0 + std::exp(x));
}

// Binary cross entropy in branch-stable form:
//   target * softplus(-logit) + (1 - target) * softplus(logit).
// The expression is affine in `target`, so fractional (even out-of-range)
// targets express weighted label combinations such as the debiased objective.
inline double BceLoss(double logit, double target) {
  return target * Softplus(-logit) + (1.0 - target) * Softplus(logit);
}

// Reusable per-example activation buffers: io[l] is the input of layer l,
// io back() the final activation/output of the block.
struct ForwardCache {
  std::vector<std::vector<double>> ns_io, s_io, common_io;
  std::vector<double> delta_a, delta_b;  // backward scratch
};

namespace internal {

inline void MlpForward(const std::vector<double>& values,
                       const std::vector<LayerDesc>& layers, bool head_linear,
                       std::vector<std::vector<double>>& io) {
  io.resize(layers.size() + 1);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const LayerDesc& d = layers[l];
    const std::vector<double>& x = io[l];
    std::vector<double>& y = io[l + 1];
    y.assign(d.out, 0.0);
    const bool relu = !(head_linear && l + 1 == layers.size());
    for (std::uint32_t r = 0; r < d.out; ++r) {
      const double* w = &values[d.w_full + static_cast<std::size_t>(r) * d.in];
      double acc = values[d.b_full + r];
      for (std::uint32_t c = 0; c < d.in; ++c) acc += w[c] * x[c];
      y[r] = relu ? std::max(0.0, acc) : acc;
    }
  }
}

inline void GatherTowerInput(const ModelParams& params, const Example& example,
                             const std::vector<std::size_t>& cat_slots,
                             const std::vector<std::size_t>& num_slots,
                             std::vector<double>& out) {
  out.clear();
  for (std::size_t slot : cat_slots) {
    const EmbeddingDesc& e = params.layout.embeddings[slot];
    const std::uint32_t token = example.cat_values[slot];
    if (token >= e.vocab) {
      throw SchemaError("token index out of vocab bounds at forward time");
    }
    const double* row =
        &params.values[e.offset_full + static_cast<std::size_t>(token) * e.dim];
    out.insert(out.end(), row, row + e.dim);
  }
  for (std::size_t slot : num_slots) out.push_back(example.num_values[slot]);
}

inline double ForwardInto(const ModelParams& params, const Example& example,
                          Scope scope, ForwardCache& cache) {
  const ModelLayout& L = params.layout;
  cache.ns_io.resize(std::max<std::size_t>(1, L.ns_layers.size() + 1));
  GatherTowerInput(params, example, L.ns_cat_slots, L.ns_num_slots,
                   cache.ns_io[0]);
  MlpForward(params.values, L.ns_layers, false, cache.ns_io);

  cache.s_io.resize(std::max<std::size_t>(1, L.s_layers.size() + 1));
  if (scope == Scope::kFull && L.d_s > 0) {
    GatherTowerInput(params, example, L.s_cat_slots, L.s_num_slots,
                     cache.s_io[0]);
    MlpForward(params.values, L.s_layers, false, cache.s_io);
  } else {
    // Truncated model: h's output is the zero vector of width d_s.
    cache.s_io[0].clear();
    cache.s_io.back().assign(L.d_s, 0.0);
  }

  cache.common_io.resize(L.common_layers.size() + 1);
  std::vector<double>& concat = cache.common_io[0];
  concat = cache.ns_io.back();
  const std::vector<double>& h = cache.s_io.back();
  concat.insert(concat.end(), h.begin(), h.end());
  MlpForward(params.values, L.common_layers, true, cache.common_io);
  return cache.common_io.back()[0];
}

// Finds the first layer with a non-finite activation, for error reporting.
inline std::string DiagnoseNonFinite(const ForwardCache& cache) {
  auto scan = [](const std::vector<std::vector<double>>& io,
                 const char* block) -> std::string {
    for (std::size_t l = 1; l < io.size(); ++l) {
      for (double v : io[l]) {
        if (!std::isfinite(v)) {
          return std::string(block) + " layer " + std::to_string(l - 1);
        }
      }
    }
    return "";
  };
  std::string where = scan(cache.ns_io, "non-sensitive tower");
  if (where.empty()) where = scan(cache.s_io, "sensitive tower");
  if (where.empty()) where = scan(cache.common_io, "common tower");
  return where.empty() ? "output" : where;
}

}  // namespace internal

inline double ForwardWithCache(const ModelParams& params,
                               const Example& example, Scope scope,
                               ForwardCache& cache) {
  const double logit = internal::ForwardInto(params, example, scope, cache);
  if (!std::isfinite(logit)) {
    throw NumericError("non-finite activation in " +
                       internal::DiagnoseNonFinite(cache));
  }
  return logit;
}

inline double ForwardFull(const ModelParams& params, const Example& example) {
  ForwardCache cache;
  return ForwardWithCache(params, example, Scope::kFull, cache);
}

inline double ForwardTruncated(const ModelParams& params,
                               const Example& example) {
  ForwardCache cache;
  return ForwardWithCache(params, example, Scope::kTruncated, cache);
}

struct GradVector {
  Scope scope = Scope::kFull;
  std::vector<double> values;
};

namespace internal {

// Backprop through one MLP block. `delta` enters as d(loss)/d(output) and
// leaves as d(loss)/d(input). Gradient blocks are written at each layer's
// scope offset; layers without one (sensitive blocks under the truncated
// scope) must not reach here.
inline void MlpBackward(const ModelParams& params,
                        const std::vector<LayerDesc>& layers, bool head_linear,
                        const std::vector<std::vector<double>>& io,
                        Scope scope, std::vector<double>& grad,
                        std::vector<double>& delta,
                        std::vector<double>& scratch) {
  for (std::size_t li = layers.size(); li-- > 0;) {
    const LayerDesc& d = layers[li];
    const std::vector<double>& x = io[li];
    const bool relu = !(head_linear && li + 1 == layers.size());
    if (relu) {
      const std::vector<double>& y = io[li + 1];
      for (std::uint32_t r = 0; r < d.out; ++r) {
        if (y[r] <= 0.0) delta[r] = 0.0;
      }
    }
    const std::size_t w_off = scope == Scope::kFull ? d.w_full : d.w_trunc;
    const std::size_t b_off = scope == Scope::kFull ? d.b_full : d.b_trunc;
    for (std::uint32_t r = 0; r < d.out; ++r) {
      const double dr = delta[r];
      double* gw = &grad[w_off + static_cast<std::size_t>(r) * d.in];
      for (std::uint32_t c = 0; c < d.in; ++c) gw[c] += dr * x[c];
      grad[b_off + r] += dr;
    }
    scratch.assign(d.in, 0.0);
    for (std::uint32_t r = 0; r < d.out; ++r) {
      const double dr = delta[r];
      const double* w = &params.values[d.w_full + static_cast<std::size_t>(r) * d.in];
      for (std::uint32_t c = 0; c < d.in; ++c) scratch[c] += w[c] * dr;
    }
    delta.swap(scratch);
  }
}

inline void ScatterEmbeddingGrad(const ModelParams& params,
                                 const Example& example,
                                 const std::vector<std::size_t>& cat_slots,
                                 const std::vector<double>& delta, Scope scope,
                                 std::vector<double>& grad) {
  std::size_t pos = 0;
  for (std::size_t slot : cat_slots) {
    const EmbeddingDesc& e = params.layout.embeddings[slot];
    const std::size_t base =
        scope == Scope::kFull ? e.offset_full : e.offset_trunc;
    double* row = &grad[base + static_cast<std::size_t>(example.cat_values[slot]) * e.dim];
    for (std::uint32_t i = 0; i < e.dim; ++i) row[i] += delta[pos + i];
    pos += e.dim;
  }
}

}  // namespace internal

// Exact gradient of BceLoss(forward(params, example), target) with respect to
// the scope's parameters, written into `grad` (resized and zeroed here).
// Under the truncated scope the sensitive tower contributes nothing: h is the
// zero vector, so the common first-layer columns over sensitive slots get an
// exactly zero gradient and w_s has no coordinates at all.
inline void PerExampleGradInto(const ModelParams& params,
                               const Example& example, double target,
                               Scope scope, ForwardCache& cache,
                               GradVector& grad) {
  const ModelLayout& L = params.layout;
  const double logit = ForwardWithCache(params, example, scope, cache);
  grad.scope = scope;
  grad.values.assign(L.ScopeSize(scope), 0.0);

  const double dlogit = Sigmoid(logit) - target;
  if (!std::isfinite(dlogit)) throw NumericError("non-finite loss gradient");

  std::vector<double>& delta = cache.delta_a;
  std::vector<double>& scratch = cache.delta_b;
  delta.assign(1, dlogit);
  internal::MlpBackward(params, L.common_layers, true, cache.common_io, scope,
                        grad.values, delta, scratch);

  // Split the concat delta into the two tower outputs.
  std::vector<double> s_delta;
  if (scope == Scope::kFull && L.d_s > 0) {
    s_delta.assign(delta.begin() + static_cast<std::ptrdiff_t>(L.d_ns), delta.end());
  }
  delta.resize(L.d_ns);

  internal::MlpBackward(params, L.ns_layers, false, cache.ns_io, scope,
                        grad.values, delta, scratch);
  internal::ScatterEmbeddingGrad(params, example, L.ns_cat_slots, delta, scope,
                                 grad.values);

  if (scope == Scope::kFull && L.d_s > 0) {
    delta.swap(s_delta);
    internal::MlpBackward(params, L.s_layers, false, cache.s_io, scope,
                          grad.values, delta, scratch);
    internal::ScatterEmbeddingGrad(params, example, L.s_cat_slots, delta,
                                   scope, grad.values);
  }
}

inline GradVector PerExampleGrad(const ModelParams& params,
                                 const Example& example, double target,
                                 Scope scope) {
  ForwardCache cache;
  GradVector grad;
  PerExampleGradInto(params, example, target, scope, cache, grad);
  return grad;
}

// Iterates the contiguous (full_offset, scope_offset, length) runs making up
// a scope. The full scope is a single run; the truncated scope skips every
// sensitive-owned block.
template <typename Fn>
void ForEachScopeRun(const ModelLayout& layout, Scope scope, Fn&& fn) {
  if (scope == Scope::kFull) {
    fn(std::size_t{0}, std::size_t{0}, layout.total_full);
    return;
  }
  auto run = [&](std::size_t full_off, std::size_t trunc_off, std::size_t len) {
    if (len > 0 && trunc_off != kNotInScope) fn(full_off, trunc_off, len);
  };
  for (const EmbeddingDesc& e : layout.embeddings) {
    run(e.offset_full, e.offset_trunc,
        static_cast<std::size_t>(e.vocab) * e.dim);
  }
  auto layer_runs = [&](const std::vector<LayerDesc>& layers) {
    for (const LayerDesc& d : layers) {
      run(d.w_full, d.w_trunc,
          static_cast<std::size_t>(d.in) * d.out + d.out);
    }
  };
  layer_runs(layout.ns_layers);
  layer_runs(layout.s_layers);
  layer_runs(layout.common_layers);
}

// --- Checkpoint I/O ---------------------------------------------------------
//
// A checkpoint is a single JSON document: the model config echo plus the flat
// full-scope parameter vector in the documented fixed ordering. Doubles are
// serialized with round-trip precision, so identical runs produce identical
// files.

inline void SaveCheckpoint(const ModelParams& params, const std::string& path) {
  nlohmann::json doc;
  doc["format"] = "semisens-checkpoint-v1";
  doc["model"]["embedding_dims"] = params.config.embedding_dims;
  doc["model"]["ns_hidden"] = params.config.ns_hidden;
  doc["model"]["s_hidden"] = params.config.s_hidden;
  doc["model"]["common_hidden"] = params.config.common_hidden;
  doc["model"]["init_seed"] = params.config.init_seed;
  doc["n_params"] = params.values.size();
  doc["params"] = params.values;
  std::ofstream out(path);
  if (!out) throw IoError("cannot write checkpoint '" + path + "'");
  out << doc.dump(2) << '\n';
  if (!out) throw IoError("failed writing checkpoint '" + path + "'");
}

inline ModelParams LoadCheckpoint(const std::string& path,
                                  const FeatureSchema& schema) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open checkpoint '" + path + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const std::exception& e) {
    throw IoError("malformed checkpoint '" + path + "': " + e.what());
  }
  if (doc.value("format", "") != std::string("semisens-checkpoint-v1")) {
    throw IoError("unrecognized checkpoint format in '" + path + "'");
  }
  ModelConfig config;
  const nlohmann::json& m = doc.at("model");
  config.embedding_dims = m.at("embedding_dims").get<std::vector<std::uint32_t>>();
  config.ns_hidden = m.at("ns_hidden").get<std::vector<std::uint32_t>>();
  config.s_hidden = m.at("s_hidden").get<std::vector<std::uint32_t>>();
  config.common_hidden = m.at("common_hidden").get<std::vector<std::uint32_t>>();
  config.init_seed = m.at("init_seed").get<std::uint64_t>();

  ModelParams params;
  params.layout = BuildLayout(schema, config);
  params.config = config;
  params.values = doc.at("params").get<std::vector<double>>();
  if (params.values.size() != params.layout.total_full) {
    throw IoError("checkpoint parameter count does not match schema/config");
  }
  return params;
}

}  // namespace semisens

#endif  // SEMISENS_MODEL_HPP_
