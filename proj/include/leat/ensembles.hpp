/* Copyright 2026 The LEAT Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#pragma once

// Cross-model gradient aggregation.
//
//   loss_ensemble                 sum_k w_k g_k
//   hmm                           g_k of the model with the smallest loss
//   gradient_ensemble             (1/K) sum_k g_k
//   normalized_gradient_ensemble  sum_k g_k / |g_k|_2
//
// Models are distinguished by PerModelGradient::model_id, not list position.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "leat/error.hpp"
#include "leat/objectives.hpp"
#include "leat/tensor.hpp"

namespace leat {

enum class EnsembleKind { loss_ensemble, hmm, gradient_ensemble, normalized_gradient_ensemble };

inline std::string to_string(EnsembleKind k) {
  switch (k) {
    case EnsembleKind::loss_ensemble:
      return "loss_ensemble";
    case EnsembleKind::hmm:
      return "hmm";
    case EnsembleKind::gradient_ensemble:
      return "gradient_ensemble";
    case EnsembleKind::normalized_gradient_ensemble:
      return "normalized_gradient_ensemble";
  }
  return "unknown";
}

inline EnsembleKind parse_ensemble(const std::string& name) {
  for (EnsembleKind k : {EnsembleKind::loss_ensemble, EnsembleKind::hmm,
                         EnsembleKind::gradient_ensemble,
                         EnsembleKind::normalized_gradient_ensemble}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown ensemble strategy '" + name + "'");
}

// Gradients with a smaller L2 norm than this contribute nothing to the
// normalized ensemble.
inline constexpr double kZeroGradientNorm = 1e-12;

struct EnsembleStrategy {
  EnsembleKind kind = EnsembleKind::normalized_gradient_ensemble;
  std::vector<double> weights;  // loss_ensemble only; empty means all ones

  void validate(std::size_t model_count) const {
    if (weights.empty()) return;
    if (weights.size() != model_count) {
      throw ConfigError("ensemble weights: expected " + std::to_string(model_count) +
                        " entries, got " + std::to_string(weights.size()));
    }
    for (double w : weights) {
      if (!(w > 0.0)) throw ConfigError("ensemble weights must be > 0");
    }
  }
};

namespace detail {

inline void require_nonempty(std::span<const PerModelGradient> per_model,
                             const char* what) {
  if (per_model.empty()) throw ContractError(std::string(what) + ": no model gradients");
  for (const auto& g : per_model) {
    require_same_shape(per_model.front().gradient, g.gradient, what);
  }
}

}  // namespace detail

inline Tensor aggregate_loss_ensemble(std::span<const PerModelGradient> per_model,
                                      std::span<const double> omega) {
  detail::require_nonempty(per_model, "loss ensemble");
  if (omega.size() != per_model.size()) {
    throw DimensionError("loss ensemble: " + std::to_string(per_model.size()) +
                         " gradients but " + std::to_string(omega.size()) + " weights");
  }
  Tensor out = Tensor::zeros_like(per_model.front().gradient);
  for (std::size_t k = 0; k < per_model.size(); ++k) {
    const Tensor& g = per_model[k].gradient;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] += omega[k] * g[i];
  }
  return out;
}

inline Tensor aggregate_loss_ensemble(std::span<const PerModelGradient> per_model) {
  const std::vector<double> ones(per_model.size(), 1.0);
  return aggregate_loss_ensemble(per_model, ones);
}

// Ties on the loss go to the lowest model_id.
inline const PerModelGradient& hardest_model(std::span<const PerModelGradient> per_model) {
  detail::require_nonempty(per_model, "hmm");
  const PerModelGradient* best = &per_model.front();
  for (const auto& g : per_model) {
    if (g.loss_value < best->loss_value ||
        (g.loss_value == best->loss_value && g.model_id < best->model_id)) {
      best = &g;
    }
  }
  return *best;
}

inline Tensor aggregate_hmm(std::span<const PerModelGradient> per_model) {
  return hardest_model(per_model).gradient;
}

inline Tensor aggregate_gradient_ensemble(std::span<const PerModelGradient> per_model) {
  detail::require_nonempty(per_model, "gradient ensemble");
  const double inv_k = 1.0 / static_cast<double>(per_model.size());
  Tensor out = Tensor::zeros_like(per_model.front().gradient);
  for (const auto& g : per_model) {
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] += inv_k * g.gradient[i];
  }
  return out;
}

inline Tensor aggregate_normalized(std::span<const PerModelGradient> per_model) {
  detail::require_nonempty(per_model, "normalized gradient ensemble");
  Tensor out = Tensor::zeros_like(per_model.front().gradient);
  for (const auto& g : per_model) {
    const double norm = l2_norm(g.gradient);
    if (norm < kZeroGradientNorm) continue;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] += g.gradient[i] / norm;
  }
  return out;
}

inline Tensor aggregate(const EnsembleStrategy& strategy,
                        std::span<const PerModelGradient> per_model) {
  switch (strategy.kind) {
    case EnsembleKind::loss_ensemble:
      if (strategy.weights.empty()) return aggregate_loss_ensemble(per_model);
      return aggregate_loss_ensemble(per_model, strategy.weights);
    case EnsembleKind::hmm:
      return aggregate_hmm(per_model);
    case EnsembleKind::gradient_ensemble:
      return aggregate_gradient_ensemble(per_model);
    case EnsembleKind::normalized_gradient_ensemble:
      return aggregate_normalized(per_model);
  }
  throw ContractError("unknown ensemble kind");
}

}  // namespace leat
