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

// Sign-gradient perturbation search under an L-infinity budget.
//
// The loop only sees a GradientProvider: X_t -> aggregated gradient. Which
// objective and which ensemble rule produced that gradient is decided by
// whoever builds the provider (see make_ensemble_provider).
//
// Per iteration:
//   X'      = X_t + a * sign(g)
//   eta     = clip(X' - X) to [-eps, eps], then X + eta clamped to [0, 1]
//   X_{t+1} = X + eta

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "leat/ensembles.hpp"
#include "leat/error.hpp"
#include "leat/objectives.hpp"
#include "leat/random.hpp"
#include "leat/tensor.hpp"

namespace leat {

struct AttackConfig {
  double epsilon = 0.05;
  double step = 0.01;
  int iterations = 30;
  bool random_init = true;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(epsilon > 0.0)) throw ConfigError("attack epsilon must be > 0");
    if (!(step > 0.0)) throw ConfigError("attack step size must be > 0");
    if (iterations < 1) throw ConfigError("attack iterations must be >= 1");
  }
};

struct AttackState {
  const Tensor* clean = nullptr;
  Tensor current;       // X_t
  Tensor perturbation;  // eta
  int iteration = 0;    // completed update steps
};

using GradientProvider = std::function<Tensor(const Tensor&)>;
using AttackObserver = std::function<void(const AttackState&)>;

// Slack on the budget check for the rounding in X' - X.
inline constexpr double kBudgetSlack = 1e-12;

/// Clamps the candidate to [X - eps, X + eps] and then to [0, 1].
inline Tensor project_budget(const Tensor& clean, const Tensor& candidate, double epsilon) {
  require_same_shape(clean, candidate, "project_budget");
  if (!(epsilon > 0.0)) throw ConfigError("project_budget: epsilon must be > 0");
  Tensor out(candidate.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) {
    const double v = std::clamp(candidate[i], clean[i] - epsilon, clean[i] + epsilon);
    out[i] = std::clamp(v, 0.0, 1.0);
  }
  return out;
}

inline void check_attack_state(const AttackState& s, double epsilon) {
  for (std::size_t i = 0; i < s.current.numel(); ++i) {
    const double x = s.current[i];
    if (!(x >= 0.0 && x <= 1.0)) {
      throw ContractError("attack left the pixel range at coordinate " + std::to_string(i));
    }
    if (std::abs(s.perturbation[i]) > epsilon + kBudgetSlack) {
      throw ContractError("attack exceeded the perturbation budget at coordinate " +
                          std::to_string(i));
    }
  }
}

namespace detail {

// eta from a candidate image; X_t is always rebuilt as X + eta.
inline AttackState make_state(const Tensor& clean, const Tensor& candidate,
                              double epsilon, int iteration) {
  AttackState s;
  s.clean = &clean;
  s.perturbation = project_budget(clean, candidate, epsilon) - clean;
  s.current = clean + s.perturbation;
  s.iteration = iteration;
  return s;
}

}  // namespace detail

/// Single step: eta = eps * sign(grad at X), projected.
inline Tensor fgsm(const GradientProvider& gradient, const Tensor& clean,
                   const AttackConfig& config) {
  config.validate();
  const Tensor g = gradient(clean);
  require_same_shape(clean, g, "fgsm gradient");
  return detail::make_state(clean, clean + config.epsilon * sign(g), config.epsilon, 1)
      .perturbation;
}

namespace detail {

inline Tensor iterate(const GradientProvider& gradient, AttackState state,
                      const AttackConfig& config, const AttackObserver& observer) {
  const Tensor& clean = *state.clean;
  check_attack_state(state, config.epsilon);
  if (observer) observer(state);
  for (int t = 0; t < config.iterations; ++t) {
    const Tensor g = gradient(state.current);
    if (g.shape() != clean.shape()) {
      throw ContractError("gradient provider returned shape " + shape_string(g.shape()) +
                          ", expected " + shape_string(clean.shape()));
    }
    const Tensor stepped = state.current + config.step * sign(g);
    state = make_state(clean, stepped, config.epsilon, state.iteration + 1);
    check_attack_state(state, config.epsilon);
    if (observer) observer(state);
  }
  return std::move(state.perturbation);
}

}  // namespace detail

/// Full iterative attack. With random_init the start is X + U[-eps, eps]
/// (projected); otherwise X itself. Returns the final perturbation.
inline Tensor run_attack(const GradientProvider& gradient, const Tensor& clean,
                         const AttackConfig& config, const AttackObserver& observer = {}) {
  config.validate();
  Tensor start = clean;
  if (config.random_init) {
    Rng rng(derive_seed(config.seed, hash_name("pgd-init")));
    start = clean + Tensor::uniform(clean.shape(), rng, -config.epsilon, config.epsilon);
  }
  return detail::iterate(gradient, detail::make_state(clean, start, config.epsilon, 0),
                         config, observer);
}

/// Continues an attack from an existing perturbation (no random init).
inline Tensor resume_attack(const GradientProvider& gradient, const Tensor& clean,
                            const Tensor& perturbation, const AttackConfig& config,
                            const AttackObserver& observer = {}) {
  config.validate();
  require_same_shape(clean, perturbation, "resume_attack");
  return detail::iterate(
      gradient, detail::make_state(clean, clean + perturbation, config.epsilon, 0), config,
      observer);
}

/// Per-iteration gradient: one tape per model, then the ensemble rule.
/// `loss_scales` (optional) multiplies model k's loss by a positive constant.
inline GradientProvider make_ensemble_provider(const std::vector<ModelObjective>& objectives,
                                               EnsembleStrategy strategy,
                                               std::vector<double> loss_scales = {}) {
  if (objectives.empty()) throw ConfigError("ensemble attack needs at least one model");
  strategy.validate(objectives.size());
  if (!loss_scales.empty() && loss_scales.size() != objectives.size()) {
    throw ConfigError("loss scales must match the model count");
  }
  return [&objectives, strategy = std::move(strategy),
          loss_scales = std::move(loss_scales)](const Tensor& x) {
    std::vector<PerModelGradient> per_model;
    per_model.reserve(objectives.size());
    for (std::size_t k = 0; k < objectives.size(); ++k) {
      PerModelGradient g = objectives[k].gradient(x, k);
      if (!loss_scales.empty()) {
        g.loss_value *= loss_scales[k];
        g.gradient = loss_scales[k] * g.gradient;
      }
      per_model.push_back(std::move(g));
    }
    return aggregate(strategy, per_model);
  };
}

/// Sum of the per-model objective values at X + eta.
inline double total_objective(const std::vector<ModelObjective>& objectives,
                              const Tensor& perturbed) {
  double sum = 0.0;
  for (const auto& o : objectives) sum += o.value(perturbed);
  return sum;
}

}  // namespace leat
