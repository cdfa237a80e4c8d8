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

// Per-model disruption objectives.
//
// Image attack: mean over the known attributes of MSE(G(X, c), G(X', c)).
// Latent attack: MSE(E(X), E(X')); the generator is never called and the
// objective has no attribute input at all.
//
// Clean references (outputs or latents) are evaluated once, untracked, when
// the objective is built and stay fixed for the whole attack.

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "leat/autodiff.hpp"
#include "leat/error.hpp"
#include "leat/model_zoo.hpp"
#include "leat/tensor.hpp"

namespace leat {

enum class ObjectiveKind { image_attack, leat };

inline std::string to_string(ObjectiveKind k) {
  return k == ObjectiveKind::image_attack ? "image_attack" : "leat";
}

inline ObjectiveKind parse_objective(const std::string& name) {
  if (name == "image_attack") return ObjectiveKind::image_attack;
  if (name == "leat") return ObjectiveKind::leat;
  throw ConfigError("unknown objective '" + name + "'");
}

struct PerModelGradient {
  std::size_t model_id = 0;
  double loss_value = 0.0;
  Tensor gradient;
};

class ModelObjective {
 public:
  static ModelObjective image_attack(const TwoStageModel& model, const Tensor& clean,
                                     std::vector<Tensor> attributes) {
    if (attributes.empty()) {
      throw ConfigError(model.name() + ": image attack needs at least one attribute");
    }
    ModelObjective obj(ObjectiveKind::image_attack, model);
    const Tensor latent = model.encode(clean);
    for (const Tensor& c : attributes) {
      obj.references_.push_back(model.generate(latent, c));
    }
    obj.attributes_ = std::move(attributes);
    return obj;
  }

  static ModelObjective latent(const TwoStageModel& model, const Tensor& clean) {
    ModelObjective obj(ObjectiveKind::leat, model);
    obj.references_.push_back(model.encode(clean));
    return obj;
  }

  ObjectiveKind kind() const { return kind_; }
  const TwoStageModel& model() const { return *model_; }

  /// Loss recorded on the tape of `perturbed`.
  Var loss(const Var& perturbed) const {
    Tape& tape = *perturbed.tape();
    const Var latent = model_->encode(perturbed);
    if (kind_ == ObjectiveKind::leat) {
      return mse_loss(tape.constant(references_.front()), latent);
    }
    Var total;
    for (std::size_t i = 0; i < attributes_.size(); ++i) {
      const Var out = model_->generate(latent, tape.constant(attributes_[i]));
      const Var term = mse_loss(tape.constant(references_[i]), out);
      total = i == 0 ? term : total + term;
    }
    return scale(total, 1.0 / static_cast<double>(attributes_.size()));
  }

  double value(const Tensor& perturbed) const {
    Tape tape;
    return loss(tape.constant(perturbed)).value().item();
  }

  PerModelGradient gradient(const Tensor& perturbed, std::size_t model_id) const {
    Tape tape;
    const Var x = tape.leaf(perturbed);
    const Var l = loss(x);
    return {model_id, l.value().item(), backward(l, x)};
  }

 private:
  ModelObjective(ObjectiveKind kind, const TwoStageModel& model)
      : kind_(kind), model_(&model) {}

  ObjectiveKind kind_;
  const TwoStageModel* model_;
  std::vector<Tensor> attributes_;
  std::vector<Tensor> references_;
};

/// Mean over attrs of MSE(G(E(X), c), G(E(X'), c)).
inline double per_model_image_loss(const TwoStageModel& model, const Tensor& clean,
                                   const Tensor& perturbed,
                                   const std::vector<Tensor>& attributes) {
  return ModelObjective::image_attack(model, clean, attributes).value(perturbed);
}

/// MSE(E(X), E(X')).
inline double per_model_latent_loss(const TwoStageModel& model, const Tensor& clean,
                                    const Tensor& perturbed) {
  return ModelObjective::latent(model, clean).value(perturbed);
}

inline std::vector<ModelObjective> make_latent_objectives(
    const std::vector<const TwoStageModel*>& models, const Tensor& clean) {
  std::vector<ModelObjective> out;
  for (const TwoStageModel* m : models) out.push_back(ModelObjective::latent(*m, clean));
  return out;
}

// known_attributes[k] belongs to models[k].
inline std::vector<ModelObjective> make_image_objectives(
    const std::vector<const TwoStageModel*>& models, const Tensor& clean,
    const std::vector<std::vector<Tensor>>& known_attributes) {
  if (known_attributes.size() != models.size()) {
    throw ConfigError("image attack: one attribute list per model required");
  }
  std::vector<ModelObjective> out;
  for (std::size_t k = 0; k < models.size(); ++k) {
    out.push_back(ModelObjective::image_attack(*models[k], clean, known_attributes[k]));
  }
  return out;
}

}  // namespace leat
