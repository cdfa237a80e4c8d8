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

// Toy two-stage generative models y = G(E(X), c).
//
// Every archetype splits into an attribute-free encoder E and a conditional
// generator G. Parameters are frozen random draws, so a model is fully
// described by (archetype, seed, dims).
//
//   vec_conditional      vector latent; G consumes concat(s, c)
//   refiner              vector latent; G = base decode of s followed by a
//                        fixed number of residual refinement steps on c
//   swapper              vector latent; c is a target-face image that G mixes in
//   reenactor            image-shaped "neutral face" latent; G displaces it by
//                        an action-unit style vector c
//   feature_conditional  [channels, h/2, w/2] feature-map latent; G consumes
//                        concat(flatten(z), c). Used as the held-out model.
//
// The vector-latent generators read z through an attribute-gated style code
// s = W_s (z * sigmoid(gate_gain * (W_g a + b_g))), where a is c or the
// target-face features. The attribute picks which latent channels drive the
// output, so the image-space sensitivity depends on c while E does not.
//
// The image-shaped reenactor latent has no low-dimensional semantic space;
// latent losses still use plain MSE over it.

#include <atomic>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "leat/autodiff.hpp"
#include "leat/dataset.hpp"
#include "leat/error.hpp"
#include "leat/random.hpp"
#include "leat/tensor.hpp"

namespace leat {

enum class Archetype { vec_conditional, refiner, swapper, reenactor, feature_conditional };

inline std::string to_string(Archetype a) {
  switch (a) {
    case Archetype::vec_conditional:
      return "vec_conditional";
    case Archetype::refiner:
      return "refiner";
    case Archetype::swapper:
      return "swapper";
    case Archetype::reenactor:
      return "reenactor";
    case Archetype::feature_conditional:
      return "feature_conditional";
  }
  return "unknown";
}

inline Archetype parse_archetype(const std::string& name) {
  for (Archetype a : {Archetype::vec_conditional, Archetype::refiner, Archetype::swapper,
                      Archetype::reenactor, Archetype::feature_conditional}) {
    if (to_string(a) == name) return a;
  }
  throw ConfigError("unknown archetype '" + name + "'");
}

enum class LatentKind { vector, feature_map, image_shaped };

inline std::string to_string(LatentKind k) {
  switch (k) {
    case LatentKind::vector:
      return "vector";
    case LatentKind::feature_map:
      return "feature_map";
    case LatentKind::image_shaped:
      return "image_shaped";
  }
  return "unknown";
}

struct LatentSpec {
  LatentKind kind = LatentKind::vector;
  Shape shape;
  bool semantic = true;  // lives in a low-dimensional semantic space
};

struct ModelDims {
  Shape image_shape{8, 8, 1};
  std::size_t latent_dim = 12;
  std::size_t encoder_hidden = 16;
  std::size_t generator_hidden = 64;
  std::size_t attribute_dim = 4;
  std::size_t refine_steps = 4;
  std::size_t feature_channels = 2;
  std::size_t target_hidden = 16;  // swapper's target-face branch
  std::size_t style_dim = 3;       // width of the gated style code
  double gate_gain = 4.0;          // sharpness of the attribute gate
};

// Call counters; shared by copies of a model.
struct InvocationCounters {
  std::atomic<std::uint64_t> encoder{0};
  std::atomic<std::uint64_t> generator{0};
};

class TwoStageModel {
 public:
  const std::string& name() const { return name_; }
  Archetype archetype() const { return archetype_; }
  std::uint64_t seed() const { return seed_; }
  const ModelDims& dims() const { return dims_; }
  const LatentSpec& latent_spec() const { return latent_spec_; }
  const ParameterSet& encoder_params() const { return encoder_params_; }
  const ParameterSet& generator_params() const { return generator_params_; }
  const Shape& image_shape() const { return dims_.image_shape; }

  // Shape of the conditioning input c. For the swapper this is an image.
  const Shape& attribute_shape() const { return attribute_shape_; }
  std::size_t attribute_arity() const { return shape_numel(attribute_shape_); }

  std::uint64_t encoder_calls() const { return counters_->encoder.load(); }
  std::uint64_t generator_calls() const { return counters_->generator.load(); }
  void reset_counters() const {
    counters_->encoder = 0;
    counters_->generator = 0;
  }

  /// E(X). Never reads any attribute.
  Var encode(const Var& image) const {
    if (image.shape() != dims_.image_shape) {
      throw DimensionError(name_ + ": encode expects image " +
                           shape_string(dims_.image_shape) + ", got " +
                           shape_string(image.shape()));
    }
    counters_->encoder.fetch_add(1, std::memory_order_relaxed);
    const ParameterSet& p = encoder_params_;
    Var h = tanh(forward_affine(flatten(image), p.get("enc1.w"), p.get("enc1.b")));
    Var z = tanh(forward_affine(h, p.get("enc2.w"), p.get("enc2.b")));
    return reshape(z, latent_spec_.shape);
  }

  /// G(latent, c), values in [0, 1], image-shaped.
  Var generate(const Var& latent, const Var& attribute) const {
    if (latent.shape() != latent_spec_.shape) {
      throw DimensionError(name_ + ": generate expects latent " +
                           shape_string(latent_spec_.shape) + ", got " +
                           shape_string(latent.shape()));
    }
    if (attribute.shape() != attribute_shape_) {
      throw DimensionError(name_ + ": generate expects attribute " +
                           shape_string(attribute_shape_) + ", got " +
                           shape_string(attribute.shape()));
    }
    counters_->generator.fetch_add(1, std::memory_order_relaxed);
    const ParameterSet& p = generator_params_;
    Var logits;
    switch (archetype_) {
      case Archetype::vec_conditional:
        logits = mlp_head(concat({style_code(latent, attribute), attribute}));
        break;
      case Archetype::feature_conditional:
        logits = mlp_head(concat({latent, attribute}));
        break;
      case Archetype::refiner: {
        logits = forward_affine(style_code(latent, attribute), p.get("base.w"),
                                p.get("base.b"));
        const double step = dims_.refine_steps > 0
                                ? 1.0 / static_cast<double>(dims_.refine_steps)
                                : 0.0;
        for (std::size_t s = 0; s < dims_.refine_steps; ++s) {
          Var h = tanh(forward_affine(concat({logits, attribute}), p.get("ref1.w"),
                                      p.get("ref1.b")));
          logits = logits + step * forward_affine(h, p.get("ref2.w"), p.get("ref2.b"));
        }
        break;
      }
      case Archetype::swapper: {
        Var target = tanh(forward_affine(flatten(attribute), p.get("tgt.w"),
                                         p.get("tgt.b")));
        logits = mlp_head(concat({style_code(latent, target), target}));
        break;
      }
      case Archetype::reenactor: {
        Var neutral = flatten(latent);
        logits = 2.0 * neutral + mlp_head(concat({neutral, attribute}));
        break;
      }
    }
    return reshape(sigmoid(logits), dims_.image_shape);
  }

  Var forward(const Var& image, const Var& attribute) const {
    return generate(encode(image), attribute);
  }

  // Untracked conveniences; each runs on a scratch tape.
  Tensor encode(const Tensor& image) const {
    Tape tape;
    return encode(tape.constant(image)).value();
  }

  Tensor generate(const Tensor& latent, const Tensor& attribute) const {
    Tape tape;
    return generate(tape.constant(latent), tape.constant(attribute)).value();
  }

  Tensor forward(const Tensor& image, const Tensor& attribute) const {
    Tape tape;
    return forward(tape.constant(image), tape.constant(attribute)).value();
  }

 private:
  friend TwoStageModel build_model(Archetype, std::uint64_t, const ModelDims&,
                                   std::string);

  Var style_code(const Var& latent, const Var& gate_input) const {
    const ParameterSet& p = generator_params_;
    Var gate = sigmoid(dims_.gate_gain *
                       forward_affine(gate_input, p.get("gate.w"), p.get("gate.b")));
    return forward_affine(hadamard(latent, gate), p.get("style.w"), p.get("style.b"));
  }

  Var mlp_head(const Var& input) const {
    const ParameterSet& p = generator_params_;
    Var h = tanh(forward_affine(input, p.get("gen1.w"), p.get("gen1.b")));
    h = tanh(forward_affine(h, p.get("gen2.w"), p.get("gen2.b")));
    return forward_affine(h, p.get("gen3.w"), p.get("gen3.b"));
  }

  std::string name_;
  Archetype archetype_ = Archetype::vec_conditional;
  std::uint64_t seed_ = 0;
  ModelDims dims_;
  LatentSpec latent_spec_;
  Shape attribute_shape_;
  ParameterSet encoder_params_;
  ParameterSet generator_params_;
  std::shared_ptr<InvocationCounters> counters_ = std::make_shared<InvocationCounters>();
};

namespace detail {

// Weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], zero bias.
inline void add_affine(ParameterSet& params, Rng& rng, const std::string& name,
                       std::size_t out, std::size_t in) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  params.add(name + ".w", Tensor::uniform({out, in}, rng, -bound, bound));
  params.add(name + ".b", Tensor({out}));
}

}  // namespace detail

/// Builds a model deterministically from (archetype, seed, dims).
inline TwoStageModel build_model(Archetype archetype, std::uint64_t seed,
                                 const ModelDims& dims, std::string name = {}) {
  if (dims.image_shape.size() != 3 || shape_numel(dims.image_shape) == 0 ||
      dims.latent_dim == 0 || dims.encoder_hidden == 0 ||
      dims.generator_hidden == 0 || dims.attribute_dim == 0 ||
      dims.feature_channels == 0 || dims.target_hidden == 0 || dims.style_dim == 0 ||
      !(dims.gate_gain > 0.0) || !std::isfinite(dims.gate_gain)) {
    throw ConfigError("model dims must be positive");
  }
  TwoStageModel m;
  m.name_ = name.empty() ? to_string(archetype) : std::move(name);
  m.archetype_ = archetype;
  m.seed_ = seed;
  m.dims_ = dims;

  const std::size_t pixels = shape_numel(dims.image_shape);
  const std::size_t hidden = dims.generator_hidden;
  switch (archetype) {
    case Archetype::vec_conditional:
    case Archetype::refiner:
    case Archetype::swapper:
      m.latent_spec_ = {LatentKind::vector, {dims.latent_dim}, true};
      break;
    case Archetype::reenactor:
      m.latent_spec_ = {LatentKind::image_shaped, dims.image_shape, false};
      break;
    case Archetype::feature_conditional: {
      const std::size_t h = std::max<std::size_t>(1, dims.image_shape[0] / 2);
      const std::size_t w = std::max<std::size_t>(1, dims.image_shape[1] / 2);
      m.latent_spec_ = {LatentKind::feature_map, {dims.feature_channels, h, w}, true};
      break;
    }
  }
  m.attribute_shape_ =
      archetype == Archetype::swapper ? dims.image_shape : Shape{dims.attribute_dim};

  const std::size_t latent_size = shape_numel(m.latent_spec_.shape);
  Rng enc_rng(derive_seed(seed, hash_name("encoder")));
  m.encoder_params_ = ParameterSet(seed);
  detail::add_affine(m.encoder_params_, enc_rng, "enc1", dims.encoder_hidden, pixels);
  detail::add_affine(m.encoder_params_, enc_rng, "enc2", latent_size, dims.encoder_hidden);

  Rng gen_rng(derive_seed(seed, hash_name("generator")));
  ParameterSet& g = m.generator_params_ = ParameterSet(seed);
  const std::size_t style = dims.style_dim;
  switch (archetype) {
    case Archetype::vec_conditional:
      detail::add_affine(g, gen_rng, "gate", latent_size, dims.attribute_dim);
      detail::add_affine(g, gen_rng, "style", style, latent_size);
      detail::add_affine(g, gen_rng, "gen1", hidden, style + dims.attribute_dim);
      detail::add_affine(g, gen_rng, "gen2", hidden, hidden);
      detail::add_affine(g, gen_rng, "gen3", pixels, hidden);
      break;
    case Archetype::feature_conditional:
    case Archetype::reenactor:
      detail::add_affine(g, gen_rng, "gen1", hidden, latent_size + dims.attribute_dim);
      detail::add_affine(g, gen_rng, "gen2", hidden, hidden);
      detail::add_affine(g, gen_rng, "gen3", pixels, hidden);
      break;
    case Archetype::refiner:
      detail::add_affine(g, gen_rng, "gate", latent_size, dims.attribute_dim);
      detail::add_affine(g, gen_rng, "style", style, latent_size);
      detail::add_affine(g, gen_rng, "base", pixels, style);
      detail::add_affine(g, gen_rng, "ref1", hidden, pixels + dims.attribute_dim);
      detail::add_affine(g, gen_rng, "ref2", pixels, hidden);
      break;
    case Archetype::swapper:
      detail::add_affine(g, gen_rng, "tgt", dims.target_hidden, pixels);
      detail::add_affine(g, gen_rng, "gate", latent_size, dims.target_hidden);
      detail::add_affine(g, gen_rng, "style", style, latent_size);
      detail::add_affine(g, gen_rng, "gen1", hidden, style + dims.target_hidden);
      detail::add_affine(g, gen_rng, "gen2", hidden, hidden);
      detail::add_affine(g, gen_rng, "gen3", pixels, hidden);
      break;
  }
  return m;
}

/// Known and unknown conditioning inputs for one model. The two pools are
/// drawn from independent streams of a continuous distribution.
struct AttributeSet {
  std::vector<Tensor> known;
  std::vector<Tensor> unknown;
};

inline Tensor sample_attribute(const TwoStageModel& model, Rng& rng, double scale = 1.0) {
  if (model.archetype() == Archetype::swapper) {
    return blob_image(rng, model.image_shape());
  }
  return Tensor::normal(model.attribute_shape(), rng, scale);
}

inline AttributeSet sample_attributes(const TwoStageModel& model, std::size_t known,
                                      std::size_t unknown, std::uint64_t seed,
                                      double scale = 1.0) {
  AttributeSet set;
  Rng known_rng(derive_seed(seed, hash_name("known:" + model.name())));
  Rng unknown_rng(derive_seed(seed, hash_name("unknown:" + model.name())));
  for (std::size_t i = 0; i < known; ++i) {
    set.known.push_back(sample_attribute(model, known_rng, scale));
  }
  for (std::size_t i = 0; i < unknown; ++i) {
    set.unknown.push_back(sample_attribute(model, unknown_rng, scale));
  }
  for (const Tensor& k : set.known) {
    for (const Tensor& u : set.unknown) {
      if (k == u) throw ContractError("known and unknown attribute pools overlap");
    }
  }
  return set;
}

}  // namespace leat
