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

// Experiment configuration: one JSON document, `schema_version` 1.
// Every field is optional; defaults reproduce the reference protocol
// (eps 0.05, step 0.01, 30 PGD iterations, 500 sources, thresholds
// 0.05 / 0.6 / 0.4, normalized gradient ensemble).

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "leat/attacks.hpp"
#include "leat/ensembles.hpp"
#include "leat/error.hpp"
#include "leat/metrics.hpp"
#include "leat/model_zoo.hpp"

namespace leat {

inline constexpr int kConfigSchemaVersion = 1;

enum class Scenario { white_box, gray_box, black_box };

inline std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::white_box:
      return "white_box";
    case Scenario::gray_box:
      return "gray_box";
    case Scenario::black_box:
      return "black_box";
  }
  return "unknown";
}

inline Scenario parse_scenario(const std::string& name) {
  for (Scenario s : {Scenario::white_box, Scenario::gray_box, Scenario::black_box}) {
    if (to_string(s) == name) return s;
  }
  throw ConfigError("unknown scenario '" + name + "'");
}

// Ways of producing a perturbation. random_noise is the Gaussian baseline
// (std = eps, clipped to the budget).
enum class Method { leat, image_attack, random_noise };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::leat:
      return "leat";
    case Method::image_attack:
      return "image_attack";
    case Method::random_noise:
      return "random_noise";
  }
  return "unknown";
}

inline Method parse_method(const std::string& name) {
  for (Method m : {Method::leat, Method::image_attack, Method::random_noise}) {
    if (to_string(m) == name) return m;
  }
  throw ConfigError("unknown attack method '" + name + "'");
}

struct ModelConfig {
  std::string name;
  Archetype archetype = Archetype::vec_conditional;
  std::uint64_t seed = 0;
  std::size_t known_attributes = 5;
  std::size_t unknown_attributes = 5;
};

struct DatasetConfig {
  std::size_t count = 500;
  std::uint64_t seed = 2024;
  std::optional<std::string> input_dir;
};

struct EmbedderConfig {
  std::uint64_t seed = 4242;
  std::vector<std::size_t> hidden{32, 24};
  std::size_t embedding_dim = 16;
};

struct ExperimentConfig {
  std::vector<ModelConfig> models;
  ModelDims dims;
  AttackConfig attack;
  std::vector<Method> methods{Method::leat, Method::image_attack};
  EnsembleStrategy ensemble;
  DatasetConfig dataset;
  std::uint64_t attribute_seed = 7;
  double attribute_scale = 1.0;
  std::vector<Scenario> scenarios{Scenario::white_box, Scenario::gray_box,
                                  Scenario::black_box};
  std::optional<std::string> holdout;
  MetricThresholds thresholds;
  EmbedderConfig embedder;
  std::size_t threads = 1;
  std::string output_dir = "leat_out";

  bool has_scenario(Scenario s) const {
    return std::find(scenarios.begin(), scenarios.end(), s) != scenarios.end();
  }

  // Models perturbations are computed against: every model except the holdout.
  std::vector<std::size_t> attack_model_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < models.size(); ++i) {
      if (!holdout || models[i].name != *holdout) out.push_back(i);
    }
    return out;
  }

  std::optional<std::size_t> holdout_index() const {
    if (!holdout) return std::nullopt;
    for (std::size_t i = 0; i < models.size(); ++i) {
      if (models[i].name == *holdout) return i;
    }
    return std::nullopt;
  }

  void validate() const {
    if (models.empty()) throw ConfigError("config: no models");
    std::set<std::string> names;
    for (const auto& m : models) {
      if (m.name.empty()) throw ConfigError("config: model without a name");
      if (!names.insert(m.name).second) {
        throw ConfigError("config: duplicate model name '" + m.name + "'");
      }
    }
    attack.validate();
    thresholds.validate();
    if (methods.empty()) throw ConfigError("config: no attack methods");
    if (scenarios.empty()) throw ConfigError("config: no scenarios");
    if (dataset.count == 0 && !dataset.input_dir) {
      throw ConfigError("config: dataset count must be >= 1");
    }
    if (threads == 0) throw ConfigError("config: threads must be >= 1");
    if (!(attribute_scale > 0.0)) throw ConfigError("config: attribute_scale must be > 0");
    if (holdout && !holdout_index()) {
      throw ConfigError("config: holdout model '" + *holdout + "' is not in the model list");
    }
    if (has_scenario(Scenario::black_box) && !holdout) {
      throw ConfigError("config: black_box scenario requires a holdout model");
    }
    const auto attack_models = attack_model_indices();
    if (attack_models.empty()) throw ConfigError("config: every model is held out");
    ensemble.validate(attack_models.size());
    const bool image_attack =
        std::find(methods.begin(), methods.end(), Method::image_attack) != methods.end();
    for (std::size_t i : attack_models) {
      if (image_attack && models[i].known_attributes == 0) {
        throw ConfigError("config: model '" + models[i].name +
                          "' needs known attributes for image_attack");
      }
      if (has_scenario(Scenario::white_box) && models[i].known_attributes == 0) {
        throw ConfigError("config: model '" + models[i].name +
                          "' has no known attributes for white_box evaluation");
      }
      if (has_scenario(Scenario::gray_box) && models[i].unknown_attributes == 0) {
        throw ConfigError("config: model '" + models[i].name +
                          "' has no unknown attributes for gray_box evaluation");
      }
    }
    if (auto h = holdout_index(); h && has_scenario(Scenario::black_box) &&
                                  models[*h].unknown_attributes == 0) {
      throw ConfigError("config: holdout model needs unknown attributes for black_box");
    }
  }
};

/// Four attack-time archetypes plus a feature-map holdout.
inline std::vector<ModelConfig> default_models() {
  return {
      {"vec_conditional", Archetype::vec_conditional, 11, 5, 5},
      {"refiner", Archetype::refiner, 23, 2, 2},
      {"swapper", Archetype::swapper, 37, 1, 1},
      {"reenactor", Archetype::reenactor, 41, 4, 4},
      {"holdout_feature", Archetype::feature_conditional, 53, 5, 5},
  };
}

inline ExperimentConfig default_config() {
  ExperimentConfig cfg;
  cfg.models = default_models();
  cfg.holdout = "holdout_feature";
  return cfg;
}

namespace detail {

using nlohmann::json;

inline void reject_unknown_keys(const json& j, const std::set<std::string>& allowed,
                                const std::string& where) {
  if (!j.is_object()) throw ConfigError("config: '" + where + "' must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) {
      throw ConfigError("config: unknown field '" + where + "." + key + "'");
    }
  }
}

template <typename T>
void read_field(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end() && !it->is_null()) {
    try {
      out = it->get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(std::string("config: bad value for '") + key + "': " + e.what());
    }
  }
}

}  // namespace detail

inline ExperimentConfig parse_config(const nlohmann::json& j) {
  using detail::read_field;
  detail::reject_unknown_keys(
      j,
      {"schema_version", "models", "dims", "attack", "methods", "ensemble", "dataset",
       "attribute_seed", "attribute_scale", "scenarios", "holdout", "thresholds",
       "embedder", "threads", "output_dir"},
      "root");
  int version = kConfigSchemaVersion;
  read_field(j, "schema_version", version);
  if (version != kConfigSchemaVersion) {
    throw ConfigError("config: unsupported schema_version " + std::to_string(version));
  }
  ExperimentConfig cfg = default_config();

  if (auto it = j.find("models"); it != j.end()) {
    if (!it->is_array()) throw ConfigError("config: 'models' must be an array");
    cfg.models.clear();
    cfg.holdout.reset();
    for (const auto& m : *it) {
      detail::reject_unknown_keys(
          m, {"name", "archetype", "seed", "known_attributes", "unknown_attributes"},
          "models[]");
      ModelConfig mc;
      std::string archetype = "vec_conditional";
      read_field(m, "archetype", archetype);
      mc.archetype = parse_archetype(archetype);
      mc.name = archetype;
      read_field(m, "name", mc.name);
      read_field(m, "seed", mc.seed);
      read_field(m, "known_attributes", mc.known_attributes);
      read_field(m, "unknown_attributes", mc.unknown_attributes);
      cfg.models.push_back(std::move(mc));
    }
  }
  if (auto it = j.find("dims"); it != j.end()) {
    detail::reject_unknown_keys(*it,
                                {"image_shape", "latent_dim", "encoder_hidden",
                                 "generator_hidden", "attribute_dim", "refine_steps",
                                 "feature_channels", "target_hidden", "style_dim", "gate_gain"},
                                "dims");
    read_field(*it, "image_shape", cfg.dims.image_shape);
    read_field(*it, "latent_dim", cfg.dims.latent_dim);
    read_field(*it, "encoder_hidden", cfg.dims.encoder_hidden);
    read_field(*it, "generator_hidden", cfg.dims.generator_hidden);
    read_field(*it, "attribute_dim", cfg.dims.attribute_dim);
    read_field(*it, "refine_steps", cfg.dims.refine_steps);
    read_field(*it, "feature_channels", cfg.dims.feature_channels);
    read_field(*it, "target_hidden", cfg.dims.target_hidden);
    read_field(*it, "style_dim", cfg.dims.style_dim);
    read_field(*it, "gate_gain", cfg.dims.gate_gain);
    if (cfg.dims.image_shape.size() != 3) {
      throw ConfigError("config: dims.image_shape must be [height, width, channels]");
    }
  }
  if (auto it = j.find("attack"); it != j.end()) {
    detail::reject_unknown_keys(*it, {"epsilon", "step", "iterations", "random_init", "seed"},
                                "attack");
    read_field(*it, "epsilon", cfg.attack.epsilon);
    read_field(*it, "step", cfg.attack.step);
    read_field(*it, "iterations", cfg.attack.iterations);
    read_field(*it, "random_init", cfg.attack.random_init);
    read_field(*it, "seed", cfg.attack.seed);
  }
  if (auto it = j.find("methods"); it != j.end()) {
    std::vector<std::string> names;
    read_field(j, "methods", names);
    cfg.methods.clear();
    for (const auto& n : names) cfg.methods.push_back(parse_method(n));
  }
  if (auto it = j.find("ensemble"); it != j.end()) {
    detail::reject_unknown_keys(*it, {"strategy", "weights"}, "ensemble");
    std::string strategy = to_string(cfg.ensemble.kind);
    read_field(*it, "strategy", strategy);
    cfg.ensemble.kind = parse_ensemble(strategy);
    read_field(*it, "weights", cfg.ensemble.weights);
  }
  if (auto it = j.find("dataset"); it != j.end()) {
    detail::reject_unknown_keys(*it, {"count", "seed", "input_dir"}, "dataset");
    read_field(*it, "count", cfg.dataset.count);
    read_field(*it, "seed", cfg.dataset.seed);
    if (auto d = it->find("input_dir"); d != it->end() && !d->is_null()) {
      cfg.dataset.input_dir = d->get<std::string>();
    }
  }
  read_field(j, "attribute_seed", cfg.attribute_seed);
  read_field(j, "attribute_scale", cfg.attribute_scale);
  if (j.contains("scenarios")) {
    std::vector<std::string> names;
    read_field(j, "scenarios", names);
    cfg.scenarios.clear();
    for (const auto& n : names) cfg.scenarios.push_back(parse_scenario(n));
  }
  if (auto it = j.find("holdout"); it != j.end()) {
    if (it->is_null()) {
      cfg.holdout.reset();
    } else {
      cfg.holdout = it->get<std::string>();
    }
  }
  if (auto it = j.find("thresholds"); it != j.end()) {
    detail::reject_unknown_keys(*it, {"l2", "id", "lpips"}, "thresholds");
    read_field(*it, "l2", cfg.thresholds.l2);
    read_field(*it, "id", cfg.thresholds.id);
    read_field(*it, "lpips", cfg.thresholds.lpips);
  }
  if (auto it = j.find("embedder"); it != j.end()) {
    detail::reject_unknown_keys(*it, {"seed", "hidden", "embedding_dim"}, "embedder");
    read_field(*it, "seed", cfg.embedder.seed);
    read_field(*it, "hidden", cfg.embedder.hidden);
    read_field(*it, "embedding_dim", cfg.embedder.embedding_dim);
  }
  read_field(j, "threads", cfg.threads);
  read_field(j, "output_dir", cfg.output_dir);
  cfg.validate();
  return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open config");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": invalid JSON: " + e.what());
  }
  return parse_config(j);
}

/// Fully resolved config, suitable for echoing next to results.
inline nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["schema_version"] = kConfigSchemaVersion;
  j["models"] = nlohmann::json::array();
  for (const auto& m : cfg.models) {
    j["models"].push_back({{"name", m.name},
                           {"archetype", to_string(m.archetype)},
                           {"seed", m.seed},
                           {"known_attributes", m.known_attributes},
                           {"unknown_attributes", m.unknown_attributes}});
  }
  j["dims"] = {{"image_shape", cfg.dims.image_shape},
               {"latent_dim", cfg.dims.latent_dim},
               {"encoder_hidden", cfg.dims.encoder_hidden},
               {"generator_hidden", cfg.dims.generator_hidden},
               {"attribute_dim", cfg.dims.attribute_dim},
               {"refine_steps", cfg.dims.refine_steps},
               {"feature_channels", cfg.dims.feature_channels},
               {"target_hidden", cfg.dims.target_hidden},
               {"style_dim", cfg.dims.style_dim},
               {"gate_gain", cfg.dims.gate_gain}};
  j["attack"] = {{"epsilon", cfg.attack.epsilon},
                 {"step", cfg.attack.step},
                 {"iterations", cfg.attack.iterations},
                 {"random_init", cfg.attack.random_init},
                 {"seed", cfg.attack.seed}};
  j["methods"] = nlohmann::json::array();
  for (Method m : cfg.methods) j["methods"].push_back(to_string(m));
  j["ensemble"] = {{"strategy", to_string(cfg.ensemble.kind)},
                   {"weights", cfg.ensemble.weights}};
  j["dataset"] = {{"count", cfg.dataset.count}, {"seed", cfg.dataset.seed}};
  j["dataset"]["input_dir"] =
      cfg.dataset.input_dir ? nlohmann::json(*cfg.dataset.input_dir) : nlohmann::json();
  j["attribute_seed"] = cfg.attribute_seed;
  j["attribute_scale"] = cfg.attribute_scale;
  j["scenarios"] = nlohmann::json::array();
  for (Scenario s : cfg.scenarios) j["scenarios"].push_back(to_string(s));
  j["holdout"] = cfg.holdout ? nlohmann::json(*cfg.holdout) : nlohmann::json();
  j["thresholds"] = {
      {"l2", cfg.thresholds.l2}, {"id", cfg.thresholds.id}, {"lpips", cfg.thresholds.lpips}};
  j["embedder"] = {{"seed", cfg.embedder.seed},
                   {"hidden", cfg.embedder.hidden},
                   {"embedding_dim", cfg.embedder.embedding_dim}};
  j["threads"] = cfg.threads;
  j["output_dir"] = cfg.output_dir;
  return j;
}

}  // namespace leat
