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

#include <gtest/gtest.h>

#include "leat/config.hpp"
#include "test_util.hpp"

using namespace leat;
using nlohmann::json;

TEST(ConfigTest, DefaultsAreValid) {
  const auto cfg = default_config();
  EXPECT_NO_THROW(cfg.validate());
  EXPECT_EQ(cfg.attack.epsilon, 0.05);
  EXPECT_EQ(cfg.attack.step, 0.01);
  EXPECT_EQ(cfg.attack.iterations, 30);
  EXPECT_EQ(cfg.thresholds.l2, 0.05);
  EXPECT_EQ(cfg.thresholds.id, 0.6);
  EXPECT_EQ(cfg.thresholds.lpips, 0.4);
  EXPECT_EQ(cfg.ensemble.kind, EnsembleKind::normalized_gradient_ensemble);
  EXPECT_EQ(cfg.dataset.count, 500u);
  EXPECT_EQ(cfg.attack_model_indices().size(), 4u);
  EXPECT_EQ(cfg.holdout_index(), std::optional<std::size_t>(4));
}

TEST(ConfigTest, MinimalJsonGivesDefaults) {
  const auto cfg = parse_config(json{{"schema_version", 1}});
  EXPECT_EQ(config_to_json(cfg), config_to_json(default_config()));
}

TEST(ConfigTest, RoundTrip) {
  auto cfg = default_config();
  cfg.attack.iterations = 7;
  cfg.methods = {Method::leat, Method::random_noise};
  cfg.dataset.input_dir = "/tmp/images";
  cfg.ensemble = {EnsembleKind::loss_ensemble, {1, 2, 3, 4}};
  const json j = config_to_json(cfg);
  EXPECT_EQ(config_to_json(parse_config(j)), j);
}

TEST(ConfigTest, StrictParsing) {
  EXPECT_THROW(parse_config(json{{"schema_version", 2}}), ConfigError);
  EXPECT_THROW(parse_config(json{{"schema_version", 1}, {"epsilon", 0.1}}), ConfigError);
  EXPECT_THROW(parse_config(json{{"schema_version", 1}, {"attack", {{"eps", 0.1}}}}),
               ConfigError);
  EXPECT_THROW(parse_config(json{{"schema_version", 1}, {"methods", {"pgd"}}}), ConfigError);
  EXPECT_THROW(parse_config(json{{"schema_version", 1}, {"attack", {{"epsilon", "big"}}}}),
               ConfigError);
  EXPECT_THROW(parse_config(json{{"schema_version", 1}, {"attack", {{"epsilon", -1.0}}}}),
               ConfigError);
}

TEST(ConfigTest, ValidationErrors) {
  auto cfg = default_config();
  cfg.holdout.reset();
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg.scenarios = {Scenario::white_box, Scenario::gray_box};
  EXPECT_NO_THROW(cfg.validate());

  cfg = default_config();
  cfg.holdout = "missing";
  EXPECT_THROW(cfg.validate(), ConfigError);

  cfg = default_config();
  cfg.models[1].name = cfg.models[0].name;
  EXPECT_THROW(cfg.validate(), ConfigError);

  cfg = default_config();
  cfg.models[0].unknown_attributes = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);

  cfg = default_config();
  cfg.ensemble = {EnsembleKind::loss_ensemble, {1.0, 1.0}};
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(ConfigTest, EnumNames) {
  EXPECT_EQ(parse_scenario("gray_box"), Scenario::gray_box);
  EXPECT_EQ(to_string(Scenario::black_box), "black_box");
  EXPECT_EQ(parse_method("random_noise"), Method::random_noise);
  EXPECT_THROW(parse_scenario("grey"), ConfigError);
}

TEST(ConfigTest, LoadConfigFromFile) {
  const auto path = std::filesystem::path(LEAT_SOURCE_DIR) / "configs" / "default.json";
  const auto cfg = load_config(path);
  EXPECT_EQ(config_to_json(cfg), config_to_json(default_config()));
  EXPECT_THROW(load_config("/nonexistent/leat.json"), ConfigError);
}
