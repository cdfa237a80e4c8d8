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

// leat run       --config cfg.json [--out dir] [--scenario s]... [--seed-override n]
// leat attack    --config cfg.json [--out dir] (--index i | --image f.pgm) [--method m]
// leat calibrate --config cfg.json [--out dir] [--noise a]
// leat project   --config cfg.json [--out dir]
//
// Exit codes: 0 success, 1 configuration error, 2 runtime error.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "leat/leat.hpp"

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

struct CommonOptions {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed_override;
  std::vector<std::string> scenarios;
};

leat::ExperimentConfig resolve_config(const CommonOptions& opts) {
  leat::ExperimentConfig cfg =
      opts.config_path.empty() ? leat::default_config() : leat::load_config(opts.config_path);
  if (opts.seed_override) {
    cfg.dataset.seed = *opts.seed_override;
    cfg.attack.seed = leat::derive_seed(*opts.seed_override, leat::hash_name("attack"));
  }
  if (!opts.scenarios.empty()) {
    cfg.scenarios.clear();
    for (const auto& s : opts.scenarios) cfg.scenarios.push_back(leat::parse_scenario(s));
  }
  if (!opts.out_dir.empty()) cfg.output_dir = opts.out_dir;
  cfg.validate();
  return cfg;
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw leat::IoError(path.string() + ": cannot open for writing");
  out << j.dump(2) << "\n";
}

void print_summary(const leat::EvaluationReport& report) {
  for (const auto& a : report.aggregates) {
    std::cout << leat::to_string(a.scenario) << " / " << leat::to_string(a.method)
              << ": Avg-DSR " << a.dsr.avg_dsr << ", E-DSR " << a.dsr.e_dsr << "\n";
    for (std::size_t k = 0; k < a.models.size(); ++k) {
      std::cout << "    " << a.models[k] << ": DSR " << a.dsr.per_model[k] << ", L2 "
                << a.mean_l2_image[k] << ", ID " << a.mean_id_loss[k] << ", perceptual "
                << a.mean_perceptual[k] << "\n";
    }
  }
  for (const auto& [method, seconds] : report.runtime_seconds) {
    std::cout << "attack time " << method << ": " << seconds << " s\n";
  }
}

int cmd_run(const CommonOptions& opts) {
  const auto cfg = resolve_config(opts);
  const auto report = leat::run_experiment(cfg);
  leat::emit_reports(report, cfg.output_dir);
  print_summary(report);
  std::cout << "reports written to " << cfg.output_dir << "\n";
  return 0;
}

int cmd_attack(const CommonOptions& opts, std::optional<std::size_t> index,
               const std::string& image_path, const std::string& method_name) {
  auto cfg = resolve_config(opts);
  if (image_path.empty() && !index) index = 0;
  if (!image_path.empty()) {
    // Only the one input image is needed; skip generating the whole dataset.
    cfg.dataset.count = 1;
  } else if (*index >= cfg.dataset.count && !cfg.dataset.input_dir) {
    throw leat::ConfigError("--index " + std::to_string(*index) + " is outside the dataset (" +
                            std::to_string(cfg.dataset.count) + " images)");
  }
  const leat::Method method =
      method_name.empty() ? cfg.methods.front() : leat::parse_method(method_name);
  const leat::Experiment exp(cfg);
  leat::Tensor clean;
  std::size_t seed_index = 0;
  if (!image_path.empty()) {
    clean = leat::read_pnm(image_path);
    if (clean.shape() != cfg.dims.image_shape) {
      throw leat::ConfigError(image_path + ": image shape " + leat::shape_string(clean.shape()) +
                              " does not match dims.image_shape " +
                              leat::shape_string(cfg.dims.image_shape));
    }
  } else {
    if (*index >= exp.dataset().images.size()) {
      throw leat::ConfigError("--index is outside the dataset");
    }
    clean = exp.dataset().images[*index];
    seed_index = *index;
  }
  const leat::Tensor eta = exp.perturb(method, clean, seed_index);
  const std::filesystem::path out(cfg.output_dir);
  std::filesystem::create_directories(out);
  nlohmann::json j;
  j["schema_version"] = leat::kReportSchemaVersion;
  j["method"] = leat::to_string(method);
  j["shape"] = eta.shape();
  j["linf"] = leat::linf_norm(eta);
  j["eta"] = eta.data();
  write_json(out / "eta.json", j);
  leat::write_pnm(out / "source.pgm", clean);
  leat::write_pnm(out / "protected.pgm", clean + eta);
  std::cout << "eta (" << leat::to_string(method) << ", linf " << leat::linf_norm(eta)
            << ") written to " << (out / "eta.json").string() << "\n";
  return 0;
}

int cmd_calibrate(const CommonOptions& opts, double noise) {
  const auto cfg = resolve_config(opts);
  const auto report = leat::calibrate(cfg, noise);
  const std::filesystem::path out(cfg.output_dir);
  std::filesystem::create_directories(out);
  const auto j = leat::calibration_json(report);
  write_json(out / "calibration.json", j);
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_project(const CommonOptions& opts) {
  const auto cfg = resolve_config(opts);
  const leat::Experiment exp(cfg);
  leat::EvaluationReport report;
  report.config = cfg;
  report.latents = exp.project_latents(exp.compute_perturbations());
  const std::filesystem::path out(cfg.output_dir);
  std::filesystem::create_directories(out);
  std::ofstream csv(out / "latents_pca.csv");
  csv << leat::latents_csv(report);
  nlohmann::json sep = nlohmann::json::array();
  for (const auto& p : report.latents) {
    sep.push_back({{"model", p.model},
                   {"method", leat::to_string(p.method)},
                   {"separation", p.separation}});
    std::cout << p.model << " / " << leat::to_string(p.method) << ": separation "
              << p.separation << "\n";
  }
  write_json(out / "latent_separation.json", sep);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Latent ensemble attack harness for toy two-stage generative models"};
  app.require_subcommand(1);

  CommonOptions opts;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opts.config_path, "experiment JSON config")
        ->check(CLI::ExistingFile);
    sub->add_option("--out", opts.out_dir, "output directory (overrides output_dir)");
    sub->add_option("--seed-override", opts.seed_override,
                    "replace the dataset and attack seeds");
    sub->add_option("--scenario", opts.scenarios,
                    "white_box | gray_box | black_box (repeatable)");
  };

  auto* run = app.add_subcommand("run", "attack every image and write the evaluation reports");
  add_common(run);

  auto* attack = app.add_subcommand("attack", "emit the perturbation for one image");
  add_common(attack);
  std::optional<std::size_t> index;
  std::string image_path;
  std::string method;
  attack->add_option("--index", index, "dataset image index");
  attack->add_option("--image", image_path, "PGM/PPM source image")->check(CLI::ExistingFile);
  attack->add_option("--method", method, "leat | image_attack | random_noise");

  auto* calib = app.add_subcommand("calibrate", "metric distributions under null perturbations");
  add_common(calib);
  double noise = 1e-3;
  calib->add_option("--noise", noise, "uniform noise amplitude");

  auto* project = app.add_subcommand("project", "export clean/disrupted latent PCA coordinates");
  add_common(project);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) return cmd_run(opts);
    if (*attack) return cmd_attack(opts, index, image_path, method);
    if (*calib) return cmd_calibrate(opts, noise);
    if (*project) return cmd_project(opts);
  } catch (const leat::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
