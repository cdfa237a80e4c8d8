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

// End-to-end experiment driver.
//
// Perturbations are computed once per (method, source image) against the
// attack-time models (everything except the holdout) and then evaluated per
// scenario:
//
//   white_box  attack-time models, known attributes
//   gray_box   attack-time models, unknown attributes
//   black_box  holdout model only, its unknown attributes
//
// Metrics of one (image, model) pair are averaged over the scenario's
// attribute list before the success threshold is applied.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "leat/attacks.hpp"
#include "leat/config.hpp"
#include "leat/dataset.hpp"
#include "leat/ensembles.hpp"
#include "leat/error.hpp"
#include "leat/metrics.hpp"
#include "leat/model_zoo.hpp"
#include "leat/objectives.hpp"

namespace leat {

inline constexpr int kReportSchemaVersion = 1;

struct ReportRow {
  std::size_t image = 0;
  std::string model;
  Scenario scenario = Scenario::white_box;
  Method method = Method::leat;
  double l2_image = 0.0;
  double id_loss = 0.0;
  double perceptual = 0.0;
  bool success = false;
};

struct AggregateRecord {
  Scenario scenario = Scenario::white_box;
  Method method = Method::leat;
  std::vector<std::string> models;
  DsrSummary dsr;
  std::vector<double> mean_l2_image;
  std::vector<double> mean_id_loss;
  std::vector<double> mean_perceptual;
};

struct LatentProjection {
  std::string model;
  Method method = Method::leat;
  std::vector<Point2> clean;
  std::vector<Point2> disrupted;
  double separation = 0.0;
};

struct EvaluationReport {
  ExperimentConfig config;
  std::vector<ReportRow> rows;
  std::vector<AggregateRecord> aggregates;
  std::map<std::string, double> runtime_seconds;  // total attack wall time per method
  std::vector<LatentProjection> latents;
};

// perturbations[method][image]
struct PerturbationSet {
  std::vector<Method> methods;
  std::vector<std::vector<Tensor>> perturbations;
  std::vector<double> seconds;

  const std::vector<Tensor>& of(Method m) const {
    for (std::size_t i = 0; i < methods.size(); ++i) {
      if (methods[i] == m) return perturbations[i];
    }
    throw ContractError("no perturbations computed for method " + to_string(m));
  }
};

/// Runs fn(i) for i in [0, n) on `threads` workers. Results must be written
/// to per-index slots so the outcome does not depend on scheduling.
inline void parallel_for(std::size_t n, std::size_t threads,
                         const std::function<void(std::size_t)>& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  std::vector<std::jthread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n && !failed; i = next++) {
        try {
          fn(i);
        } catch (...) {
          if (!failed.exchange(true)) failure = std::current_exception();
        }
      }
    });
  }
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

class Experiment {
 public:
  explicit Experiment(ExperimentConfig config) : config_(std::move(config)) {
    config_.validate();
    for (const auto& mc : config_.models) {
      models_.push_back(build_model(mc.archetype, mc.seed, config_.dims, mc.name));
    }
    for (std::size_t k = 0; k < models_.size(); ++k) {
      attributes_.push_back(sample_attributes(models_[k], config_.models[k].known_attributes,
                                              config_.models[k].unknown_attributes,
                                              config_.attribute_seed,
                                              config_.attribute_scale));
    }
    dataset_ = config_.dataset.input_dir
                   ? load_image_directory(*config_.dataset.input_dir, config_.dims.image_shape)
                   : generate_dataset(config_.dataset.seed, config_.dataset.count,
                                      config_.dims.image_shape);
    embedder_ = SurrogateEmbedder::random(config_.embedder.seed,
                                          shape_numel(config_.dims.image_shape),
                                          config_.embedder.hidden,
                                          config_.embedder.embedding_dim);
    for (std::size_t i : config_.attack_model_indices()) attack_models_.push_back(&models_[i]);
  }

  const ExperimentConfig& config() const { return config_; }
  const std::vector<TwoStageModel>& models() const { return models_; }
  const std::vector<const TwoStageModel*>& attack_models() const { return attack_models_; }
  const std::vector<AttributeSet>& attributes() const { return attributes_; }
  const SyntheticDataset& dataset() const { return dataset_; }
  const SurrogateEmbedder& embedder() const { return embedder_; }

  const TwoStageModel& model(const std::string& name) const {
    for (const auto& m : models_) {
      if (m.name() == name) return m;
    }
    throw ConfigError("no model named '" + name + "'");
  }

  // Every image starts PGD from the same random offset, drawn from
  // attack.seed, so the perturbations of one run are comparable.
  AttackConfig attack_config_for(std::size_t) const { return config_.attack; }

  /// eta for one source image.
  Tensor perturb(Method method, const Tensor& clean, std::size_t image_index,
                 const AttackObserver& observer = {}) const {
    const AttackConfig cfg = attack_config_for(image_index);
    switch (method) {
      case Method::leat: {
        const auto objectives = make_latent_objectives(attack_models_, clean);
        return run_attack(make_ensemble_provider(objectives, config_.ensemble), clean, cfg,
                          observer);
      }
      case Method::image_attack: {
        std::vector<std::vector<Tensor>> known;
        for (std::size_t i : config_.attack_model_indices()) {
          known.push_back(attributes_[i].known);
        }
        const auto objectives = make_image_objectives(attack_models_, clean, known);
        return run_attack(make_ensemble_provider(objectives, config_.ensemble), clean, cfg,
                          observer);
      }
      case Method::random_noise: {
        Rng rng(derive_seed(derive_seed(cfg.seed, hash_name("random-noise")), image_index));
        Tensor noise = Tensor::normal(clean.shape(), rng, cfg.epsilon);
        return project_budget(clean, clean + noise, cfg.epsilon) - clean;
      }
    }
    throw ContractError("unknown method");
  }

  PerturbationSet compute_perturbations() const {
    PerturbationSet out;
    const std::size_t n = dataset_.images.size();
    for (Method method : config_.methods) {
      std::vector<Tensor> etas(n);
      std::vector<double> seconds(n, 0.0);
      parallel_for(n, config_.threads, [&](std::size_t i) {
        const auto start = std::chrono::steady_clock::now();
        etas[i] = perturb(method, dataset_.images[i], i);
        seconds[i] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                         .count();
      });
      double total = 0.0;
      for (double s : seconds) total += s;
      out.methods.push_back(method);
      out.perturbations.push_back(std::move(etas));
      out.seconds.push_back(total);
    }
    return out;
  }

  std::vector<std::size_t> evaluation_models(Scenario s) const {
    if (s == Scenario::black_box) {
      const auto h = config_.holdout_index();
      if (!h) throw ConfigError("black_box scenario requires a holdout model");
      return {*h};
    }
    return config_.attack_model_indices();
  }

  const std::vector<Tensor>& evaluation_attributes(Scenario s, std::size_t model) const {
    const AttributeSet& set = attributes_[model];
    const auto& pool = s == Scenario::white_box ? set.known : set.unknown;
    if (pool.empty()) {
      throw ConfigError("model '" + models_[model].name() + "' has no " +
                        (s == Scenario::white_box ? "known" : "unknown") +
                        " attributes for " + to_string(s));
    }
    return pool;
  }

  // Metrics of one (image, model) pair averaged over `attrs`.
  ReportRow score(const TwoStageModel& model, const Tensor& clean, const Tensor& eta,
                  const std::vector<Tensor>& attrs) const {
    const Tensor latent_clean = model.encode(clean);
    const Tensor latent_pert = model.encode(clean + eta);
    ReportRow row;
    row.model = model.name();
    for (const Tensor& c : attrs) {
      const Tensor y_clean = model.generate(latent_clean, c);
      const Tensor y_pert = model.generate(latent_pert, c);
      row.l2_image += l2_image(y_clean, y_pert);
      row.id_loss += id_distance(y_clean, y_pert, embedder_);
      row.perceptual += perceptual_distance(y_clean, y_pert, embedder_);
    }
    const double inv = 1.0 / static_cast<double>(attrs.size());
    row.l2_image *= inv;
    row.id_loss *= inv;
    row.perceptual *= inv;
    row.success = classify_success(row.l2_image, row.id_loss, row.perceptual,
                                   config_.thresholds);
    return row;
  }

  std::vector<ReportRow> evaluate(Scenario scenario, const PerturbationSet& etas) const {
    const auto eval_models = evaluation_models(scenario);
    const std::size_t n = dataset_.images.size();
    std::vector<ReportRow> rows;
    for (std::size_t mi = 0; mi < etas.methods.size(); ++mi) {
      std::vector<std::vector<ReportRow>> per_image(n);
      parallel_for(n, config_.threads, [&](std::size_t i) {
        for (std::size_t k : eval_models) {
          ReportRow row = score(models_[k], dataset_.images[i], etas.perturbations[mi][i],
                                evaluation_attributes(scenario, k));
          row.image = i;
          row.scenario = scenario;
          row.method = etas.methods[mi];
          per_image[i].push_back(std::move(row));
        }
      });
      for (auto& r : per_image) rows.insert(rows.end(), r.begin(), r.end());
    }
    return rows;
  }

  std::vector<LatentProjection> project_latents(const PerturbationSet& etas) const {
    std::vector<LatentProjection> out;
    const std::size_t n = dataset_.images.size();
    if (n < 1) return out;
    for (const TwoStageModel& model : models_) {
      std::vector<Tensor> clean;
      for (const Tensor& x : dataset_.images) clean.push_back(model.encode(x));
      for (std::size_t mi = 0; mi < etas.methods.size(); ++mi) {
        std::vector<Tensor> all = clean;
        for (std::size_t i = 0; i < n; ++i) {
          all.push_back(model.encode(dataset_.images[i] + etas.perturbations[mi][i]));
        }
        const auto points = pca_project_latents(all);
        LatentProjection p;
        p.model = model.name();
        p.method = etas.methods[mi];
        p.clean.assign(points.begin(), points.begin() + static_cast<std::ptrdiff_t>(n));
        p.disrupted.assign(points.begin() + static_cast<std::ptrdiff_t>(n), points.end());
        p.separation = separation_statistic(p.clean, p.disrupted);
        out.push_back(std::move(p));
      }
    }
    return out;
  }

  EvaluationReport run(const std::vector<Scenario>& scenarios) const {
    EvaluationReport report;
    report.config = config_;
    const PerturbationSet etas = compute_perturbations();
    for (std::size_t mi = 0; mi < etas.methods.size(); ++mi) {
      report.runtime_seconds[to_string(etas.methods[mi])] = etas.seconds[mi];
    }
    for (Scenario s : scenarios) {
      auto rows = evaluate(s, etas);
      report.rows.insert(report.rows.end(), rows.begin(), rows.end());
    }
    report.aggregates = aggregate_rows(report.rows, scenarios, etas.methods);
    report.latents = project_latents(etas);
    return report;
  }

  static std::vector<AggregateRecord> aggregate_rows(const std::vector<ReportRow>& rows,
                                                     const std::vector<Scenario>& scenarios,
                                                     const std::vector<Method>& methods) {
    std::vector<AggregateRecord> out;
    for (Scenario s : scenarios) {
      for (Method m : methods) {
        AggregateRecord rec;
        rec.scenario = s;
        rec.method = m;
        std::map<std::string, std::vector<const ReportRow*>> by_model;
        for (const auto& r : rows) {
          if (r.scenario != s || r.method != m) continue;
          if (!by_model.count(r.model)) rec.models.push_back(r.model);
          by_model[r.model].push_back(&r);
        }
        if (rec.models.empty()) continue;
        std::vector<std::vector<bool>> flags;
        for (const auto& name : rec.models) {
          std::vector<const ReportRow*> model_rows = by_model[name];
          std::sort(model_rows.begin(), model_rows.end(),
                    [](const ReportRow* a, const ReportRow* b) { return a->image < b->image; });
          std::vector<bool> f;
          double l2 = 0.0, id = 0.0, lp = 0.0;
          for (const ReportRow* r : model_rows) {
            f.push_back(r->success);
            l2 += r->l2_image;
            id += r->id_loss;
            lp += r->perceptual;
          }
          const double inv = 1.0 / static_cast<double>(model_rows.size());
          rec.mean_l2_image.push_back(l2 * inv);
          rec.mean_id_loss.push_back(id * inv);
          rec.mean_perceptual.push_back(lp * inv);
          flags.push_back(std::move(f));
        }
        rec.dsr = aggregate_dsr(flags);
        out.push_back(std::move(rec));
      }
    }
    return out;
  }

 private:
  ExperimentConfig config_;
  std::vector<TwoStageModel> models_;
  std::vector<const TwoStageModel*> attack_models_;
  std::vector<AttributeSet> attributes_;
  SyntheticDataset dataset_;
  SurrogateEmbedder embedder_;
};

/// Full pipeline for a single scenario.
inline EvaluationReport run_scenario(const ExperimentConfig& config, Scenario scenario) {
  return Experiment(config).run({scenario});
}

/// Full pipeline for every configured scenario; perturbations are shared.
inline EvaluationReport run_experiment(const ExperimentConfig& config) {
  return Experiment(config).run(config.scenarios);
}

// ---------------------------------------------------------------------------
// Report files

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline const char* kResultsCsvHeader =
    "image,model,scenario,method,l2_image,id_loss,perceptual,success";

inline std::string results_csv(const EvaluationReport& report) {
  std::ostringstream out;
  out << kResultsCsvHeader << "\n";
  for (const auto& r : report.rows) {
    out << r.image << "," << r.model << "," << to_string(r.scenario) << ","
        << to_string(r.method) << "," << format_double(r.l2_image) << ","
        << format_double(r.id_loss) << "," << format_double(r.perceptual) << ","
        << (r.success ? 1 : 0) << "\n";
  }
  return out.str();
}

inline std::string latents_csv(const EvaluationReport& report) {
  std::ostringstream out;
  out << "model,method,image,group,pc1,pc2\n";
  for (const auto& p : report.latents) {
    auto emit = [&](const std::vector<Point2>& pts, const char* group) {
      for (std::size_t i = 0; i < pts.size(); ++i) {
        out << p.model << "," << to_string(p.method) << "," << i << "," << group << ","
            << format_double(pts[i][0]) << "," << format_double(pts[i][1]) << "\n";
      }
    };
    emit(p.clean, "clean");
    emit(p.disrupted, "disrupted");
  }
  return out.str();
}

inline nlohmann::json summary_json(const EvaluationReport& report) {
  nlohmann::json j;
  j["schema_version"] = kReportSchemaVersion;
  j["metadata"] = {
      {"metric_averaging",
       "per (image, model) metrics are averaged over the scenario's attribute list "
       "before thresholding"},
      {"success_rule", "l2_image > l2 OR id_loss > id OR perceptual > lpips"},
      {"surrogate_metrics", "id_loss and perceptual use seeded random embedders"},
      {"projection_order", "epsilon-ball clamp, then [0, 1] pixel clamp"},
      {"black_box_attributes", "holdout model, unknown attribute pool"},
      {"random_start", "one PGD start offset per run, drawn from attack.seed"},
  };
  j["thresholds"] = {{"l2", report.config.thresholds.l2},
                     {"id", report.config.thresholds.id},
                     {"lpips", report.config.thresholds.lpips}};
  j["aggregates"] = nlohmann::json::array();
  for (const auto& a : report.aggregates) {
    nlohmann::json rec;
    rec["scenario"] = to_string(a.scenario);
    rec["method"] = to_string(a.method);
    rec["avg_dsr"] = a.dsr.avg_dsr;
    rec["e_dsr"] = a.dsr.e_dsr;
    rec["models"] = nlohmann::json::object();
    for (std::size_t k = 0; k < a.models.size(); ++k) {
      rec["models"][a.models[k]] = {{"dsr", a.dsr.per_model[k]},
                                    {"mean_l2_image", a.mean_l2_image[k]},
                                    {"mean_id_loss", a.mean_id_loss[k]},
                                    {"mean_perceptual", a.mean_perceptual[k]}};
    }
    j["aggregates"].push_back(std::move(rec));
  }
  j["runtime_seconds"] = report.runtime_seconds;
  j["latent_separation"] = nlohmann::json::array();
  for (const auto& p : report.latents) {
    j["latent_separation"].push_back(
        {{"model", p.model}, {"method", to_string(p.method)}, {"separation", p.separation}});
  }
  return j;
}

namespace detail {

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  out << text;
  if (!out) throw IoError(path.string() + ": write failed");
}

}  // namespace detail

/// Writes results.csv, summary.json, latents_pca.csv and config_echo.json.
inline void emit_reports(const EvaluationReport& report, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError(out_dir.string() + ": " + ec.message());
  detail::write_text(out_dir / "results.csv", results_csv(report));
  detail::write_text(out_dir / "summary.json", summary_json(report).dump(2) + "\n");
  detail::write_text(out_dir / "latents_pca.csv", latents_csv(report));
  detail::write_text(out_dir / "config_echo.json",
                     config_to_json(report.config).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Threshold calibration

struct MetricDistribution {
  double min = 0.0, mean = 0.0, p50 = 0.0, p90 = 0.0, p99 = 0.0, max = 0.0;
  std::size_t samples = 0;
};

inline MetricDistribution describe(std::vector<double> values) {
  MetricDistribution d;
  if (values.empty()) return d;
  std::sort(values.begin(), values.end());
  auto q = [&](double p) {
    const auto idx = static_cast<std::size_t>(
        std::ceil(p * static_cast<double>(values.size())) - 1.0);
    return values[std::min(idx, values.size() - 1)];
  };
  d.samples = values.size();
  d.min = values.front();
  d.max = values.back();
  double sum = 0.0;
  for (double v : values) sum += v;
  d.mean = sum / static_cast<double>(values.size());
  d.p50 = q(0.5);
  d.p90 = q(0.9);
  d.p99 = q(0.99);
  return d;
}

struct CalibrationReport {
  double noise_amplitude = 0.0;
  std::map<std::string, std::map<std::string, MetricDistribution>> per_model;  // model -> metric
};

/// Metric distributions under a null perturbation (uniform noise of the
/// given amplitude), over every model and attribute.
inline CalibrationReport calibrate(const ExperimentConfig& config,
                                   double noise_amplitude = 1e-3) {
  const Experiment exp(config);
  CalibrationReport report;
  report.noise_amplitude = noise_amplitude;
  for (std::size_t k = 0; k < exp.models().size(); ++k) {
    const TwoStageModel& model = exp.models()[k];
    std::vector<Tensor> attrs = exp.attributes()[k].known;
    attrs.insert(attrs.end(), exp.attributes()[k].unknown.begin(),
                 exp.attributes()[k].unknown.end());
    if (attrs.empty()) continue;
    std::vector<double> l2, id, lp;
    for (std::size_t i = 0; i < exp.dataset().images.size(); ++i) {
      const Tensor& x = exp.dataset().images[i];
      Rng rng(derive_seed(config.attack.seed, hash_name("calibrate") + i));
      const Tensor noisy =
          clip_range(x + Tensor::uniform(x.shape(), rng, -noise_amplitude, noise_amplitude),
                     0.0, 1.0);
      const ReportRow row = exp.score(model, x, noisy - x, {attrs});
      l2.push_back(row.l2_image);
      id.push_back(row.id_loss);
      lp.push_back(row.perceptual);
    }
    report.per_model[model.name()] = {
        {"l2_image", describe(l2)}, {"id_loss", describe(id)}, {"perceptual", describe(lp)}};
  }
  return report;
}

inline nlohmann::json calibration_json(const CalibrationReport& report) {
  nlohmann::json j;
  j["schema_version"] = kReportSchemaVersion;
  j["noise_amplitude"] = report.noise_amplitude;
  j["models"] = nlohmann::json::object();
  for (const auto& [model, metrics] : report.per_model) {
    for (const auto& [metric, d] : metrics) {
      j["models"][model][metric] = {{"samples", d.samples}, {"min", d.min}, {"mean", d.mean},
                                    {"p50", d.p50},         {"p90", d.p90}, {"p99", d.p99},
                                    {"max", d.max}};
    }
  }
  return j;
}

}  // namespace leat
