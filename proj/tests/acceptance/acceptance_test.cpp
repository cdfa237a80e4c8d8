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

// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "leat/leat.hpp"

using namespace leat;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

const std::vector<Archetype> kCore{Archetype::vec_conditional, Archetype::refiner,
                                   Archetype::swapper, Archetype::reenactor};

Tensor random_image(std::uint64_t seed) {
  Rng rng(seed);
  return Tensor::uniform({8, 8, 1}, rng, 0.0, 1.0);
}

double relative_error(const Tensor& a, const Tensor& b) {
  const double scale = std::max(l2_norm(a), l2_norm(b));
  return scale == 0.0 ? 0.0 : l2_norm(a - b) / scale;
}

std::size_t pick(Rng& rng, std::size_t n) { return rng.next_u64() % n; }

double cosine(const Tensor& a, const Tensor& b) {
  double dot = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) dot += a[i] * b[i];
  return dot / (l2_norm(a) * l2_norm(b));
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

// 1. Autodiff against central differences for both objectives.
Outcome gradient_oracle() {
  const auto start = Clock::now();
  double worst = 0.0;
  for (Archetype a : kCore) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto m = build_model(a, seed, ModelDims{});
      const auto attrs = sample_attributes(m, 2, 0, seed + 11);
      const Tensor x = random_image(seed + 100);
      Rng rng(seed + 200);
      const Tensor probe =
          project_budget(x, x + Tensor::uniform(x.shape(), rng, -0.05, 0.05), 0.05);
      for (const auto& obj : {ModelObjective::latent(m, x),
                              ModelObjective::image_attack(m, x, attrs.known)}) {
        const Tensor analytic = obj.gradient(probe, 0).gradient;
        const Tensor numeric = finite_difference_gradient(
            [&](const Tensor& p) { return obj.value(p); }, probe, 1e-5);
        worst = std::max(worst, relative_error(analytic, numeric));
      }
    }
  }
  const double elapsed = seconds_since(start);
  std::ostringstream d;
  d << "max relative error " << worst << ", " << elapsed << " s";
  return {worst < 1e-5 && elapsed < 60.0, d.str()};
}

// 2. Budget and pixel range after every iteration.
Outcome budget_invariant() {
  std::vector<TwoStageModel> models;
  for (Archetype a : kCore) models.push_back(build_model(a, 3, ModelDims{}));
  std::vector<const TwoStageModel*> ptrs;
  std::vector<std::vector<Tensor>> known;
  for (const auto& m : models) {
    ptrs.push_back(&m);
    known.push_back(sample_attributes(m, 2, 0, 5).known);
  }
  const AttackConfig defaults;
  bool ok = defaults.epsilon == 0.05 && defaults.step == 0.01 && defaults.iterations == 30;
  double worst = 0.0;
  std::size_t states = 0;
  for (std::uint64_t run = 0; run < 100; ++run) {
    const Tensor x = random_image(run + 300);
    const auto objs = run % 2 == 0 ? make_latent_objectives(ptrs, x)
                                    : make_image_objectives(ptrs, x, known);
    AttackConfig cfg;
    cfg.seed = run;
    run_attack(make_ensemble_provider(objs, EnsembleStrategy{}), x, cfg,
               [&](const AttackState& s) {
                 ++states;
                 const double linf = linf_norm(s.perturbation);
                 worst = std::max(worst, linf);
                 if (linf > 0.05 + 1e-12) ok = false;
                 for (double v : s.current.values()) {
                   if (v < 0.0 || v > 1.0) ok = false;
                 }
               });
  }
  std::ostringstream d;
  d << states << " states, max linf " << worst;
  return {ok, d.str()};
}

std::vector<PerModelGradient> random_gradients(Rng& rng, std::size_t k) {
  std::vector<PerModelGradient> out;
  for (std::size_t i = 0; i < k; ++i) {
    const double loss = rng.uniform(0.0, 1.0);
    const double stddev = rng.uniform(0.1, 5.0);
    out.push_back({i, loss, Tensor::normal({8, 8, 1}, rng, stddev)});
  }
  return out;
}

// 3. Gradient ensemble equals the loss ensemble with weights 1/K.
Outcome ensemble_equivalence() {
  Rng rng(42);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = 2 + static_cast<std::size_t>(trial % 3);
    const auto g = random_gradients(rng, k);
    const std::vector<double> omega(k, 1.0 / static_cast<double>(k));
    worst = std::max(worst, max_abs_diff(aggregate_gradient_ensemble(g),
                                         aggregate_loss_ensemble(g, omega)));
  }
  std::ostringstream d;
  d << "max abs diff " << worst;
  return {worst < 1e-10, d.str()};
}

// 4. Normalized ensemble ignores per-model loss scale; the plain loss
// ensemble follows the up-scaled model.
Outcome scale_invariance() {
  std::vector<TwoStageModel> models;
  for (Archetype a : kCore) models.push_back(build_model(a, 8, ModelDims{}));
  std::vector<const TwoStageModel*> ptrs;
  for (const auto& m : models) ptrs.push_back(&m);
  double worst_shift = 0.0;
  double worst_cosine = 1.0;
  for (std::uint64_t i = 0; i < 25; ++i) {
    const Tensor x = random_image(i + 400);
    Rng rng(i);
    const Tensor probe =
        project_budget(x, x + Tensor::uniform(x.shape(), rng, -0.05, 0.05), 0.05);
    const auto objs = make_latent_objectives(ptrs, x);
    std::vector<PerModelGradient> base;
    for (std::size_t k = 0; k < objs.size(); ++k) base.push_back(objs[k].gradient(probe, k));
    const Tensor reference = aggregate_normalized(base);
    for (std::size_t j = 0; j < base.size(); ++j) {
      for (double s : {1e-3, 1e3}) {
        auto scaled = base;
        scaled[j].loss_value *= s;
        scaled[j].gradient = s * scaled[j].gradient;
        worst_shift =
            std::max(worst_shift, max_abs_diff(aggregate_normalized(scaled), reference));
        if (s == 1e3) {
          worst_cosine = std::min(
              worst_cosine, cosine(aggregate_loss_ensemble(scaled), scaled[j].gradient));
        }
      }
    }
  }
  std::ostringstream d;
  d << "max normalized shift " << worst_shift << ", min loss-ensemble cosine " << worst_cosine;
  return {worst_shift < 1e-9 && worst_cosine > 0.99, d.str()};
}

// 5. Hardest-model selection, with ties.
Outcome hmm_exactness() {
  Rng rng(5);
  bool ok = true;
  std::size_t ties = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = 2 + static_cast<std::size_t>(trial % 4);
    auto g = random_gradients(rng, k);
    // Coarse losses force frequent ties; shuffled order separates id from position.
    for (auto& m : g) m.loss_value = 0.1 * static_cast<double>(pick(rng, 3));
    for (std::size_t i = k - 1; i > 0; --i) {
      std::swap(g[i], g[pick(rng, i + 1)]);
    }
    const PerModelGradient* expected = nullptr;
    std::size_t at_min = 0;
    for (const auto& m : g) {
      if (!expected || m.loss_value < expected->loss_value ||
          (m.loss_value == expected->loss_value && m.model_id < expected->model_id)) {
        expected = &m;
      }
    }
    for (const auto& m : g) at_min += m.loss_value == expected->loss_value;
    ties += at_min > 1;
    if (!(aggregate_hmm(g) == expected->gradient)) ok = false;
  }
  std::ostringstream d;
  d << "100 instances, " << ties << " with tied minimum";
  return {ok && ties > 0, d.str()};
}

ExperimentConfig base_config(std::size_t images) {
  ExperimentConfig cfg = default_config();
  cfg.dataset.count = images;
  cfg.threads = 1;
  return cfg;
}

// 6. LEAT perturbations do not depend on attributes.
Outcome attribute_agnosticism() {
  std::vector<ExperimentConfig> configs;
  for (std::uint64_t k = 0; k < 3; ++k) {
    ExperimentConfig cfg = base_config(10);
    cfg.methods = {Method::leat};
    cfg.attribute_seed = 1000 + k;
    for (auto& mc : cfg.models) {
      mc.known_attributes = 2 + k;
      mc.unknown_attributes = 1 + k;
    }
    configs.push_back(cfg);
  }
  std::vector<Experiment> exps;
  for (const auto& cfg : configs) exps.emplace_back(cfg);
  bool disjoint = true;
  for (std::size_t a = 0; a < exps.size(); ++a) {
    for (std::size_t b = a + 1; b < exps.size(); ++b) {
      for (std::size_t m = 0; m < exps[a].models().size(); ++m) {
        const auto& pa = exps[a].attributes()[m];
        const auto& pb = exps[b].attributes()[m];
        for (const auto* la : {&pa.known, &pa.unknown}) {
          for (const auto* lb : {&pb.known, &pb.unknown}) {
            for (const Tensor& x : *la) {
              for (const Tensor& y : *lb) disjoint = disjoint && !(x == y);
            }
          }
        }
      }
    }
  }
  bool identical = true;
  const auto reference = exps[0].compute_perturbations().of(Method::leat);
  for (std::size_t e = 1; e < exps.size(); ++e) {
    const auto etas = exps[e].compute_perturbations().of(Method::leat);
    for (std::size_t i = 0; i < etas.size(); ++i) identical = identical && etas[i] == reference[i];
  }
  std::ostringstream d;
  d << "3 configurations, pools disjoint: " << (disjoint ? "yes" : "no")
    << ", eta bit-identical: " << (identical ? "yes" : "no");
  return {disjoint && identical, d.str()};
}

// Shared workload for criteria 7 to 9.
struct SeedResult {
  double drop_leat = 0.0;
  double drop_ia = 0.0;
  double separation_leat = 0.0;
  double separation_ia = 0.0;
  double seconds_leat = 0.0;
  double seconds_ia = 0.0;
};

double mean_l2(const std::vector<ReportRow>& rows) {
  double sum = 0.0;
  for (const auto& r : rows) sum += r.l2_image;
  return sum / static_cast<double>(rows.size());
}

SeedResult run_seed(std::uint64_t seed) {
  ExperimentConfig cfg = base_config(50);
  cfg.dataset.seed = seed;
  cfg.attack.seed = derive_seed(seed, 1);
  cfg.methods = {Method::leat, Method::image_attack};
  const Experiment exp(cfg);
  const PerturbationSet etas = exp.compute_perturbations();
  SeedResult r;
  r.seconds_leat = etas.seconds[0];
  r.seconds_ia = etas.seconds[1];
  for (std::size_t m = 0; m < 2; ++m) {
    PerturbationSet one;
    one.methods = {etas.methods[m]};
    one.perturbations = {etas.perturbations[m]};
    one.seconds = {etas.seconds[m]};
    const double white = mean_l2(exp.evaluate(Scenario::white_box, one));
    const double gray = mean_l2(exp.evaluate(Scenario::gray_box, one));
    (m == 0 ? r.drop_leat : r.drop_ia) = (white - gray) / white;
  }
  std::size_t vector_models = 0;
  for (const auto& p : exp.project_latents(etas)) {
    if (exp.model(p.model).latent_spec().kind != LatentKind::vector) continue;
    (p.method == Method::leat ? r.separation_leat : r.separation_ia) += p.separation;
    vector_models += p.method == Method::leat;
  }
  r.separation_leat /= static_cast<double>(vector_models);
  r.separation_ia /= static_cast<double>(vector_models);
  return r;
}

// 10. Threshold-OR rule on the boundary.
Outcome protocol_fidelity() {
  const MetricThresholds th;
  const double l2_hi = std::nextafter(0.05, 1.0);
  const double id_hi = std::nextafter(0.6, 2.0);
  const double lp_hi = std::nextafter(0.4, 1.0);
  struct Case {
    double l2, id, lp;
    bool expected;
  };
  const std::vector<Case> table{
      {0.05, 0.6, 0.4, false},    {l2_hi, 0.6, 0.4, true},    {0.05, id_hi, 0.4, true},
      {0.05, 0.6, lp_hi, true},   {l2_hi, id_hi, 0.4, true},  {l2_hi, 0.6, lp_hi, true},
      {0.05, id_hi, lp_hi, true}, {l2_hi, id_hi, lp_hi, true},
  };
  std::size_t matched = 0;
  for (const auto& c : table) matched += classify_success(c.l2, c.id, c.lp, th) == c.expected;
  const bool defaults = th.l2 == 0.05 && th.id == 0.6 && th.lpips == 0.4;
  std::ostringstream d;
  d << matched << "/" << table.size() << " cases";
  return {defaults && matched == table.size(), d.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// 11. Two CLI runs produce byte-identical results.csv.
Outcome end_to_end_determinism() {
  const fs::path dir = fs::temp_directory_path() / "leat_acceptance_cli";
  fs::remove_all(dir);
  fs::create_directories(dir);
  ExperimentConfig cfg = default_config();
  cfg.dataset.count = 8;
  cfg.attack.iterations = 10;
  cfg.threads = 2;
  {
    std::ofstream out(dir / "config.json");
    out << config_to_json(cfg).dump(2);
  }
  for (const char* run : {"a", "b"}) {
    const std::string cmd = std::string(LEAT_CLI_PATH) + " run --config " +
                            (dir / "config.json").string() + " --out " + (dir / run).string() +
                            " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
      return {false, std::string("run ") + run + " failed"};
    }
  }
  const std::string a = slurp(dir / "a" / "results.csv");
  const std::string b = slurp(dir / "b" / "results.csv");
  std::ostringstream d;
  d << a.size() << " bytes, identical: " << (a == b && !a.empty() ? "yes" : "no");
  return {a == b && !a.empty(), d.str()};
}

}  // namespace

int main() {
  int failures = 0;
  const auto report = [&](int id, const std::string& name, const Outcome& o) {
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << id << " " << name << ": " << o.detail
              << std::endl;
    failures += !o.pass;
  };
  const auto guarded = [&](int id, const std::string& name, const std::function<Outcome()>& fn) {
    try {
      report(id, name, fn());
    } catch (const std::exception& e) {
      report(id, name, {false, std::string("exception: ") + e.what()});
    }
  };

  guarded(1, "gradient oracle", gradient_oracle);
  guarded(2, "budget invariant", budget_invariant);
  guarded(3, "ensemble equivalence", ensemble_equivalence);
  guarded(4, "scale invariance", scale_invariance);
  guarded(5, "hardest-model exactness", hmm_exactness);
  guarded(6, "attribute agnosticism", attribute_agnosticism);

  constexpr std::uint64_t kSeeds = 20;
  std::vector<SeedResult> seeds;
  std::string workload_error;
  const auto start = Clock::now();
  try {
    for (std::uint64_t s = 0; s < kSeeds; ++s) seeds.push_back(run_seed(s));
  } catch (const std::exception& e) {
    workload_error = std::string("exception: ") + e.what();
  }
  const double elapsed = seconds_since(start);
  if (!workload_error.empty()) {
    for (int id : {7, 8, 9}) report(id, "seeded workload", {false, workload_error});
  } else {
    std::size_t c7 = 0, c9 = 0;
    double leat_seconds = 0.0, ia_seconds = 0.0;
    for (const auto& r : seeds) {
      c7 += r.drop_leat <= r.drop_ia;
      c9 += r.separation_leat > r.separation_ia;
      leat_seconds += r.seconds_leat;
      ia_seconds += r.seconds_ia;
    }
    std::ostringstream d7, d8, d9;
    d7 << c7 << "/" << kSeeds << " seeds with smaller white-to-gray drop, " << elapsed << " s";
    report(7, "gray-box directionality",
           {c7 * 5 >= kSeeds * 4 && elapsed < 600.0, d7.str()});
    d8 << "leat " << leat_seconds << " s, image attack " << ia_seconds << " s, ratio "
       << leat_seconds / ia_seconds;
    report(8, "runtime directionality", {leat_seconds < 0.5 * ia_seconds, d8.str()});
    d9 << c9 << "/" << kSeeds << " seeds with larger separation";
    report(9, "latent separation", {c9 * 5 >= kSeeds * 4, d9.str()});
  }

  guarded(10, "protocol fidelity", protocol_fidelity);
  guarded(11, "end-to-end determinism", end_to_end_determinism);
  return failures == 0 ? 0 : 1;
}
