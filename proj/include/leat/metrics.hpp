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

// Disruption metrics and defense-success statistics.
//
// Identity and perceptual distances come from frozen, seeded random networks
// standing in for pretrained face-identity and LPIPS models. They keep the
// shape of the protocol (three distances, threshold-OR success rule), not the
// absolute numbers of the pretrained metrics.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "leat/autodiff.hpp"
#include "leat/error.hpp"
#include "leat/random.hpp"
#include "leat/tensor.hpp"

namespace leat {

struct MetricThresholds {
  double l2 = 0.05;
  double id = 0.6;
  double lpips = 0.4;

  void validate() const {
    if (!(l2 > 0.0 && id > 0.0 && lpips > 0.0)) {
      throw ConfigError("metric thresholds must be > 0");
    }
  }
};

/// Mean squared pixel difference.
inline double l2_image(const Tensor& clean_output, const Tensor& perturbed_output) {
  return mse_loss(clean_output, perturbed_output);
}

/// Frozen feed-forward network; the last layer is linear and is the
/// embedding. Every layer output is a tap for the perceptual distance.
class SurrogateEmbedder {
 public:
  struct Layer {
    Tensor weights;  // [out, in]
    Tensor bias;     // [out]
    bool tanh = true;
  };

  SurrogateEmbedder() = default;
  SurrogateEmbedder(std::uint64_t seed, std::vector<Layer> layers)
      : seed_(seed), layers_(std::move(layers)) {
    if (layers_.empty()) throw ConfigError("surrogate embedder needs at least one layer");
    for (std::size_t i = 0; i + 1 < layers_.size(); ++i) {
      if (layers_[i].weights.shape()[0] != layers_[i + 1].weights.shape()[1]) {
        throw DimensionError("surrogate embedder: layer widths do not chain");
      }
    }
  }

  /// Random network input -> widths... -> embedding_dim. Hidden layers use
  /// tanh on (x - 0.5) centred input.
  static SurrogateEmbedder random(std::uint64_t seed, std::size_t input_size,
                                  std::vector<std::size_t> hidden,
                                  std::size_t embedding_dim) {
    Rng rng(derive_seed(seed, hash_name("surrogate")));
    std::vector<Layer> layers;
    std::size_t in = input_size;
    hidden.push_back(embedding_dim);
    for (std::size_t i = 0; i < hidden.size(); ++i) {
      const double bound = std::sqrt(3.0 / static_cast<double>(in));
      Layer layer{Tensor::uniform({hidden[i], in}, rng, -bound, bound), Tensor({hidden[i]}),
                  i + 1 < hidden.size()};
      // The first layer absorbs the input centring: W(x - 0.5) = Wx - 0.5 W 1.
      if (i == 0) {
        for (std::size_t o = 0; o < hidden[i]; ++o) {
          double row = 0.0;
          for (std::size_t k = 0; k < in; ++k) row += layer.weights[o * in + k];
          layer.bias[o] = -0.5 * row;
        }
      }
      layers.push_back(std::move(layer));
      in = hidden[i];
    }
    return SurrogateEmbedder(seed, std::move(layers));
  }

  std::uint64_t seed() const { return seed_; }
  std::size_t input_size() const { return layers_.front().weights.shape()[1]; }

  std::vector<Tensor> features(const Tensor& image) const {
    if (image.numel() != input_size()) {
      throw DimensionError("surrogate embedder expects " + std::to_string(input_size()) +
                           " inputs, got shape " + shape_string(image.shape()));
    }
    std::vector<Tensor> taps;
    Tensor x = image.reshaped({image.numel()});
    for (const Layer& layer : layers_) {
      x = detail::affine_forward(x, layer.weights, &layer.bias);
      if (layer.tanh) x = map(x, [](double v) { return std::tanh(v); });
      taps.push_back(x);
    }
    return taps;
  }

  Tensor embed(const Tensor& image) const { return features(image).back(); }

 private:
  std::uint64_t seed_ = 0;
  std::vector<Layer> layers_;
};

/// 1 - cos(embed(a), embed(b)), in [0, 2].
inline double id_distance(const Tensor& clean_output, const Tensor& perturbed_output,
                          const SurrogateEmbedder& embedder) {
  require_same_shape(clean_output, perturbed_output, "id_distance");
  const Tensor a = embedder.embed(clean_output);
  const Tensor b = embedder.embed(perturbed_output);
  const double na = l2_norm(a);
  const double nb = l2_norm(b);
  if (na == 0.0 || nb == 0.0) {
    throw DegenerateEmbeddingError("id_distance: zero-norm embedding");
  }
  const double cosine = std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
  return 1.0 - cosine;
}

/// LPIPS-style: each tap is scaled to unit length, then the squared distance
/// between the two unit vectors is averaged over taps. In [0, 4].
inline double perceptual_distance(const Tensor& clean_output,
                                  const Tensor& perturbed_output,
                                  const SurrogateEmbedder& embedder) {
  require_same_shape(clean_output, perturbed_output, "perceptual_distance");
  const auto fa = embedder.features(clean_output);
  const auto fb = embedder.features(perturbed_output);
  constexpr double kEps = 1e-10;
  double total = 0.0;
  for (std::size_t l = 0; l < fa.size(); ++l) {
    const double na = l2_norm(fa[l]) + kEps;
    const double nb = l2_norm(fb[l]) + kEps;
    double sum = 0.0;
    for (std::size_t i = 0; i < fa[l].numel(); ++i) {
      const double d = fa[l][i] / na - fb[l][i] / nb;
      sum += d * d;
    }
    total += sum;
  }
  return total / static_cast<double>(fa.size());
}

/// Success iff any metric strictly exceeds its threshold.
inline bool classify_success(double l2, double id, double lpips,
                             const MetricThresholds& th) {
  return l2 > th.l2 || id > th.id || lpips > th.lpips;
}

struct DsrSummary {
  std::vector<double> per_model;
  double avg_dsr = 0.0;
  double e_dsr = 0.0;
};

/// flags[model][image]. Every model must cover the same images.
inline DsrSummary aggregate_dsr(const std::vector<std::vector<bool>>& flags) {
  if (flags.empty()) throw ConfigError("aggregate_dsr: no models");
  const std::size_t images = flags.front().size();
  if (images == 0) throw ConfigError("aggregate_dsr: no images");
  for (const auto& m : flags) {
    if (m.size() != images) {
      throw ConfigError("aggregate_dsr: models were evaluated on different image sets");
    }
  }
  DsrSummary out;
  for (const auto& m : flags) {
    const auto hits = std::count(m.begin(), m.end(), true);
    out.per_model.push_back(static_cast<double>(hits) / static_cast<double>(images));
  }
  double sum = 0.0;
  for (double d : out.per_model) sum += d;
  out.avg_dsr = sum / static_cast<double>(out.per_model.size());
  std::size_t all = 0;
  for (std::size_t i = 0; i < images; ++i) {
    bool every = true;
    for (const auto& m : flags) every = every && m[i];
    all += every ? 1 : 0;
  }
  out.e_dsr = static_cast<double>(all) / static_cast<double>(images);
  return out;
}

// ---------------------------------------------------------------------------
// Latent PCA

using Point2 = std::array<double, 2>;

/// Mean-centred projection onto the top two principal components. Each
/// component is oriented so that its largest-magnitude coordinate is positive.
inline std::vector<Point2> pca_project_latents(const std::vector<Tensor>& latents) {
  if (latents.size() < 2) throw ConfigError("pca: need at least two latents");
  const std::size_t dim = latents.front().numel();
  for (const Tensor& l : latents) {
    if (l.shape() != latents.front().shape()) {
      throw DimensionError("pca: latents have different shapes");
    }
  }
  const auto n = static_cast<Eigen::Index>(latents.size());
  Eigen::MatrixXd data(n, static_cast<Eigen::Index>(dim));
  for (Eigen::Index r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < dim; ++c) {
      data(r, static_cast<Eigen::Index>(c)) = latents[static_cast<std::size_t>(r)][c];
    }
  }
  const Eigen::RowVectorXd centroid = data.colwise().mean();
  data.rowwise() -= centroid;
  std::vector<Point2> points(latents.size(), Point2{0.0, 0.0});
  if (data.cwiseAbs().maxCoeff() == 0.0) return points;

  const Eigen::MatrixXd cov = data.transpose() * data / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  // Eigenvalues come back ascending.
  const Eigen::Index d = cov.rows();
  for (int c = 0; c < 2 && c < d; ++c) {
    Eigen::VectorXd axis = solver.eigenvectors().col(d - 1 - c);
    if (solver.eigenvalues()(d - 1 - c) <= 0.0) continue;
    Eigen::Index arg = 0;
    axis.cwiseAbs().maxCoeff(&arg);
    if (axis(arg) < 0.0) axis = -axis;
    const Eigen::VectorXd proj = data * axis;
    for (Eigen::Index r = 0; r < n; ++r) points[static_cast<std::size_t>(r)][c] = proj(r);
  }
  return points;
}

/// Centroid distance between two point groups divided by the mean of the
/// groups' average distance to their own centroid.
inline double separation_statistic(const std::vector<Point2>& first,
                                   const std::vector<Point2>& second) {
  if (first.empty() || second.empty()) throw ConfigError("separation: empty group");
  auto centroid = [](const std::vector<Point2>& pts) {
    Point2 c{0.0, 0.0};
    for (const auto& p : pts) {
      c[0] += p[0];
      c[1] += p[1];
    }
    c[0] /= static_cast<double>(pts.size());
    c[1] /= static_cast<double>(pts.size());
    return c;
  };
  auto spread = [](const std::vector<Point2>& pts, const Point2& c) {
    double s = 0.0;
    for (const auto& p : pts) s += std::hypot(p[0] - c[0], p[1] - c[1]);
    return s / static_cast<double>(pts.size());
  };
  const Point2 ca = centroid(first);
  const Point2 cb = centroid(second);
  const double between = std::hypot(ca[0] - cb[0], ca[1] - cb[1]);
  const double within = 0.5 * (spread(first, ca) + spread(second, cb));
  if (within == 0.0) {
    return between == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  }
  return between / within;
}

}  // namespace leat
