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

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "leat/error.hpp"
#include "leat/random.hpp"
#include "leat/tensor.hpp"

namespace leat {

struct SyntheticDataset {
  std::vector<Tensor> images;
  std::uint64_t seed = 0;
};

// One smooth image: a sum of Gaussian bumps per channel, min-max normalized
// to [0, 1]. Shape is [height, width, channels].
inline Tensor blob_image(Rng& rng, const Shape& shape) {
  if (shape.size() != 3) {
    throw DimensionError("image shape must be [height, width, channels], got " +
                         shape_string(shape));
  }
  const std::size_t height = shape[0];
  const std::size_t width = shape[1];
  const std::size_t channels = shape[2];
  Tensor image(shape);
  for (std::size_t ch = 0; ch < channels; ++ch) {
    const int bumps = 3 + static_cast<int>(rng.next_u64() % 3);
    for (int b = 0; b < bumps; ++b) {
      const double cy = rng.uniform(0.0, static_cast<double>(height));
      const double cx = rng.uniform(0.0, static_cast<double>(width));
      const double sigma =
          rng.uniform(0.12, 0.35) * static_cast<double>(std::max(height, width));
      const double amplitude = rng.uniform(-1.0, 1.0);
      for (std::size_t y = 0; y < height; ++y) {
        for (std::size_t x = 0; x < width; ++x) {
          const double dy = static_cast<double>(y) + 0.5 - cy;
          const double dx = static_cast<double>(x) + 0.5 - cx;
          image[(y * width + x) * channels + ch] +=
              amplitude * std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
        }
      }
    }
  }
  const auto [lo, hi] = std::minmax_element(image.data().begin(), image.data().end());
  const double min = *lo;
  const double range = *hi - *lo;
  for (double& v : image.values()) v = range > 1e-12 ? (v - min) / range : 0.5;
  return image;
}

/// Procedural source images; bitwise reproducible from the seed.
inline SyntheticDataset generate_dataset(std::uint64_t seed, std::size_t count,
                                         const Shape& shape) {
  if (count == 0) throw ConfigError("dataset count must be >= 1");
  SyntheticDataset ds;
  ds.seed = seed;
  ds.images.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(derive_seed(seed, i));
    ds.images.push_back(blob_image(rng, shape));
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Portable pixmap I/O (P2/P3 ascii, P5/P6 binary; maxval up to 65535).

namespace detail {

inline std::string next_pnm_token(std::istream& in) {
  std::string token;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!token.empty()) break;
      continue;
    }
    token.push_back(static_cast<char>(ch));
  }
  return token;
}

inline std::size_t parse_pnm_int(std::istream& in, const std::string& path) {
  const std::string tok = next_pnm_token(in);
  try {
    std::size_t pos = 0;
    const unsigned long v = std::stoul(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw IoError(path + ": malformed pixmap header token '" + tok + "'");
  }
}

}  // namespace detail

/// Reads a PGM/PPM file into a [height, width, channels] tensor in [0, 1].
inline Tensor read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string() + ": cannot open");
  const std::string magic = detail::next_pnm_token(in);
  std::size_t channels = 0;
  bool binary = false;
  if (magic == "P2") {
    channels = 1;
  } else if (magic == "P5") {
    channels = 1;
    binary = true;
  } else if (magic == "P3") {
    channels = 3;
  } else if (magic == "P6") {
    channels = 3;
    binary = true;
  } else {
    throw IoError(path.string() + ": unsupported pixmap magic '" + magic + "'");
  }
  const std::size_t width = detail::parse_pnm_int(in, path.string());
  const std::size_t height = detail::parse_pnm_int(in, path.string());
  const std::size_t maxval = detail::parse_pnm_int(in, path.string());
  if (width == 0 || height == 0 || maxval == 0 || maxval > 65535) {
    throw IoError(path.string() + ": invalid pixmap dimensions");
  }
  Tensor image({height, width, channels});
  const std::size_t n = image.numel();
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t raw = 0;
    if (binary) {
      const int hi = in.get();
      if (hi == EOF) throw IoError(path.string() + ": truncated pixel data");
      raw = static_cast<std::size_t>(hi);
      if (maxval > 255) {
        const int lo = in.get();
        if (lo == EOF) throw IoError(path.string() + ": truncated pixel data");
        raw = (raw << 8) | static_cast<std::size_t>(lo);
      }
    } else {
      raw = detail::parse_pnm_int(in, path.string());
    }
    if (raw > maxval) throw IoError(path.string() + ": pixel exceeds maxval");
    image[i] = static_cast<double>(raw) / static_cast<double>(maxval);
  }
  return image;
}

/// Writes a [height, width, 1|3] tensor in [0, 1] as binary 8-bit PGM/PPM.
inline void write_pnm(const std::filesystem::path& path, const Tensor& image) {
  if (image.rank() != 3 || (image.shape()[2] != 1 && image.shape()[2] != 3)) {
    throw DimensionError("write_pnm: expected [h, w, 1|3], got " +
                         shape_string(image.shape()));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  out << (image.shape()[2] == 1 ? "P5" : "P6") << "\n"
      << image.shape()[1] << " " << image.shape()[0] << "\n255\n";
  for (double v : image.values()) {
    out.put(static_cast<char>(
        static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0))));
  }
  if (!out) throw IoError(path.string() + ": write failed");
}

/// Loads every .pgm/.ppm file of a directory (sorted by name). All images must
/// match `shape`.
inline SyntheticDataset load_image_directory(const std::filesystem::path& dir,
                                             const Shape& shape) {
  if (!std::filesystem::is_directory(dir)) {
    throw IoError(dir.string() + ": not a directory");
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto ext = entry.path().extension().string();
    if (ext == ".pgm" || ext == ".ppm") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw IoError(dir.string() + ": no .pgm/.ppm images found");
  SyntheticDataset ds;
  for (const auto& f : files) {
    Tensor img = read_pnm(f);
    if (img.shape() != shape) {
      throw DimensionError(f.string() + ": image shape " + shape_string(img.shape()) +
                           " does not match configured " + shape_string(shape));
    }
    ds.images.push_back(std::move(img));
  }
  return ds;
}

}  // namespace leat
