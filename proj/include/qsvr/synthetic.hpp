#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "qsvr/annotations.hpp"
#include "qsvr/feature_store.hpp"
#include "qsvr/image.hpp"
#include "qsvr/random.hpp"

namespace qsvr {

struct SyntheticFace {
  RawImage image;
  FaceAnnotation annotation;
};

inline std::string synthetic_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "face_%03zu.ppm", i);
  return buf;
}

/// Truecolor test images: textured background, a brighter face region and a
/// dark disc at each of five landmarks (eyes, nose tip, mouth corners).
inline std::vector<SyntheticFace> synthetic_faces(std::size_t n, std::uint64_t seed, std::size_t width = 128,
                                                  std::size_t height = 128) {
  if (width < 100 || height < 100) throw InvalidInput("synthetic_faces: image must be at least 100x100");
  static constexpr double layout[5][2] = {{0.30, 0.35}, {0.70, 0.35}, {0.50, 0.55}, {0.35, 0.75}, {0.65, 0.75}};
  std::vector<SyntheticFace> out;
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, {i}));
    const auto u = [&](double lo, double hi) { return lo + (hi - lo) * uniform01(rng); };
    const double bw = std::floor(u(80.0, 96.0)), bh = std::floor(u(80.0, 96.0));
    const double bx = std::floor(u(2.0, static_cast<double>(width) - bw - 2.0));
    const double by = std::floor(u(2.0, static_cast<double>(height) - bh - 2.0));

    FaceAnnotation a;
    a.image = synthetic_name(i);
    a.box = {bx, by, bx + bw, by + bh};
    for (const auto& p : layout) {
      a.shape.push_back(bx + bw * (p[0] + u(-0.05, 0.05)));
      a.shape.push_back(by + bh * (p[1] + u(-0.05, 0.05)));
    }

    RawImage img(width, height, 3);
    const double phase = u(0.0, 6.28), freq = u(0.15, 0.45);
    for (std::size_t r = 0; r < height; ++r)
      for (std::size_t c = 0; c < width; ++c) {
        const double x = static_cast<double>(c), y = static_cast<double>(r);
        double v = 90.0 + 40.0 * std::sin(freq * x + phase) * std::cos(0.5 * freq * y);
        if (x >= bx && x < bx + bw && y >= by && y < by + bh) v += 60.0;
        for (std::size_t k = 0; k < 5; ++k) {
          const double dx = x - a.shape[2 * k], dy = y - a.shape[2 * k + 1];
          if (dx * dx + dy * dy <= 9.0) v = 20.0 + 10.0 * static_cast<double>(k);
        }
        v += u(-6.0, 6.0);
        img.at(r, c, 0) = static_cast<std::uint8_t>(std::clamp(v * 1.05, 0.0, 255.0));
        img.at(r, c, 1) = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
        img.at(r, c, 2) = static_cast<std::uint8_t>(std::clamp(v * 0.9, 0.0, 255.0));
      }
    out.push_back({std::move(img), std::move(a)});
  }
  return out;
}

/// Writes face_NNN.ppm files and annotations.csv into `dir`.
inline void write_synthetic_faces(const std::filesystem::path& dir, std::size_t n, std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  std::vector<FaceAnnotation> rows;
  for (auto& f : synthetic_faces(n, seed)) {
    write_pnm((dir / f.annotation.image).string(), f.image);
    rows.push_back(std::move(f.annotation));
  }
  write_annotations((dir / "annotations.csv").string(), rows);
}

/// Feature store whose scaled targets are affine in one feature column each:
/// s_ell = 45 + 150 (f_{driver(ell)} - 0.1), driver columns uniform in [0, 0.2].
/// Other columns sit near 1/59 with 1e-4 jitter. Face boxes are 90x90 at the
/// origin, so the raw and normalised frames coincide.
inline FeatureStore synthetic_feature_store(std::size_t n, std::uint64_t seed, std::size_t landmarks = 5,
                                            std::size_t features = kFeatureCount) {
  if (features < 2 * landmarks) throw InvalidInput("synthetic_feature_store: too few feature columns");
  FeatureStore store{landmarks, features, {}};
  const std::size_t stride = features / (2 * landmarks);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, {i, 7}));
    FeatureRow row;
    row.image = "synthetic_" + std::to_string(i);
    row.box = {0.0, 0.0, static_cast<double>(kNormSide), static_cast<double>(kNormSide)};
    row.features.resize(features);
    for (double& f : row.features) f = 1.0 / 59.0 + 1e-4 * (uniform01(rng) - 0.5);
    for (std::size_t ell = 0; ell < 2 * landmarks; ++ell) {
      const double f = 0.2 * uniform01(rng);
      row.features[ell * stride] = f;
      row.targets.push_back(45.0 + 150.0 * (f - 0.1));
    }
    row.shape = rescale_shape(row.targets, row.box);
    store.rows.push_back(std::move(row));
  }
  return store;
}

}  // namespace qsvr
