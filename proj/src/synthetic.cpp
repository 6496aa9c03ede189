#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "metaland/data.hpp"
#include "metaland/errors.hpp"

namespace metaland {

namespace {

void check(const SyntheticConfig& cfg) {
  if (cfg.num_classes < 2) throw ConfigError("synthetic: need at least 2 classes");
  if (cfg.num_classes > 255) throw ConfigError("synthetic: at most 255 classes");
  if (cfg.num_regions < 1) throw ConfigError("synthetic: need at least one region");
  if (cfg.tiles_per_region < 4 * cfg.num_classes) {
    throw ConfigError("synthetic: tiles_per_region must be at least 4 * classes (" +
                      std::to_string(4 * cfg.num_classes) + ")");
  }
  if (cfg.image_size < 1 || cfg.channels < 1) throw ConfigError("synthetic: image size and channels must be positive");
  if (cfg.shift < 0 || cfg.tile_jitter < 0 || cfg.pixel_noise < 0 || cfg.texture < 0) {
    throw ConfigError("synthetic: noise and shift magnitudes must be non-negative");
  }
}

std::string region_name(int r) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "r%03d", r);
  return buf;
}

Eigen::VectorXd gaussian(int dim, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd v(dim);
  for (int i = 0; i < dim; ++i) v[i] = normal(rng);
  return v;
}

}  // namespace

std::vector<std::vector<Eigen::VectorXd>> synthetic_class_means(const SyntheticConfig& cfg) {
  check(cfg);
  Rng proto_rng(derive_seed(cfg.seed, "synthetic/prototypes"));
  std::vector<Eigen::VectorXd> prototypes;
  for (int c = 0; c < cfg.num_classes; ++c) {
    Eigen::VectorXd v = gaussian(cfg.channels, proto_rng);
    while (v.norm() == 0.0) v = gaussian(cfg.channels, proto_rng);
    prototypes.push_back(v.normalized());
  }
  std::vector<std::vector<Eigen::VectorXd>> means(static_cast<std::size_t>(cfg.num_regions));
  for (int r = 0; r < cfg.num_regions; ++r) {
    Rng shift_rng(derive_seed(cfg.seed, "synthetic/shift", static_cast<std::uint64_t>(r)));
    for (int c = 0; c < cfg.num_classes; ++c) {
      Eigen::VectorXd delta = gaussian(cfg.channels, shift_rng) * (cfg.shift / std::sqrt(double(cfg.channels)));
      means[static_cast<std::size_t>(r)].push_back(prototypes[static_cast<std::size_t>(c)] + delta);
    }
  }
  return means;
}

RegionDataset generate_synthetic_regions(const SyntheticConfig& cfg) {
  const auto means = synthetic_class_means(cfg);
  const int size = cfg.image_size;
  const int plane = size * size;
  RegionDataset ds;
  ds.num_classes = cfg.num_classes;

  for (int r = 0; r < cfg.num_regions; ++r) {
    const auto& region_means = means[static_cast<std::size_t>(r)];
    Rng rng(derive_seed(cfg.seed, "synthetic/tiles", static_cast<std::uint64_t>(r)));

    // Region class frequencies: a guaranteed floor plus a Dirichlet(1) share of the rest.
    std::gamma_distribution<double> gamma(1.0, 1.0);
    std::vector<double> freq(static_cast<std::size_t>(cfg.num_classes));
    for (auto& f : freq) f = gamma(rng);
    const int floor_count = cfg.tiles_per_region / (2 * cfg.num_classes);
    std::vector<int> classes;
    for (int c = 0; c < cfg.num_classes; ++c) classes.insert(classes.end(), floor_count, c);
    std::discrete_distribution<int> draw_class(freq.begin(), freq.end());
    while (static_cast<int>(classes.size()) < cfg.tiles_per_region) classes.push_back(draw_class(rng));
    std::shuffle(classes.begin(), classes.end(), rng);

    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int cls : classes) {
      LabeledTile tile;
      tile.channels = cfg.channels;
      tile.height = size;
      tile.width = size;
      tile.region_id = region_name(r);
      tile.season = "s0";

      // Per-pixel class map: one class for classification, 2-4 weighted Voronoi blobs otherwise.
      std::vector<int> pixel_class(static_cast<std::size_t>(plane), cls);
      if (cfg.segmentation) {
        const int blobs = 2 + static_cast<int>(unit(rng) * 3.0) % 3;
        std::vector<int> blob_class{cls};
        for (int b = 1; b < blobs; ++b) blob_class.push_back(draw_class(rng));
        std::vector<std::array<double, 3>> centers;
        for (int b = 0; b < blobs; ++b) centers.push_back({unit(rng) * size, unit(rng) * size, b == 0 ? 0.5 : 1.0});
        for (int i = 0; i < size; ++i) {
          for (int j = 0; j < size; ++j) {
            int best = 0;
            double best_d = 1e300;
            for (int b = 0; b < blobs; ++b) {
              const double di = i + 0.5 - centers[b][0], dj = j + 0.5 - centers[b][1];
              const double d = (di * di + dj * dj) * centers[b][2];
              if (d < best_d) {
                best_d = d;
                best = b;
              }
            }
            pixel_class[static_cast<std::size_t>(i * size + j)] = blob_class[static_cast<std::size_t>(best)];
          }
        }
        tile.pixel_labels.emplace(pixel_class.begin(), pixel_class.end());
        tile.tile_label = majority_label(*tile.pixel_labels);
      } else {
        tile.tile_label = cls;
      }

      std::vector<Eigen::VectorXd> tile_means;
      for (int c = 0; c < cfg.num_classes; ++c) {
        Eigen::VectorXd m = region_means[static_cast<std::size_t>(c)];
        for (int ch = 0; ch < cfg.channels; ++ch) m[ch] += cfg.tile_jitter * normal(rng);
        tile_means.push_back(std::move(m));
      }
      const double fi = 1.0 + std::floor(unit(rng) * 2.0), fj = 1.0 + std::floor(unit(rng) * 2.0);
      const double phase = unit(rng) * 2.0 * std::numbers::pi;
      tile.pixels.resize(static_cast<std::size_t>(cfg.channels * plane));
      for (int ch = 0; ch < cfg.channels; ++ch) {
        for (int i = 0; i < size; ++i) {
          for (int j = 0; j < size; ++j) {
            const int p = i * size + j;
            const double tex = cfg.texture * std::sin(2.0 * std::numbers::pi * (fi * i + fj * j) / size + phase);
            const double value = tile_means[static_cast<std::size_t>(pixel_class[static_cast<std::size_t>(p)])][ch] +
                                 tex + cfg.pixel_noise * normal(rng);
            tile.pixels[static_cast<std::size_t>(ch * plane + p)] = static_cast<float>(value);
          }
        }
      }
      ds.tiles.push_back(std::move(tile));
    }
  }
  assign_partitions(ds, cfg.support_fraction, derive_seed(cfg.seed, "synthetic/partition"));
  return ds;
}

}  // namespace metaland
