#include <algorithm>
#include <cmath>
#include <numeric>

#include "metaland/data.hpp"
#include "metaland/errors.hpp"
#include "metaland/kmeans.hpp"

namespace metaland {

Eigen::VectorXd extract_features(const LabeledTile& tile) {
  const auto c = tile.channels;
  const auto plane = tile.height * tile.width;
  Eigen::VectorXd features = Eigen::VectorXd::Zero(6 * c);
  for (std::int64_t ch = 0; ch < c; ++ch) {
    const float* px = tile.pixels.data() + ch * plane;
    double mean = 0.0;
    for (std::int64_t p = 0; p < plane; ++p) mean += px[p];
    mean /= static_cast<double>(plane);
    double var = 0.0;
    std::array<double, 4> hist{};
    for (std::int64_t p = 0; p < plane; ++p) {
      const double v = px[p];
      var += (v - mean) * (v - mean);
      const int bin = v < -1.0 ? 0 : v < 0.0 ? 1 : v < 1.0 ? 2 : 3;
      hist[static_cast<std::size_t>(bin)] += 1.0;
    }
    features[ch] = mean;
    features[c + ch] = std::sqrt(var / static_cast<double>(plane));
    for (int b = 0; b < 4; ++b) features[2 * c + 4 * ch + b] = hist[static_cast<std::size_t>(b)] / static_cast<double>(plane);
  }
  return features;
}

Eigen::MatrixXd region_features(const RegionDataset& dataset) {
  const auto regions = dataset.regions();
  if (dataset.tiles.empty()) return {};
  const auto dim = 6 * dataset.tiles.front().channels;
  Eigen::MatrixXd rows = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(regions.size()), dim);
  std::map<std::string, Eigen::Index> row_of;
  for (std::size_t i = 0; i < regions.size(); ++i) row_of[regions[i]] = static_cast<Eigen::Index>(i);
  std::vector<double> counts(regions.size(), 0.0);
  for (const auto& t : dataset.tiles) {
    const auto r = row_of.at(t.region_id);
    rows.row(r) += extract_features(t).transpose();
    counts[static_cast<std::size_t>(r)] += 1.0;
  }
  for (Eigen::Index r = 0; r < rows.rows(); ++r) rows.row(r) /= counts[static_cast<std::size_t>(r)];
  return rows;
}

MetaSplit split_meta_random(std::size_t count, const std::array<double, 3>& fractions, std::uint64_t seed) {
  const double total = fractions[0] + fractions[1] + fractions[2];
  if (std::abs(total - 1.0) > 1e-9 || *std::min_element(fractions.begin(), fractions.end()) < 0.0) {
    throw ConfigError("split fractions must be non-negative and sum to 1");
  }
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = std::min(count, static_cast<std::size_t>(std::llround(fractions[0] * static_cast<double>(count))));
  const auto n_val = std::min(count - n_train, static_cast<std::size_t>(std::llround(fractions[1] * static_cast<double>(count))));
  MetaSplit out;
  out.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.val.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                 order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  out.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
  for (auto* part : {&out.train, &out.val, &out.test}) std::sort(part->begin(), part->end());
  return out;
}

MetaSplit split_meta_clustered(const Eigen::MatrixXd& features, int num_clusters, std::uint64_t seed,
                               const std::array<double, 3>& fractions) {
  if (num_clusters < 3) throw ConfigError("clustered split needs at least 3 clusters");
  const auto clusters = kmeans(features, num_clusters, derive_seed(seed, "split/kmeans"));

  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(num_clusters));
  for (std::size_t i = 0; i < clusters.assignment.size(); ++i) {
    members[static_cast<std::size_t>(clusters.assignment[i])].push_back(i);
  }
  std::vector<std::size_t> order(members.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, "split/clusters"));
  std::shuffle(order.begin(), order.end(), rng);

  const double total = static_cast<double>(features.rows());
  std::array<double, 3> filled{};
  std::array<int, 3> taken{};
  MetaSplit out;
  std::array<std::vector<std::size_t>*, 3> parts{&out.train, &out.val, &out.test};
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    const auto& cluster = members[order[pos]];
    const std::size_t remaining = order.size() - pos;
    const int empty_sets = (taken[0] == 0) + (taken[1] == 0) + (taken[2] == 0);
    int best = -1;
    double best_deficit = -1e300;
    for (int s = 0; s < 3; ++s) {
      // Once the clusters left are only just enough to populate the empty sets, force them there.
      if (static_cast<int>(remaining) <= empty_sets && taken[s] != 0) continue;
      const double deficit = fractions[static_cast<std::size_t>(s)] * total - filled[static_cast<std::size_t>(s)];
      if (deficit > best_deficit) {
        best_deficit = deficit;
        best = s;
      }
    }
    parts[static_cast<std::size_t>(best)]->insert(parts[static_cast<std::size_t>(best)]->end(), cluster.begin(), cluster.end());
    filled[static_cast<std::size_t>(best)] += static_cast<double>(cluster.size());
    ++taken[static_cast<std::size_t>(best)];
  }
  for (auto* part : parts) std::sort(part->begin(), part->end());
  return out;
}

void apply_region_split(RegionDataset& dataset, const MetaSplit& split) {
  const auto regions = dataset.regions();
  dataset.split.clear();
  auto put = [&](const std::vector<std::size_t>& items, MetaSet set) {
    for (auto i : items) {
      if (i >= regions.size()) throw ValidationError("split references region index " + std::to_string(i));
      dataset.split[regions[i]] = set;
    }
  };
  put(split.train, MetaSet::train);
  put(split.val, MetaSet::val);
  put(split.test, MetaSet::test);
  if (dataset.split.size() != regions.size()) throw ValidationError("split does not cover every region exactly once");
}

}  // namespace metaland
