#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "metaland/data.hpp"
#include "metaland/errors.hpp"
#include "metaland/kmeans.hpp"

using namespace metaland;
namespace fs = std::filesystem;

namespace {

SyntheticConfig small_config(double shift, std::uint64_t seed) {
  SyntheticConfig cfg;
  cfg.num_regions = 20;
  cfg.num_classes = 4;
  cfg.tiles_per_region = 60;
  cfg.image_size = 4;
  cfg.shift = shift;
  cfg.seed = seed;
  return cfg;
}

RegionDataset split_dataset(const SyntheticConfig& cfg) {
  auto ds = generate_synthetic_regions(cfg);
  apply_region_split(ds, split_meta_clustered(region_features(ds), 6, cfg.seed));
  return ds;
}

Eigen::VectorXd channel_means(const LabeledTile& t) {
  Eigen::VectorXd m = Eigen::VectorXd::Zero(t.channels);
  const auto plane = t.height * t.width;
  for (std::int64_t c = 0; c < t.channels; ++c) {
    for (std::int64_t p = 0; p < plane; ++p) m[c] += t.pixels[static_cast<std::size_t>(c * plane + p)];
  }
  return m / static_cast<double>(plane);
}

// Nearest-class-mean classifier on tile channel means.
struct Prototypes {
  std::map<int, Eigen::VectorXd> sum;
  std::map<int, int> count;
  void add(const LabeledTile& t) {
    auto m = channel_means(t);
    auto [it, fresh] = sum.try_emplace(t.tile_label, Eigen::VectorXd::Zero(m.size()));
    it->second += m;
    ++count[t.tile_label];
  }
  int predict(const LabeledTile& t) const {
    const auto m = channel_means(t);
    int best = -1;
    double best_d = 0;
    for (const auto& [c, s] : sum) {
      const double d = (m - s / count.at(c)).squaredNorm();
      if (best < 0 || d < best_d) {
        best = c;
        best_d = d;
      }
    }
    return best;
  }
};

fs::path scratch_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("metaland_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

LabeledTile small_tile(int label, bool with_pixels) {
  LabeledTile t;
  t.channels = 2;
  t.height = 2;
  t.width = 3;
  t.pixels = {0.5f, -1.25f, 3.0f, 0.0f, 1e-3f, -7.5f, 2.0f, 2.0f, 1.0f, -0.25f, 9.0f, 0.125f};
  if (with_pixels) t.pixel_labels = std::vector<std::uint8_t>{static_cast<std::uint8_t>(label), 1, 1,
                                                              static_cast<std::uint8_t>(label),
                                                              static_cast<std::uint8_t>(label), 0};
  t.tile_label = label;
  return t;
}

}  // namespace

// ---- majority label and features ----------------------------------------

TEST(MajorityLabel, Examples) {
  const std::vector<std::uint8_t> all3(9, 3), mixed{0, 1, 1, 2}, tie{0, 0, 1, 1};
  EXPECT_EQ(majority_label(all3), 3);
  EXPECT_EQ(majority_label(mixed), 1);
  EXPECT_EQ(majority_label(tie), 0);
  EXPECT_THROW(majority_label(std::vector<std::uint8_t>{}), ValidationError);
}

TEST(Features, ConstantTile) {
  LabeledTile t;
  t.channels = 3;
  t.height = t.width = 4;
  t.pixels.assign(48, 0.5f);
  const auto f = extract_features(t);
  ASSERT_EQ(f.size(), 18);
  for (int c = 0; c < 3; ++c) {
    EXPECT_DOUBLE_EQ(f[c], 0.5);
    EXPECT_DOUBLE_EQ(f[3 + c], 0.0);
  }
  // Histogram bins per channel: (-inf,-1), [-1,0), [0,1), [1,inf).
  for (int c = 0; c < 3; ++c) {
    const Eigen::VectorXd h = f.segment(6 + 4 * c, 4);
    EXPECT_EQ(h, Eigen::Vector4d(0, 0, 1, 0));
  }
}

TEST(Features, SameClassAndRegionIsCloser) {
  const auto ds = generate_synthetic_regions(small_config(2.0, 1));
  Rng rng(2);
  std::uniform_int_distribution<std::size_t> pick(0, ds.tiles.size() - 1);
  double same = 0, different = 0;
  int n_same = 0, n_diff = 0;
  while (n_same < 100 || n_diff < 100) {
    const auto& a = ds.tiles[pick(rng)];
    const auto& b = ds.tiles[pick(rng)];
    if (&a == &b) continue;
    const double d = (extract_features(a) - extract_features(b)).norm();
    if (a.region_id == b.region_id && a.tile_label == b.tile_label) {
      if (n_same < 100) same += d, ++n_same;
    } else if (a.tile_label != b.tile_label) {
      if (n_diff < 100) different += d, ++n_diff;
    }
  }
  EXPECT_LT(same / n_same, different / n_diff);
}

// ---- synthetic generator -------------------------------------------------

TEST(Synthetic, DeterministicForSeed) {
  const auto a = generate_synthetic_regions(small_config(2.0, 3));
  const auto b = generate_synthetic_regions(small_config(2.0, 3));
  EXPECT_EQ(a.tiles, b.tiles);
  EXPECT_EQ(a.partition, b.partition);
  EXPECT_NE(a.tiles, generate_synthetic_regions(small_config(2.0, 4)).tiles);
}

TEST(Synthetic, SizesAndLabels) {
  auto cfg = small_config(1.0, 5);
  const auto ds = generate_synthetic_regions(cfg);
  EXPECT_EQ(ds.tiles.size(), 20u * 60u);
  EXPECT_EQ(ds.regions().size(), 20u);
  for (const auto& t : ds.tiles) {
    EXPECT_EQ(t.channels, 3);
    EXPECT_EQ(t.height, 4);
    EXPECT_GE(t.tile_label, 0);
    EXPECT_LT(t.tile_label, 4);
  }
  cfg.tiles_per_region = 15;
  EXPECT_THROW(generate_synthetic_regions(cfg), ConfigError);
  cfg = small_config(1.0, 5);
  cfg.num_classes = 1;
  EXPECT_THROW(generate_synthetic_regions(cfg), ConfigError);
}

TEST(Synthetic, SegmentationLabelsAgreeWithTileLabel) {
  auto cfg = small_config(1.0, 6);
  cfg.segmentation = true;
  cfg.image_size = 8;
  const auto ds = generate_synthetic_regions(cfg);
  std::set<int> blob_counts;
  for (const auto& t : ds.tiles) {
    ASSERT_TRUE(t.pixel_labels.has_value());
    EXPECT_EQ(t.tile_label, majority_label(*t.pixel_labels));
    blob_counts.insert(static_cast<int>(std::set<int>(t.pixel_labels->begin(), t.pixel_labels->end()).size()));
  }
  EXPECT_NO_THROW(ds.validate());
  EXPECT_GE(*blob_counts.rbegin(), 2);
  EXPECT_LE(*blob_counts.rbegin(), 4);
}

TEST(Synthetic, ZeroShiftSharesClassMeans) {
  const auto means = synthetic_class_means(small_config(0.0, 7));
  for (std::size_t r = 1; r < means.size(); ++r) {
    for (std::size_t c = 0; c < means[r].size(); ++c) EXPECT_EQ(means[r][c], means[0][c]);
  }
  const auto shifted = synthetic_class_means(small_config(2.0, 7));
  EXPECT_GT((shifted[1][0] - shifted[0][0]).norm(), 0.1);
}

TEST(Synthetic, ShiftMagnitudeScalesOffsets) {
  // Average offset norm from the cross-region class mean grows linearly with sigma.
  const auto spread = [](double shift) {
    const auto m = synthetic_class_means(small_config(shift, 8));
    double total = 0;
    int n = 0;
    for (std::size_t c = 0; c < m[0].size(); ++c) {
      Eigen::VectorXd centre = Eigen::VectorXd::Zero(m[0][c].size());
      for (const auto& region : m) centre += region[c];
      centre /= static_cast<double>(m.size());
      for (const auto& region : m) total += (region[c] - centre).norm(), ++n;
    }
    return total / n;
  };
  EXPECT_NEAR(spread(2.0) / spread(1.0), 2.0, 1e-9);
}

namespace {

// Nearest-class-mean accuracy on meta-test query tiles: prototypes fit on all meta-train
// tiles (global) or on each region's own support tiles (regional).
std::pair<double, double> prototype_oracles(double shift, std::uint64_t seed) {
  const auto ds = split_dataset(small_config(shift, seed));
  Prototypes global;
  std::map<std::string, Prototypes> regional;
  for (std::size_t i = 0; i < ds.tiles.size(); ++i) {
    const auto& t = ds.tiles[i];
    if (ds.split.at(t.region_id) == MetaSet::train) global.add(t);
    if (ds.partition[i] == Partition::support) regional[t.region_id].add(t);
  }
  int g_hits = 0, r_hits = 0, total = 0;
  for (std::size_t i = 0; i < ds.tiles.size(); ++i) {
    const auto& t = ds.tiles[i];
    if (ds.split.at(t.region_id) != MetaSet::test || ds.partition[i] != Partition::query) continue;
    g_hits += global.predict(t) == t.tile_label;
    r_hits += regional.at(t.region_id).predict(t) == t.tile_label;
    ++total;
  }
  return {static_cast<double>(g_hits) / total, static_cast<double>(r_hits) / total};
}

}  // namespace

TEST(Synthetic, LargeShiftDefeatsGlobalButNotRegionalPrototypes) {
  constexpr int kSeeds = 5;
  double g2 = 0, r2 = 0, g4 = 0, r4 = 0;
  for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
    const auto [g, r] = prototype_oracles(2.0, seed);
    g2 += g / kSeeds, r2 += r / kSeeds;
    const auto [gl, rl] = prototype_oracles(4.0, seed);
    g4 += gl / kSeeds, r4 += rl / kSeeds;
  }
  EXPECT_GT(r2, 0.9);
  EXPECT_GT(r2 - g2, 0.4);
  // Four classes: chance is 0.25.
  EXPECT_LT(g4, 0.35);
  EXPECT_GT(r4, 0.9);
  const auto [g0, r0] = prototype_oracles(0.0, 0);
  EXPECT_GT(g0, 0.9);
  EXPECT_GT(r0, 0.9);
}

TEST(Synthetic, MetaSetClassMeansDifferOnlyUnderShift) {
  // Largest |difference| / standard error over (class, channel) between meta-train and meta-test tiles.
  const auto worst_z = [](double shift) {
    auto cfg = small_config(shift, 10);
    cfg.tiles_per_region = 240;
    const auto ds = split_dataset(cfg);
    double worst = 0;
    for (int c = 0; c < ds.num_classes; ++c) {
      for (int ch = 0; ch < 3; ++ch) {
        std::vector<double> a, b;
        for (const auto& t : ds.tiles) {
          if (t.tile_label != c) continue;
          const double m = channel_means(t)[ch];
          const auto set = ds.split.at(t.region_id);
          if (set == MetaSet::train) a.push_back(m);
          if (set == MetaSet::test) b.push_back(m);
        }
        const auto stats = [](const std::vector<double>& v) {
          double mean = 0, var = 0;
          for (double x : v) mean += x;
          mean /= static_cast<double>(v.size());
          for (double x : v) var += (x - mean) * (x - mean);
          return std::pair{mean, var / static_cast<double>(v.size() - 1)};
        };
        const auto [ma, va] = stats(a);
        const auto [mb, vb] = stats(b);
        worst = std::max(worst, std::abs(ma - mb) / std::sqrt(va / static_cast<double>(a.size()) +
                                                              vb / static_cast<double>(b.size())));
      }
    }
    return worst;
  };
  EXPECT_LT(worst_z(0.0), 3.0);
  EXPECT_GT(worst_z(2.0), 10.0);
}

TEST(Partitions, DisjointExhaustiveAndStratified) {
  const auto ds = generate_synthetic_regions(small_config(1.0, 11));
  ASSERT_EQ(ds.partition.size(), ds.tiles.size());
  std::map<std::pair<std::string, int>, std::pair<int, int>> per_group;
  for (std::size_t i = 0; i < ds.tiles.size(); ++i) {
    auto& g = per_group[{ds.tiles[i].region_id, ds.tiles[i].tile_label}];
    (ds.partition[i] == Partition::support ? g.first : g.second)++;
  }
  for (const auto& [key, counts] : per_group) {
    EXPECT_LE(std::abs(counts.first - counts.second), 1) << key.first << "/" << key.second;
  }
}

// ---- k-means and splits ----------------------------------------------------

TEST(KMeans, SeparatesTwoBlobs) {
  Eigen::MatrixXd pts(40, 2);
  Rng rng(1);
  std::normal_distribution<double> n(0, 0.1);
  for (int i = 0; i < 40; ++i) pts.row(i) << n(rng) + (i < 20 ? -5 : 5), n(rng);
  const auto km = kmeans(pts, 2, 3);
  for (int i = 1; i < 20; ++i) EXPECT_EQ(km.assignment[i], km.assignment[0]);
  for (int i = 21; i < 40; ++i) EXPECT_EQ(km.assignment[i], km.assignment[20]);
  EXPECT_NE(km.assignment[0], km.assignment[20]);
}

TEST(KMeans, InertiaNeverIncreases) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    std::normal_distribution<double> n(0, 1);
    Eigen::MatrixXd pts(60, 3);
    for (Eigen::Index i = 0; i < pts.size(); ++i) pts.data()[i] = n(rng);
    const auto km = kmeans(pts, 6, seed);
    for (std::size_t i = 1; i < km.inertia_history.size(); ++i) {
      EXPECT_LE(km.inertia_history[i], km.inertia_history[i - 1] * (1 + 1e-12));
    }
    EXPECT_EQ(km.assignment, kmeans(pts, 6, seed).assignment);
  }
}

TEST(KMeans, SingleClusterIsTheMean) {
  Rng rng(4);
  std::normal_distribution<double> n(3, 2);
  Eigen::MatrixXd pts(37, 4);
  for (Eigen::Index i = 0; i < pts.size(); ++i) pts.data()[i] = n(rng);
  const auto km = kmeans(pts, 1, 0);
  EXPECT_LT((km.centroids.row(0) - pts.colwise().mean()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(KMeans, TooFewItems) { EXPECT_THROW(kmeans(Eigen::MatrixXd::Zero(3, 2), 4, 0), ValidationError); }

TEST(KMeans, EmptyClusterReseeded) {
  // Duplicate points force k-means++ to pick coincident centroids.
  Eigen::MatrixXd pts = Eigen::MatrixXd::Zero(5, 1);
  pts(4, 0) = 10;
  const auto km = kmeans(pts, 3, 0);
  EXPECT_EQ(static_cast<int>(km.assignment.size()), 5);
  EXPECT_NEAR(km.inertia, 0.0, 1e-12);
}

TEST(Splits, RandomSizesFollowFractions) {
  const auto s = split_meta_random(803, {500.0 / 803, 150.0 / 803, 153.0 / 803}, 1);
  EXPECT_EQ(s.train.size(), 500u);
  EXPECT_EQ(s.val.size(), 150u);
  EXPECT_EQ(s.test.size(), 153u);
  std::set<std::size_t> all(s.train.begin(), s.train.end());
  all.insert(s.val.begin(), s.val.end());
  all.insert(s.test.begin(), s.test.end());
  EXPECT_EQ(all.size(), 803u);
  EXPECT_EQ(*all.rbegin(), 802u);

  const auto everything = split_meta_random(10, {1, 0, 0}, 2);
  EXPECT_EQ(everything.train.size(), 10u);
  EXPECT_TRUE(everything.val.empty() && everything.test.empty());
  EXPECT_THROW(split_meta_random(10, {0.5, 0.2, 0.2}, 0), ConfigError);
}

TEST(Splits, ClusteredKeepsClustersTogether) {
  Rng rng(5);
  std::normal_distribution<double> n(0, 1);
  Eigen::MatrixXd pts(803, 4);
  for (Eigen::Index i = 0; i < pts.size(); ++i) pts.data()[i] = n(rng);
  const auto s = split_meta_clustered(pts, 6, 7);
  const auto km = kmeans(pts, 6, derive_seed(7, "split/kmeans"));
  std::vector<int> set_of(803, -1);
  for (auto i : s.train) set_of[i] = 0;
  for (auto i : s.val) set_of[i] = 1;
  for (auto i : s.test) set_of[i] = 2;
  std::map<int, int> cluster_set;
  for (std::size_t i = 0; i < 803; ++i) {
    ASSERT_GE(set_of[i], 0);
    auto [it, fresh] = cluster_set.try_emplace(km.assignment[i], set_of[i]);
    EXPECT_EQ(it->second, set_of[i]);
  }
  EXPECT_EQ(s.train.size() + s.val.size() + s.test.size(), 803u);
  // Whole clusters of roughly 803/6 items land near the 454/166/183 targets.
  EXPECT_NEAR(static_cast<double>(s.train.size()), 454, 100);
  EXPECT_NEAR(static_cast<double>(s.val.size()), 166, 100);
  EXPECT_NEAR(static_cast<double>(s.test.size()), 183, 100);
  EXPECT_THROW(split_meta_clustered(pts, 2, 0), ConfigError);
}

TEST(Splits, ClusteredSeparatesMetaSetsMoreThanRandom) {
  double clustered = 0, random = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto cfg = small_config(2.0, seed);
    cfg.tiles_per_region = 16;
    const auto features = region_features(generate_synthetic_regions(cfg));
    const auto gap = [&](const MetaSplit& s) {
      Eigen::VectorXd a = Eigen::VectorXd::Zero(features.cols()), b = a;
      for (auto i : s.train) a += features.row(static_cast<Eigen::Index>(i)).transpose();
      for (auto i : s.test) b += features.row(static_cast<Eigen::Index>(i)).transpose();
      return (a / static_cast<double>(s.train.size()) - b / static_cast<double>(s.test.size())).norm();
    };
    clustered += gap(split_meta_clustered(features, 6, seed));
    random += gap(split_meta_random(20, {0.57, 0.21, 0.22}, seed));
  }
  EXPECT_GT(clustered, random);
}

TEST(Splits, ApplyCoversEveryRegion) {
  auto ds = generate_synthetic_regions(small_config(1.0, 12));
  apply_region_split(ds, split_meta_random(20, {0.5, 0.25, 0.25}, 0));
  EXPECT_EQ(ds.split.size(), 20u);
  EXPECT_NO_THROW(ds.validate());
  EXPECT_THROW(apply_region_split(ds, split_meta_random(19, {0.5, 0.25, 0.25}, 0)), ValidationError);
}

// ---- task sampling -------------------------------------------------------

TEST(Sampler, TaskSizes) {
  const auto ds = split_dataset(small_config(1.0, 13));
  const auto two = sample_task(ds, MetaSet::train, 2, 2, 1);
  EXPECT_EQ(two.support.size(), 4u);
  EXPECT_EQ(two.ways.size(), 2u);
  auto cfg = small_config(1.0, 13);
  cfg.tiles_per_region = 200;
  const auto big = split_dataset(cfg);
  const auto ten = sample_task(big, MetaSet::train, 10, 4, 2);
  EXPECT_EQ(ten.support.size(), 40u);
  EXPECT_EQ(ten.query.size(), 40u);
}

TEST(Sampler, ThousandTasksSatisfyInvariants) {
  auto cfg = small_config(1.0, 14);
  cfg.num_classes = 6;
  cfg.tiles_per_region = 120;
  const auto ds = split_dataset(cfg);
  for (MetaSet set : {MetaSet::train, MetaSet::val, MetaSet::test}) {
    TaskSampler sampler(ds, set, 15);
    for (int i = 0; i < 1000 / 3 + 1; ++i) {
      const int k = 1 + i % 3;
      const auto task = sampler.next(k, 4, 2);
      ASSERT_TRUE(std::is_sorted(task.ways.begin(), task.ways.end()));
      EXPECT_EQ(std::set<int>(task.ways.begin(), task.ways.end()).size(), 4u);
      std::map<int, int> per_label;
      std::set<std::size_t> support_tiles;
      for (const auto& e : task.support) {
        const auto& t = ds.tiles[e.tile];
        ++per_label[e.label];
        EXPECT_EQ(t.tile_label, task.ways[static_cast<std::size_t>(e.label)]);
        EXPECT_EQ(ds.partition[e.tile], Partition::support);
        EXPECT_EQ(t.region_id, task.region_id);
        EXPECT_EQ(t.season, task.season);
        EXPECT_EQ(ds.split.at(t.region_id), set);
        support_tiles.insert(e.tile);
      }
      EXPECT_EQ(support_tiles.size(), task.support.size());
      for (const auto& [label, count] : per_label) EXPECT_EQ(count, k);
      EXPECT_EQ(per_label.size(), 4u);
      for (const auto& e : task.query) {
        EXPECT_FALSE(support_tiles.contains(e.tile));
        EXPECT_EQ(ds.partition[e.tile], Partition::query);
        EXPECT_EQ(ds.tiles[e.tile].region_id, task.region_id);
        EXPECT_EQ(ds.tiles[e.tile].tile_label, task.ways[static_cast<std::size_t>(e.label)]);
      }
    }
  }
}

TEST(Sampler, SameSeedSameSequence) {
  const auto ds = split_dataset(small_config(1.0, 16));
  TaskSampler a(ds, MetaSet::train, 3), b(ds, MetaSet::train, 3), c(ds, MetaSet::train, 4);
  bool differs = false;
  for (int i = 0; i < 20; ++i) {
    const auto ta = a.next(2, 4), tb = b.next(2, 4), tc = c.next(2, 4);
    EXPECT_EQ(ta.support, tb.support);
    EXPECT_EQ(ta.query, tb.query);
    differs = differs || ta.support != tc.support;
  }
  EXPECT_TRUE(differs);
}

TEST(Sampler, SupportSubsetTakesLeadingShots) {
  const auto ds = split_dataset(small_config(1.0, 17));
  const auto task = sample_task(ds, MetaSet::train, 3, 4, 5);
  const auto one = task.support_subset(1);
  ASSERT_EQ(one.size(), 4u);
  for (int c = 0; c < 4; ++c) EXPECT_EQ(one[static_cast<std::size_t>(c)], task.support[static_cast<std::size_t>(3 * c)]);
  EXPECT_TRUE(task.support_subset(0).empty());
  EXPECT_THROW(task.support_subset(4), ValidationError);
}

TEST(Sampler, ExhaustionNamesTheConstraint) {
  const auto ds = split_dataset(small_config(1.0, 18));
  try {
    sample_task(ds, MetaSet::train, 50, 4, 0);
    FAIL();
  } catch (const SamplingExhausted& e) {
    EXPECT_NE(std::string(e.what()).find("50"), std::string::npos) << e.what();
  }
  EXPECT_THROW(sample_task(ds, MetaSet::train, 1, 5, 0), SamplingExhausted);
}

TEST(Sampler, NextInStaysInRegion) {
  const auto ds = split_dataset(small_config(1.0, 19));
  TaskSampler s(ds, MetaSet::test, 1);
  const auto first = s.next(1, 4, 3);
  const auto again = s.next_in(first.region_id, first.season, first.ways, 0, 3);
  EXPECT_TRUE(again.support.empty());
  EXPECT_EQ(again.query.size(), 12u);
  for (const auto& e : again.query) EXPECT_EQ(ds.tiles[e.tile].region_id, first.region_id);
  EXPECT_THROW(s.next_in("nowhere", first.season, first.ways, 1), SamplingExhausted);
}

TEST(Batches, StackAndRelabel) {
  auto cfg = small_config(1.0, 20);
  cfg.segmentation = true;
  const auto ds = split_dataset(cfg);
  const auto task = sample_task(ds, MetaSet::train, 2, 4, 0);
  const auto tiles = make_batch(ds, task.support, task.ways, false);
  EXPECT_EQ(tiles.images.shape(), (Shape{8, 3, 4, 4}));
  EXPECT_EQ(tiles.labels, (std::vector<int>{0, 0, 1, 1, 2, 2, 3, 3}));
  const auto& t0 = ds.tiles[task.support[0].tile];
  for (std::size_t i = 0; i < t0.pixels.size(); ++i) EXPECT_EQ(tiles.images.at(static_cast<std::int64_t>(i)), t0.pixels[i]);
  const auto both = concat_batches(tiles, make_batch(ds, task.query, task.ways, false));
  EXPECT_EQ(both.images.dim(0), static_cast<std::int64_t>(8 + task.query.size()));
}

// ---- tile files ------------------------------------------------------------

TEST(TileFile, RoundTrip) {
  const auto dir = scratch_dir("tile_roundtrip");
  for (bool pixels : {false, true}) {
    const auto t = small_tile(1, pixels);
    write_tile(t, dir / "a.gtil");
    EXPECT_EQ(read_tile(dir / "a.gtil"), t);
  }
}

TEST(TileFile, LayoutMatchesFormat) {
  const auto dir = scratch_dir("tile_layout");
  write_tile(small_tile(2, true), dir / "t.gtil");
  std::ifstream in(dir / "t.gtil", std::ios::binary);
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), {});
  ASSERT_EQ(bytes.size(), 4u + 4 * 4 + 1 + 12 * 4 + 6 + 1);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "GTIL");
  EXPECT_EQ(bytes[4], 1);
  EXPECT_EQ(bytes[8], 2);
  EXPECT_EQ(bytes[12], 2);
  EXPECT_EQ(bytes[16], 3);
  EXPECT_EQ(bytes[20], 1);
  float first;
  std::memcpy(&first, bytes.data() + 21, 4);
  EXPECT_EQ(first, 0.5f);
  EXPECT_EQ(bytes.back(), 2);
}

TEST(TileFile, CorruptMagicAtOffsetZero) {
  const auto dir = scratch_dir("tile_magic");
  write_tile(small_tile(0, false), dir / "t.gtil");
  {
    std::fstream f(dir / "t.gtil", std::ios::binary | std::ios::in | std::ios::out);
    f.put('X');
  }
  try {
    read_tile(dir / "t.gtil");
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 0u);
  }
}

TEST(TileFile, TruncatedAndVersionErrors) {
  const auto dir = scratch_dir("tile_trunc");
  write_tile(small_tile(0, false), dir / "t.gtil");
  fs::resize_file(dir / "t.gtil", 30);
  EXPECT_THROW(read_tile(dir / "t.gtil"), FormatError);
  write_tile(small_tile(0, false), dir / "v.gtil");
  {
    std::fstream f(dir / "v.gtil", std::ios::binary | std::ios::in | std::ios::out);
    f.seekp(4);
    f.put(9);
  }
  try {
    read_tile(dir / "v.gtil");
    FAIL();
  } catch (const UnsupportedVersion& e) {
    EXPECT_EQ(e.version(), 9u);
    EXPECT_EQ(e.offset(), 4u);
  }
  EXPECT_THROW(read_tile(dir / "absent.gtil"), MissingInput);
}

TEST(TileIndex, RoundTripThroughDirectory) {
  auto cfg = small_config(1.0, 21);
  cfg.segmentation = true;
  const auto ds = generate_synthetic_regions(cfg);
  const auto dir = scratch_dir("index_roundtrip");
  write_tiles(ds, dir);
  const auto back = load_tiles(dir / "index.tsv", 4);
  EXPECT_EQ(back.tiles, ds.tiles);
  EXPECT_EQ(back.num_classes, 4);
}

TEST(TileIndex, DistinctDiagnostics) {
  const auto dir = scratch_dir("index_errors");
  write_tile(small_tile(1, false), dir / "a.gtil");
  const auto index = [&](const std::string& text) {
    std::ofstream(dir / "index.tsv") << "# comment\n" << text;
    return dir / "index.tsv";
  };
  try {
    load_tiles(index("r0\ts0\tmissing.gtil\t1\n"), 4);
    FAIL();
  } catch (const MissingInput& e) {
    EXPECT_NE(e.path().find("missing.gtil"), std::string::npos);
  }
  EXPECT_THROW(load_tiles(index("r0\ts0\ta.gtil\t7\n"), 4), ValidationError);
  EXPECT_THROW(load_tiles(index("r0\ts0\ta.gtil\n"), 4), FormatError);
  EXPECT_THROW(load_tiles(index("r0\ts0\ta.gtil\tone\n"), 4), FormatError);
  EXPECT_THROW(load_tiles(dir / "nope.tsv", 4), MissingInput);
  const auto ok = load_tiles(index("r0\ts0\ta.gtil\t1\n"), 4);
  ASSERT_EQ(ok.tiles.size(), 1u);
  EXPECT_EQ(ok.tiles[0].region_id, "r0");
  EXPECT_EQ(ok.tiles[0].season, "s0");
}
