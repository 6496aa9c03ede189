#pragma once

// Region-tagged tiles, meta-splits, episodic task sampling and tile files.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "metaland/rng.hpp"
#include "metaland/tensor.hpp"

namespace metaland {

enum class MetaSet : std::uint8_t { train = 0, val = 1, test = 2 };
enum class Partition : std::uint8_t { support = 0, query = 1 };

const char* to_string(MetaSet set);

struct LabeledTile {
  std::int64_t channels = 0;
  std::int64_t height = 0;
  std::int64_t width = 0;
  std::vector<float> pixels;                               // C*H*W, row-major
  std::optional<std::vector<std::uint8_t>> pixel_labels;  // H*W
  int tile_label = 0;
  std::string region_id;
  std::string season;

  friend bool operator==(const LabeledTile&, const LabeledTile&) = default;
};

/// Modal class of a label grid; ties go to the lowest class index.
int majority_label(std::span<const std::uint8_t> labels);

struct RegionDataset {
  std::vector<LabeledTile> tiles;
  int num_classes = 0;
  std::map<std::string, MetaSet> split;  // region_id -> meta-set
  std::vector<Partition> partition;      // one entry per tile

  /// Region ids in order of first appearance.
  std::vector<std::string> regions() const;
  /// Throws ValidationError if a tile label, pixel label, partition or split entry is inconsistent.
  void validate() const;
};

/// Randomly assign each region's tiles to support or query, stratified by tile label:
/// within every (region, season, class) group a `support_fraction` share goes to support.
void assign_partitions(RegionDataset& dataset, double support_fraction, std::uint64_t seed);

// ---- synthetic data -----------------------------------------------------

struct SyntheticConfig {
  int num_regions = 20;
  int num_classes = 4;
  int tiles_per_region = 100;
  double shift = 2.0;  // region-shift magnitude sigma
  int image_size = 32;
  int channels = 3;
  std::uint64_t seed = 0;
  bool segmentation = false;
  double support_fraction = 0.5;
  double tile_jitter = 0.15;  // per-tile std of the channel means
  double pixel_noise = 0.3;
  double texture = 0.2;       // amplitude of the shared sinusoidal texture
};

/// Class prototypes mu_c (unit vectors over channels), per-region offsets delta_{r,c}
/// with E|delta| = shift, and Dirichlet(1) region class frequencies on top of a
/// per-class floor of tiles_per_region / (2 * classes). Partitions are assigned;
/// the meta-split is left to the caller.
RegionDataset generate_synthetic_regions(const SyntheticConfig& cfg);

/// The class-conditional channel means used by the generator: [region][class] -> C values.
std::vector<std::vector<Eigen::VectorXd>> synthetic_class_means(const SyntheticConfig& cfg);

// ---- features and splits ------------------------------------------------

/// Per-channel mean, per-channel std and a 4-bin histogram per channel
/// (edges -1, 0, 1; fractions), in that order: 6*C values.
Eigen::VectorXd extract_features(const LabeledTile& tile);

/// Mean tile feature of every region, rows in regions() order.
Eigen::MatrixXd region_features(const RegionDataset& dataset);

struct MetaSplit {
  std::vector<std::size_t> train, val, test;
};

/// Uniform random partition of `count` items with sizes round(f0*N), round(f1*N), rest.
MetaSplit split_meta_random(std::size_t count, const std::array<double, 3>& fractions, std::uint64_t seed);

/// k-means over feature rows, then whole clusters assigned at random to meta-sets,
/// each cluster going to the set furthest below its target item count.
MetaSplit split_meta_clustered(const Eigen::MatrixXd& features, int num_clusters, std::uint64_t seed,
                               const std::array<double, 3>& fractions = {0.57, 0.21, 0.22});

/// Map a split over regions() indices onto dataset.split.
void apply_region_split(RegionDataset& dataset, const MetaSplit& split);

// ---- tasks --------------------------------------------------------------

struct TaskExample {
  std::size_t tile = 0;
  int label = 0;  // relabeled class in [0, n)
  friend bool operator==(const TaskExample&, const TaskExample&) = default;
};

struct Task {
  std::vector<TaskExample> support;  // grouped by class, k per class
  std::vector<TaskExample> query;
  std::vector<int> ways;  // original class ids, ascending; label i <-> ways[i]
  std::string region_id;
  std::string season;
  int shots = 0;

  /// The first `shots` support examples of every class.
  std::vector<TaskExample> support_subset(int shots) const;
};

/// Draws k-shot n-way tasks from one meta-set with a private PRNG.
class TaskSampler {
 public:
  TaskSampler(const RegionDataset& dataset, MetaSet meta_set, std::uint64_t seed);

  /// `query_per_class` < 0 means "same as k".
  Task next(int k, int n, int query_per_class = -1);

  /// A task from one given region/season with the given (original, ascending) classes.
  Task next_in(const std::string& region_id, const std::string& season, const std::vector<int>& ways, int k,
               int query_per_class = -1);

 private:
  struct Group {
    std::string region_id, season;
    std::map<int, std::vector<std::size_t>> support, query;  // class -> tile indices
  };
  const RegionDataset& dataset_;
  MetaSet meta_set_;
  std::vector<Group> groups_;
  Rng rng_;

  Task draw(const Group& group, std::vector<int> ways, int k, int q);
};

Task sample_task(const RegionDataset& dataset, MetaSet meta_set, int k, int n, std::uint64_t seed,
                 int query_per_class = -1);

struct Batch {
  Tensor images;            // [B, C, H, W]
  std::vector<int> labels;  // B entries, or B*H*W for per-pixel batches
  bool per_pixel = false;
};

/// Stack task examples into a batch. Per-pixel batches map pixel labels through `ways`.
Batch make_batch(const RegionDataset& dataset, std::span<const TaskExample> examples,
                 const std::vector<int>& ways, bool per_pixel);

/// Concatenate two batches of the same kind.
Batch concat_batches(const Batch& a, const Batch& b);

// ---- tile files ---------------------------------------------------------

void write_tile(const LabeledTile& tile, const std::filesystem::path& path);
/// Reads pixels and labels; region and season are left empty.
LabeledTile read_tile(const std::filesystem::path& path);

/// Writes `<dir>/tiles/<region>/<index>.gtil` plus `<dir>/index.tsv`.
void write_tiles(const RegionDataset& dataset, const std::filesystem::path& dir);
/// Loads an index file and its tiles; labels must lie in [0, num_classes).
RegionDataset load_tiles(const std::filesystem::path& index_path, int num_classes);

}  // namespace metaland
