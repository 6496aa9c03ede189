#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "metaland/data.hpp"
#include "metaland/param_set.hpp"

namespace metaland {

struct TrainConfig {
  double alpha = 0.4;    // inner step size (MAML) / step size of regular gradient descent
  double beta = 0.01;    // outer step size
  int inner_steps = 1;   // t
  int meta_batch = 4;    // tasks per outer update
  int shots = 2;         // k
  int ways = 4;          // n
  int query_per_class = -1;  // < 0: same as shots
  int iterations = 1000;
  bool second_order = true;
  bool average_meta_batch = false;  // divide the summed meta-gradient by meta_batch
  std::uint64_t seed = 0;

  void validate() const;
};

enum class Provenance : std::uint8_t { random = 0, pretrained = 1, maml = 2 };

const char* to_string(Provenance p);

struct Checkpoint {
  ParamSet params;
  Provenance provenance = Provenance::random;
  std::uint64_t iteration = 0;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<double> loss_history;  // one entry per iteration
};

/// Losses above this (or non-finite) abort training.
inline constexpr double kDivergenceThreshold = 1e6;

/// Mean softmax cross-entropy of the model on a batch (per pixel for per-pixel batches).
Tensor batch_loss(const ParamSet& params, const Batch& batch);

/// Regular gradient descent: one SGD step with step size `alpha` per sampled task,
/// on the task's support and query examples merged into one batch.
TrainResult pretrain(const ParamSet& init, const RegionDataset& dataset, const TrainConfig& cfg);

/// Model-agnostic meta-learning. Per iteration: `meta_batch` tasks, `inner_steps`
/// support steps each, meta-gradients summed in task order, theta -= beta * sum.
TrainResult maml_train(const ParamSet& theta, const RegionDataset& dataset, const TrainConfig& cfg);

/// Full-batch gradient descent on `support` starting from a copy of `params`.
ParamSet adapt(const ParamSet& params, const Batch& support, double alpha, int steps);

struct GridPoint {
  double alpha = 0.0;
  int steps = 0;
  double accuracy = 0.0;  // mean query accuracy over the sampled tasks
};

struct GridSearchResult {
  GridPoint best;
  std::vector<GridPoint> table;  // every (alpha, steps) pair, alpha-major
};

struct GridSearchConfig {
  int shot = 1;
  int ways = 4;
  int query_per_class = 10;
  int num_tasks = 20;
  std::vector<double> alphas;
  std::vector<int> step_counts;
  std::uint64_t seed = 0;
};

/// Default fine-tuning grids: 13 step sizes in [0.001, 1] and 1 to 100 steps.
std::vector<double> default_alpha_grid();
std::vector<int> default_step_grid();

/// Exhaustive search for the fine-tuning (alpha, steps) with the best mean query accuracy
/// on tasks from `meta_set`. Ties go to the smaller alpha, then to fewer steps.
GridSearchResult finetune_grid_search(const ParamSet& params, const RegionDataset& dataset, MetaSet meta_set,
                                      const GridSearchConfig& cfg);

/// Fraction of correctly classified items (tiles or pixels).
double batch_accuracy(const ParamSet& params, const Batch& batch);

void save_checkpoint(const Checkpoint& cp, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace metaland
