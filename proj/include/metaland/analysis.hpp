#pragma once

// Weight-adaptation embedding and one-dimensional loss slices.

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "metaland/data.hpp"
#include "metaland/param_set.hpp"
#include "metaland/pca.hpp"

namespace metaland {

struct EmbeddingRow {
  std::string kind;  // "theta" or "adapted"
  std::string region_id;
  int task_id = -1;  // -1 for the theta row
  double pc1 = 0, pc2 = 0;
};

struct WeightMapConfig {
  int num_tasks = 1000;
  double alpha = 0.75;
  int shots = 1;
  int ways = 4;
  std::uint64_t seed = 0;
};

/// Adapts theta one step on each sampled task, flattens every adapted model together
/// with theta, and projects all of them onto the first two principal components.
/// The theta row comes first. If no task moves the weights all coordinates are 0.
std::vector<EmbeddingRow> weight_adaptation_map(const ParamSet& theta, const RegionDataset& dataset, MetaSet meta_set,
                                                const WeightMapConfig& cfg);

std::string embedding_csv(const std::vector<EmbeddingRow>& rows);

struct LossSlice {
  std::vector<double> alphas;
  Eigen::MatrixXd losses;  // query tasks x alphas
  double gradient_norm = 0;
};

/// Query losses at theta - alpha * g for the support gradient g at theta.
LossSlice loss_surface_1d(const ParamSet& theta, const Batch& support, const std::vector<Batch>& queries,
                          const std::vector<double>& alphas);

/// `count` evenly spaced points on [0, max_alpha], starting at 0.
std::vector<double> alpha_grid(double max_alpha, int count = 64);

std::string loss_slice_csv(const LossSlice& slice);

struct SliceTasks {
  Task support;
  std::vector<Task> queries;
};

/// One support task plus `num_queries` query tasks drawn from the same region and
/// season with the support task's ways.
SliceTasks sample_slice_tasks(const RegionDataset& dataset, MetaSet meta_set, int shots, int ways, int num_queries,
                              int query_per_class, std::uint64_t seed);

}  // namespace metaland
