#pragma once

// Experiment configuration files and the pipeline steps behind the command-line tool.
//
// Config files hold one `section.key = value` per line; '#' starts a comment.
// Unknown keys and malformed values raise ConfigError with the line number.

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "metaland/analysis.hpp"
#include "metaland/data.hpp"
#include "metaland/metrics.hpp"
#include "metaland/models.hpp"
#include "metaland/training.hpp"

namespace metaland {

struct ExperimentConfig {
  std::uint64_t seed = 0;

  struct Dataset {
    std::string source = "synthetic";  // synthetic | files
    std::string index;                 // index.tsv for source = files
    SyntheticConfig synthetic;         // also supplies channels, image_size and num_classes for files
    std::string split = "clustered";   // clustered | random
    int split_clusters = 6;
    std::array<double, 3> fractions{0.57, 0.21, 0.22};
  } dataset;

  struct Model {
    std::string architecture = "cnn";  // cnn | unet
    int width = 16;
    int depth = 5;
    int levels = 2;
    int base_width = 8;
  } model;

  TrainConfig train;

  struct Pretrain {
    double alpha = 0.1;
    int iterations = 1000;
  } pretrain;

  struct Eval {
    std::vector<int> shots{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    int tasks = 100;
    int query_per_class = 10;
    std::vector<double> grid_alphas = default_alpha_grid();
    std::vector<int> grid_steps = default_step_grid();
    int grid_tasks = 20;
    std::vector<int> ignore_classes;
  } eval;

  struct Analysis {
    int tasks = 1000;
    double alpha = 0.75;
    int shots = 1;
    int slice_queries = 4;
    int slice_query_per_class = 10;
    int slice_points = 64;
    double slice_alpha_max = 1.0;
    double slice_alpha_max_pretrained = 0.15;
  } analysis;

  struct Paths {
    std::string out = "out";
    std::string dataset = "dataset";
    std::string maml = "maml.ckpt";
    std::string pretrained = "pretrained.ckpt";
    std::string random = "random.ckpt";
  } paths;

  /// Throws ConfigError on an inconsistent combination of values.
  void validate() const;
};

/// Parses config text on top of the defaults. `origin` names the source in error messages.
ExperimentConfig parse_config(const std::string& text, const std::string& origin = "config");
ExperimentConfig load_config(const std::filesystem::path& path);
/// Every key with its current value, in a form parse_config() reads back unchanged.
std::string dump_config(const ExperimentConfig& cfg);

// ---- pipeline -------------------------------------------------------------

std::filesystem::path dataset_dir(const ExperimentConfig& cfg);

/// Writes the synthetic dataset (tiles, index.tsv) and manifest.txt; returns the dataset dir.
std::filesystem::path generate_dataset(const ExperimentConfig& cfg);

/// Loads the configured dataset and assigns partitions and the meta-split.
RegionDataset load_dataset(const ExperimentConfig& cfg);

/// The freshly initialized model for this experiment.
ParamSet initial_model(const ExperimentConfig& cfg);

/// Trains (maml, pretrain) or just initializes (random), writes the checkpoint, a loss
/// history CSV for trained modes and a config snapshot next to the checkpoint.
std::filesystem::path train_model(const ExperimentConfig& cfg, const RegionDataset& dataset, Provenance mode);

/// How each checkpoint is adapted at evaluation time: MAML checkpoints use the training
/// step size and inner steps; other checkpoints use a per-shot meta-val grid search.
std::vector<GridSearchResult> evaluation_settings(const ExperimentConfig& cfg, const RegionDataset& dataset,
                                                  const Checkpoint& cp);

/// Metrics CSV (plus pooled and grid-search CSVs) for one checkpoint; returns the metrics CSV path.
std::filesystem::path evaluate_checkpoint(const ExperimentConfig& cfg, const RegionDataset& dataset,
                                          const std::filesystem::path& checkpoint);

std::filesystem::path analyze_weight_pca(const ExperimentConfig& cfg, const RegionDataset& dataset,
                                         const std::filesystem::path& checkpoint);
std::filesystem::path analyze_loss_slice(const ExperimentConfig& cfg, const RegionDataset& dataset,
                                         const std::filesystem::path& checkpoint);

std::string loss_history_csv(const std::vector<double>& losses);

}  // namespace metaland
