#pragma once

#include <cstdint>
#include <functional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "metaland/data.hpp"
#include "metaland/param_set.hpp"

namespace metaland {

using CountMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

/// Rows are true classes, columns predicted classes.
struct ConfusionMatrix {
  CountMatrix counts;

  int classes() const { return static_cast<int>(counts.rows()); }
  std::int64_t total() const { return counts.sum(); }
  ConfusionMatrix& operator+=(const ConfusionMatrix& other);
};

ConfusionMatrix confusion(std::span<const int> truth, std::span<const int> predicted, int num_classes);

/// trace / total.
double accuracy(const ConfusionMatrix& cm);
/// Cohen's kappa (p_o - p_e) / (1 - p_e).
double cohen_kappa(const ConfusionMatrix& cm);
/// Mean of TP / (TP + FP + FN) over non-ignored classes with a non-zero denominator.
double mean_iou(const ConfusionMatrix& cm, const std::set<int>& ignore = {});

// ---- per-shot evaluation -------------------------------------------------

struct ShotSetting {
  double alpha = 0.0;
  int steps = 0;
};

struct ShotCurveConfig {
  std::vector<int> shots{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  int tasks_per_point = 100;
  int ways = 4;
  int query_per_class = 10;
  std::uint64_t seed = 0;
  std::set<int> ignore_classes;  // ignored by mIoU (original class ids)
};

struct ShotRow {
  int shot = 0;
  std::uint64_t seed = 0;
  int tasks = 0;
  double accuracy_mean = 0, accuracy_std = 0;
  double kappa_mean = 0, kappa_std = 0;
  double miou_mean = 0, miou_std = 0;
  double query_loss_mean = 0;
  // Metrics of one confusion matrix pooled over every task's query predictions.
  double pooled_accuracy = 0, pooled_kappa = 0, pooled_miou = 0;
};

/// Adapts `params` on the first s support examples per class of a fixed task sample
/// (drawn once with k = max shot) and scores each task's full query set.
/// Macro statistics skip tasks whose kappa or mIoU is undefined.
std::vector<ShotRow> shot_curve(const ParamSet& params, const RegionDataset& dataset, MetaSet meta_set,
                                const ShotCurveConfig& cfg, const std::function<ShotSetting(int shot)>& setting);

/// `shot,seed,tasks,accuracy_mean,...,query_loss_mean`, 6 decimals.
std::string metrics_csv(const std::vector<ShotRow>& rows);
/// `shot,seed,tasks,accuracy,kappa,miou` of the pooled confusion matrices.
std::string pooled_metrics_csv(const std::vector<ShotRow>& rows);

}  // namespace metaland
