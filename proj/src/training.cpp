#include "metaland/training.hpp"

#include <algorithm>
#include <cmath>

#include "metaland/autodiff.hpp"
#include "metaland/errors.hpp"
#include "metaland/models.hpp"

namespace metaland {

namespace {

bool per_pixel_model(const ParamSet& params) { return detect_architecture(params) == Architecture::unet; }

void guard(double loss, const char* phase, int iteration) {
  if (!std::isfinite(loss) || loss > kDivergenceThreshold) {
    throw DivergenceError(std::string(phase) + " diverged at iteration " + std::to_string(iteration) +
                          " (loss " + std::to_string(loss) + ")");
  }
}

struct TaskBatches {
  Batch support, query;
};

TaskBatches task_batches(const RegionDataset& dataset, const Task& task, bool per_pixel) {
  return {make_batch(dataset, task.support, task.ways, per_pixel), make_batch(dataset, task.query, task.ways, per_pixel)};
}

}  // namespace

void TrainConfig::validate() const {
  // Zero step sizes are accepted as the no-adaptation / frozen-theta limits.
  if (!(alpha >= 0.0)) throw ConfigError("train: alpha must be >= 0");
  if (!(beta >= 0.0)) throw ConfigError("train: beta must be >= 0");
  if (inner_steps < 1) throw ConfigError("train: inner_steps must be >= 1");
  if (meta_batch < 1) throw ConfigError("train: meta_batch must be >= 1");
  if (shots < 1 || ways < 1) throw ConfigError("train: shots and ways must be >= 1");
  if (iterations < 0) throw ConfigError("train: iterations must be >= 0");
}

const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::random:
      return "random";
    case Provenance::pretrained:
      return "pretrained";
    case Provenance::maml:
      return "maml";
  }
  return "?";
}

Tensor batch_loss(const ParamSet& params, const Batch& batch) {
  return softmax_cross_entropy(forward(params, batch.images), batch.labels);
}

double batch_accuracy(const ParamSet& params, const Batch& batch) {
  const auto predicted = argmax_axis1(forward(params, batch.images));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) correct += predicted[i] == batch.labels[i];
  return static_cast<double>(correct) / static_cast<double>(predicted.size());
}

TrainResult pretrain(const ParamSet& init, const RegionDataset& dataset, const TrainConfig& cfg) {
  cfg.validate();
  const bool per_pixel = per_pixel_model(init);
  TaskSampler sampler(dataset, MetaSet::train, derive_seed(cfg.seed, "pretrain/tasks"));
  TrainResult result;
  ParamSet params = init.detached();
  for (int it = 0; it < cfg.iterations; ++it) {
    const auto task = sampler.next(cfg.shots, cfg.ways, cfg.query_per_class);
    const auto batches = task_batches(dataset, task, per_pixel);
    const auto merged = concat_batches(batches.support, batches.query);
    const auto leaves = params.as_leaves();
    const auto loss = batch_loss(leaves, merged);
    guard(loss.item(), "pretraining", it);
    result.loss_history.push_back(loss.item());
    params = descend(params, gradient(loss, leaves), cfg.alpha);
  }
  result.checkpoint = {params, Provenance::pretrained, static_cast<std::uint64_t>(cfg.iterations)};
  return result;
}

TrainResult maml_train(const ParamSet& theta, const RegionDataset& dataset, const TrainConfig& cfg) {
  cfg.validate();
  const bool per_pixel = per_pixel_model(theta);
  TaskSampler sampler(dataset, MetaSet::train, derive_seed(cfg.seed, "maml/tasks"));
  TrainResult result;
  ParamSet params = theta.detached();
  for (int it = 0; it < cfg.iterations; ++it) {
    std::vector<Eigen::VectorXd> per_task;
    double loss_sum = 0.0;
    for (int b = 0; b < cfg.meta_batch; ++b) {
      const auto task = sampler.next(cfg.shots, cfg.ways, cfg.query_per_class);
      const auto batches = task_batches(dataset, task, per_pixel);
      const auto meta = gradient_through_update(
          params, [&](const ParamSet& p) { return batch_loss(p, batches.support); },
          [&](const ParamSet& p) { return batch_loss(p, batches.query); }, cfg.alpha, cfg.inner_steps,
          cfg.second_order);
      guard(meta.query_loss, "meta-training", it);
      loss_sum += meta.query_loss;
      per_task.push_back(flatten_params(meta.grads));
    }
    // Fixed task order keeps the sum bit-reproducible.
    Eigen::VectorXd total = Eigen::VectorXd::Zero(params.numel());
    for (const auto& g : per_task) total += g;
    if (cfg.average_meta_batch) total /= static_cast<double>(cfg.meta_batch);
    params = unflatten_params(params, flatten_params(params) - cfg.beta * total);
    result.loss_history.push_back(loss_sum / cfg.meta_batch);
  }
  result.checkpoint = {params, Provenance::maml, static_cast<std::uint64_t>(cfg.iterations)};
  return result;
}

ParamSet adapt(const ParamSet& params, const Batch& support, double alpha, int steps) {
  if (steps < 0) throw ValidationError("adapt: steps must be >= 0");
  ParamSet phi = params.detached();
  if (steps == 0) return phi;
  if (!support.images.defined() || support.labels.empty()) {
    throw ValidationError("adapt: empty support set with " + std::to_string(steps) + " steps");
  }
  if (alpha == 0.0) return phi;
  for (int s = 0; s < steps; ++s) {
    const auto leaves = phi.as_leaves();
    phi = descend(phi, gradient(batch_loss(leaves, support), leaves), alpha);
  }
  return phi;
}

std::vector<double> default_alpha_grid() {
  return {0.001, 0.0025, 0.005, 0.0075, 0.01, 0.025, 0.05, 0.075, 0.1, 0.25, 0.5, 0.75, 1.0};
}

std::vector<int> default_step_grid() { return {1, 2, 5, 10, 50, 100}; }

GridSearchResult finetune_grid_search(const ParamSet& params, const RegionDataset& dataset, MetaSet meta_set,
                                      const GridSearchConfig& cfg) {
  if (cfg.alphas.empty() || cfg.step_counts.empty()) throw ConfigError("grid search: grids must be non-empty");
  if (cfg.num_tasks < 1) throw ConfigError("grid search: need at least one task");
  for (int s : cfg.step_counts) {
    if (s < 0) throw ConfigError("grid search: step counts must be >= 0");
  }
  const bool per_pixel = per_pixel_model(params);
  TaskSampler sampler(dataset, meta_set, cfg.seed);
  std::vector<TaskBatches> tasks;
  for (int i = 0; i < cfg.num_tasks; ++i) {
    const auto task = sampler.next(cfg.shot, cfg.ways, cfg.query_per_class);
    tasks.push_back({cfg.shot > 0 ? make_batch(dataset, task.support, task.ways, per_pixel) : Batch{},
                     make_batch(dataset, task.query, task.ways, per_pixel)});
  }
  std::vector<int> steps_sorted = cfg.step_counts;
  std::sort(steps_sorted.begin(), steps_sorted.end());
  steps_sorted.erase(std::unique(steps_sorted.begin(), steps_sorted.end()), steps_sorted.end());

  GridSearchResult result;
  for (double alpha : cfg.alphas) {
    std::vector<double> acc(steps_sorted.size(), 0.0);
    for (const auto& t : tasks) {
      if (cfg.shot == 0) {
        const double a = batch_accuracy(params, t.query);
        for (auto& v : acc) v += a;
        continue;
      }
      // Walk the step grid incrementally on the same support batch.
      ParamSet phi = params.detached();
      int done = 0;
      for (std::size_t i = 0; i < steps_sorted.size(); ++i) {
        phi = adapt(phi, t.support, alpha, steps_sorted[i] - done);
        done = steps_sorted[i];
        acc[i] += batch_accuracy(phi, t.query);
      }
    }
    for (std::size_t i = 0; i < steps_sorted.size(); ++i) {
      result.table.push_back({alpha, steps_sorted[i], acc[i] / static_cast<double>(tasks.size())});
    }
  }
  result.best = result.table.front();
  for (const auto& p : result.table) {
    const bool better = p.accuracy > result.best.accuracy ||
                        (p.accuracy == result.best.accuracy &&
                         (p.alpha < result.best.alpha || (p.alpha == result.best.alpha && p.steps < result.best.steps)));
    if (better) result.best = p;
  }
  return result;
}

}  // namespace metaland
