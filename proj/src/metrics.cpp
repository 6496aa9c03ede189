#include "metaland/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "metaland/errors.hpp"
#include "metaland/models.hpp"
#include "metaland/training.hpp"

namespace metaland {

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.classes() != classes()) throw DimensionError("confusion matrices of different class counts");
  counts += other.counts;
  return *this;
}

ConfusionMatrix confusion(std::span<const int> truth, std::span<const int> predicted, int num_classes) {
  if (num_classes < 1) throw ValidationError("confusion: need at least one class");
  if (truth.size() != predicted.size()) {
    throw ValidationError("confusion: " + std::to_string(truth.size()) + " labels vs " +
                          std::to_string(predicted.size()) + " predictions");
  }
  ConfusionMatrix cm{CountMatrix::Zero(num_classes, num_classes)};
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int t = truth[i], p = predicted[i];
    if (t < 0 || t >= num_classes || p < 0 || p >= num_classes) {
      throw ValidationError("confusion: label pair (" + std::to_string(t) + ", " + std::to_string(p) +
                            ") outside [0, " + std::to_string(num_classes) + ")");
    }
    ++cm.counts(t, p);
  }
  return cm;
}

double accuracy(const ConfusionMatrix& cm) {
  const auto total = cm.total();
  if (total <= 0) throw UndefinedMetric("accuracy of an empty confusion matrix");
  return static_cast<double>(cm.counts.trace()) / static_cast<double>(total);
}

double cohen_kappa(const ConfusionMatrix& cm) {
  const auto total = cm.total();
  if (total <= 0) throw UndefinedMetric("kappa of an empty confusion matrix");
  const double n = static_cast<double>(total);
  const double observed = static_cast<double>(cm.counts.trace()) / n;
  const Eigen::VectorXd rows = cm.counts.rowwise().sum().cast<double>();
  const Eigen::VectorXd cols = cm.counts.colwise().sum().transpose().cast<double>();
  const double expected = rows.dot(cols) / (n * n);
  if (expected == 1.0) throw UndefinedMetric("kappa undefined: expected agreement is 1");
  return (observed - expected) / (1.0 - expected);
}

double mean_iou(const ConfusionMatrix& cm, const std::set<int>& ignore) {
  if (cm.total() <= 0) throw UndefinedMetric("mIoU of an empty confusion matrix");
  double sum = 0.0;
  int used = 0;
  for (int c = 0; c < cm.classes(); ++c) {
    if (ignore.contains(c)) continue;
    const auto tp = cm.counts(c, c);
    const auto fp = cm.counts.col(c).sum() - tp;
    const auto fn = cm.counts.row(c).sum() - tp;
    if (tp + fp + fn == 0) continue;
    sum += static_cast<double>(tp) / static_cast<double>(tp + fp + fn);
    ++used;
  }
  if (used == 0) throw UndefinedMetric("mIoU undefined: every class is ignored or absent");
  return sum / used;
}

namespace {

struct Stats {
  double mean = std::numeric_limits<double>::quiet_NaN();
  double std = std::numeric_limits<double>::quiet_NaN();
};

// Sample statistics over the finite entries.
Stats stats(const std::vector<double>& values) {
  std::vector<double> finite;
  for (double v : values) {
    if (std::isfinite(v)) finite.push_back(v);
  }
  Stats s;
  if (finite.empty()) return s;
  double sum = 0.0;
  for (double v : finite) sum += v;
  s.mean = sum / static_cast<double>(finite.size());
  double sq = 0.0;
  for (double v : finite) sq += (v - s.mean) * (v - s.mean);
  s.std = finite.size() > 1 ? std::sqrt(sq / static_cast<double>(finite.size() - 1)) : 0.0;
  return s;
}

template <typename F>
double or_nan(F f) {
  try {
    return f();
  } catch (const UndefinedMetric&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

std::set<int> relabeled_ignore(const std::set<int>& ignore, const std::vector<int>& ways) {
  std::set<int> out;
  for (std::size_t i = 0; i < ways.size(); ++i) {
    if (ignore.contains(ways[i])) out.insert(static_cast<int>(i));
  }
  return out;
}

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

std::vector<ShotRow> shot_curve(const ParamSet& params, const RegionDataset& dataset, MetaSet meta_set,
                                const ShotCurveConfig& cfg, const std::function<ShotSetting(int shot)>& setting) {
  if (cfg.shots.empty() || cfg.tasks_per_point < 1) throw ConfigError("shot curve: need shots and at least one task");
  const int max_shot = *std::max_element(cfg.shots.begin(), cfg.shots.end());
  const bool per_pixel = detect_architecture(params) == Architecture::unet;

  TaskSampler sampler(dataset, meta_set, cfg.seed);
  std::vector<Task> tasks;
  std::vector<Batch> queries;
  for (int i = 0; i < cfg.tasks_per_point; ++i) {
    tasks.push_back(sampler.next(max_shot, cfg.ways, cfg.query_per_class));
    queries.push_back(make_batch(dataset, tasks.back().query, tasks.back().ways, per_pixel));
  }

  std::vector<ShotRow> rows;
  for (int shot : cfg.shots) {
    if (shot < 0) throw ConfigError("shot curve: negative shot count");
    const auto s = setting(shot);
    std::vector<double> acc, kappa, miou, loss;
    ConfusionMatrix pooled{CountMatrix::Zero(cfg.ways, cfg.ways)};
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      ParamSet adapted = params.detached();
      if (shot > 0) {
        const auto subset = tasks[i].support_subset(shot);
        adapted = adapt(params, make_batch(dataset, subset, tasks[i].ways, per_pixel), s.alpha, s.steps);
      }
      const auto logits = forward(adapted, queries[i].images);
      const auto predicted = argmax_axis1(logits);
      const auto cm = confusion(queries[i].labels, predicted, cfg.ways);
      pooled += cm;
      const auto ignore = relabeled_ignore(cfg.ignore_classes, tasks[i].ways);
      acc.push_back(accuracy(cm));
      kappa.push_back(or_nan([&] { return cohen_kappa(cm); }));
      miou.push_back(or_nan([&] { return mean_iou(cm, ignore); }));
      loss.push_back(softmax_cross_entropy(logits, queries[i].labels).item());
    }
    ShotRow row;
    row.shot = shot;
    row.seed = cfg.seed;
    row.tasks = cfg.tasks_per_point;
    const auto a = stats(acc), k = stats(kappa), m = stats(miou), l = stats(loss);
    row.accuracy_mean = a.mean;
    row.accuracy_std = a.std;
    row.kappa_mean = k.mean;
    row.kappa_std = k.std;
    row.miou_mean = m.mean;
    row.miou_std = m.std;
    row.query_loss_mean = l.mean;
    row.pooled_accuracy = accuracy(pooled);
    row.pooled_kappa = or_nan([&] { return cohen_kappa(pooled); });
    // Pooled tasks may use different ways, so the ignore set only applies when it is empty or uniform.
    row.pooled_miou = or_nan([&] { return mean_iou(pooled, relabeled_ignore(cfg.ignore_classes, tasks.front().ways)); });
    rows.push_back(row);
  }
  return rows;
}

std::string metrics_csv(const std::vector<ShotRow>& rows) {
  std::string out = "shot,seed,tasks,accuracy_mean,accuracy_std,kappa_mean,kappa_std,miou_mean,miou_std,query_loss_mean\n";
  for (const auto& r : rows) {
    out += std::to_string(r.shot) + ',' + std::to_string(r.seed) + ',' + std::to_string(r.tasks) + ',' +
           fixed6(r.accuracy_mean) + ',' + fixed6(r.accuracy_std) + ',' + fixed6(r.kappa_mean) + ',' +
           fixed6(r.kappa_std) + ',' + fixed6(r.miou_mean) + ',' + fixed6(r.miou_std) + ',' +
           fixed6(r.query_loss_mean) + '\n';
  }
  return out;
}

std::string pooled_metrics_csv(const std::vector<ShotRow>& rows) {
  std::string out = "shot,seed,tasks,accuracy,kappa,miou\n";
  for (const auto& r : rows) {
    out += std::to_string(r.shot) + ',' + std::to_string(r.seed) + ',' + std::to_string(r.tasks) + ',' +
           fixed6(r.pooled_accuracy) + ',' + fixed6(r.pooled_kappa) + ',' + fixed6(r.pooled_miou) + '\n';
  }
  return out;
}

}  // namespace metaland
