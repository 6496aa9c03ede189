#include "metaland/analysis.hpp"

#include <charconv>

#include "metaland/autodiff.hpp"
#include "metaland/errors.hpp"
#include "metaland/models.hpp"
#include "metaland/training.hpp"

namespace metaland {

std::vector<EmbeddingRow> weight_adaptation_map(const ParamSet& theta, const RegionDataset& dataset, MetaSet meta_set,
                                                const WeightMapConfig& cfg) {
  if (cfg.num_tasks < 1) throw ConfigError("weight map: need at least one task");
  if (cfg.shots < 1) throw ConfigError("weight map: need at least one shot");
  const bool per_pixel = detect_architecture(theta) == Architecture::unet;
  const auto base = flatten_params(theta);

  TaskSampler sampler(dataset, meta_set, derive_seed(cfg.seed, "analysis/weight-map"));
  Eigen::MatrixXd vectors(cfg.num_tasks + 1, base.size());
  vectors.row(0) = base.transpose();
  std::vector<EmbeddingRow> rows;
  rows.push_back({"theta", "", -1, 0, 0});
  for (int i = 0; i < cfg.num_tasks; ++i) {
    const auto task = sampler.next(cfg.shots, cfg.ways, 1);
    const auto support = make_batch(dataset, task.support, task.ways, per_pixel);
    vectors.row(i + 1) = flatten_params(adapt(theta, support, cfg.alpha, 1)).transpose();
    rows.push_back({"adapted", task.region_id, i, 0, 0});
  }

  const bool moved = ((vectors.rowwise() - base.transpose()).array() != 0).any();
  if (!moved) return rows;  // every adapted model is theta itself
  const auto result = pca(vectors, 2);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    rows[r].pc1 = result.projections(static_cast<Eigen::Index>(r), 0);
    rows[r].pc2 = result.projections(static_cast<Eigen::Index>(r), 1);
  }
  return rows;
}

namespace {

// Shortest text that reads back to the same double.
std::string shortest(double v) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

}  // namespace

std::string embedding_csv(const std::vector<EmbeddingRow>& rows) {
  std::string out = "kind,region_id,task_id,pc1,pc2\n";
  for (const auto& r : rows) {
    out += r.kind + ',' + r.region_id + ',' + std::to_string(r.task_id) + ',' + shortest(r.pc1) + ',' + shortest(r.pc2) + '\n';
  }
  return out;
}

LossSlice loss_surface_1d(const ParamSet& theta, const Batch& support, const std::vector<Batch>& queries,
                          const std::vector<double>& alphas) {
  if (alphas.empty()) throw ValidationError("loss slice: empty alpha grid");
  if (queries.empty()) throw ValidationError("loss slice: no query tasks");
  const auto leaves = theta.as_leaves();
  const auto g = gradient(batch_loss(leaves, support), leaves);
  const auto base = theta.detached();

  LossSlice slice;
  slice.alphas = alphas;
  slice.gradient_norm = flatten_params(g).norm();
  slice.losses.resize(static_cast<Eigen::Index>(queries.size()), static_cast<Eigen::Index>(alphas.size()));
  for (std::size_t a = 0; a < alphas.size(); ++a) {
    const auto moved = alphas[a] == 0.0 ? base : descend(base, g, alphas[a]);
    for (std::size_t q = 0; q < queries.size(); ++q) {
      slice.losses(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(a)) = batch_loss(moved, queries[q]).item();
    }
  }
  return slice;
}

std::vector<double> alpha_grid(double max_alpha, int count) {
  if (count < 2 || !(max_alpha > 0)) throw ValidationError("alpha grid: need count >= 2 and a positive maximum");
  std::vector<double> out(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) out[static_cast<std::size_t>(i)] = max_alpha * i / (count - 1);
  return out;
}

std::string loss_slice_csv(const LossSlice& slice) {
  std::string out = "alpha,query_task_id,loss\n";
  for (Eigen::Index q = 0; q < slice.losses.rows(); ++q) {
    for (std::size_t a = 0; a < slice.alphas.size(); ++a) {
      out += shortest(slice.alphas[a]) + ',' + std::to_string(q) + ',' +
             shortest(slice.losses(q, static_cast<Eigen::Index>(a))) + '\n';
    }
  }
  return out;
}

SliceTasks sample_slice_tasks(const RegionDataset& dataset, MetaSet meta_set, int shots, int ways, int num_queries,
                              int query_per_class, std::uint64_t seed) {
  if (num_queries < 1) throw ConfigError("loss slice: need at least one query task");
  TaskSampler sampler(dataset, meta_set, seed);
  SliceTasks out;
  out.support = sampler.next(shots, ways, query_per_class);
  for (int i = 0; i < num_queries; ++i) {
    out.queries.push_back(
        sampler.next_in(out.support.region_id, out.support.season, out.support.ways, 0, query_per_class));
  }
  return out;
}

}  // namespace metaland
