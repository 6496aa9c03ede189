#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "metaland/errors.hpp"
#include "metaland/rng.hpp"

namespace metaland {

template <typename Scalar>
struct KMeansResult {
  std::vector<int> assignment;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> centroids;  // one row per cluster
  std::vector<Scalar> inertia_history;                              // after every assignment step
  Scalar inertia = 0;
  int iterations = 0;
};

/// Lloyd's algorithm on the rows of `points` with k-means++ seeding.
/// An empty cluster is re-seeded at the point farthest from its current centroid.
template <typename Derived>
KMeansResult<typename Derived::Scalar> kmeans(const Eigen::MatrixBase<Derived>& points, int num_clusters,
                                              std::uint64_t seed, int max_iters = 100) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = points.rows();
  if (num_clusters < 1) throw ValidationError("kmeans: need at least one cluster");
  if (n < num_clusters) {
    throw ValidationError("kmeans: " + std::to_string(n) + " items for " + std::to_string(num_clusters) + " clusters");
  }
  Rng rng(seed);
  KMeansResult<Scalar> out;
  out.centroids.resize(num_clusters, points.cols());

  std::vector<Scalar> nearest(static_cast<std::size_t>(n), std::numeric_limits<Scalar>::infinity());
  out.centroids.row(0) = points.row(std::uniform_int_distribution<Eigen::Index>(0, n - 1)(rng));
  for (int c = 1; c < num_clusters; ++c) {
    Scalar total = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], (points.row(i) - out.centroids.row(c - 1)).squaredNorm());
      total += nearest[i];
    }
    Eigen::Index pick = 0;
    if (total > 0) {
      Scalar target = std::uniform_real_distribution<Scalar>(0, total)(rng);
      for (pick = 0; pick < n - 1; ++pick) {
        target -= nearest[pick];
        if (target < 0) break;
      }
    } else {
      pick = std::uniform_int_distribution<Eigen::Index>(0, n - 1)(rng);
    }
    out.centroids.row(c) = points.row(pick);
  }

  out.assignment.assign(static_cast<std::size_t>(n), -1);
  std::vector<Scalar> dist(static_cast<std::size_t>(n));
  for (int iter = 0; iter < max_iters; ++iter) {
    bool changed = false;
    Scalar inertia = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      Scalar best_d = (points.row(i) - out.centroids.row(0)).squaredNorm();
      for (int c = 1; c < num_clusters; ++c) {
        const Scalar d = (points.row(i) - out.centroids.row(c)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      changed = changed || out.assignment[i] != best;
      out.assignment[i] = best;
      dist[i] = best_d;
      inertia += best_d;
    }
    out.inertia_history.push_back(inertia);
    out.inertia = inertia;
    out.iterations = iter + 1;
    if (!changed && iter > 0) break;

    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> sums =
        Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Zero(num_clusters, points.cols());
    std::vector<Eigen::Index> counts(static_cast<std::size_t>(num_clusters), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(out.assignment[i]) += points.row(i);
      ++counts[static_cast<std::size_t>(out.assignment[i])];
    }
    for (int c = 0; c < num_clusters; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        out.centroids.row(c) = sums.row(c) / static_cast<Scalar>(counts[static_cast<std::size_t>(c)]);
        continue;
      }
      Eigen::Index far = 0;
      for (Eigen::Index i = 1; i < n; ++i) {
        if (dist[i] > dist[far]) far = i;
      }
      out.centroids.row(c) = points.row(far);
      dist[far] = 0;
    }
  }
  return out;
}

}  // namespace metaland
