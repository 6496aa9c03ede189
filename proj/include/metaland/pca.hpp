#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <Eigen/Core>

#include "metaland/errors.hpp"
#include "metaland/rng.hpp"

namespace metaland {

template <typename Scalar>
struct PcaResult {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Vector mean;                // length D
  Matrix basis;               // D x components, orthonormal columns
  Vector explained_variance;  // per component, sample covariance (N - 1)
  Matrix projections;         // N x components
  Scalar total_variance = 0;  // trace of the sample covariance
};

/// Flip each component so that its largest-magnitude coordinate is positive.
template <typename Scalar>
void normalize_signs(PcaResult<Scalar>& pca) {
  for (Eigen::Index c = 0; c < pca.basis.cols(); ++c) {
    Eigen::Index arg = 0;
    pca.basis.col(c).cwiseAbs().maxCoeff(&arg);
    if (pca.basis(arg, c) < 0) {
      pca.basis.col(c) *= -1;
      pca.projections.col(c) *= -1;
    }
  }
}

/// Principal components of the rows of `vectors` by power iteration with deflation.
///
/// Iterates in the smaller of sample space and feature space: with N rows of dimension
/// D > N the N x N Gram matrix of the centered data stands in for the D x D covariance,
/// and components are mapped back through X^T. Throws DegenerateError when all rows coincide.
template <typename Derived>
PcaResult<typename Derived::Scalar> pca(const Eigen::MatrixBase<Derived>& vectors, int components,
                                        int max_iters = 1000, typename Derived::Scalar tol = 1e-12,
                                        std::uint64_t seed = 0x5eed) {
  using Scalar = typename Derived::Scalar;
  using Matrix = typename PcaResult<Scalar>::Matrix;
  using Vector = typename PcaResult<Scalar>::Vector;
  const Eigen::Index n = vectors.rows(), dim = vectors.cols();
  if (n < 2) throw ValidationError("pca: need at least 2 vectors");
  if (components < 1 || components > dim) {
    throw ValidationError("pca: components must lie in [1, " + std::to_string(dim) + "]");
  }
  PcaResult<Scalar> out;
  out.mean = vectors.colwise().mean().transpose();
  const Matrix centered = vectors.rowwise() - out.mean.transpose();
  const Scalar denom = static_cast<Scalar>(n - 1);
  out.total_variance = centered.squaredNorm() / denom;
  if (!(out.total_variance > 0)) throw DegenerateError("pca: input has zero variance in every direction");

  const bool gram = n < dim;
  const Matrix op = gram ? Matrix(centered * centered.transpose() / denom)
                         : Matrix(centered.transpose() * centered / denom);
  const Eigen::Index space = op.rows();
  const Scalar floor = out.total_variance * std::numeric_limits<Scalar>::epsilon() * 16;

  Rng rng(seed);
  std::normal_distribution<Scalar> normal(0, 1);
  auto random_vector = [&](Eigen::Index size) {
    Vector v(size);
    for (Eigen::Index i = 0; i < size; ++i) v[i] = normal(rng);
    return v;
  };
  auto orthogonalize = [](Vector& v, const Matrix& against, Eigen::Index upto) {
    for (int pass = 0; pass < 2; ++pass) {
      for (Eigen::Index j = 0; j < upto; ++j) v -= against.col(j).dot(v) * against.col(j);
    }
  };

  // Eigenvectors of `op`, found one at a time against the already-found ones.
  const Eigen::Index found_max = std::min<Eigen::Index>(components, space);
  Matrix eig(space, found_max);
  for (Eigen::Index c = 0; c < found_max; ++c) {
    Vector v = random_vector(space);
    orthogonalize(v, eig, c);
    v.normalize();
    for (int it = 0; it < max_iters; ++it) {
      Vector w = op * v;
      orthogonalize(w, eig, c);
      const Scalar norm = w.norm();
      if (norm <= floor) break;
      w /= norm;
      const Scalar change = (w - v).norm();
      v = w;
      if (change < tol) break;
    }
    eig.col(c) = v;
  }

  out.basis.resize(dim, components);
  for (Eigen::Index c = 0; c < components; ++c) {
    Vector v = (gram && c < found_max) ? Vector(centered.transpose() * eig.col(c))
                                       : (c < found_max ? Vector(eig.col(c)) : Vector::Zero(dim));
    orthogonalize(v, out.basis, c);
    if (v.norm() <= std::sqrt(floor)) {
      // No variance left in this direction; any orthonormal completion will do.
      v = random_vector(dim);
      orthogonalize(v, out.basis, c);
    }
    out.basis.col(c) = v.normalized();
  }
  out.projections = centered * out.basis;
  out.explained_variance = out.projections.colwise().squaredNorm().transpose() / denom;
  normalize_signs(out);
  return out;
}

}  // namespace metaland
