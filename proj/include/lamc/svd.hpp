#pragma once

// Leading singular triplets of a dense or sparse matrix.
//
// Small problems go straight to a dense divide-and-conquer SVD. Larger ones
// use randomized block subspace iteration with a Rayleigh-Ritz step per
// sweep: Y = A V, U = orth(Y), W = A^T U = P S Q^T, so that U Q, S, P are the
// current Ritz triplets. The loop stops once the wanted singular values stop
// moving and every wanted triplet has a small residual ||A v - s u||.

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>

#include "lamc/error.hpp"
#include "lamc/matrix.hpp"
#include "lamc/random.hpp"

namespace lamc {

struct SvdOptions {
  int max_iterations = 300;
  double value_tolerance = 1e-8;
  double residual_tolerance = 1e-6;
  Index dense_cutoff = 64;  // min(rows, cols) at or below this uses the dense path
  Index oversample = 10;
  std::uint64_t seed = 0x5eed;
};

struct SingularTriplets {
  Eigen::VectorXd values;  // non-increasing
  DenseMatrix left;        // rows x count, orthonormal columns
  DenseMatrix right;       // cols x count, orthonormal columns
  int iterations = 0;      // 0 for the dense path
  double max_residual = 0.0;
};

namespace detail {

// Fixes the sign of each pair so the largest-magnitude entry of the right
// vector is positive.
inline void canonical_signs(SingularTriplets& t) {
  for (Index j = 0; j < t.right.cols(); ++j) {
    Index arg = 0;
    t.right.col(j).cwiseAbs().maxCoeff(&arg);
    if (t.right(arg, j) < 0.0) {
      t.right.col(j) *= -1.0;
      t.left.col(j) *= -1.0;
    }
  }
}

template <class Mat>
double max_residual(const Mat& a, const SingularTriplets& t) {
  double worst = 0.0;
  const DenseMatrix av = a * t.right;
  for (Index j = 0; j < t.values.size(); ++j)
    worst = std::max(worst, (av.col(j) - t.values(j) * t.left.col(j)).norm());
  return worst;
}

inline SingularTriplets dense_svd(const DenseMatrix& a, Index count) {
  Eigen::BDCSVD<DenseMatrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  SingularTriplets t;
  t.values = svd.singularValues().head(count);
  t.left = svd.matrixU().leftCols(count);
  t.right = svd.matrixV().leftCols(count);
  return t;
}

inline DenseMatrix orthonormal_basis(const DenseMatrix& y) {
  Eigen::HouseholderQR<DenseMatrix> qr(y);
  return qr.householderQ() * DenseMatrix::Identity(y.rows(), y.cols());
}

template <class Mat>
SingularTriplets subspace_svd(const Mat& a, Index count, const SvdOptions& opt) {
  const Index rows = a.rows(), cols = a.cols();
  const Index width = std::min(std::min(rows, cols), count + opt.oversample);
  Rng rng(opt.seed);
  DenseMatrix v(cols, width);
  for (Index j = 0; j < width; ++j)
    for (Index i = 0; i < cols; ++i) v(i, j) = standard_normal(rng);
  v = orthonormal_basis(v);

  SingularTriplets t;
  Eigen::VectorXd previous = Eigen::VectorXd::Constant(count, -1.0);
  double residual = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= opt.max_iterations; ++it) {
    const DenseMatrix y = a * v;
    if (it > 1) {
      // residual of the previous Ritz triplets, reusing this sweep's product
      residual = 0.0;
      for (Index j = 0; j < count; ++j)
        residual = std::max(residual, (y.col(j) - t.values(j) * t.left.col(j)).norm());
      const double moved = (t.values - previous).cwiseAbs().maxCoeff();
      if (moved <= opt.value_tolerance && residual <= opt.residual_tolerance) {
        t.iterations = it - 1;
        t.max_residual = residual;
        return t;
      }
      previous = t.values;
    }
    const DenseMatrix u = orthonormal_basis(y);
    const DenseMatrix w = a.transpose() * u;  // cols x width
    Eigen::JacobiSVD<DenseMatrix> small(w, Eigen::ComputeThinU | Eigen::ComputeThinV);
    v = small.matrixU();  // right singular vectors of A (cols x width)
    t.values = small.singularValues().head(count);
    t.left = u * small.matrixV().leftCols(count);
    t.right = v.leftCols(count);
  }
  std::ostringstream os;
  os << "truncated SVD did not converge in " << opt.max_iterations
     << " iterations (residual " << residual << ")";
  throw NumericalError(os.str());
}

}  // namespace detail

// The `count` leading singular triplets of `a`.
template <class Mat>
SingularTriplets truncated_svd(const Mat& a, Index count, const SvdOptions& opt = {}) {
  const Index smallest = std::min<Index>(a.rows(), a.cols());
  if (count < 1 || count > smallest) {
    throw DomainError("truncated_svd: requested " + std::to_string(count) +
                      " triplets from a " + std::to_string(a.rows()) + "x" +
                      std::to_string(a.cols()) + " matrix");
  }
  SingularTriplets t;
  if (smallest <= opt.dense_cutoff || count + opt.oversample >= smallest) {
    t = detail::dense_svd(DenseMatrix(a), count);
    t.max_residual = detail::max_residual(a, t);
  } else {
    t = detail::subspace_svd(a, count, opt);
  }
  detail::canonical_signs(t);
  return t;
}

}  // namespace lamc
