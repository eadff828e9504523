#pragma once

// Lloyd's k-means with k-means++ seeding and seeded restarts.

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <vector>

#include "lamc/error.hpp"
#include "lamc/matrix.hpp"
#include "lamc/random.hpp"

namespace lamc {

struct KMeansOptions {
  int restarts = 10;
  int max_iterations = 100;
};

struct KMeansResult {
  std::vector<int> labels;  // in [0, k)
  DenseMatrix centroids;    // k x dim
  double inertia = 0.0;
  int iterations = 0;
  std::vector<double> inertia_history;  // after each assignment step
  // Fewer distinct points than clusters; some clusters share a location.
  bool degenerate = false;
};

namespace detail {

inline double squared_distance(const DenseMatrix& points, Index i,
                               const DenseMatrix& centroids, Index c) {
  return (points.row(i) - centroids.row(c)).squaredNorm();
}

// Nearest centroid, lowest id on ties.
inline int nearest(const DenseMatrix& points, Index i, const DenseMatrix& centroids,
                   double& best) {
  best = std::numeric_limits<double>::infinity();
  int arg = 0;
  for (Index c = 0; c < centroids.rows(); ++c) {
    const double d = squared_distance(points, i, centroids, c);
    if (d < best) {
      best = d;
      arg = static_cast<int>(c);
    }
  }
  return arg;
}

inline DenseMatrix plus_plus_seeds(const DenseMatrix& points, Index k, Rng& rng) {
  const Index n = points.rows();
  DenseMatrix centroids(k, points.cols());
  std::vector<double> d2(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  Index pick = static_cast<Index>(uniform_below(rng, static_cast<std::uint64_t>(n)));
  for (Index c = 0; c < k; ++c) {
    centroids.row(c) = points.row(pick);
    double total = 0.0;
    for (Index i = 0; i < n; ++i) {
      auto& di = d2[static_cast<std::size_t>(i)];
      di = std::min(di, squared_distance(points, i, centroids, c));
      total += di;
    }
    if (c + 1 == k) break;
    if (total <= 0.0) {
      // every point already coincides with a centroid
      pick = static_cast<Index>(uniform_below(rng, static_cast<std::uint64_t>(n)));
      continue;
    }
    double target = uniform01(rng) * total;
    pick = n - 1;
    for (Index i = 0; i < n; ++i) {
      target -= d2[static_cast<std::size_t>(i)];
      if (target < 0.0) {
        pick = i;
        break;
      }
    }
  }
  return centroids;
}

inline KMeansResult lloyd(const DenseMatrix& points, DenseMatrix centroids,
                          int max_iterations) {
  const Index n = points.rows(), k = centroids.rows();
  KMeansResult r;
  r.labels.assign(static_cast<std::size_t>(n), -1);
  std::vector<double> dist(static_cast<std::size_t>(n));
  for (int it = 1; it <= max_iterations; ++it) {
    bool changed = false;
    double total = 0.0;
    for (Index i = 0; i < n; ++i) {
      double d = 0.0;
      const int c = nearest(points, i, centroids, d);
      if (c != r.labels[static_cast<std::size_t>(i)]) changed = true;
      r.labels[static_cast<std::size_t>(i)] = c;
      dist[static_cast<std::size_t>(i)] = d;
      total += d;
    }
    r.inertia_history.push_back(total);
    r.iterations = it;
    if (!changed && it > 1) break;

    DenseMatrix sums = DenseMatrix::Zero(k, points.cols());
    std::vector<Index> counts(static_cast<std::size_t>(k), 0);
    for (Index i = 0; i < n; ++i) {
      const int c = r.labels[static_cast<std::size_t>(i)];
      sums.row(c) += points.row(i);
      ++counts[static_cast<std::size_t>(c)];
    }
    std::vector<char> taken(static_cast<std::size_t>(n), 0);
    for (Index c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        centroids.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
        continue;
      }
      // empty cluster: move it onto the point farthest from its centroid
      Index far = 0;
      double far_d = -1.0;
      for (Index i = 0; i < n; ++i) {
        if (!taken[static_cast<std::size_t>(i)] && dist[static_cast<std::size_t>(i)] > far_d) {
          far_d = dist[static_cast<std::size_t>(i)];
          far = i;
        }
      }
      taken[static_cast<std::size_t>(far)] = 1;
      dist[static_cast<std::size_t>(far)] = 0.0;
      centroids.row(c) = points.row(far);
    }
  }
  // final assignment against the last centroids
  double total = 0.0;
  for (Index i = 0; i < n; ++i) {
    double d = 0.0;
    r.labels[static_cast<std::size_t>(i)] = nearest(points, i, centroids, d);
    total += d;
  }
  r.inertia = total;
  if (total < r.inertia_history.back()) r.inertia_history.push_back(total);
  r.centroids = std::move(centroids);
  return r;
}

inline Index distinct_rows(const DenseMatrix& points, Index stop_at) {
  std::vector<Index> reps;
  for (Index i = 0; i < points.rows() && static_cast<Index>(reps.size()) < stop_at; ++i) {
    bool seen = false;
    for (Index j : reps)
      if (points.row(i) == points.row(j)) {
        seen = true;
        break;
      }
    if (!seen) reps.push_back(i);
  }
  return static_cast<Index>(reps.size());
}

}  // namespace detail

// Clusters the rows of `points` into k groups; the lowest-inertia restart
// wins, earlier restarts on ties.
inline KMeansResult kmeans(const DenseMatrix& points, Index k, std::uint64_t seed,
                           const KMeansOptions& opt = {}) {
  if (k < 1) throw DomainError("kmeans: k must be >= 1");
  if (k > points.rows())
    throw DomainError("kmeans: k=" + std::to_string(k) + " exceeds " +
                      std::to_string(points.rows()) + " points");
  if (!points.allFinite()) throw NumericalError("kmeans: non-finite coordinates");
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int restart = 0; restart < std::max(1, opt.restarts); ++restart) {
    Rng rng(derive_seed({seed, static_cast<std::uint64_t>(restart)}));
    auto r = detail::lloyd(points, detail::plus_plus_seeds(points, k, rng), opt.max_iterations);
    if (r.inertia < best.inertia) best = std::move(r);
  }
  best.degenerate = detail::distinct_rows(points, k) < k;
  return best;
}

}  // namespace lamc
