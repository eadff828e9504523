#pragma once

// Spectral co-clustering of a single block ("atom"): the block is read as a
// bipartite row/column graph, normalized by its degrees, embedded through
// the leading nontrivial singular vectors, and rows and columns are
// clustered jointly by k-means on the stacked embedding.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cmath>
#include <cstdint>
#include <functional>
#include <variant>
#include <vector>

#include "lamc/error.hpp"
#include "lamc/kmeans.hpp"
#include "lamc/matrix.hpp"
#include "lamc/random.hpp"
#include "lamc/svd.hpp"

namespace lamc {

struct DegreePair {
  Eigen::VectorXd row_degrees;  // row sums of the kept rows
  Eigen::VectorXd col_degrees;  // column sums of the kept columns
};

// D1^{-1/2} A D2^{-1/2} restricted to rows and columns with nonzero degree.
struct NormalizedBlock {
  std::variant<DenseMatrix, SparseMatrix> values;
  DegreePair degrees;
  std::vector<Index> kept_rows, kept_cols;        // local indices into the block
  std::vector<Index> dropped_rows, dropped_cols;  // all-zero lines

  Index rows() const { return static_cast<Index>(kept_rows.size()); }
  Index cols() const { return static_cast<Index>(kept_cols.size()); }
  DenseMatrix dense() const {
    if (const auto* d = std::get_if<DenseMatrix>(&values)) return *d;
    return DenseMatrix(std::get<SparseMatrix>(values));
  }
};

namespace detail {

inline void split_kept(const Eigen::VectorXd& degrees, std::vector<Index>& kept,
                       std::vector<Index>& dropped) {
  for (Index i = 0; i < degrees.size(); ++i)
    (degrees(i) > 0.0 ? kept : dropped).push_back(i);
}

inline Eigen::VectorXd gather(const Eigen::VectorXd& v, const std::vector<Index>& idx) {
  Eigen::VectorXd out(static_cast<Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out(static_cast<Index>(i)) = v(idx[i]);
  return out;
}

}  // namespace detail

inline NormalizedBlock normalize(const BlockView& block) {
  NormalizedBlock nb;
  if (block.kind() == StorageKind::dense) {
    const DenseMatrix a = block.dense();
    const Eigen::VectorXd d1 = a.rowwise().sum();
    const Eigen::VectorXd d2 = a.colwise().sum().transpose();
    detail::split_kept(d1, nb.kept_rows, nb.dropped_rows);
    detail::split_kept(d2, nb.kept_cols, nb.dropped_cols);
    if (nb.kept_rows.empty()) throw EmptyBlockError();
    nb.degrees.row_degrees = detail::gather(d1, nb.kept_rows);
    nb.degrees.col_degrees = detail::gather(d2, nb.kept_cols);
    const Eigen::VectorXd r = nb.degrees.row_degrees.cwiseSqrt().cwiseInverse();
    const Eigen::VectorXd c = nb.degrees.col_degrees.cwiseSqrt().cwiseInverse();
    DenseMatrix an(nb.rows(), nb.cols());
    for (Index j = 0; j < nb.cols(); ++j)
      for (Index i = 0; i < nb.rows(); ++i)
        an(i, j) = a(nb.kept_rows[static_cast<std::size_t>(i)],
                     nb.kept_cols[static_cast<std::size_t>(j)]) * r(i) * c(j);
    nb.values = std::move(an);
    return nb;
  }

  const SparseMatrix a = block.sparse();
  Eigen::VectorXd d1 = Eigen::VectorXd::Zero(a.rows());
  Eigen::VectorXd d2 = Eigen::VectorXd::Zero(a.cols());
  for (Index i = 0; i < a.outerSize(); ++i)
    for (SparseMatrix::InnerIterator it(a, i); it; ++it) {
      d1(it.row()) += it.value();
      d2(it.col()) += it.value();
    }
  detail::split_kept(d1, nb.kept_rows, nb.dropped_rows);
  detail::split_kept(d2, nb.kept_cols, nb.dropped_cols);
  if (nb.kept_rows.empty()) throw EmptyBlockError();
  nb.degrees.row_degrees = detail::gather(d1, nb.kept_rows);
  nb.degrees.col_degrees = detail::gather(d2, nb.kept_cols);
  std::vector<Index> col_pos(static_cast<std::size_t>(a.cols()), -1);
  for (std::size_t j = 0; j < nb.kept_cols.size(); ++j)
    col_pos[static_cast<std::size_t>(nb.kept_cols[j])] = static_cast<Index>(j);
  SparseMatrix an(nb.rows(), nb.cols());
  an.reserve(a.nonZeros());
  for (Index i = 0; i < nb.rows(); ++i) {
    const Index src = nb.kept_rows[static_cast<std::size_t>(i)];
    const double ri = 1.0 / std::sqrt(d1(src));
    an.startVec(i);
    for (SparseMatrix::InnerIterator it(a, src); it; ++it) {
      const Index j = col_pos[static_cast<std::size_t>(it.col())];
      an.insertBack(i, j) = it.value() * ri / std::sqrt(d2(it.col()));
    }
  }
  an.finalize();
  nb.values = std::move(an);
  return nb;
}

// Number of nontrivial singular pairs used for k clusters: ceil(log2 k).
inline Index embedding_width(Index k) {
  if (k < 2) throw DomainError("spectral co-clustering needs k >= 2");
  Index l = 0;
  while ((Index{1} << l) < k) ++l;
  return l;
}

struct SpectralEmbedding {
  DenseMatrix z;  // (rows + cols) x l: scaled left vectors, then right vectors
  Index l = 0;
  Eigen::VectorXd singular_values;  // the l + 1 leading values
};

// Z = [D1^{-1/2} U_hat; D2^{-1/2} V_hat], skipping the leading pair.
inline SpectralEmbedding build_embedding(const SingularTriplets& triplets,
                                         const DegreePair& degrees, Index k) {
  const Index l = embedding_width(k);
  if (triplets.values.size() < l + 1)
    throw DomainError("embedding needs " + std::to_string(l + 1) + " singular triplets, got " +
                      std::to_string(triplets.values.size()));
  const Index rows = degrees.row_degrees.size(), cols = degrees.col_degrees.size();
  SpectralEmbedding e;
  e.l = l;
  e.singular_values = triplets.values.head(l + 1);
  e.z.resize(rows + cols, l);
  const Eigen::VectorXd r = degrees.row_degrees.cwiseSqrt().cwiseInverse();
  const Eigen::VectorXd c = degrees.col_degrees.cwiseSqrt().cwiseInverse();
  e.z.topRows(rows) = r.asDiagonal() * triplets.left.middleCols(1, l);
  e.z.bottomRows(cols) = c.asDiagonal() * triplets.right.middleCols(1, l);
  return e;
}

struct BlockCoClusterResult {
  std::vector<int> row_labels;  // per block row, -1 when dropped
  std::vector<int> col_labels;  // per block column, -1 when dropped
  int k = 0;
  double inertia = 0.0;
  std::vector<Index> dropped_rows, dropped_cols;
  Eigen::VectorXd singular_values;
  bool degenerate = false;
};

struct AtomOptions {
  SvdOptions svd;
  KMeansOptions kmeans;
};

// Full spectral atom on one block. Dropped (all-zero) lines stay unlabeled.
inline BlockCoClusterResult cocluster_block(const BlockView& block, int k, std::uint64_t seed,
                                            const AtomOptions& opt = {}) {
  const Index l = embedding_width(k);
  NormalizedBlock nb = normalize(block);
  BlockCoClusterResult out;
  out.k = k;
  out.dropped_rows = nb.dropped_rows;
  out.dropped_cols = nb.dropped_cols;
  out.row_labels.assign(static_cast<std::size_t>(block.rows()), -1);
  out.col_labels.assign(static_cast<std::size_t>(block.cols()), -1);

  const Index points = nb.rows() + nb.cols();
  const Index count = std::min<Index>(l + 1, std::min(nb.rows(), nb.cols()));
  if (count < l + 1 || points < k) {
    // Too few surviving lines to embed: everything joins cluster 0.
    for (Index i : nb.kept_rows) out.row_labels[static_cast<std::size_t>(i)] = 0;
    for (Index j : nb.kept_cols) out.col_labels[static_cast<std::size_t>(j)] = 0;
    out.degenerate = true;
    return out;
  }

  SvdOptions svd = opt.svd;
  svd.seed = derive_seed({seed, 0x5fd});
  const auto triplets = std::visit(
      [&](const auto& m) { return truncated_svd(m, l + 1, svd); }, nb.values);
  const auto emb = build_embedding(triplets, nb.degrees, k);
  const auto km = kmeans(emb.z, k, derive_seed({seed, 0x63}), opt.kmeans);
  out.inertia = km.inertia;
  out.degenerate = km.degenerate;
  out.singular_values = emb.singular_values;
  for (Index i = 0; i < nb.rows(); ++i)
    out.row_labels[static_cast<std::size_t>(nb.kept_rows[static_cast<std::size_t>(i)])] =
        km.labels[static_cast<std::size_t>(i)];
  for (Index j = 0; j < nb.cols(); ++j)
    out.col_labels[static_cast<std::size_t>(nb.kept_cols[static_cast<std::size_t>(j)])] =
        km.labels[static_cast<std::size_t>(nb.rows() + j)];
  return out;
}

// Interface for pluggable block co-clusterers.
using AtomCoClusterer =
    std::function<BlockCoClusterResult(const BlockView&, int k, std::uint64_t seed)>;

inline AtomCoClusterer spectral_atom(AtomOptions opt = {}) {
  return [opt](const BlockView& b, int k, std::uint64_t seed) {
    return cocluster_block(b, k, seed, opt);
  };
}

}  // namespace lamc
