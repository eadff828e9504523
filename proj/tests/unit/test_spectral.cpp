#include <gtest/gtest.h>

#include <cmath>

#include "lamc/metrics.hpp"
#include "lamc/planted.hpp"
#include "lamc/random.hpp"
#include "lamc/spectral.hpp"
#include "lamc/svd.hpp"
#include "oracles.hpp"

using namespace lamc;

namespace {

DenseMatrix random_nonnegative(Index rows, Index cols, std::uint64_t seed, double density = 1.0) {
  Rng rng(seed);
  DenseMatrix a = DenseMatrix::Zero(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c)
      if (uniform01(rng) < density) a(r, c) = 0.05 + uniform01(rng);
  return a;
}

// Unit vector with the sign fixed by its largest-magnitude entry.
Eigen::VectorXd canonical(Eigen::VectorXd v) {
  v.normalize();
  Index arg = 0;
  v.cwiseAbs().maxCoeff(&arg);
  if (v(arg) < 0) v = -v;
  return v;
}

bool same_partition(const std::vector<int>& a, const std::vector<int>& b) {
  return nmi(a, b) > 1.0 - 1e-12;
}

}  // namespace

TEST(Normalize, IdentityAndAllOnes) {
  const auto eye = DataMatrix::from_dense(DenseMatrix::Identity(2, 2));
  const auto ne = normalize(BlockView::whole(eye));
  EXPECT_TRUE(ne.dense().isApprox(DenseMatrix::Identity(2, 2)));
  EXPECT_EQ(ne.degrees.row_degrees, Eigen::VectorXd::Ones(2));

  const auto ones = DataMatrix::from_dense(DenseMatrix::Ones(2, 2));
  const auto no = normalize(BlockView::whole(ones));
  EXPECT_TRUE(no.dense().isApprox(DenseMatrix::Constant(2, 2, 0.5)));
  const auto t = truncated_svd(no.dense(), 2);
  EXPECT_NEAR(t.values(0), 1.0, 1e-12);
  EXPECT_NEAR(t.values(1), 0.0, 1e-12);
}

TEST(Normalize, DropsEmptyLinesAndKeepsMass) {
  DenseMatrix a(3, 3);
  a << 1, 0, 2, 0, 0, 0, 3, 0, 1;
  for (const auto kind : {StorageKind::dense, StorageKind::sparse}) {
    const auto m = kind == StorageKind::dense ? DataMatrix::from_dense(a)
                                              : DataMatrix::from_sparse(a.sparseView());
    const auto nb = normalize(BlockView::whole(m));
    EXPECT_EQ(nb.dropped_rows, (std::vector<Index>{1}));
    EXPECT_EQ(nb.dropped_cols, (std::vector<Index>{1}));
    EXPECT_EQ(nb.rows(), 2);
    EXPECT_EQ(nb.cols(), 2);
    EXPECT_NEAR(nb.degrees.row_degrees.sum(), a.sum(), 1e-12);
    EXPECT_NEAR(nb.degrees.col_degrees.sum(), a.sum(), 1e-12);
    EXPECT_NEAR(nb.dense()(0, 1), 2.0 / std::sqrt(3.0 * 3.0), 1e-12);
  }
  const auto zero = DataMatrix::from_dense(DenseMatrix::Zero(3, 2));
  EXPECT_THROW(normalize(BlockView::whole(zero)), EmptyBlockError);
}

TEST(TruncatedSvd, ConnectedComponentsGiveUnitValues) {
  DenseMatrix a(4, 4);
  a << 1, 1, 0, 0, 1, 1, 0, 0, 0, 0, 1, 1, 0, 0, 1, 1;
  const auto nb = normalize(BlockView::whole(DataMatrix::from_dense(a)));
  const auto t = truncated_svd(nb.dense(), 2);
  EXPECT_NEAR(t.values(0), 1.0, 1e-12);
  EXPECT_NEAR(t.values(1), 1.0, 1e-12);
}

TEST(TruncatedSvd, IterativePathMatchesDense) {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const DenseMatrix a = random_nonnegative(300, 220, seed, 0.05);
    const SparseMatrix s = a.sparseView();
    const auto iter = truncated_svd(s, 4);
    EXPECT_GT(iter.iterations, 0);  // the subspace path ran
    Eigen::BDCSVD<DenseMatrix> ref(a);
    for (Index j = 0; j < 4; ++j) EXPECT_NEAR(iter.values(j), ref.singularValues()(j), 1e-8);
    EXPECT_TRUE((iter.left.transpose() * iter.left).isIdentity(1e-8));
    EXPECT_TRUE((iter.right.transpose() * iter.right).isIdentity(1e-8));
    EXPECT_LE(iter.max_residual, 1e-6);
    // same result for dense storage of the same values
    const auto dense_iter = truncated_svd(a, 4);
    EXPECT_LE((dense_iter.values - iter.values).cwiseAbs().maxCoeff(), 1e-8);
  }
  EXPECT_THROW(truncated_svd(DenseMatrix::Ones(3, 5), 4), DomainError);
}

TEST(TruncatedSvd, NonConvergenceIsReported) {
  const DenseMatrix a = random_nonnegative(200, 200, 3, 0.3);
  SvdOptions opt;
  opt.max_iterations = 1;
  opt.oversample = 2;
  EXPECT_THROW(truncated_svd(a, 3, opt), NumericalError);
}

TEST(Spectral, SingularVectorsMatchGeneralizedEigenvectors) {
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Index rows = 3 + static_cast<Index>(seed % 7) * 4, cols = 2 + static_cast<Index>(seed % 5) * 6;
    const DenseMatrix a = random_nonnegative(rows, cols, seed + 100);
    const auto [lambda, gap] = oracle::partition_value_gap(a);
    if (gap < 1e-4) continue;
    ++checked;
    const auto nb = normalize(BlockView::whole(DataMatrix::from_dense(a)));
    const auto t = truncated_svd(nb.dense(), 2);
    EXPECT_NEAR(t.values(0), 1.0, 1e-8);
    EXPECT_NEAR(1.0 - t.values(1), lambda, 1e-8);
    const auto emb = build_embedding(t, nb.degrees, 2);
    const Eigen::VectorXd mine = canonical(emb.z.col(0));
    const Eigen::VectorXd ref = canonical(oracle::partition_vector(a));
    EXPECT_LE((mine - ref).cwiseAbs().maxCoeff(), 1e-6) << "seed " << seed;
  }
  EXPECT_GE(checked, 15);
}

TEST(Embedding, Shapes) {
  EXPECT_EQ(embedding_width(2), 1);
  EXPECT_EQ(embedding_width(3), 2);
  EXPECT_EQ(embedding_width(4), 2);
  EXPECT_EQ(embedding_width(5), 3);
  EXPECT_THROW(embedding_width(1), DomainError);
  DenseMatrix a = random_nonnegative(9, 7, 5);
  a.row(3).setZero();
  const auto nb = normalize(BlockView::whole(DataMatrix::from_dense(a)));
  const auto t = truncated_svd(nb.dense(), 3);
  const auto e2 = build_embedding(t, nb.degrees, 2);
  EXPECT_EQ(e2.z.cols(), 1);
  EXPECT_EQ(e2.z.rows(), 8 + 7);
  const auto e4 = build_embedding(t, nb.degrees, 4);
  EXPECT_EQ(e4.z.cols(), 2);
  EXPECT_THROW(build_embedding(t, nb.degrees, 5), DomainError);
}

TEST(KMeans, TwoCloudsAndEdgeCases) {
  DenseMatrix pts(6, 1);
  pts << 0.0, 0.5, -0.5, 10.0, 10.5, 9.5;
  const auto r = kmeans(pts, 2, 1);
  EXPECT_EQ(r.labels[0], r.labels[1]);
  EXPECT_EQ(r.labels[0], r.labels[2]);
  EXPECT_EQ(r.labels[3], r.labels[4]);
  EXPECT_NE(r.labels[0], r.labels[3]);
  EXPECT_NEAR(r.inertia, 4 * 0.25, 1e-12);

  const auto all = kmeans(pts, 6, 1);
  EXPECT_NEAR(all.inertia, 0.0, 1e-15);

  const auto again = kmeans(pts, 2, 1);
  EXPECT_EQ(again.labels, r.labels);

  // duplicate points: fewer distinct points than clusters
  DenseMatrix dup = DenseMatrix::Zero(4, 2);
  const auto d = kmeans(dup, 3, 2);
  EXPECT_TRUE(d.degenerate);
  EXPECT_THROW(kmeans(pts, 7, 1), DomainError);
}

TEST(KMeans, InertiaNeverIncreases) {
  Rng rng(9);
  DenseMatrix pts(200, 3);
  for (Index i = 0; i < pts.rows(); ++i)
    for (Index j = 0; j < 3; ++j) pts(i, j) = standard_normal(rng) + static_cast<double>(i % 4) * 2.0;
  KMeansOptions opt;
  opt.restarts = 1;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto r = kmeans(pts, 5, seed, opt);
    for (std::size_t i = 1; i < r.inertia_history.size(); ++i)
      EXPECT_LE(r.inertia_history[i], r.inertia_history[i - 1] + 1e-9);
  }
}

TEST(Atom, TwoComponentBlock) {
  DenseMatrix a(4, 4);
  a << 1, 1, 0, 0, 1, 1, 0, 0, 0, 0, 1, 1, 0, 0, 1, 1;
  const auto r = cocluster_block(BlockView::whole(DataMatrix::from_dense(a)), 2, 3);
  EXPECT_EQ(r.row_labels[0], r.row_labels[1]);
  EXPECT_EQ(r.row_labels[2], r.row_labels[3]);
  EXPECT_NE(r.row_labels[0], r.row_labels[2]);
  EXPECT_EQ(r.col_labels[0], r.row_labels[0]);
  EXPECT_EQ(r.col_labels[1], r.row_labels[0]);
  EXPECT_EQ(r.col_labels[2], r.row_labels[2]);
  EXPECT_EQ(r.col_labels[3], r.row_labels[2]);
}

TEST(Atom, ComponentsAreRecoveredExactly) {
  // k disconnected blocks of random positive values and uneven sizes. With
  // k components the top singular value has multiplicity k, so recovery is
  // exact only while the l + 1 computed vectors span that whole space.
  for (int k : {2, 3}) {
    std::vector<int> rtruth, ctruth;
    std::vector<std::pair<Index, Index>> sizes;
    for (int c = 0; c < k; ++c) sizes.emplace_back(4 + 3 * c, 3 + 2 * ((c * 5) % 4));
    Index R = 0, C = 0;
    for (auto [r, c] : sizes) R += r, C += c;
    DenseMatrix a = DenseMatrix::Zero(R, C);
    Index r0 = 0, c0 = 0;
    for (int c = 0; c < k; ++c) {
      a.block(r0, c0, sizes[c].first, sizes[c].second) =
          random_nonnegative(sizes[c].first, sizes[c].second, 40 + c);
      for (Index i = 0; i < sizes[c].first; ++i) rtruth.push_back(c);
      for (Index j = 0; j < sizes[c].second; ++j) ctruth.push_back(c);
      r0 += sizes[c].first;
      c0 += sizes[c].second;
    }
    const auto res = cocluster_block(BlockView::whole(DataMatrix::from_dense(a)), k, 11);
    EXPECT_TRUE(same_partition(res.row_labels, rtruth)) << "k=" << k;
    EXPECT_TRUE(same_partition(res.col_labels, ctruth)) << "k=" << k;
  }
}

TEST(Atom, NoiselessPlantedRecovery) {
  PlantedGroundTruth truth;
  truth.coclusters = random_planted(200, 160, {{50, 40}, {50, 40}, {50, 40}, {50, 40}}, 1.0, 0.0, 3).coclusters;
  const auto m = generate_planted(200, 160, truth);
  const auto labels = planted_labels(200, 160, truth);
  const auto r = cocluster_block(BlockView::whole(m), 4, 5);
  EXPECT_DOUBLE_EQ(nmi(r.row_labels, labels.row_labels), 1.0);
  EXPECT_DOUBLE_EQ(nmi(r.col_labels, labels.col_labels), 1.0);
}

TEST(Atom, EmptyBlockRaises) {
  const auto zero = DataMatrix::from_dense(DenseMatrix::Zero(5, 4));
  try {
    cocluster_block(BlockView::whole(zero), 2, 1);
    FAIL();
  } catch (const EmptyBlockError& e) {
    EXPECT_STREQ(e.what(), "empty block");
  }
}

TEST(Atom, ScaleInvarianceAndPermutationEquivariance) {
  PlantedGroundTruth truth = random_planted(60, 50, {{20, 15}, {20, 20}, {20, 15}}, 0.9, 0.1, 8);
  const auto m = generate_planted(60, 50, truth, StorageKind::dense);
  const auto base = cocluster_block(BlockView::whole(m), 3, 21);

  const auto scaled = DataMatrix::from_dense(m.to_dense() * 7.25);
  const auto rs = cocluster_block(BlockView::whole(scaled), 3, 21);
  EXPECT_TRUE(same_partition(rs.row_labels, base.row_labels));
  EXPECT_TRUE(same_partition(rs.col_labels, base.col_labels));

  const auto rp = random_permutation<Index>(60, 1);
  const auto cp = random_permutation<Index>(50, 2);
  const auto pm = permute(m, rp, cp);
  const auto rpm = cocluster_block(BlockView::whole(pm), 3, 21);
  std::vector<int> expect_rows, expect_cols;
  for (Index i : rp) expect_rows.push_back(base.row_labels[static_cast<std::size_t>(i)]);
  for (Index j : cp) expect_cols.push_back(base.col_labels[static_cast<std::size_t>(j)]);
  EXPECT_TRUE(same_partition(rpm.row_labels, expect_rows));
  EXPECT_TRUE(same_partition(rpm.col_labels, expect_cols));
}

TEST(Atom, SparseAndDenseAgree) {
  const auto truth = random_planted(90, 70, {{30, 20}, {30, 30}}, 0.8, 0.05, 12);
  const auto s = generate_planted(90, 70, truth, StorageKind::sparse);
  const auto d = generate_planted(90, 70, truth, StorageKind::dense);
  const auto a = cocluster_block(BlockView::whole(s), 3, 4);
  const auto b = cocluster_block(BlockView::whole(d), 3, 4);
  EXPECT_TRUE(same_partition(a.row_labels, b.row_labels));
  EXPECT_TRUE(same_partition(a.col_labels, b.col_labels));
}
