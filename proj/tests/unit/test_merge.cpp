#include <gtest/gtest.h>

#include <set>

#include "lamc/merge.hpp"
#include "lamc/planted.hpp"
#include "lamc/random.hpp"

using namespace lamc;

namespace {

CoCluster make(std::vector<Index> rows, std::vector<Index> cols, int round = 0,
               Index br = 0, Index bc = 0, double score = 1.0) {
  CoCluster c;
  c.rows = std::move(rows);
  c.cols = std::move(cols);
  c.row_support.assign(c.rows.size(), 1);
  c.col_support.assign(c.cols.size(), 1);
  c.provenance = {{round, br, bc}};
  c.score = score;
  return c;
}

std::set<std::pair<Index, Index>> cells(const std::vector<CoCluster>& cs) {
  std::set<std::pair<Index, Index>> out;
  for (const auto& c : cs)
    for (Index r : c.rows)
      for (Index col : c.cols) out.emplace(r, col);
  return out;
}

std::vector<Index> range(Index from, Index to) {
  std::vector<Index> v;
  for (Index i = from; i < to; ++i) v.push_back(i);
  return v;
}

}  // namespace

TEST(Lift, TranslatesToGlobalIds) {
  DenseMatrix a = DenseMatrix::Zero(12, 4);
  a.block(10, 2, 2, 2).setOnes();
  const auto m = DataMatrix::from_dense(a);
  const BlockView block(m, 3, 0, 10, 2, 0, 4);
  BlockCoClusterResult r;
  r.k = 2;
  r.row_labels = {1, 1};
  r.col_labels = {0, 0, 1, 1};
  LiftOptions opt;
  opt.row_threshold = opt.col_threshold = 1;
  const auto out = lift_to_global(r, block, opt, 2);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].rows, (std::vector<Index>{10, 11}));
  EXPECT_EQ(out[0].cols, (std::vector<Index>{2, 3}));
  EXPECT_DOUBLE_EQ(out[0].score, 1.0);
  ASSERT_EQ(out[0].provenance.size(), 1u);
  EXPECT_EQ(out[0].provenance[0], (Origin{2, 3, 0}));

  opt.row_threshold = 3;  // a two-row pair is too small
  EXPECT_TRUE(lift_to_global(r, block, opt, 2).empty());
}

TEST(Lift, KeepsOnlyDenseLabelPairs) {
  // two planted blocks with light noise; an exact block labeling
  PlantedGroundTruth t;
  t.coclusters = {{range(0, 10), range(0, 8), 0.9}, {range(10, 20), range(8, 16), 0.9}};
  t.noise_rate = 0.05;
  t.seed = 3;
  const auto m = generate_planted(20, 16, t, StorageKind::dense);
  BlockCoClusterResult r;
  r.k = 2;
  for (Index i = 0; i < 20; ++i) r.row_labels.push_back(i < 10 ? 0 : 1);
  for (Index j = 0; j < 16; ++j) r.col_labels.push_back(j < 8 ? 0 : 1);
  LiftOptions opt;
  opt.row_threshold = opt.col_threshold = 3;
  const auto out = lift_to_global(r, BlockView::whole(m), opt);
  ASSERT_EQ(out.size(), 2u);  // the off-diagonal pairs are background
  EXPECT_EQ(out[0].rows, range(0, 10));
  EXPECT_EQ(out[1].cols, range(8, 16));
  for (const auto& c : out) EXPECT_GT(c.score, 0.5);
}

TEST(Lift, PrunesBackgroundMembers) {
  // cluster 0 holds the 6 co-cluster rows plus 3 empty rows
  DenseMatrix a = DenseMatrix::Zero(12, 10);
  a.block(0, 0, 6, 5).setOnes();
  const auto m = DataMatrix::from_dense(a);
  BlockCoClusterResult r;
  r.k = 2;
  r.row_labels = {0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 1};
  r.col_labels = {0, 0, 0, 0, 0, 1, 1, 1, 1, 1};
  LiftOptions opt;
  opt.row_threshold = opt.col_threshold = 2;
  const auto out = lift_to_global(r, BlockView::whole(m), opt);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].rows, range(0, 6));
  EXPECT_EQ(out[0].cols, range(0, 5));
  EXPECT_DOUBLE_EQ(out[0].score, 1.0);
}

TEST(Similarity, Examples) {
  const auto a = make({1, 2}, {1, 2}), b = make({2, 3}, {1, 2});
  EXPECT_NEAR(similarity(a, b), 1.0 / 3.0, 1e-15);
  EXPECT_EQ(similarity(a, a), 1.0);
  EXPECT_EQ(similarity(a, make({5, 6}, {1, 2})), 0.0);
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    std::vector<Index> r1, c1, r2, c2;
    for (Index j = 0; j < 8; ++j) {
      if (uniform01(rng) < 0.5) r1.push_back(j);
      if (uniform01(rng) < 0.5) c1.push_back(j);
      if (uniform01(rng) < 0.5) r2.push_back(j);
      if (uniform01(rng) < 0.5) c2.push_back(j);
    }
    if (r1.empty() || c1.empty() || r2.empty() || c2.empty()) continue;
    const auto x = make(r1, c1), y = make(r2, c2);
    EXPECT_EQ(similarity(x, y), similarity(y, x));
    EXPECT_EQ(similarity(x, y) == 1.0, r1 == r2 && c1 == c2);
  }
}

TEST(HierarchicalMerge, IdenticalAndDisjoint) {
  const auto a = make({1, 2, 3}, {4, 5}, 0);
  const auto b = make({1, 2, 3}, {4, 5}, 1);
  const auto merged = hierarchical_merge({a, b}, 0.5, 10);
  ASSERT_EQ(merged.coclusters.size(), 1u);
  ASSERT_EQ(merged.trace.iterations.size(), 1u);
  EXPECT_EQ(merged.trace.iterations[0].first, 0u);
  EXPECT_EQ(merged.trace.iterations[0].second, 1u);
  EXPECT_EQ(merged.trace.iterations[0].result, 2u);
  EXPECT_EQ(merged.coclusters[0].row_support, (std::vector<int>{2, 2, 2}));
  EXPECT_EQ(merged.coclusters[0].provenance.size(), 2u);

  const std::vector<CoCluster> disjoint{make({0}, {0}), make({1}, {1}), make({2}, {2})};
  const auto kept = hierarchical_merge(disjoint, 0.5, 10);
  EXPECT_EQ(kept.coclusters.size(), 3u);
  EXPECT_TRUE(kept.trace.iterations.empty());
  EXPECT_EQ(kept.trace.stopped, MergeTrace::Stop::threshold_exhausted);
  EXPECT_THROW(hierarchical_merge(disjoint, 0.0, 10), ConfigError);
  EXPECT_THROW(hierarchical_merge(disjoint, 0.5, 0), ConfigError);
}

TEST(HierarchicalMerge, ThreeRoundsOfOnePlantedCoCluster) {
  const auto a = make(range(0, 20), range(0, 10), 0);
  auto b = make(range(1, 20), range(0, 10), 1);
  auto c = make(range(0, 19), range(0, 11), 2);
  ASSERT_GE(similarity(a, b), 0.8);
  ASSERT_GE(similarity(b, c), 0.8);
  const auto out = hierarchical_merge({a, b, c}, 0.5, 10);
  ASSERT_EQ(out.coclusters.size(), 1u);
  const auto& m = out.coclusters[0];
  for (const CoCluster& in : {a, b, c})
    for (Index r : in.rows) EXPECT_TRUE(std::binary_search(m.rows.begin(), m.rows.end(), r));
  EXPECT_EQ(out.trace.iterations.size(), 2u);
}

TEST(HierarchicalMerge, CapStopsEarly) {
  std::vector<CoCluster> cs;
  for (int r = 0; r < 4; ++r) cs.push_back(make(range(0, 10), range(0, 10), r));
  const auto out = hierarchical_merge(cs, 0.5, 2);
  EXPECT_EQ(out.trace.iterations.size(), 2u);
  EXPECT_EQ(out.trace.stopped, MergeTrace::Stop::iteration_cap);
  EXPECT_EQ(out.coclusters.size(), 2u);
  EXPECT_EQ(to_json(out.trace)["stopped_reason"], "iteration-cap");
}

TEST(HierarchicalMerge, IdempotentCoveringDeterministic) {
  Rng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<CoCluster> cs;
    const int n = 3 + static_cast<int>(uniform_below(rng, 8));
    for (int i = 0; i < n; ++i) {
      const Index r0 = static_cast<Index>(uniform_below(rng, 30));
      const Index c0 = static_cast<Index>(uniform_below(rng, 30));
      const Index rl = 2 + static_cast<Index>(uniform_below(rng, 10));
      const Index cl = 2 + static_cast<Index>(uniform_below(rng, 10));
      cs.push_back(make(range(r0, r0 + rl), range(c0, c0 + cl), i));
    }
    const auto once = hierarchical_merge(cs, 0.4, 100);
    const auto twice = hierarchical_merge(once.coclusters, 0.4, 100);
    EXPECT_TRUE(twice.trace.iterations.empty());
    const auto in = cells(cs), out = cells(once.coclusters);
    EXPECT_TRUE(std::includes(out.begin(), out.end(), in.begin(), in.end()));
    const auto again = hierarchical_merge(cs, 0.4, 100);
    EXPECT_EQ(to_json(again.trace), to_json(once.trace));
    ASSERT_EQ(again.coclusters.size(), once.coclusters.size());
    for (std::size_t i = 0; i < once.coclusters.size(); ++i)
      EXPECT_EQ(to_json(again.coclusters[i]), to_json(once.coclusters[i]));
  }
}

TEST(StitchRound, JoinsFragmentsAcrossBlocks) {
  // one co-cluster split over a 2 x 2 grid
  const std::vector<CoCluster> frags{
      make(range(0, 10), range(0, 5), 0, 0, 0), make(range(0, 10), range(50, 55), 0, 0, 1),
      make(range(60, 70), range(0, 5), 0, 1, 0), make(range(60, 70), range(50, 55), 0, 1, 1),
      // an unrelated co-cluster in block (0, 0)
      make(range(20, 30), range(10, 20), 0, 0, 0)};
  const auto out = stitch_round(frags, 0.5);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].rows.size(), 20u);
  EXPECT_EQ(out[0].cols.size(), 10u);
  EXPECT_EQ(out[0].provenance.size(), 4u);
  EXPECT_EQ(out[1].rows, range(20, 30));
  // fragments in the same block are never stitched
  const auto same = stitch_round({make(range(0, 10), range(0, 5)), make(range(0, 10), range(5, 9))}, 0.5);
  EXPECT_EQ(same.size(), 2u);
}

TEST(StitchRound, FusedFragmentDoesNotBridge) {
  // block (0, 1) fused two co-clusters that block (0, 0) kept apart
  const std::vector<CoCluster> frags{make(range(0, 10), range(0, 5), 0, 0, 0),
                                     make(range(10, 20), range(5, 10), 0, 0, 0),
                                     make(range(0, 20), range(50, 60), 0, 0, 1)};
  const auto out = stitch_round(frags, 0.5);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].rows, range(0, 20));
  EXPECT_EQ(out[1].rows, range(10, 20));
  EXPECT_EQ(out[1].cols, range(5, 10));
}

TEST(Consensus, Rules) {
  const auto full = consensus_labels({make({0, 1}, {0}), make({2, 3}, {1, 2})}, 4, 3);
  EXPECT_EQ(full.row_labels, (std::vector<int>{0, 0, 1, 1}));
  EXPECT_EQ(full.col_labels, (std::vector<int>{0, 1, 1}));
  EXPECT_EQ(full.k, 3);

  auto strong = make({0, 1, 2}, {0, 1});
  strong.row_support = {3, 3, 3};
  auto weak = make({2, 3}, {2});
  weak.row_support = {1, 1};
  weak.score = 5.0;
  const auto contested = consensus_labels({weak, strong}, 5, 4);
  EXPECT_EQ(contested.row_labels[2], contested.row_labels[0]);  // majority wins over score
  EXPECT_EQ(contested.row_labels[3], contested.col_labels[2]);
  const int background = contested.k - 1;
  EXPECT_EQ(contested.row_labels[4], background);
  EXPECT_EQ(contested.col_labels[3], background);
  for (int l : contested.row_labels) EXPECT_TRUE(l >= 0 && l < contested.k);
  for (int l : contested.col_labels) EXPECT_TRUE(l >= 0 && l < contested.d);

  // a co-cluster that loses all of its rows disappears
  auto loser = make({0}, {3});
  const auto gone = consensus_labels({strong, loser}, 3, 4);
  EXPECT_EQ(gone.k, 2);
  EXPECT_EQ(gone.col_labels[3], 1);
}

TEST(Consensus, LabelsRoundTripThroughCoClusters) {
  const auto m = DataMatrix::from_dense(DenseMatrix::Ones(4, 3));
  const auto labels = consensus_labels({make({0, 1}, {0}), make({2, 3}, {1, 2})}, 4, 3);
  const auto cs = coclusters_from_labels(labels, m);
  ASSERT_EQ(cs.size(), 2u);
  EXPECT_EQ(cs[1].rows, (std::vector<Index>{2, 3}));
  EXPECT_EQ(cs[1].cols, (std::vector<Index>{1, 2}));
  EXPECT_DOUBLE_EQ(cs[1].score, 1.0);
}
