#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lamc/metrics.hpp"
#include "lamc/random.hpp"
#include "oracles.hpp"

using namespace lamc;

namespace {

std::vector<int> random_labels(std::size_t n, int k, Rng& rng) {
  std::vector<int> v(n);
  for (auto& x : v) x = static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(k)));
  return v;
}

}  // namespace

TEST(Metrics, IdentityAndRelabeling) {
  const std::vector<int> t{0, 0, 1, 1, 2, 2, 2};
  const std::vector<int> renamed{5, 5, 3, 3, 9, 9, 9};
  EXPECT_DOUBLE_EQ(nmi(t, t), 1.0);
  EXPECT_NEAR(nmi(renamed, t), 1.0, 1e-15);
  EXPECT_DOUBLE_EQ(ari(t, t), 1.0);
  EXPECT_NEAR(ari(renamed, t), 1.0, 1e-15);
}

TEST(Metrics, IndependentPartitions) {
  const std::vector<int> pred{0, 0, 1, 1}, truth{0, 1, 0, 1};
  EXPECT_NEAR(nmi(pred, truth), 0.0, 1e-12);
  EXPECT_NEAR(ari(pred, truth), -0.5, 1e-12);
}

TEST(Metrics, SingleClusterConventions) {
  const std::vector<int> one{3, 3, 3, 3}, two{0, 1, 0, 1};
  EXPECT_EQ(nmi(one, one), 1.0);
  EXPECT_EQ(nmi(one, two), 0.0);
  EXPECT_EQ(nmi(two, one), 0.0);
  EXPECT_EQ(ari(one, one), 1.0);
  EXPECT_THROW(nmi(one, std::vector<int>{1, 2}), DomainError);
  EXPECT_THROW(nmi(std::vector<int>{}, std::vector<int>{}), DomainError);
}

TEST(Metrics, ContingencyTableIsConsistent) {
  Rng rng(3);
  const auto a = random_labels(40, 4, rng), b = random_labels(40, 3, rng);
  const ContingencyTable t(a, b);
  std::size_t total = 0;
  for (std::size_t p = 0; p < t.pred_clusters(); ++p) {
    std::size_t row = 0;
    for (std::size_t q = 0; q < t.truth_clusters(); ++q) row += t.count(p, q);
    EXPECT_EQ(row, t.pred_total(p));
    total += row;
  }
  for (std::size_t q = 0; q < t.truth_clusters(); ++q) {
    std::size_t col = 0;
    for (std::size_t p = 0; p < t.pred_clusters(); ++p) col += t.count(p, q);
    EXPECT_EQ(col, t.truth_total(q));
  }
  EXPECT_EQ(total, 40u);
}

TEST(Metrics, MatchBruteForceOracle) {
  Rng rng(2024);
  for (int i = 0; i < 300; ++i) {
    const std::size_t n = 2 + uniform_below(rng, 49);
    const auto a = random_labels(n, 1 + static_cast<int>(uniform_below(rng, 6)), rng);
    const auto b = random_labels(n, 1 + static_cast<int>(uniform_below(rng, 6)), rng);
    EXPECT_NEAR(nmi(a, b), oracle::nmi(a, b), 1e-10);
    EXPECT_NEAR(ari(a, b), oracle::ari(a, b), 1e-10);
  }
}

TEST(Metrics, SymmetryAndPermutationInvariance) {
  Rng rng(77);
  for (int i = 0; i < 50; ++i) {
    const auto a = random_labels(30, 4, rng), b = random_labels(30, 5, rng);
    EXPECT_NEAR(nmi(a, b), nmi(b, a), 1e-12);
    EXPECT_NEAR(ari(a, b), ari(b, a), 1e-12);
    const auto perm = random_permutation<std::size_t>(30, static_cast<std::uint64_t>(i));
    std::vector<int> pa, pb;
    for (auto j : perm) pa.push_back(a[j]), pb.push_back(b[j]);
    EXPECT_NEAR(nmi(pa, pb), nmi(a, b), 1e-12);
    EXPECT_NEAR(ari(pa, pb), ari(a, b), 1e-12);
    std::vector<int> relabeled(a);
    for (auto& x : relabeled) x = 10 - x;
    EXPECT_NEAR(nmi(relabeled, b), nmi(a, b), 1e-12);
    EXPECT_NEAR(ari(relabeled, b), ari(a, b), 1e-12);
  }
}

TEST(Metrics, AriIsChanceAdjusted) {
  double sum = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    const auto a = random_labels(1000, 5, rng), b = random_labels(1000, 5, rng);
    sum += ari(a, b);
  }
  EXPECT_LE(std::abs(sum / 100.0), 0.02);
}

TEST(Metrics, CoClusterScores) {
  LabelAssignment a{{0, 0, 1, 1}, {0, 1, 0, 1}, 2, 2};
  const auto same = cocluster_nmi(a, a);
  EXPECT_DOUBLE_EQ(same.row, 1.0);
  EXPECT_DOUBLE_EQ(same.col, 1.0);
  LabelAssignment b{{0, 0, 1, 1}, {0, 0, 1, 1}, 2, 2};
  const auto mixed = cocluster_nmi(a, b);
  EXPECT_DOUBLE_EQ(mixed.row, 1.0);
  EXPECT_NEAR(mixed.col, 0.0, 1e-12);
  EXPECT_NEAR(mixed.mean(), 0.5, 1e-12);
  const auto ar = cocluster_ari(a, b);
  EXPECT_NEAR(ar.col, -0.5, 1e-12);
  LabelAssignment c{{0, 0, 1}, {0, 1, 0, 1}, 2, 2};
  EXPECT_THROW(cocluster_nmi(a, c), DomainError);
}
