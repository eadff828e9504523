#pragma once

// Lifting block-level co-clusters to global coordinates and merging them.
//
// Merging is two-level. Within a round, fragments of one co-cluster that a
// grid line split apart share their row set (same block-row) or their column
// set (same block-column); stitch_round joins them. Across rounds, whole
// co-clusters found under different permutations are fused greedily by
// hierarchical_merge, and consensus_labels resolves whatever overlap is left
// by provenance majority.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <compare>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "lamc/labels.hpp"
#include "lamc/matrix.hpp"
#include "lamc/spectral.hpp"

namespace lamc {

struct Origin {
  int round = 0;
  Index block_row = 0;
  Index block_col = 0;
  auto operator<=>(const Origin&) const = default;
};

// Rows and columns are sorted global ids; supports count how many merged
// candidates contained each id.
struct CoCluster {
  std::vector<Index> rows, cols;
  std::vector<int> row_support, col_support;
  std::vector<Origin> provenance;
  double score = 0.0;  // mean value inside the co-cluster

  double cells() const {
    return static_cast<double>(rows.size()) * static_cast<double>(cols.size());
  }
};

inline nlohmann::json to_json(const CoCluster& c) {
  return {{"rows", c.rows},
          {"cols", c.cols},
          {"score", c.score},
          {"provenance_count", c.provenance.size()}};
}

struct LiftOptions {
  Index row_threshold = 1;
  Index col_threshold = 1;
  // A label pair survives only if its mean exceeds mean_factor x block mean.
  double mean_factor = 1.5;
  // Members whose mean over the partner axis is below member_fraction x the
  // pair mean are pruned.
  double member_fraction = 0.5;
};

// One candidate per (row label, column label) pair that is dense enough
// relative to its block and large enough after member pruning.
inline std::vector<CoCluster> lift_to_global(const BlockCoClusterResult& result,
                                             const BlockView& block, const LiftOptions& opt,
                                             int round = 0) {
  const int k = result.k;
  const Index rows = block.rows(), cols = block.cols();
  if (static_cast<Index>(result.row_labels.size()) != rows ||
      static_cast<Index>(result.col_labels.size()) != cols)
    throw DomainError("block result does not match the block shape");

  // row_to[i][c]: mass of row i on columns labeled c; col_to[j][r] likewise.
  DenseMatrix row_to = DenseMatrix::Zero(rows, k);
  DenseMatrix col_to = DenseMatrix::Zero(cols, k);
  DenseMatrix pair_mass = DenseMatrix::Zero(k, k);
  double total = 0.0;
  auto visit = [&](Index i, Index j, double v) {
    total += v;
    const int rl = result.row_labels[static_cast<std::size_t>(i)];
    const int cl = result.col_labels[static_cast<std::size_t>(j)];
    if (cl >= 0) row_to(i, cl) += v;
    if (rl >= 0) col_to(j, rl) += v;
    if (rl >= 0 && cl >= 0) pair_mass(rl, cl) += v;
  };
  block.for_each_nonzero(visit);
  const double block_mean = total / (static_cast<double>(rows) * static_cast<double>(cols));

  std::vector<std::vector<Index>> members_r(static_cast<std::size_t>(k)),
      members_c(static_cast<std::size_t>(k));
  for (Index i = 0; i < rows; ++i)
    if (int l = result.row_labels[static_cast<std::size_t>(i)]; l >= 0)
      members_r[static_cast<std::size_t>(l)].push_back(i);
  for (Index j = 0; j < cols; ++j)
    if (int l = result.col_labels[static_cast<std::size_t>(j)]; l >= 0)
      members_c[static_cast<std::size_t>(l)].push_back(j);

  std::vector<CoCluster> out;
  const Origin origin{round, block.block_row(), block.block_col()};
  for (int r = 0; r < k; ++r) {
    const auto& rr = members_r[static_cast<std::size_t>(r)];
    if (static_cast<Index>(rr.size()) < opt.row_threshold) continue;
    for (int c = 0; c < k; ++c) {
      const auto& cc = members_c[static_cast<std::size_t>(c)];
      if (static_cast<Index>(cc.size()) < opt.col_threshold) continue;
      const double mean = pair_mass(r, c) / (static_cast<double>(rr.size()) *
                                             static_cast<double>(cc.size()));
      if (!(mean > opt.mean_factor * block_mean)) continue;

      const double cut = opt.member_fraction * mean;
      std::vector<Index> keep_r, keep_c;
      for (Index i : rr)
        if (row_to(i, c) / static_cast<double>(cc.size()) >= cut) keep_r.push_back(i);
      for (Index j : cc)
        if (col_to(j, r) / static_cast<double>(rr.size()) >= cut) keep_c.push_back(j);
      if (static_cast<Index>(keep_r.size()) < opt.row_threshold ||
          static_cast<Index>(keep_c.size()) < opt.col_threshold)
        continue;

      CoCluster cl;
      std::vector<char> in_r(static_cast<std::size_t>(rows), 0), in_c(static_cast<std::size_t>(cols), 0);
      for (Index i : keep_r) in_r[static_cast<std::size_t>(i)] = 1;
      for (Index j : keep_c) in_c[static_cast<std::size_t>(j)] = 1;
      double mass = 0.0;
      block.for_each_nonzero([&](Index i, Index j, double v) {
        if (in_r[static_cast<std::size_t>(i)] && in_c[static_cast<std::size_t>(j)]) mass += v;
      });
      cl.score = mass / (static_cast<double>(keep_r.size()) * static_cast<double>(keep_c.size()));
      for (Index i : keep_r) cl.rows.push_back(block.row_id(i));
      for (Index j : keep_c) cl.cols.push_back(block.col_id(j));
      std::sort(cl.rows.begin(), cl.rows.end());
      std::sort(cl.cols.begin(), cl.cols.end());
      cl.row_support.assign(cl.rows.size(), 1);
      cl.col_support.assign(cl.cols.size(), 1);
      cl.provenance = {origin};
      out.push_back(std::move(cl));
    }
  }
  return out;
}

namespace detail {

inline std::size_t intersection_size(const std::vector<Index>& a, const std::vector<Index>& b) {
  std::size_t i = 0, j = 0, n = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] < b[j]) {
      ++i;
    } else if (b[j] < a[i]) {
      ++j;
    } else {
      ++n, ++i, ++j;
    }
  }
  return n;
}

inline double jaccard(const std::vector<Index>& a, const std::vector<Index>& b) {
  if (a.empty() && b.empty()) return 1.0;
  const auto inter = intersection_size(a, b);
  return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

// Sorted union, adding supports of shared ids.
inline void union_with_support(const std::vector<Index>& a, const std::vector<int>& sa,
                               const std::vector<Index>& b, const std::vector<int>& sb,
                               std::vector<Index>& out, std::vector<int>& support) {
  out.clear();
  support.clear();
  std::size_t i = 0, j = 0;
  while (i < a.size() || j < b.size()) {
    if (j == b.size() || (i < a.size() && a[i] < b[j])) {
      out.push_back(a[i]);
      support.push_back(sa[i++]);
    } else if (i == a.size() || b[j] < a[i]) {
      out.push_back(b[j]);
      support.push_back(sb[j++]);
    } else {
      out.push_back(a[i]);
      support.push_back(sa[i++] + sb[j++]);
    }
  }
}

}  // namespace detail

inline double jaccard(const std::vector<Index>& a, const std::vector<Index>& b) {
  return detail::jaccard(a, b);
}

// Product of the row-set and column-set Jaccard indices.
inline double similarity(const CoCluster& a, const CoCluster& b) {
  return detail::jaccard(a.rows, b.rows) * detail::jaccard(a.cols, b.cols);
}

inline CoCluster merge_pair(const CoCluster& a, const CoCluster& b) {
  CoCluster m;
  detail::union_with_support(a.rows, a.row_support, b.rows, b.row_support, m.rows,
                             m.row_support);
  detail::union_with_support(a.cols, a.col_support, b.cols, b.col_support, m.cols,
                             m.col_support);
  std::set_union(a.provenance.begin(), a.provenance.end(), b.provenance.begin(),
                 b.provenance.end(), std::back_inserter(m.provenance));
  const double w = a.cells() + b.cells();
  m.score = w > 0.0 ? (a.score * a.cells() + b.score * b.cells()) / w : 0.0;
  return m;
}

namespace detail {

// Largest first, then by smallest row id, then smallest column id.
inline void canonical_order(std::vector<CoCluster>& cs) {
  std::stable_sort(cs.begin(), cs.end(), [](const CoCluster& a, const CoCluster& b) {
    if (a.cells() != b.cells()) return a.cells() > b.cells();
    if (a.rows != b.rows) return a.rows < b.rows;
    return a.cols < b.cols;
  });
}

struct DisjointSets {
  std::vector<std::size_t> parent;
  explicit DisjointSets(std::size_t n) : parent(n) {
    std::iota(parent.begin(), parent.end(), std::size_t{0});
  }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

}  // namespace detail

// Joins fragments of one round that sit in the same block-row with row-set
// Jaccard >= tau, or in the same block-column with column-set Jaccard >= tau.
// Between two blocks only mutual best matches are joined, so a fragment that
// fused two co-clusters cannot bridge them. Every candidate must come from a
// single block of the same round.
inline std::vector<CoCluster> stitch_round(const std::vector<CoCluster>& candidates,
                                           double tau) {
  const std::size_t n = candidates.size();
  // shared[a][b]: overlap on the axis the two blocks share, or -1 if none
  std::vector<std::vector<double>> shared(n, std::vector<double>(n, -1.0));
  for (std::size_t a = 0; a < n; ++a) {
    const auto& oa = candidates[a].provenance.front();
    for (std::size_t b = a + 1; b < n; ++b) {
      const auto& ob = candidates[b].provenance.front();
      double s = -1.0;
      if (oa.block_row == ob.block_row && oa.block_col != ob.block_col)
        s = detail::jaccard(candidates[a].rows, candidates[b].rows);
      else if (oa.block_col == ob.block_col && oa.block_row != ob.block_row)
        s = detail::jaccard(candidates[a].cols, candidates[b].cols);
      shared[a][b] = shared[b][a] = s;
    }
  }
  // best[a] per other block: first index with the highest overlap
  auto best_in_block = [&](std::size_t a, const Origin& block) {
    std::size_t arg = n;
    for (std::size_t b = 0; b < n; ++b) {
      const auto& ob = candidates[b].provenance.front();
      if (ob.block_row != block.block_row || ob.block_col != block.block_col) continue;
      if (arg == n || shared[a][b] > shared[a][arg]) arg = b;
    }
    return arg;
  };
  detail::DisjointSets sets(n);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b)
      if (shared[a][b] >= tau && best_in_block(a, candidates[b].provenance.front()) == b &&
          best_in_block(b, candidates[a].provenance.front()) == a)
        sets.unite(a, b);
  std::vector<CoCluster> groups;
  std::vector<std::ptrdiff_t> slot(n, -1);
  for (std::size_t a = 0; a < n; ++a) {
    const auto root = sets.find(a);
    if (slot[root] < 0) {
      slot[root] = static_cast<std::ptrdiff_t>(groups.size());
      groups.push_back(candidates[a]);
    } else {
      auto& g = groups[static_cast<std::size_t>(slot[root])];
      g = merge_pair(g, candidates[a]);
    }
  }
  return groups;
}

struct MergeStep {
  std::size_t first = 0, second = 0;  // ids of the merged co-clusters
  double similarity = 0.0;
  std::size_t result = 0;  // id of the new co-cluster
};

struct MergeTrace {
  std::vector<MergeStep> iterations;
  enum class Stop { threshold_exhausted, iteration_cap } stopped = Stop::threshold_exhausted;
};

inline const char* to_string(MergeTrace::Stop s) {
  return s == MergeTrace::Stop::threshold_exhausted ? "threshold-exhausted" : "iteration-cap";
}

inline nlohmann::json to_json(const MergeTrace& t) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : t.iterations)
    steps.push_back({{"pair", {s.first, s.second}},
                     {"similarity", s.similarity},
                     {"result", s.result}});
  return {{"iterations", steps}, {"stopped_reason", to_string(t.stopped)}};
}

struct MergeResult {
  std::vector<CoCluster> coclusters;
  MergeTrace trace;
};

// Greedy agglomeration: repeatedly fuse the most similar pair while its
// similarity is >= tau, at most `cap` times. Candidate i has id i; the
// co-cluster created by step s has id candidates.size() + s.
inline MergeResult hierarchical_merge(std::vector<CoCluster> candidates, double tau,
                                      std::size_t cap) {
  if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("merge threshold must lie in (0, 1]");
  if (cap < 1) throw ConfigError("merge iteration cap must be >= 1");
  std::vector<CoCluster> pool = std::move(candidates);
  std::vector<char> active(pool.size(), 1);
  // sim[i][j] for i > j
  std::vector<std::vector<double>> sim(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    sim[i].resize(i);
    for (std::size_t j = 0; j < i; ++j) sim[i][j] = similarity(pool[i], pool[j]);
  }

  MergeResult out;
  while (true) {
    double best = -1.0;
    std::size_t bi = 0, bj = 0;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (!active[i]) continue;
      for (std::size_t j = 0; j < i; ++j)
        if (active[j] && sim[i][j] > best) best = sim[i][j], bi = i, bj = j;
    }
    if (best < tau) {
      out.trace.stopped = MergeTrace::Stop::threshold_exhausted;
      break;
    }
    if (out.trace.iterations.size() >= cap) {
      out.trace.stopped = MergeTrace::Stop::iteration_cap;
      break;
    }
    active[bi] = active[bj] = 0;
    pool.push_back(merge_pair(pool[bj], pool[bi]));
    active.push_back(1);
    const std::size_t id = pool.size() - 1;
    sim.emplace_back(id);
    for (std::size_t j = 0; j < id; ++j)
      if (active[j]) sim[id][j] = similarity(pool[id], pool[j]);
    out.trace.iterations.push_back({bj, bi, best, id});
  }
  for (std::size_t i = 0; i < pool.size(); ++i)
    if (active[i]) out.coclusters.push_back(std::move(pool[i]));
  detail::canonical_order(out.coclusters);
  return out;
}

// Every row and column goes to the co-cluster holding it with the largest
// support (ties: higher score, then earlier co-cluster). Co-clusters left
// without rows or columns are dropped; unclaimed ids take the background
// label, which is always the last one.
inline LabelAssignment consensus_labels(const std::vector<CoCluster>& merged, Index rows,
                                        Index cols) {
  auto assign = [&](Index size, bool by_row) {
    std::vector<int> owner(static_cast<std::size_t>(size), -1);
    std::vector<int> best_support(static_cast<std::size_t>(size), 0);
    for (std::size_t c = 0; c < merged.size(); ++c) {
      const auto& ids = by_row ? merged[c].rows : merged[c].cols;
      const auto& sup = by_row ? merged[c].row_support : merged[c].col_support;
      for (std::size_t t = 0; t < ids.size(); ++t) {
        const auto i = static_cast<std::size_t>(ids[t]);
        if (ids[t] < 0 || ids[t] >= size) throw DomainError("co-cluster index out of range");
        const int o = owner[i];
        const bool better =
            o < 0 || sup[t] > best_support[i] ||
            (sup[t] == best_support[i] && merged[c].score > merged[static_cast<std::size_t>(o)].score);
        if (better) {
          owner[i] = static_cast<int>(c);
          best_support[i] = sup[t];
        }
      }
    }
    return owner;
  };
  auto row_owner = assign(rows, true);
  auto col_owner = assign(cols, false);

  std::vector<char> has_row(merged.size(), 0), has_col(merged.size(), 0);
  for (int o : row_owner)
    if (o >= 0) has_row[static_cast<std::size_t>(o)] = 1;
  for (int o : col_owner)
    if (o >= 0) has_col[static_cast<std::size_t>(o)] = 1;
  std::vector<int> relabel(merged.size(), -1);
  int survivors = 0;
  for (std::size_t c = 0; c < merged.size(); ++c)
    if (has_row[c] && has_col[c]) relabel[c] = survivors++;

  LabelAssignment out;
  out.k = out.d = survivors + 1;
  out.row_labels.resize(static_cast<std::size_t>(rows));
  out.col_labels.resize(static_cast<std::size_t>(cols));
  for (std::size_t i = 0; i < row_owner.size(); ++i) {
    const int o = row_owner[i];
    out.row_labels[i] = o >= 0 && relabel[static_cast<std::size_t>(o)] >= 0
                            ? relabel[static_cast<std::size_t>(o)]
                            : survivors;
  }
  for (std::size_t j = 0; j < col_owner.size(); ++j) {
    const int o = col_owner[j];
    out.col_labels[j] = o >= 0 && relabel[static_cast<std::size_t>(o)] >= 0
                            ? relabel[static_cast<std::size_t>(o)]
                            : survivors;
  }
  return out;
}

// The co-clusters encoded by a label assignment (background excluded), with
// scores measured on `matrix`.
inline std::vector<CoCluster> coclusters_from_labels(const LabelAssignment& labels,
                                                     const DataMatrix& matrix) {
  const int count = std::min(labels.k, labels.d) - 1;
  std::vector<CoCluster> out(static_cast<std::size_t>(std::max(0, count)));
  for (std::size_t i = 0; i < labels.row_labels.size(); ++i)
    if (labels.row_labels[i] < count)
      out[static_cast<std::size_t>(labels.row_labels[i])].rows.push_back(static_cast<Index>(i));
  for (std::size_t j = 0; j < labels.col_labels.size(); ++j)
    if (labels.col_labels[j] < count)
      out[static_cast<std::size_t>(labels.col_labels[j])].cols.push_back(static_cast<Index>(j));
  std::vector<double> mass(out.size(), 0.0);
  matrix.for_each_nonzero([&](Index r, Index c, double v) {
    const int lr = labels.row_labels[static_cast<std::size_t>(matrix.row_ids()[static_cast<std::size_t>(r)])];
    const int lc = labels.col_labels[static_cast<std::size_t>(matrix.col_ids()[static_cast<std::size_t>(c)])];
    if (lr == lc && lr < count) mass[static_cast<std::size_t>(lr)] += v;
  });
  for (std::size_t c = 0; c < out.size(); ++c) {
    out[c].row_support.assign(out[c].rows.size(), 1);
    out[c].col_support.assign(out[c].cols.size(), 1);
    out[c].score = out[c].cells() > 0 ? mass[c] / out[c].cells() : 0.0;
  }
  return out;
}

}  // namespace lamc
