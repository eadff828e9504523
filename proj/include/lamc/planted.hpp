#pragma once

// Synthetic matrices with planted, disjoint, block-diagonal co-clusters.

#include <nlohmann/json.hpp>

#include <cstdint>
#include <string>
#include <vector>

#include "lamc/error.hpp"
#include "lamc/labels.hpp"
#include "lamc/matrix.hpp"
#include "lamc/random.hpp"

namespace lamc {

struct PlantedCoCluster {
  std::vector<Index> rows;
  std::vector<Index> cols;
  // Probability that a cell inside the co-cluster is 1.
  double signal = 1.0;
};

struct PlantedGroundTruth {
  std::vector<PlantedCoCluster> coclusters;
  // Probability that a background cell is 1.
  double noise_rate = 0.0;
  std::uint64_t seed = 0;
};

namespace detail {

inline std::vector<int> membership(const std::vector<PlantedCoCluster>& cs,
                                   Index size, bool rows) {
  std::vector<int> owner(static_cast<std::size_t>(size), -1);
  for (std::size_t k = 0; k < cs.size(); ++k) {
    for (Index i : rows ? cs[k].rows : cs[k].cols) {
      if (i < 0 || i >= size) {
        throw DomainError(std::string("planted ") + (rows ? "row " : "column ") +
                          std::to_string(i) + " out of range");
      }
      auto& o = owner[static_cast<std::size_t>(i)];
      if (o != -1) {
        throw DomainError(std::string("planted ") + (rows ? "row " : "column ") +
                          std::to_string(i) + " belongs to co-clusters " +
                          std::to_string(o) + " and " + std::to_string(k));
      }
      o = static_cast<int>(k);
    }
  }
  return owner;
}

}  // namespace detail

// Cells inside co-cluster c are Bernoulli(signal_c), all others
// Bernoulli(noise_rate); nonzero cells hold 1. Deterministic in truth.seed.
inline DataMatrix generate_planted(Index rows, Index cols,
                                   const PlantedGroundTruth& truth,
                                   StorageKind storage = StorageKind::sparse) {
  if (rows < 1 || cols < 1) throw DomainError("planted matrix must be at least 1x1");
  if (!(truth.noise_rate >= 0.0 && truth.noise_rate <= 1.0))
    throw DomainError("noise_rate must lie in [0, 1]");
  for (const auto& c : truth.coclusters) {
    if (c.rows.empty() || c.cols.empty())
      throw DomainError("planted co-cluster must have rows and columns");
    if (!(c.signal > truth.noise_rate && c.signal <= 1.0))
      throw DomainError("planted signal must exceed noise_rate and be at most 1");
  }
  const auto row_owner = detail::membership(truth.coclusters, rows, true);
  const auto col_owner = detail::membership(truth.coclusters, cols, false);

  Rng rng(truth.seed);
  auto level = [&](Index r, Index c) {
    const int ro = row_owner[static_cast<std::size_t>(r)];
    if (ro >= 0 && ro == col_owner[static_cast<std::size_t>(c)])
      return truth.coclusters[static_cast<std::size_t>(ro)].signal;
    return truth.noise_rate;
  };

  if (storage == StorageKind::dense) {
    DenseMatrix m = DenseMatrix::Zero(rows, cols);
    for (Index r = 0; r < rows; ++r)
      for (Index c = 0; c < cols; ++c)
        if (uniform01(rng) < level(r, c)) m(r, c) = 1.0;
    return DataMatrix::from_dense(std::move(m));
  }
  std::vector<Triplet> entries;
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c)
      if (uniform01(rng) < level(r, c)) entries.emplace_back(r, c, 1.0);
  return DataMatrix::from_triplets(rows, cols, entries);
}

// Co-cluster c labels its rows/columns c; everything else takes the label
// coclusters.size() when any background index exists.
inline LabelAssignment planted_labels(Index rows, Index cols,
                                      const PlantedGroundTruth& truth) {
  const auto row_owner = detail::membership(truth.coclusters, rows, true);
  const auto col_owner = detail::membership(truth.coclusters, cols, false);
  const int background = static_cast<int>(truth.coclusters.size());
  LabelAssignment out;
  out.row_labels.assign(row_owner.begin(), row_owner.end());
  out.col_labels.assign(col_owner.begin(), col_owner.end());
  bool row_bg = false, col_bg = false;
  for (auto& l : out.row_labels)
    if (l < 0) l = background, row_bg = true;
  for (auto& l : out.col_labels)
    if (l < 0) l = background, col_bg = true;
  out.k = background + (row_bg ? 1 : 0);
  out.d = background + (col_bg ? 1 : 0);
  return out;
}

// Draws `count` disjoint co-clusters with the given sizes from shuffled
// row/column orders.
inline PlantedGroundTruth random_planted(Index rows, Index cols,
                                         const std::vector<std::pair<Index, Index>>& sizes,
                                         double signal, double noise_rate,
                                         std::uint64_t seed) {
  auto row_order = random_permutation<Index>(rows, derive_seed({seed, 1}));
  auto col_order = random_permutation<Index>(cols, derive_seed({seed, 2}));
  PlantedGroundTruth truth;
  truth.noise_rate = noise_rate;
  truth.seed = derive_seed({seed, 3});
  std::size_t r0 = 0, c0 = 0;
  for (const auto& [nr, nc] : sizes) {
    if (r0 + static_cast<std::size_t>(nr) > row_order.size() ||
        c0 + static_cast<std::size_t>(nc) > col_order.size())
      throw DomainError("planted co-cluster sizes exceed the matrix");
    PlantedCoCluster c;
    c.rows.assign(row_order.begin() + static_cast<std::ptrdiff_t>(r0),
                  row_order.begin() + static_cast<std::ptrdiff_t>(r0 + nr));
    c.cols.assign(col_order.begin() + static_cast<std::ptrdiff_t>(c0),
                  col_order.begin() + static_cast<std::ptrdiff_t>(c0 + nc));
    std::sort(c.rows.begin(), c.rows.end());
    std::sort(c.cols.begin(), c.cols.end());
    c.signal = signal;
    truth.coclusters.push_back(std::move(c));
    r0 += static_cast<std::size_t>(nr);
    c0 += static_cast<std::size_t>(nc);
  }
  return truth;
}

struct PlantedSpec {
  Index rows = 0;
  Index cols = 0;
  PlantedGroundTruth truth;
};

// {M, N, coclusters:[{rows, cols, signal}], noise_rate, seed}
inline PlantedSpec planted_spec_from_json(const nlohmann::json& j) {
  try {
    PlantedSpec spec;
    spec.rows = j.at("M").get<Index>();
    spec.cols = j.at("N").get<Index>();
    spec.truth.noise_rate = j.value("noise_rate", 0.0);
    spec.truth.seed = j.value("seed", std::uint64_t{0});
    for (const auto& c : j.at("coclusters")) {
      PlantedCoCluster pc;
      pc.rows = c.at("rows").get<std::vector<Index>>();
      pc.cols = c.at("cols").get<std::vector<Index>>();
      pc.signal = c.value("signal", 1.0);
      spec.truth.coclusters.push_back(std::move(pc));
    }
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("planted spec: ") + e.what());
  }
}

inline nlohmann::json to_json(const PlantedSpec& spec) {
  nlohmann::json cs = nlohmann::json::array();
  for (const auto& c : spec.truth.coclusters)
    cs.push_back({{"rows", c.rows}, {"cols", c.cols}, {"signal", c.signal}});
  return {{"M", spec.rows},
          {"N", spec.cols},
          {"coclusters", cs},
          {"noise_rate", spec.truth.noise_rate},
          {"seed", spec.truth.seed}};
}

}  // namespace lamc
