#pragma once

// Partition agreement metrics: normalized mutual information (geometric-mean
// normalization) and the adjusted Rand index.

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "lamc/error.hpp"
#include "lamc/labels.hpp"

namespace lamc {

// Counts indexed by (predicted cluster, true cluster) after compacting the
// label values to 0..k-1 in order of first appearance.
class ContingencyTable {
 public:
  ContingencyTable(std::span<const int> pred, std::span<const int> truth) {
    if (pred.size() != truth.size())
      throw DomainError("label vectors differ in length (" + std::to_string(pred.size()) +
                        " vs " + std::to_string(truth.size()) + ")");
    const auto p = compact(pred, pred_clusters_);
    const auto t = compact(truth, truth_clusters_);
    counts_.assign(pred_clusters_ * truth_clusters_, 0);
    pred_totals_.assign(pred_clusters_, 0);
    truth_totals_.assign(truth_clusters_, 0);
    for (std::size_t i = 0; i < p.size(); ++i) {
      ++counts_[p[i] * truth_clusters_ + t[i]];
      ++pred_totals_[p[i]];
      ++truth_totals_[t[i]];
    }
    n_ = pred.size();
  }

  std::size_t items() const { return n_; }
  std::size_t pred_clusters() const { return pred_clusters_; }
  std::size_t truth_clusters() const { return truth_clusters_; }
  std::size_t count(std::size_t p, std::size_t t) const { return counts_[p * truth_clusters_ + t]; }
  std::size_t pred_total(std::size_t p) const { return pred_totals_[p]; }
  std::size_t truth_total(std::size_t t) const { return truth_totals_[t]; }

 private:
  static std::vector<std::size_t> compact(std::span<const int> labels, std::size_t& clusters) {
    std::map<int, std::size_t> ids;
    std::vector<std::size_t> out;
    out.reserve(labels.size());
    for (int l : labels) out.push_back(ids.try_emplace(l, ids.size()).first->second);
    clusters = ids.size();
    return out;
  }

  std::size_t n_ = 0;
  std::size_t pred_clusters_ = 0, truth_clusters_ = 0;
  std::vector<std::size_t> counts_, pred_totals_, truth_totals_;
};

namespace detail {

inline double entropy(const std::vector<double>& probs) {
  double h = 0.0;
  for (double p : probs)
    if (p > 0.0) h -= p * std::log(p);
  return h;
}

inline double choose2(double x) { return x * (x - 1.0) / 2.0; }

}  // namespace detail

// I(pred; truth) / sqrt(H(pred) H(truth)); 1 when both partitions are a
// single cluster, 0 when exactly one of them is.
inline double nmi(std::span<const int> pred, std::span<const int> truth) {
  if (pred.empty()) throw DomainError("nmi needs at least one item");
  const ContingencyTable table(pred, truth);
  const double n = static_cast<double>(table.items());
  std::vector<double> pp, pt;
  for (std::size_t p = 0; p < table.pred_clusters(); ++p)
    pp.push_back(static_cast<double>(table.pred_total(p)) / n);
  for (std::size_t t = 0; t < table.truth_clusters(); ++t)
    pt.push_back(static_cast<double>(table.truth_total(t)) / n);
  const double hp = detail::entropy(pp), ht = detail::entropy(pt);
  if (table.pred_clusters() == 1 && table.truth_clusters() == 1) return 1.0;
  if (table.pred_clusters() == 1 || table.truth_clusters() == 1) return 0.0;
  double mi = 0.0;
  for (std::size_t p = 0; p < table.pred_clusters(); ++p)
    for (std::size_t t = 0; t < table.truth_clusters(); ++t) {
      const double c = static_cast<double>(table.count(p, t));
      if (c > 0.0) mi += c / n * std::log(c * n / (static_cast<double>(table.pred_total(p)) *
                                                    static_cast<double>(table.truth_total(t))));
    }
  const double v = mi / std::sqrt(hp * ht);
  return std::clamp(v, 0.0, 1.0);
}

inline double ari(std::span<const int> pred, std::span<const int> truth) {
  if (pred.size() < 2 && pred.size() == truth.size())
    throw DomainError("ari needs at least two items");
  const ContingencyTable table(pred, truth);
  double index = 0.0, a = 0.0, b = 0.0;
  for (std::size_t p = 0; p < table.pred_clusters(); ++p)
    for (std::size_t t = 0; t < table.truth_clusters(); ++t)
      index += detail::choose2(static_cast<double>(table.count(p, t)));
  for (std::size_t p = 0; p < table.pred_clusters(); ++p)
    a += detail::choose2(static_cast<double>(table.pred_total(p)));
  for (std::size_t t = 0; t < table.truth_clusters(); ++t)
    b += detail::choose2(static_cast<double>(table.truth_total(t)));
  const double expected = a * b / detail::choose2(static_cast<double>(table.items()));
  const double max_index = 0.5 * (a + b);
  const double denom = max_index - expected;
  if (denom == 0.0) return index == max_index ? 1.0 : 0.0;
  return (index - expected) / denom;
}

struct CoClusterScores {
  double row = 0.0;
  double col = 0.0;
  double mean() const { return 0.5 * (row + col); }
};

inline CoClusterScores cocluster_nmi(const LabelAssignment& pred, const LabelAssignment& truth) {
  if (pred.row_labels.size() != truth.row_labels.size() ||
      pred.col_labels.size() != truth.col_labels.size())
    throw DomainError("label assignments have different dimensions");
  return {nmi(pred.row_labels, truth.row_labels), nmi(pred.col_labels, truth.col_labels)};
}

inline CoClusterScores cocluster_ari(const LabelAssignment& pred, const LabelAssignment& truth) {
  if (pred.row_labels.size() != truth.row_labels.size() ||
      pred.col_labels.size() != truth.col_labels.size())
    throw DomainError("label assignments have different dimensions");
  return {ari(pred.row_labels, truth.row_labels), ari(pred.col_labels, truth.col_labels)};
}

}  // namespace lamc
