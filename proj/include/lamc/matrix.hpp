#pragma once

// Nonnegative data matrix storage, permutation and block extraction.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "lamc/error.hpp"

namespace lamc {

using Index = std::int64_t;
using DenseMatrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor, Index>;
using Triplet = Eigen::Triplet<double, Index>;

enum class StorageKind { dense, sparse };

inline const char* to_string(StorageKind kind) {
  return kind == StorageKind::dense ? "dense" : "sparse";
}

namespace detail {

inline void check_value(double v, Index r, Index c) {
  if (!std::isfinite(v) || v < 0.0) {
    std::ostringstream os;
    os << "entry (" << r << ", " << c << ") = " << v
       << " is not a finite nonnegative value";
    throw DomainError(os.str());
  }
}

inline std::vector<Index> iota_ids(Index n) {
  std::vector<Index> ids(static_cast<std::size_t>(n));
  std::iota(ids.begin(), ids.end(), Index{0});
  return ids;
}

inline void check_permutation(std::span<const Index> perm, Index n,
                              const char* axis) {
  if (static_cast<Index>(perm.size()) != n) {
    throw DomainError(std::string(axis) + " permutation has length " +
                      std::to_string(perm.size()) + ", expected " +
                      std::to_string(n));
  }
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  for (Index p : perm) {
    if (p < 0 || p >= n) {
      throw DomainError(std::string(axis) + " permutation index " +
                        std::to_string(p) + " out of range");
    }
    if (seen[static_cast<std::size_t>(p)]++) {
      throw DomainError(std::string(axis) + " permutation repeats index " +
                        std::to_string(p));
    }
  }
}

}  // namespace detail

// An immutable M x N matrix of finite nonnegative values, stored dense or
// compressed-row sparse, carrying a stable global identifier per row and
// column. Identifiers follow the rows/columns through permutations.
class DataMatrix {
 public:
  static DataMatrix from_dense(DenseMatrix values) {
    for (Index c = 0; c < values.cols(); ++c)
      for (Index r = 0; r < values.rows(); ++r)
        detail::check_value(values(r, c), r, c);
    DataMatrix m;
    m.shape_check(values.rows(), values.cols());
    m.row_ids_ = detail::iota_ids(values.rows());
    m.col_ids_ = detail::iota_ids(values.cols());
    m.values_ = std::move(values);
    return m;
  }

  // Explicit zeros are dropped; duplicate coordinates are rejected.
  static DataMatrix from_triplets(Index rows, Index cols,
                                  std::span<const Triplet> entries) {
    DataMatrix m;
    m.shape_check(rows, cols);
    std::vector<Triplet> kept;
    kept.reserve(entries.size());
    for (const auto& t : entries) {
      if (t.row() < 0 || t.row() >= rows || t.col() < 0 || t.col() >= cols) {
        throw DomainError("entry (" + std::to_string(t.row()) + ", " +
                          std::to_string(t.col()) + ") outside " +
                          std::to_string(rows) + "x" + std::to_string(cols));
      }
      detail::check_value(t.value(), t.row(), t.col());
      if (t.value() != 0.0) kept.push_back(t);
    }
    std::sort(kept.begin(), kept.end(), [](const Triplet& a, const Triplet& b) {
      return a.row() != b.row() ? a.row() < b.row() : a.col() < b.col();
    });
    for (std::size_t i = 1; i < kept.size(); ++i) {
      if (kept[i].row() == kept[i - 1].row() &&
          kept[i].col() == kept[i - 1].col()) {
        throw DomainError("duplicate entry (" + std::to_string(kept[i].row()) +
                          ", " + std::to_string(kept[i].col()) + ")");
      }
    }
    SparseMatrix s(rows, cols);
    s.setFromTriplets(kept.begin(), kept.end());
    s.makeCompressed();
    m.row_ids_ = detail::iota_ids(rows);
    m.col_ids_ = detail::iota_ids(cols);
    m.values_ = std::move(s);
    return m;
  }

  static DataMatrix from_sparse(SparseMatrix values) {
    values.prune(0.0);
    values.makeCompressed();
    for (Index r = 0; r < values.outerSize(); ++r)
      for (SparseMatrix::InnerIterator it(values, r); it; ++it)
        detail::check_value(it.value(), it.row(), it.col());
    DataMatrix m;
    m.shape_check(values.rows(), values.cols());
    m.row_ids_ = detail::iota_ids(values.rows());
    m.col_ids_ = detail::iota_ids(values.cols());
    m.values_ = std::move(values);
    return m;
  }

  Index rows() const { return static_cast<Index>(row_ids_.size()); }
  Index cols() const { return static_cast<Index>(col_ids_.size()); }
  StorageKind kind() const {
    return std::holds_alternative<DenseMatrix>(values_) ? StorageKind::dense
                                                        : StorageKind::sparse;
  }
  bool is_dense() const { return kind() == StorageKind::dense; }

  const DenseMatrix& dense() const { return std::get<DenseMatrix>(values_); }
  const SparseMatrix& sparse() const { return std::get<SparseMatrix>(values_); }

  const std::vector<Index>& row_ids() const { return row_ids_; }
  const std::vector<Index>& col_ids() const { return col_ids_; }

  double operator()(Index r, Index c) const {
    if (is_dense()) return dense()(r, c);
    return sparse().coeff(r, c);
  }

  // Stored nonzeros (dense storage counts nonzero cells).
  Index nnz() const {
    if (is_dense()) return (dense().array() != 0.0).count();
    return sparse().nonZeros();
  }

  double sum() const { return is_dense() ? dense().sum() : sparse().sum(); }

  DenseMatrix to_dense() const {
    if (is_dense()) return dense();
    return DenseMatrix(sparse());
  }

  // Calls f(row, col, value) for every nonzero, row-major for sparse storage.
  template <class F>
  void for_each_nonzero(F&& f) const {
    if (is_dense()) {
      const auto& d = dense();
      for (Index c = 0; c < d.cols(); ++c)
        for (Index r = 0; r < d.rows(); ++r)
          if (d(r, c) != 0.0) f(r, c, d(r, c));
    } else {
      const auto& s = sparse();
      for (Index r = 0; r < s.outerSize(); ++r)
        for (SparseMatrix::InnerIterator it(s, r); it; ++it)
          f(it.row(), it.col(), it.value());
    }
  }

  // Entrywise equality of values and identifiers, independent of storage.
  friend bool operator==(const DataMatrix& a, const DataMatrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
    if (a.row_ids_ != b.row_ids_ || a.col_ids_ != b.col_ids_) return false;
    return a.to_dense() == b.to_dense();
  }

 private:
  friend DataMatrix permute(const DataMatrix&, std::span<const Index>,
                            std::span<const Index>);

  DataMatrix() = default;

  void shape_check(Index rows, Index cols) const {
    if (rows < 1 || cols < 1) {
      throw DomainError("matrix must be at least 1x1, got " +
                        std::to_string(rows) + "x" + std::to_string(cols));
    }
  }

  std::variant<DenseMatrix, SparseMatrix> values_;
  std::vector<Index> row_ids_;
  std::vector<Index> col_ids_;
};

// output(r, c) = input(row_perm[r], col_perm[c]); identifiers move along.
inline DataMatrix permute(const DataMatrix& input,
                          std::span<const Index> row_perm,
                          std::span<const Index> col_perm) {
  detail::check_permutation(row_perm, input.rows(), "row");
  detail::check_permutation(col_perm, input.cols(), "column");
  DataMatrix out;
  out.row_ids_.resize(row_perm.size());
  out.col_ids_.resize(col_perm.size());
  for (std::size_t r = 0; r < row_perm.size(); ++r)
    out.row_ids_[r] = input.row_ids_[static_cast<std::size_t>(row_perm[r])];
  for (std::size_t c = 0; c < col_perm.size(); ++c)
    out.col_ids_[c] = input.col_ids_[static_cast<std::size_t>(col_perm[c])];

  if (input.is_dense()) {
    const auto& src = input.dense();
    DenseMatrix dst(src.rows(), src.cols());
    for (Index c = 0; c < dst.cols(); ++c) {
      const auto sc = col_perm[static_cast<std::size_t>(c)];
      for (Index r = 0; r < dst.rows(); ++r)
        dst(r, c) = src(row_perm[static_cast<std::size_t>(r)], sc);
    }
    out.values_ = std::move(dst);
  } else {
    const auto& src = input.sparse();
    std::vector<Index> col_inverse(col_perm.size());
    for (std::size_t c = 0; c < col_perm.size(); ++c)
      col_inverse[static_cast<std::size_t>(col_perm[c])] = static_cast<Index>(c);
    SparseMatrix dst(src.rows(), src.cols());
    dst.reserve(src.nonZeros());
    std::vector<std::pair<Index, double>> row;
    for (Index r = 0; r < dst.rows(); ++r) {
      row.clear();
      for (SparseMatrix::InnerIterator it(src, row_perm[static_cast<std::size_t>(r)]);
           it; ++it)
        row.emplace_back(col_inverse[static_cast<std::size_t>(it.col())], it.value());
      std::sort(row.begin(), row.end());
      dst.startVec(r);
      for (const auto& [c, v] : row) dst.insertBack(r, c) = v;
    }
    dst.finalize();
    out.values_ = std::move(dst);
  }
  return out;
}

inline std::vector<Index> inverse_permutation(std::span<const Index> perm) {
  std::vector<Index> inv(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i)
    inv[static_cast<std::size_t>(perm[i])] = static_cast<Index>(i);
  return inv;
}

// Block sizes along each axis; sizes are contiguous spans in order.
struct Grid {
  std::vector<Index> row_sizes;
  std::vector<Index> col_sizes;

  Index m() const { return static_cast<Index>(row_sizes.size()); }
  Index n() const { return static_cast<Index>(col_sizes.size()); }

  // Splits `total` into `parts` near-equal spans, larger spans first.
  static std::vector<Index> balanced(Index total, Index parts) {
    if (parts < 1 || parts > total) {
      throw ConfigError("cannot split " + std::to_string(total) + " into " +
                        std::to_string(parts) + " nonempty spans");
    }
    std::vector<Index> sizes(static_cast<std::size_t>(parts), total / parts);
    for (Index i = 0; i < total % parts; ++i) ++sizes[static_cast<std::size_t>(i)];
    return sizes;
  }

  static Grid uniform(Index rows, Index cols, Index m, Index n) {
    return Grid{balanced(rows, m), balanced(cols, n)};
  }
};

// A read-only window onto a contiguous span of a parent matrix. The parent
// must outlive the view.
class BlockView {
 public:
  BlockView(const DataMatrix& parent, Index block_row, Index block_col,
            Index row_offset, Index row_count, Index col_offset, Index col_count)
      : parent_(&parent),
        block_row_(block_row),
        block_col_(block_col),
        row_offset_(row_offset),
        col_offset_(col_offset),
        rows_(row_count),
        cols_(col_count) {}

  // The whole matrix as a single block.
  static BlockView whole(const DataMatrix& m) {
    return BlockView(m, 0, 0, 0, m.rows(), 0, m.cols());
  }

  Index block_row() const { return block_row_; }
  Index block_col() const { return block_col_; }
  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  const DataMatrix& parent() const { return *parent_; }
  StorageKind kind() const { return parent_->kind(); }

  // Global identifier of local row r / column c.
  Index row_id(Index r) const {
    return parent_->row_ids()[static_cast<std::size_t>(row_offset_ + r)];
  }
  Index col_id(Index c) const {
    return parent_->col_ids()[static_cast<std::size_t>(col_offset_ + c)];
  }
  std::vector<Index> row_span() const {
    auto b = parent_->row_ids().begin() + row_offset_;
    return {b, b + rows_};
  }
  std::vector<Index> col_span() const {
    auto b = parent_->col_ids().begin() + col_offset_;
    return {b, b + cols_};
  }

  double operator()(Index r, Index c) const {
    return (*parent_)(row_offset_ + r, col_offset_ + c);
  }

  // Calls f(local_row, local_col, value) for every nonzero in the window.
  template <class F>
  void for_each_nonzero(F&& f) const {
    if (parent_->is_dense()) {
      const auto& d = parent_->dense();
      for (Index c = 0; c < cols_; ++c)
        for (Index r = 0; r < rows_; ++r)
          if (const double v = d(row_offset_ + r, col_offset_ + c); v != 0.0) f(r, c, v);
      return;
    }
    const auto& s = parent_->sparse();
    for (Index r = 0; r < rows_; ++r)
      for (SparseMatrix::InnerIterator it(s, row_offset_ + r); it; ++it)
        if (it.col() >= col_offset_ && it.col() < col_offset_ + cols_)
          f(r, it.col() - col_offset_, it.value());
  }

  DenseMatrix dense() const {
    if (parent_->is_dense())
      return parent_->dense().block(row_offset_, col_offset_, rows_, cols_);
    return DenseMatrix(sparse());
  }

  SparseMatrix sparse() const {
    if (parent_->is_dense()) return dense().sparseView();
    const auto& s = parent_->sparse();
    SparseMatrix out(rows_, cols_);
    Index count = 0;
    for (Index r = 0; r < rows_; ++r)
      for (SparseMatrix::InnerIterator it(s, row_offset_ + r); it; ++it)
        if (it.col() >= col_offset_ && it.col() < col_offset_ + cols_) ++count;
    out.reserve(count);
    for (Index r = 0; r < rows_; ++r) {
      out.startVec(r);
      for (SparseMatrix::InnerIterator it(s, row_offset_ + r); it; ++it)
        if (it.col() >= col_offset_ && it.col() < col_offset_ + cols_)
          out.insertBack(r, it.col() - col_offset_) = it.value();
    }
    out.finalize();
    return out;
  }

 private:
  const DataMatrix* parent_;
  Index block_row_, block_col_;
  Index row_offset_, col_offset_;
  Index rows_, cols_;
};

// Views in row-major block order over contiguous spans of `matrix`.
inline std::vector<BlockView> extract_blocks(const DataMatrix& matrix,
                                             const Grid& grid) {
  auto check = [](const std::vector<Index>& sizes, Index total, const char* axis) {
    if (sizes.empty()) throw ConfigError(std::string(axis) + " grid is empty");
    Index sum = 0;
    for (Index s : sizes) {
      if (s < 1) throw ConfigError(std::string(axis) + " block size must be >= 1");
      sum += s;
    }
    if (sum != total) {
      throw ConfigError(std::string(axis) + " block sizes sum to " +
                        std::to_string(sum) + ", matrix has " +
                        std::to_string(total));
    }
  };
  check(grid.row_sizes, matrix.rows(), "row");
  check(grid.col_sizes, matrix.cols(), "column");

  std::vector<BlockView> blocks;
  blocks.reserve(grid.row_sizes.size() * grid.col_sizes.size());
  Index r0 = 0;
  for (std::size_t i = 0; i < grid.row_sizes.size(); ++i) {
    Index c0 = 0;
    for (std::size_t j = 0; j < grid.col_sizes.size(); ++j) {
      blocks.emplace_back(matrix, static_cast<Index>(i), static_cast<Index>(j),
                          r0, grid.row_sizes[i], c0, grid.col_sizes[j]);
      c0 += grid.col_sizes[j];
    }
    r0 += grid.row_sizes[i];
  }
  return blocks;
}

}  // namespace lamc
