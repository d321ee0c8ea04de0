// Copyright the sponet authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace sponet
{

struct Triplet
{
  std::size_t row;
  std::size_t col;
  double value;
};

// Compressed sparse row matrix. Column indices are sorted within each row
// and every (row, col) pair appears at most once.
class CsrMatrix
{
public:
  CsrMatrix() = default;
  CsrMatrix(std::size_t n_rows, std::size_t n_cols, std::vector<std::size_t> row_offsets,
            std::vector<std::size_t> col_indices, std::vector<double> values);

  // Sorts the triplets and sums duplicates. Explicit zeros are kept so the
  // structural pattern of an assembly survives cancellation.
  static CsrMatrix from_triplets(std::size_t n_rows, std::size_t n_cols,
                                 std::vector<Triplet> triplets);
  static CsrMatrix identity(std::size_t n);

  std::size_t rows() const { return n_rows_; }
  std::size_t cols() const { return n_cols_; }
  std::size_t nnz() const { return values_.size(); }

  const std::vector<std::size_t> &row_offsets() const { return row_offsets_; }
  const std::vector<std::size_t> &col_indices() const { return col_indices_; }
  const std::vector<double> &values() const { return values_; }

  // Returns 0 for entries outside the pattern.
  double at(std::size_t r, std::size_t c) const;

  // y = A x.
  void multiply(std::span<const double> x, std::span<double> y) const;
  std::vector<double> multiply(std::span<const double> x) const;
  // y += A^T x.
  void multiply_transpose_add(std::span<const double> x, std::span<double> y) const;

  CsrMatrix transpose() const;
  std::vector<double> to_dense() const;  // row-major

private:
  std::size_t n_rows_ = 0;
  std::size_t n_cols_ = 0;
  std::vector<std::size_t> row_offsets_{0};
  std::vector<std::size_t> col_indices_;
  std::vector<double> values_;
};

CsrMatrix multiply(const CsrMatrix &a, const CsrMatrix &b);

}  // namespace sponet
