// Copyright the sponet authors.
// SPDX-License-Identifier: Apache-2.0

#include "sponet/csr.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>
#include <string>

namespace sponet
{

CsrMatrix::CsrMatrix(std::size_t n_rows, std::size_t n_cols, std::vector<std::size_t> row_offsets,
                     std::vector<std::size_t> col_indices, std::vector<double> values)
  : n_rows_(n_rows), n_cols_(n_cols), row_offsets_(std::move(row_offsets)),
    col_indices_(std::move(col_indices)), values_(std::move(values))
{
  if (row_offsets_.size() != n_rows_ + 1 || row_offsets_.front() != 0 ||
      row_offsets_.back() != col_indices_.size() || col_indices_.size() != values_.size())
  {
    throw std::invalid_argument("inconsistent CSR arrays");
  }
  for (std::size_t r = 0; r < n_rows_; r++)
  {
    if (row_offsets_[r] > row_offsets_[r + 1])
    {
      throw std::invalid_argument("CSR row offsets are not monotone");
    }
    for (auto k = row_offsets_[r]; k < row_offsets_[r + 1]; k++)
    {
      if (col_indices_[k] >= n_cols_ || (k > row_offsets_[r] && col_indices_[k] <= col_indices_[k - 1]))
      {
        throw std::invalid_argument("CSR column indices out of range or not strictly sorted in row " +
                                    std::to_string(r));
      }
    }
  }
}

CsrMatrix CsrMatrix::from_triplets(std::size_t n_rows, std::size_t n_cols,
                                   std::vector<Triplet> triplets)
{
  std::stable_sort(triplets.begin(), triplets.end(), [](const Triplet &a, const Triplet &b)
                   { return a.row != b.row ? a.row < b.row : a.col < b.col; });
  std::vector<std::size_t> offsets(n_rows + 1, 0);
  std::vector<std::size_t> cols;
  std::vector<double> vals;
  cols.reserve(triplets.size());
  vals.reserve(triplets.size());
  for (std::size_t k = 0; k < triplets.size();)
  {
    const auto &t = triplets[k];
    if (t.row >= n_rows || t.col >= n_cols)
    {
      throw std::out_of_range("triplet index outside matrix bounds");
    }
    double sum = 0.0;
    std::size_t e = k;
    for (; e < triplets.size() && triplets[e].row == t.row && triplets[e].col == t.col; e++)
    {
      sum += triplets[e].value;
    }
    cols.push_back(t.col);
    vals.push_back(sum);
    offsets[t.row + 1]++;
    k = e;
  }
  for (std::size_t r = 0; r < n_rows; r++)
  {
    offsets[r + 1] += offsets[r];
  }
  return CsrMatrix(n_rows, n_cols, std::move(offsets), std::move(cols), std::move(vals));
}

CsrMatrix CsrMatrix::identity(std::size_t n)
{
  std::vector<std::size_t> offsets(n + 1), cols(n);
  for (std::size_t i = 0; i < n; i++)
  {
    offsets[i + 1] = i + 1;
    cols[i] = i;
  }
  return CsrMatrix(n, n, std::move(offsets), std::move(cols), std::vector<double>(n, 1.0));
}

double CsrMatrix::at(std::size_t r, std::size_t c) const
{
  const auto begin = col_indices_.begin() + static_cast<std::ptrdiff_t>(row_offsets_[r]);
  const auto end = col_indices_.begin() + static_cast<std::ptrdiff_t>(row_offsets_[r + 1]);
  const auto it = std::lower_bound(begin, end, c);
  return (it != end && *it == c) ? values_[static_cast<std::size_t>(it - col_indices_.begin())] : 0.0;
}

void CsrMatrix::multiply(std::span<const double> x, std::span<double> y) const
{
  if (x.size() != n_cols_ || y.size() != n_rows_)
  {
    throw std::invalid_argument("CSR multiply: dimension mismatch");
  }
  for (std::size_t r = 0; r < n_rows_; r++)
  {
    double s = 0.0;
    for (auto k = row_offsets_[r]; k < row_offsets_[r + 1]; k++)
    {
      s += values_[k] * x[col_indices_[k]];
    }
    y[r] = s;
  }
}

std::vector<double> CsrMatrix::multiply(std::span<const double> x) const
{
  std::vector<double> y(n_rows_);
  multiply(x, y);
  return y;
}

void CsrMatrix::multiply_transpose_add(std::span<const double> x, std::span<double> y) const
{
  if (x.size() != n_rows_ || y.size() != n_cols_)
  {
    throw std::invalid_argument("CSR transpose multiply: dimension mismatch");
  }
  for (std::size_t r = 0; r < n_rows_; r++)
  {
    const double xr = x[r];
    for (auto k = row_offsets_[r]; k < row_offsets_[r + 1]; k++)
    {
      y[col_indices_[k]] += values_[k] * xr;
    }
  }
}

CsrMatrix CsrMatrix::transpose() const
{
  std::vector<Triplet> t;
  t.reserve(nnz());
  for (std::size_t r = 0; r < n_rows_; r++)
  {
    for (auto k = row_offsets_[r]; k < row_offsets_[r + 1]; k++)
    {
      t.push_back({col_indices_[k], r, values_[k]});
    }
  }
  return from_triplets(n_cols_, n_rows_, std::move(t));
}

std::vector<double> CsrMatrix::to_dense() const
{
  std::vector<double> d(n_rows_ * n_cols_, 0.0);
  for (std::size_t r = 0; r < n_rows_; r++)
  {
    for (auto k = row_offsets_[r]; k < row_offsets_[r + 1]; k++)
    {
      d[r * n_cols_ + col_indices_[k]] = values_[k];
    }
  }
  return d;
}

CsrMatrix multiply(const CsrMatrix &a, const CsrMatrix &b)
{
  if (a.cols() != b.rows())
  {
    throw std::invalid_argument("sparse product: dimension mismatch");
  }
  std::vector<Triplet> t;
  for (std::size_t r = 0; r < a.rows(); r++)
  {
    std::map<std::size_t, double> row;
    for (auto k = a.row_offsets()[r]; k < a.row_offsets()[r + 1]; k++)
    {
      const auto m = a.col_indices()[k];
      for (auto l = b.row_offsets()[m]; l < b.row_offsets()[m + 1]; l++)
      {
        row[b.col_indices()[l]] += a.values()[k] * b.values()[l];
      }
    }
    for (const auto &[c, v] : row)
    {
      t.push_back({r, c, v});
    }
  }
  return CsrMatrix::from_triplets(a.rows(), b.cols(), std::move(t));
}

}  // namespace sponet
