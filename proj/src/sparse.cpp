#include "activeseg/sparse.hpp"

#include <algorithm>
#include <cassert>

namespace activeseg {

double CsrMatrix::at(std::size_t i, std::size_t j) const {
  const auto first = col.begin() + static_cast<std::ptrdiff_t>(row_ptr[i]);
  const auto last = col.begin() + static_cast<std::ptrdiff_t>(row_ptr[i + 1]);
  const auto it = std::lower_bound(first, last, static_cast<std::int64_t>(j));
  if (it == last || *it != static_cast<std::int64_t>(j)) return 0.0;
  return val[static_cast<std::size_t>(it - col.begin())];
}

std::vector<double> CsrMatrix::to_dense() const {
  std::vector<double> out(rows * cols, 0.0);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t p = row_ptr[i]; p < row_ptr[i + 1]; ++p) out[i * cols + static_cast<std::size_t>(col[p])] = val[p];
  return out;
}

namespace kernels {

void spmv_reference(const CsrMatrix& a, std::span<const double> x, std::span<double> y) {
  assert(x.size() == a.cols && y.size() == a.rows);
  for (std::size_t i = 0; i < a.rows; ++i) {
    double s = 0.0;
    for (std::size_t p = a.row_ptr[i]; p < a.row_ptr[i + 1]; ++p) s += a.val[p] * x[static_cast<std::size_t>(a.col[p])];
    y[i] = s;
  }
}

void spmv(const CsrMatrix& a, std::span<const double> x, std::span<double> y) {
  assert(x.size() == a.cols && y.size() == a.rows);
  const auto rows = static_cast<std::int64_t>(a.rows);
#pragma omp parallel for schedule(static) if (a.nnz() > 20000)
  for (std::int64_t i = 0; i < rows; ++i) {
    double s = 0.0;
    const auto r = static_cast<std::size_t>(i);
    for (std::size_t p = a.row_ptr[r]; p < a.row_ptr[r + 1]; ++p) s += a.val[p] * x[static_cast<std::size_t>(a.col[p])];
    y[r] = s;
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace kernels
}  // namespace activeseg
