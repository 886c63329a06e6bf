#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace activeseg {

/// Compressed sparse row matrix with ascending column indices per row.
struct CsrMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::size_t> row_ptr{0};
  std::vector<std::int64_t> col;
  std::vector<double> val;

  std::size_t nnz() const noexcept { return val.size(); }
  /// Entry (i, j) or 0 when not stored. O(log row length).
  double at(std::size_t i, std::size_t j) const;
  std::vector<double> to_dense() const;
};

namespace kernels {

/// y = A x, one thread.
void spmv_reference(const CsrMatrix& a, std::span<const double> x, std::span<double> y);
/// y = A x, rows split across OpenMP threads. Bit-identical to the reference
/// (each row's sum is accumulated in the same order).
void spmv(const CsrMatrix& a, std::span<const double> x, std::span<double> y);

double dot(std::span<const double> a, std::span<const double> b);

}  // namespace kernels
}  // namespace activeseg
