#pragma once

// Dense double-precision vector kernels used by the hot loops (network
// inference/training and tensor contractions). Every kernel has a scalar
// reference implementation; ISA-specific variants are selected once at runtime.
// Matrices are row-major with leading dimension equal to the column count.

#include <cstddef>
#include <span>
#include <string_view>

namespace dddp::kernels {

struct KernelTable {
  std::string_view name;
  double (*dot)(std::size_t n, const double* x, const double* y);
  // y += alpha * x
  void (*axpy)(std::size_t n, double alpha, const double* x, double* y);
  // y += A x, A is rows x cols
  void (*gemv)(std::size_t rows, std::size_t cols, const double* a, const double* x, double* y);
  // y += A^T x, A is rows x cols, x has rows entries, y has cols entries
  void (*gemv_t)(std::size_t rows, std::size_t cols, const double* a, const double* x, double* y);
  // A += x y^T
  void (*ger)(std::size_t rows, std::size_t cols, const double* x, const double* y, double* a);
  // y = tanh(x) elementwise; x and y may alias
  void (*tanh)(std::size_t n, const double* x, double* y);
};

const KernelTable& scalar_table();
// nullptr when the variant is not compiled in or the CPU lacks the feature.
const KernelTable* avx2_table();
const KernelTable* neon_table();

// The table used by the free functions below. Chosen on first use: the best
// supported variant, unless DDDP_KERNELS=scalar is set in the environment.
const KernelTable& active_table();
// Overrides the active table (tests and benchmarks). Not thread safe.
void set_active_table(const KernelTable& table);

double dot(std::span<const double> x, std::span<const double> y);
void axpy(double alpha, std::span<const double> x, std::span<double> y);
void gemv(std::span<const double> a, std::size_t rows, std::size_t cols,
          std::span<const double> x, std::span<double> y);
void gemv_t(std::span<const double> a, std::size_t rows, std::size_t cols,
            std::span<const double> x, std::span<double> y);
void ger(std::span<const double> x, std::span<const double> y, std::span<double> a);
void tanh(std::span<const double> x, std::span<double> y);

}  // namespace dddp::kernels
