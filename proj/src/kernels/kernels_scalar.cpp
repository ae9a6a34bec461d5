#include <cmath>

#include "dddp/kernels.hpp"

namespace dddp::kernels {
namespace {

double dot_scalar(std::size_t n, const double* x, const double* y) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

void axpy_scalar(std::size_t n, double alpha, const double* x, double* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void gemv_scalar(std::size_t rows, std::size_t cols, const double* a, const double* x, double* y) {
  for (std::size_t r = 0; r < rows; ++r) y[r] += dot_scalar(cols, a + r * cols, x);
}

void gemv_t_scalar(std::size_t rows, std::size_t cols, const double* a, const double* x,
                   double* y) {
  for (std::size_t r = 0; r < rows; ++r) axpy_scalar(cols, x[r], a + r * cols, y);
}

void ger_scalar(std::size_t rows, std::size_t cols, const double* x, const double* y, double* a) {
  for (std::size_t r = 0; r < rows; ++r) axpy_scalar(cols, x[r], y, a + r * cols);
}

void tanh_scalar(std::size_t n, const double* x, double* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] = std::tanh(x[i]);
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{"scalar", dot_scalar, axpy_scalar, gemv_scalar, gemv_t_scalar,
                                 ger_scalar, tanh_scalar};
  return table;
}

}  // namespace dddp::kernels
