#include <cassert>
#include <cstdlib>
#include <string_view>

#include "dddp/kernels.hpp"

namespace dddp::kernels {

namespace detail {
#ifdef DDDP_HAVE_AVX2_TU
const KernelTable& avx2_table_unchecked();
#endif
#ifdef DDDP_HAVE_NEON_TU
const KernelTable& neon_table_unchecked();
#endif
}  // namespace detail

const KernelTable* avx2_table() {
#ifdef DDDP_HAVE_AVX2_TU
  static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return supported ? &detail::avx2_table_unchecked() : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable* neon_table() {
#ifdef DDDP_HAVE_NEON_TU
  return &detail::neon_table_unchecked();
#else
  return nullptr;
#endif
}

namespace {

const KernelTable* select_default() {
  if (const char* env = std::getenv("DDDP_KERNELS"); env && std::string_view(env) == "scalar") {
    return &scalar_table();
  }
  if (const auto* t = avx2_table()) return t;
  if (const auto* t = neon_table()) return t;
  return &scalar_table();
}

const KernelTable*& active_slot() {
  static const KernelTable* active = select_default();
  return active;
}

}  // namespace

const KernelTable& active_table() { return *active_slot(); }

void set_active_table(const KernelTable& table) { active_slot() = &table; }

double dot(std::span<const double> x, std::span<const double> y) {
  assert(x.size() == y.size());
  return active_table().dot(x.size(), x.data(), y.data());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  assert(x.size() == y.size());
  active_table().axpy(x.size(), alpha, x.data(), y.data());
}

void gemv(std::span<const double> a, std::size_t rows, std::size_t cols,
          std::span<const double> x, std::span<double> y) {
  assert(a.size() == rows * cols && x.size() == cols && y.size() == rows);
  active_table().gemv(rows, cols, a.data(), x.data(), y.data());
}

void gemv_t(std::span<const double> a, std::size_t rows, std::size_t cols,
            std::span<const double> x, std::span<double> y) {
  assert(a.size() == rows * cols && x.size() == rows && y.size() == cols);
  active_table().gemv_t(rows, cols, a.data(), x.data(), y.data());
}

void ger(std::span<const double> x, std::span<const double> y, std::span<double> a) {
  assert(a.size() == x.size() * y.size());
  active_table().ger(x.size(), y.size(), x.data(), y.data(), a.data());
}

void tanh(std::span<const double> x, std::span<double> y) {
  assert(x.size() == y.size());
  active_table().tanh(x.size(), x.data(), y.data());
}

}  // namespace dddp::kernels
