#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "dddp/kernels.hpp"

using namespace dddp::kernels;

namespace {

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b))); }

std::vector<const KernelTable*> variants() {
  std::vector<const KernelTable*> out;
  if (avx2_table()) out.push_back(avx2_table());
  if (neon_table()) out.push_back(neon_table());
  return out;
}

}  // namespace

TEST_SUITE("kernels") {
  TEST_CASE("vector variants agree with the scalar reference") {
    const KernelTable& ref = scalar_table();
    std::mt19937_64 rng(3);
    for (const KernelTable* t : variants()) {
      CAPTURE(t->name);
      for (std::size_t n : {0u, 1u, 3u, 4u, 5u, 7u, 8u, 31u, 32u, 33u, 130u}) {
        CAPTURE(n);
        auto x = random_vec(n, rng);
        auto y = random_vec(n, rng);
        CHECK(rel(t->dot(n, x.data(), y.data()), ref.dot(n, x.data(), y.data())) < 1e-13);

        auto y1 = y, y2 = y;
        t->axpy(n, -0.7, x.data(), y1.data());
        ref.axpy(n, -0.7, x.data(), y2.data());
        for (std::size_t i = 0; i < n; ++i) CHECK(rel(y1[i], y2[i]) < 1e-14);

        auto big = random_vec(n, rng, 4.0);
        std::vector<double> t1(n), t2(n);
        t->tanh(n, big.data(), t1.data());
        ref.tanh(n, big.data(), t2.data());
        for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(t1[i] - t2[i]) <= 4e-15 * std::max(1e-300, std::abs(t2[i])) + 1e-300);
      }
      for (std::size_t rows : {1u, 2u, 5u, 32u}) {
        for (std::size_t cols : {1u, 3u, 4u, 9u, 32u}) {
          CAPTURE(rows);
          CAPTURE(cols);
          auto a = random_vec(rows * cols, rng);
          auto x = random_vec(cols, rng);
          auto xr = random_vec(rows, rng);
          auto y1 = random_vec(rows, rng);
          auto y2 = y1;
          t->gemv(rows, cols, a.data(), x.data(), y1.data());
          ref.gemv(rows, cols, a.data(), x.data(), y2.data());
          for (std::size_t i = 0; i < rows; ++i) CHECK(rel(y1[i], y2[i]) < 1e-13);

          auto z1 = random_vec(cols, rng);
          auto z2 = z1;
          t->gemv_t(rows, cols, a.data(), xr.data(), z1.data());
          ref.gemv_t(rows, cols, a.data(), xr.data(), z2.data());
          for (std::size_t i = 0; i < cols; ++i) CHECK(rel(z1[i], z2[i]) < 1e-13);

          auto a1 = a, a2 = a;
          t->ger(rows, cols, xr.data(), x.data(), a1.data());
          ref.ger(rows, cols, xr.data(), x.data(), a2.data());
          for (std::size_t i = 0; i < rows * cols; ++i) CHECK(rel(a1[i], a2[i]) < 1e-14);
        }
      }
    }
  }

  TEST_CASE("tanh handles extremes and aliasing") {
    const double inf = std::numeric_limits<double>::infinity();
    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<const KernelTable*> all = variants();
    all.push_back(&scalar_table());
    for (const KernelTable* t : all) {
      CAPTURE(t->name);
      std::vector<double> x = {0.0, -0.0, 1e-300, 0.3, -0.62, 0.63, 20.0, -20.0, 800.0, -800.0, inf, -inf, nan};
      std::vector<double> expect(x.size());
      for (std::size_t i = 0; i < x.size(); ++i) expect[i] = std::tanh(x[i]);
      t->tanh(x.size(), x.data(), x.data());
      for (std::size_t i = 0; i < x.size(); ++i) {
        CAPTURE(i);
        if (std::isnan(expect[i])) {
          CHECK(std::isnan(x[i]));
        } else {
          CHECK(std::abs(x[i] - expect[i]) <= 4e-15 * std::abs(expect[i]) + 1e-300);
        }
      }
    }
  }

  TEST_CASE("dispatch honours an override") {
    const KernelTable& before = active_table();
    set_active_table(scalar_table());
    CHECK(active_table().name == scalar_table().name);
    std::vector<double> x = {1, 2, 3}, y = {4, 5, 6};
    CHECK(dot(x, y) == doctest::Approx(32.0));
    set_active_table(before);
  }
}
