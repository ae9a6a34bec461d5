#include <doctest.h>

#include <atomic>
#include <random>

#include "dddp/core.hpp"
#include "dddp/deriv.hpp"
#include "dddp/models.hpp"

using namespace dddp;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

}  // namespace

TEST_SUITE("core") {
  TEST_CASE("window slots run newest to oldest") {
    DelayWindow w({vec({2}), vec({1}), vec({0})});
    CHECK(w.delay() == 2);
    w.shift_in(vec({3}));
    CHECK(w[0](0) == 3);
    CHECK(w[1](0) == 2);
    CHECK(w[2](0) == 1);
    const Vector z = w.stacked();
    CHECK(z.size() == 3);
    CHECK(z(0) == 3);
    const DelayWindow back = DelayWindow::from_stacked(z, 1, 2);
    for (int j = 0; j < 3; ++j) CHECK(back[j](0) == w[j](0));
  }

  TEST_CASE("windows mix the fixed prehistory with computed states") {
    // k = 2: the window at i = 1 is (x_1, x_0, x_{-1}).
    Trajectory t;
    t.initial = DelayWindow({vec({0}), vec({-1}), vec({-2})});
    t.states = {vec({1}), vec({2}), vec({3})};
    t.controls = {vec({0}), vec({0}), vec({0})};
    t.validate();
    const DelayWindow w = t.window_at(1);
    CHECK(w[0](0) == 1);
    CHECK(w[1](0) == 0);
    CHECK(w[2](0) == -1);
    CHECK(t.state(-2)(0) == -2);
    CHECK(t.state(3)(0) == 3);
    t.controls.pop_back();
    CHECK_THROWS_AS(t.validate(), std::invalid_argument);
  }

  TEST_CASE("block grid symmetrize and dense assembly") {
    BlockGrid g(2, 2, 2);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> d;
    for (int j = 0; j < 2; ++j)
      for (int l = 0; l < 2; ++l) g(j, l) = Matrix::NullaryExpr(2, 2, [&] { return d(rng); });
    CHECK(g.asymmetry() > 0.0);
    g.symmetrize();
    CHECK(g.asymmetry() == doctest::Approx(0.0));
    const Matrix dense = g.dense();
    CHECK((dense - dense.transpose()).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(dense.block(0, 2, 2, 2).isApprox(g(0, 1)));
  }

  TEST_CASE("tensor contraction is a weighted sum of components") {
    Tensor3 t(3, 2, 4);
    std::mt19937_64 rng(2);
    std::normal_distribution<double> d;
    Matrix expect = Matrix::Zero(2, 4);
    const Vector w = vec({0.5, -1.0, 2.0});
    for (int p = 0; p < 3; ++p) {
      const Matrix c = Matrix::NullaryExpr(2, 4, [&] { return d(rng); });
      t.set_component(p, c);
      CHECK(t.component(p).isApprox(c));
      expect += w(p) * c;
    }
    CHECK((t.contract(w) - expect).cwiseAbs().maxCoeff() < 1e-14);
  }

  TEST_CASE("quadratic cost derivatives match finite differences") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> d;
    const Matrix g = Matrix::NullaryExpr(3, 3, [&] { return d(rng); });
    const Matrix p = g.transpose() * g + Matrix::Identity(3, 3);
    const Matrix r = 0.3 * Matrix::Identity(2, 2);
    for (auto weighting : {WindowWeighting::AllSlots, WindowWeighting::CurrentOnly}) {
      QuadraticCost cost(p, r, weighting, 2.5);
      std::vector<Vector> slots;
      for (int j = 0; j < 3; ++j) slots.push_back(Vector::NullaryExpr(3, [&] { return d(rng); }));
      const DelayWindow w(slots);
      const Vector u = Vector::NullaryExpr(2, [&] { return d(rng); });
      CostDerivatives exact = CostDerivatives::zero(3, 2, 2);
      REQUIRE(cost.running_derivatives(0, w, u, exact));
      const CostDerivatives fd = fd_cost(cost, 0, w, u);
      for (int j = 0; j < 3; ++j) {
        CHECK(max_relative_error(exact.x[static_cast<std::size_t>(j)], fd.x[static_cast<std::size_t>(j)]) < 1e-8);
        for (int l = 0; l < 3; ++l) CHECK(max_relative_error(exact.xx(j, l), fd.xx(j, l)) < 1e-5);
      }
      CHECK(max_relative_error(exact.u, fd.u) < 1e-8);
      CHECK(max_relative_error(exact.uu, fd.uu) < 1e-5);
      CHECK(cost.terminal(w) == doctest::Approx(2.5 * (cost.running(0, w, Vector::Zero(2)))));
    }
  }

  TEST_CASE("rollout and total cost") {
    LinearDelayedModel model({Matrix::Constant(1, 1, 0.5), Matrix::Constant(1, 1, 0.25)},
                             Matrix::Constant(1, 1, 1.0));
    const DelayWindow init({vec({1}), vec({2})});
    const Trajectory t = rollout(model, init, {vec({0}), vec({1})});
    // x1 = 0.5*1 + 0.25*2 = 1; x2 = 0.5*1 + 0.25*1 + 1 = 1.75
    CHECK(t.states[0](0) == doctest::Approx(1.0));
    CHECK(t.states[1](0) == doctest::Approx(1.75));
    QuadraticCost cost(Matrix::Identity(1, 1), Matrix::Identity(1, 1), WindowWeighting::CurrentOnly, 1.0);
    // 1/2 (1 + 0) + 1/2 (1 + 1) + 1/2 (1.75^2)
    CHECK(total_cost(cost, t) == doctest::Approx(0.5 + 1.0 + 0.5 * 1.75 * 1.75));
  }

  TEST_CASE("parallel_for visits each index once") {
    for (int threads : {1, 3, 0}) {
      std::vector<std::atomic<int>> hits(97);
      parallel_for(97, threads, [&](int i) { hits[static_cast<std::size_t>(i)]++; });
      for (auto& h : hits) CHECK(h.load() == 1);
    }
  }
}
