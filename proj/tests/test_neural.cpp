#include <doctest.h>

#include <cmath>
#include <numeric>
#include <numbers>
#include <random>

#include "dddp/deriv.hpp"
#include "dddp/neural.hpp"

using namespace dddp;

namespace {

DelayWindow random_window(const NetworkDims& d, std::mt19937_64& rng, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  std::vector<Vector> slots;
  for (int j = 0; j <= d.delay; ++j) slots.push_back(Vector::NullaryExpr(d.augmented(), [&] { return u(rng); }));
  return DelayWindow(slots);
}

Sequence random_sequence(const NetworkDims& d, int steps, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.8, 0.8);
  Sequence s;
  for (int t = 0; t < steps + d.delay + 1; ++t) s.visible.push_back(Vector::NullaryExpr(d.n_visible, [&] { return u(rng); }));
  for (int t = 0; t < steps; ++t) s.controls.push_back(Vector::NullaryExpr(d.control_dim, [&] { return u(rng); }));
  return s;
}

double rel(double a, double b) { return std::abs(a - b) / std::max({1e-3, std::abs(a), std::abs(b)}); }

DatasetConfig small_dataset(int trajectories) {
  DatasetConfig c;
  c.trajectories = trajectories;
  c.max_amplitude = 30.0;
  return c;
}

}  // namespace

TEST_SUITE("neural") {
  TEST_CASE("parameter layout") {
    const NetworkDims d{2, 3, 1, 2};
    const DelayedNetwork net(d);
    // W_u 5x1, b_u 5, then three (5x5, 5) slot blocks.
    CHECK(d.param_count() == 5u + 5u + 3u * 30u);
    CHECK(net.offset_b_u() == 5u);
    CHECK(net.offset_w(0) == 10u);
    CHECK(net.offset_b(0) == 35u);
    CHECK(net.offset_w(2) == 10u + 60u);
    CHECK_THROWS_AS((DelayedNetwork(d, std::vector<double>(3))), std::invalid_argument);
  }

  TEST_CASE("outputs stay inside the tanh range") {
    const NetworkDims d{2, 6, 1, 3};
    std::mt19937_64 rng(1);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      DelayedNetwork net = DelayedNetwork::random(d, seed);
      for (double& p : net.params()) p *= 20.0;
      for (int i = 0; i < 20; ++i) {
        const Vector y = net_forward(net, random_window(d, rng, 50.0), Vector::Constant(1, 100.0 * (i - 10)));
        CHECK(y.cwiseAbs().maxCoeff() <= 1.0);
        CHECK(y.allFinite());
      }
    }
  }

  TEST_CASE("analytic Jacobians match finite differences at 100 points") {
    const NetworkDims d{2, 30, 1, 3};
    std::mt19937_64 rng(2);
    double worst = 0.0;
    for (int point = 0; point < 100; ++point) {
      const DelayedNetwork net = DelayedNetwork::random(d, 1000u + static_cast<std::uint64_t>(point % 10));
      const DelayWindow w = random_window(d, rng, 1.0);
      const Vector u = Vector::Constant(1, std::uniform_real_distribution<double>(-2.0, 2.0)(rng));
      const NetJacobians j = net_jacobians(net, w, u);
      const DynamicsFirstOrder fd = fd_dynamics_first(net, w, u, 1e-6);
      for (int s = 0; s <= d.delay; ++s) worst = std::max(worst, max_relative_error(j.slots[static_cast<std::size_t>(s)], fd.f_x[static_cast<std::size_t>(s)]));
      worst = std::max(worst, max_relative_error(j.control, fd.f_u));
    }
    CAPTURE(worst);
    CHECK(worst < 1e-5);
  }

  TEST_CASE("BPTT gradient matches parameter finite differences") {
    const NetworkDims d{2, 3, 1, 2};
    std::mt19937_64 rng(3);
    DelayedNetwork net = DelayedNetwork::random(d, 4);
    const Sequence seq = random_sequence(d, 6, rng);
    for (bool masked : {false, true}) {
      std::vector<double> mask;
      if (masked) mask = {1.0, 0.0, 0.5, 1.0, 0.0, 2.0};
      const BpttResult g = bptt_gradient(net, seq, mask);
      double worst = 0.0;
      const double h = 1e-6;
      for (std::size_t i = 0; i < g.gradient.size(); ++i) {
        const double keep = net.params()[i];
        net.params()[i] = keep + h;
        const double up = bptt_gradient(net, seq, mask).loss;
        net.params()[i] = keep - h;
        const double down = bptt_gradient(net, seq, mask).loss;
        net.params()[i] = keep;
        worst = std::max(worst, rel(g.gradient[i], (up - down) / (2.0 * h)));
      }
      CAPTURE(worst);
      CHECK(worst < 1e-4);
    }
  }

  TEST_CASE("BPTT loss equals the closed-loop rollout error") {
    const NetworkDims d{2, 4, 1, 3};
    std::mt19937_64 rng(5);
    const DelayedNetwork net = DelayedNetwork::random(d, 6);
    const Sequence seq = random_sequence(d, 10, rng);
    const auto out = net_rollout(net, seq);
    double loss = 0.0;
    for (int t = 1; t <= 10; ++t) loss += (out[static_cast<std::size_t>(t - 1)].head(2) - seq.visible[static_cast<std::size_t>(t + 3)]).squaredNorm();
    CHECK(bptt_gradient(net, seq).loss == doctest::Approx(loss).epsilon(1e-12));
  }

  TEST_CASE("Adam first step moves each parameter by the learning rate") {
    AdamState s(3, 0.01);
    std::vector<double> p = {1.0, -2.0, 0.5};
    const std::vector<double> g = {0.3, -4.0, 1e-3};
    adam_step(s, p, g);
    CHECK(p[0] == doctest::Approx(1.0 - 0.01).epsilon(1e-6));
    CHECK(p[1] == doctest::Approx(-2.0 + 0.01).epsilon(1e-6));
    CHECK(p[2] == doctest::Approx(0.5 - 0.01 * 1e-3 / (1e-3 + 1e-8)).epsilon(1e-9));
    CHECK(s.step == 1);
    // Second step with the same gradient: bias-corrected moments equal g and g^2 again.
    adam_step(s, p, g);
    CHECK(p[0] == doctest::Approx(1.0 - 0.02).epsilon(1e-6));
  }

  TEST_CASE("dataset sequences start hanging and stay on the scaled circle") {
    DatasetConfig c = small_dataset(50);
    const SequenceDataset data = generate_pendulum_dataset(c);
    REQUIRE(data.sequences.size() == 50u);
    double umin = 1e300, umax = -1e300;
    for (const auto& s : data.sequences) {
      CHECK(s.steps() == 50);
      CHECK(s.visible.size() == 54u);
      for (int j = 0; j <= 3; ++j) {
        CHECK(s.visible[static_cast<std::size_t>(j)](0) == doctest::Approx(0.0));
        CHECK(s.visible[static_cast<std::size_t>(j)](1) == doctest::Approx(c.position_scale));
      }
      for (const auto& y : s.visible) CHECK(y.norm() == doctest::Approx(c.position_scale));
      for (const auto& u : s.controls) {
        CHECK(std::abs(u(0)) <= c.max_amplitude + 1e-12);
        umin = std::min(umin, u(0));
        umax = std::max(umax, u(0));
      }
    }
    CHECK(data.control_min == umin);
    CHECK(data.control_max == umax);
    const SequenceDataset again = generate_pendulum_dataset(c);
    CHECK(again.sequences[7].visible[30] == data.sequences[7].visible[30]);
  }

  TEST_CASE("angle cost derivatives and the hanging baseline") {
    const AngleCost cost(6, 1, 1.5, 0.2, 4.0);
    std::vector<Vector> slots(2, Vector::Zero(6));
    slots[0].head(2) = 0.8 * Vector((Vector(2) << 0.0, 1.0).finished());
    const DelayWindow hanging(slots);
    CHECK(cost.running(0, hanging, Vector::Zero(1)) == doctest::Approx(1.5 * std::numbers::pi * std::numbers::pi));
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> d(-0.9, 0.9);
    for (int i = 0; i < 50; ++i) {
      std::vector<Vector> s(2);
      for (auto& v : s) v = Vector::NullaryExpr(6, [&] { return d(rng); });
      if (s[0](1) > -0.1 && std::abs(s[0](0)) < 0.1) s[0](1) = 0.5;  // away from the branch cut
      const DelayWindow w(s);
      const Vector u = Vector::Constant(1, d(rng));
      CostDerivatives exact = CostDerivatives::zero(6, 1, 1);
      REQUIRE(cost.running_derivatives(0, w, u, exact));
      const CostDerivatives fd = fd_cost(cost, 0, w, u, FdSteps(1e-6, 1e-4));
      CHECK(max_relative_error(exact.x[0], fd.x[0]) < 1e-6);
      CHECK(max_relative_error(exact.xx(0, 0), fd.xx(0, 0)) < 1e-4);
      CHECK(max_relative_error(exact.u, fd.u) < 1e-6);
      CHECK(exact.x[1].norm() == 0.0);
    }
  }

  TEST_CASE("swing-up problem on the network") {
    const NetworkDims d{2, 5, 1, 3};
    const DelayedNetwork net = DelayedNetwork::random(d, 3);
    SequenceDataset meta;
    meta.position_scale = 0.8;
    meta.control_min = -20.0;
    meta.control_max = 10.0;
    PendulumNetOptions opt;
    opt.control_ratio = 2.0;
    const Problem p = make_pendulum_ddp_problem(net, meta, opt);
    CHECK(p.initial.slots() == 4);
    for (int j = 0; j < 4; ++j) {
      CHECK(p.initial[j](1) == doctest::Approx(0.8));
      CHECK(p.initial[j].tail(5).norm() == 0.0);
    }
    const auto& cost = static_cast<const AngleCost&>(*p.cost);
    CHECK(cost.control_weight() == doctest::Approx(2.0 / (15.0 * 15.0)));
    CHECK(p.u_init.size() == static_cast<std::size_t>(opt.horizon));
  }

  TEST_CASE("training is reproducible and independent of the thread count") {
    const SequenceDataset data = generate_pendulum_dataset(small_dataset(60));
    const NetworkDims d{2, 6, 1, 3};
    TrainConfig c;
    c.epochs = 3;
    c.batch_size = 20;
    c.threads = 1;
    const TrainResult a = train(data, d, c);
    c.threads = 3;
    const TrainResult b = train(data, d, c);
    REQUIRE(a.net.params().size() == b.net.params().size());
    for (std::size_t i = 0; i < a.net.params().size(); ++i) CHECK(a.net.params()[i] == b.net.params()[i]);
    CHECK(a.report.train_loss == b.report.train_loss);
    CHECK(a.report.train_count + a.report.val_count == 60u);
    CHECK(a.report.val_count == 6u);
  }

  TEST_CASE("non-finite data aborts training") {
    SequenceDataset data = generate_pendulum_dataset(small_dataset(10));
    data.sequences[3].visible[20](0) = std::nan("");
    TrainConfig c;
    c.epochs = 1;
    CHECK_THROWS_AS(train(data, NetworkDims{2, 4, 1, 3}, c), std::runtime_error);
  }

  TEST_CASE("persistence baseline of a constant sequence is zero") {
    SequenceDataset data;
    data.delay = 1;
    Sequence s;
    s.visible.assign(6, Vector::Constant(2, 0.3));
    s.controls.assign(4, Vector::Zero(1));
    data.sequences.push_back(s);
    const std::vector<std::size_t> idx = {0};
    CHECK(persistence_mse(data, idx) == 0.0);
  }

  TEST_CASE("hidden states are free but visible error stays within 2x across seeds") {
    const SequenceDataset data = generate_pendulum_dataset(small_dataset(1000));
    DatasetConfig dc = small_dataset(60);
    dc.seed = 99;
    const SequenceDataset held_out = generate_pendulum_dataset(dc);
    std::vector<std::size_t> all(held_out.sequences.size());
    std::iota(all.begin(), all.end(), 0);
    const NetworkDims d{2, 30, 1, 3};
    std::vector<double> errors;
    std::vector<std::vector<Vector>> hidden;
    for (std::uint64_t seed : {11u, 12u, 13u}) {
      TrainConfig c;
      c.epochs = 200;
      c.batch_size = 16;
      c.learning_rate = 3e-3;
      c.final_lr_fraction = 0.02;
      c.seed = seed;
      const TrainResult r = train(data, d, c);
      errors.push_back(std::sqrt(rollout_mse(r.net, held_out, all)));
      std::vector<Vector> h;
      for (const auto& x : net_rollout(r.net, data.sequences[0])) h.push_back(x.tail(30));
      hidden.push_back(h);
    }
    const double lo = *std::min_element(errors.begin(), errors.end());
    const double hi = *std::max_element(errors.begin(), errors.end());
    CAPTURE(lo);
    CAPTURE(hi);
    CHECK(hi <= 2.0 * lo);
    double gap = 0.0;
    for (std::size_t t = 0; t < hidden[0].size(); ++t) gap = std::max(gap, (hidden[0][t] - hidden[1][t]).norm());
    CHECK(gap > 0.1);
  }
}
