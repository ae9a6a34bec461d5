#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "dddp/core.hpp"
#include "dddp/solver.hpp"

namespace dddp {

/// Two-stage continuously stirred tank reactor with a transport delay between
/// the tanks, Euler-discretized. State (x1, x2, x3, x4): normalized
/// concentration/temperature of tank 1 then tank 2. Controls (u1, u2).
class CstrModel final : public DynamicsModel {
 public:
  /// tau must be a whole multiple of dt; k = tau / dt.
  explicit CstrModel(double tau = 0.5, double dt = 0.05);

  int state_dim() const override { return 4; }
  int control_dim() const override { return 2; }
  int delay() const override { return delay_; }
  Vector step(const DelayWindow& window, const Vector& u) const override;

  /// Right-hand side of the ODE, given x(t) and x(t - tau).
  static Vector rate(const Vector& x, const Vector& x_delayed, const Vector& u);
  static Vector initial_state();

  double tau() const { return tau_; }
  double dt() const { return dt_; }

 private:
  double tau_;
  double dt_;
  int delay_;
};

struct PendulumParams {
  double mass = 1.0;
  double length = 1.0;
  double gravity = 9.81;
  double damping = 0.05;
  double dt = 0.02;
};

/// Torque-driven pendulum, state (theta, theta_dot) with theta = 0 upright and
/// theta = pi hanging. Semi-implicit Euler.
class PendulumModel final : public DynamicsModel {
 public:
  explicit PendulumModel(PendulumParams params = {});

  int state_dim() const override { return 2; }
  int control_dim() const override { return 1; }
  int delay() const override { return 0; }
  Vector step(const DelayWindow& window, const Vector& u) const override;
  bool jacobians(const DelayWindow& window, const Vector& u, std::vector<Matrix>& f_x,
                 Matrix& f_u) const override;

  Vector step_state(const Vector& state, double torque) const;
  const PendulumParams& params() const { return params_; }

 private:
  PendulumParams params_;
};

/// Bob position (sin theta, -cos theta); hanging maps to (0, 1), upright to (0, -1).
Vector observe_position(double theta);
/// Inverse of observe_position for any nonzero (x, y); result in (-pi, pi].
double angle_from_position(double x, double y);
/// Wraps to (-pi, pi].
double wrap_angle(double theta);

/// x_{i+1} = sum_j A_j x_{i-j} + B u_i.
class LinearDelayedModel final : public DynamicsModel {
 public:
  LinearDelayedModel(std::vector<Matrix> a, Matrix b);

  int state_dim() const override { return static_cast<int>(b_.rows()); }
  int control_dim() const override { return static_cast<int>(b_.cols()); }
  int delay() const override { return static_cast<int>(a_.size()) - 1; }
  Vector step(const DelayWindow& window, const Vector& u) const override;
  bool jacobians(const DelayWindow& window, const Vector& u, std::vector<Matrix>& f_x,
                 Matrix& f_u) const override;

  const std::vector<Matrix>& a() const { return a_; }
  const Matrix& b() const { return b_; }

 private:
  std::vector<Matrix> a_;
  Matrix b_;
};

/// Delay-free reformulation on the stacked state z = (x_i, ..., x_{i-k}):
/// the top block follows the wrapped model, the rest shifts down one slot.
class AugmentedModel final : public DynamicsModel {
 public:
  explicit AugmentedModel(std::shared_ptr<const DynamicsModel> inner);

  int state_dim() const override { return inner_->state_dim() * (inner_->delay() + 1); }
  int control_dim() const override { return inner_->control_dim(); }
  int delay() const override { return 0; }
  Vector step(const DelayWindow& window, const Vector& u) const override;
  bool jacobians(const DelayWindow& window, const Vector& u, std::vector<Matrix>& f_x,
                 Matrix& f_u) const override;

  const DynamicsModel& inner() const { return *inner_; }
  /// The single-slot window holding stacked(window).
  DelayWindow lift(const DelayWindow& window) const;
  DelayWindow unlift(const DelayWindow& augmented) const;

 private:
  std::shared_ptr<const DynamicsModel> inner_;
};

AugmentedModel augment(std::shared_ptr<const DynamicsModel> model);

/// A delayed cost evaluated on the stacked state of AugmentedModel.
class AugmentedCost final : public CostModel {
 public:
  AugmentedCost(std::shared_ptr<const CostModel> inner, int delay);

  int state_dim() const override { return inner_->state_dim() * (delay_ + 1); }
  int control_dim() const override { return inner_->control_dim(); }
  double running(int i, const DelayWindow& window, const Vector& u) const override;
  double terminal(const DelayWindow& window) const override;
  bool running_derivatives(int i, const DelayWindow& window, const Vector& u,
                           CostDerivatives& out) const override;
  bool terminal_derivatives(const DelayWindow& window, CostDerivatives& out) const override;

 private:
  DelayWindow unlift(const DelayWindow& w) const;
  std::shared_ptr<const CostModel> inner_;
  int delay_;
};

/// Everything needed to run one solve.
struct Problem {
  std::shared_ptr<const DynamicsModel> model;
  std::shared_ptr<const CostModel> cost;
  DelayWindow initial;
  std::vector<Vector> u_init;
  SolverConfig config;
  double dt = 0.0;  // 0 when the time axis is the step index
};

/// CSTR benchmark: N = 100 steps of 0.05 s, cost summed over the whole delay
/// window with P = I4, R = 0.1 I2, iLQG, fixed alpha = 0.4, no regularization.
Problem make_cstr_problem(double tau = 0.5, double dt = 0.05, int horizon = 100);

/// Random delayed LQ problem with stable dynamics and a nonzero initial window.
Problem make_linear_lq_problem(int state_dim, int control_dim, int delay, int horizon,
                               std::uint64_t seed);

/// Pendulum ground truth as a k = 0 problem swinging up from rest at the
/// bottom with a quadratic cost on (theta, theta_dot) and torque.
Problem make_pendulum_truth_problem(int horizon = 50, PendulumParams params = {});

}  // namespace dddp
