#pragma once

#include <string>
#include <vector>

#include "dddp/core.hpp"

namespace dddp {

/// Per-timestep expansion of the dynamics and running cost around (x̄_i, u_i).
/// Tensor grids are indexed j * (k+1) + l over delay slots.
struct DerivativeBundle {
  std::vector<Matrix> f_x;     // k+1 blocks, n x n
  Matrix f_u;                  // n x m
  std::vector<Tensor3> f_xx;   // (k+1)^2 tensors, n x (n x n)
  std::vector<Tensor3> f_xu;   // k+1 tensors, n x (n x m)
  Tensor3 f_uu;                // n x (m x m)
  CostDerivatives cost;
  bool second_order_dynamics = false;

  int delay() const { return static_cast<int>(f_x.size()) - 1; }
  const Tensor3& fxx(int j, int l) const {
    return f_xx[static_cast<std::size_t>(j * (delay() + 1) + l)];
  }
};

/// Finite-difference step sizes, relative to max(1, |coordinate|).
struct FdSteps {
  double first = 1e-5;
  double second = 1e-4;

  FdSteps() = default;
  explicit FdSteps(double both) : first(both), second(both) {}
  FdSteps(double first_step, double second_step) : first(first_step), second(second_step) {}
};

struct DynamicsFirstOrder {
  std::vector<Matrix> f_x;
  Matrix f_u;
};

struct DynamicsSecondOrder {
  std::vector<Tensor3> f_xx;
  std::vector<Tensor3> f_xu;
  Tensor3 f_uu;
};

/// Central differences of model.step over every slot coordinate and control.
DynamicsFirstOrder fd_dynamics_first(const DynamicsModel& model, const DelayWindow& window,
                                     const Vector& u, double eps);

/// Second derivatives of the dynamics. Models with analytic Jacobians get
/// central differences of those; others get direct second differences.
/// Per-component symmetry is enforced by averaging.
DynamicsSecondOrder fd_dynamics_second(const DynamicsModel& model, const DelayWindow& window,
                                       const Vector& u, double eps);

/// Central-difference gradient and second-difference Hessian of the running cost.
CostDerivatives fd_cost(const CostModel& cost, int i, const DelayWindow& window, const Vector& u,
                        FdSteps steps = {});
CostDerivatives fd_terminal_cost(const CostModel& cost, const DelayWindow& window,
                                 FdSteps steps = {});

/// Analytic derivatives when the model provides them, finite differences otherwise.
DynamicsFirstOrder dynamics_first(const DynamicsModel& model, const DelayWindow& window,
                                  const Vector& u, FdSteps steps = {});
CostDerivatives running_cost_derivatives(const CostModel& cost, int i, const DelayWindow& window,
                                         const Vector& u, FdSteps steps = {});
CostDerivatives terminal_cost_derivatives(const CostModel& cost, const DelayWindow& window,
                                          FdSteps steps = {});

/// Full bundle at one timestep. Second-order dynamics are filled only when
/// `second_order` is set.
DerivativeBundle compute_bundle(const DynamicsModel& model, const CostModel& cost, int i,
                                const DelayWindow& window, const Vector& u, bool second_order,
                                FdSteps steps = {});

struct BlockError {
  std::string name;
  double max_error = 0.0;
  bool pass = true;
};

struct DerivativeCheck {
  std::vector<BlockError> blocks;
  double worst = 0.0;
  bool pass = true;
};

/// Compares two bundles block by block with |a-b| / max(1, |a|, |b|).
/// Second-order dynamics blocks are compared only when both bundles carry them.
DerivativeCheck check_derivatives(const DerivativeBundle& analytic, const DerivativeBundle& numeric,
                                  double rel_tol);

/// Max of |a-b| / max(1, |a|, |b|) over entries.
double max_relative_error(const Matrix& a, const Matrix& b);

}  // namespace dddp
