#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "dddp/core.hpp"
#include "dddp/deriv.hpp"

namespace dddp {

enum class Mode {
  FullDdp,  // keeps the V'_0 · f_{..} tensor contractions
  Ilqg,     // drops them
};

std::string_view to_string(Mode mode);
std::optional<Mode> parse_mode(std::string_view text);

/// Coefficients of the local quadratic model of L^i + V^{i+1} over the delay
/// window and control. Grids are indexed by delay slot.
struct QCoefficients {
  std::vector<Vector> x;   // Q_{x^j}
  Vector u;                // Q_u
  BlockGrid xx;            // Q_{x^j x^l}
  std::vector<Matrix> xu;  // Q_{x^j u}
  Matrix uu;               // Q_uu
  Matrix uu_reg;           // Q_uu + mu I
};

/// Quadratic model of the value function at one timestep, plus the running
/// sums of the expected-reduction terms from this step to the horizon.
struct ValueExpansion {
  std::vector<Vector> x;  // V_j
  BlockGrid xx;           // V_{j,l}
  double dv_linear = 0.0;  // sum of k^T Q_u
  double dv_quad = 0.0;    // sum of 1/2 k^T Q~_uu k

  static ValueExpansion zero(int state_dim, int delay);
};

struct StepGains {
  Vector open_loop;              // k(i)
  std::vector<Matrix> feedback;  // K_0(i) ... K_k(i), each m x n
};

using GainSchedule = std::vector<StepGains>;

struct SolverConfig {
  Mode mode = Mode::FullDdp;
  int max_iterations = 100;
  double mu_init = 0.0;
  double mu_min = 1e-6;
  double mu_max = 1e10;
  double mu_factor = 2.0;
  std::vector<double> alpha_sequence = default_alphas();
  std::optional<double> fixed_alpha;
  double accept_ratio_min = 1e-4;
  double convergence_tol = 1e-7;
  double gradient_tol = 1e-6;
  double divergence_guard = 1e8;
  FdSteps fd;
  int threads = 1;

  /// 0.5^j for j = 0..10.
  static std::vector<double> default_alphas();
  void validate() const;
};

struct IterationRecord {
  int iteration = 0;
  double cost = 0.0;      // candidate cost (nominal cost when no candidate was produced)
  double mu = 0.0;
  double alpha = 0.0;
  bool accepted = false;
  bool diverged = false;
  double expected = 0.0;  // -(alpha dV_linear + alpha^2 dV_quad)
  double actual = 0.0;    // nominal cost - candidate cost
};

enum class SolveStatus { Converged, MaxIterations, LineSearchFailed };
std::string_view to_string(SolveStatus status);

struct SolveResult {
  Trajectory trajectory;
  GainSchedule gains;  // linearized about `trajectory`
  double initial_cost = 0.0;
  std::vector<double> cost_history;  // one entry per accepted iteration
  std::vector<double> mu_history;
  std::vector<double> alpha_history;
  std::vector<IterationRecord> log;  // every line-search trial
  SolveStatus status = SolveStatus::MaxIterations;
  bool converged = false;
  int iterations = 0;  // accepted iterations

  double final_cost() const { return cost_history.empty() ? initial_cost : cost_history.back(); }
};

/// Q coefficients at time i from the bundle there and the value expansion at i+1.
/// Throws std::domain_error on non-finite results.
QCoefficients compute_q(const DerivativeBundle& bundle, const ValueExpansion& next, double mu,
                        Mode mode);

/// Gains from a Cholesky factorization of Q~_uu; nullopt when it is not
/// positive definite.
std::optional<StepGains> compute_gains(const QCoefficients& q);

/// Value expansion at time i. The expected-reduction sums continue those of `next`.
ValueExpansion update_value(const QCoefficients& q, const StepGains& gains,
                            const ValueExpansion& next);

ValueExpansion terminal_value(const CostModel& cost, const DelayWindow& window, FdSteps steps = {});

struct BackwardResult {
  GainSchedule gains;
  std::vector<ValueExpansion> values;  // values[i] for i = 0..N
  double dv_linear = 0.0;
  double dv_quad = 0.0;
  std::optional<int> failed_at;  // timestep where Q~_uu was not positive definite

  bool ok() const { return !failed_at.has_value(); }
};

BackwardResult backward_pass(std::span<const DerivativeBundle> bundles,
                             const ValueExpansion& terminal, double mu, Mode mode);

struct ForwardResult {
  Trajectory trajectory;
  double cost = 0.0;
  bool diverged = false;
};

/// û_i = u_i + alpha k(i) + sum_j K_j(i) (x̂_{i-j} - x_{i-j}); deviations of the
/// fixed pre-horizon states are zero. Divergence: a non-finite state or any
/// |entry| above `guard`.
ForwardResult forward_pass(const DynamicsModel& model, const CostModel& cost,
                           const Trajectory& nominal, const GainSchedule& gains, double alpha,
                           double guard = 1e8);

/// Derivative bundles along a trajectory, computed in parallel over timesteps.
std::vector<DerivativeBundle> compute_bundles(const DynamicsModel& model, const CostModel& cost,
                                              const Trajectory& trajectory, bool second_order,
                                              FdSteps steps, int threads);

using IterationObserver = std::function<void(const IterationRecord&)>;

SolveResult solve(const DynamicsModel& model, const CostModel& cost,
                  const DelayWindow& initial_window, const std::vector<Vector>& u_init,
                  const SolverConfig& config, const IterationObserver& observer = {});

}  // namespace dddp
