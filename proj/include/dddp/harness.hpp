#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "dddp/core.hpp"
#include "dddp/models.hpp"
#include "dddp/solver.hpp"

namespace dddp {

/// Additive post-step disturbance: each state coordinate gets an independent
/// N(0, sigma * sqrt(dt)) draw after every step.
struct NoiseConfig {
  double sigma = 0.01;
  double dt = 0.05;
  int samples = 100;
  std::uint64_t seed = 1;
  /// A sample diverges once max |x - nominal| exceeds this, or on a non-finite state.
  double divergence_threshold = 1.0;
  int threads = 1;

  void validate() const;
};

/// Per-time, per-coordinate statistics over the samples that did not diverge.
/// Rows are t = 0..N (row 0 is x_0), columns state coordinates.
struct EnsembleStats {
  Matrix mean;
  Matrix stderr_of_mean;
  Matrix min;
  Matrix max;
  int samples = 0;
  int divergent = 0;
  std::vector<bool> diverged;          // per sample
  std::vector<double> sq_deviation;    // per sample: sum_t |x_t - nominal_t|^2, up to divergence
  double mean_sq_deviation = 0.0;      // over every sample
  double mean_sq_deviation_kept = 0.0; // over non-divergent samples only
};

struct NoiseResult {
  EnsembleStats stats;
  std::vector<Trajectory> samples;  // states end early for samples that blew past the guard
};

/// Replays the nominal controls with noise. With gains the control is
/// u_i + sum_j K_j(i) (x̂_{i-j} - x_{i-j}); the open-loop gain is not reapplied,
/// so sigma = 0 reproduces the nominal exactly.
NoiseResult simulate_noisy(const DynamicsModel& model, const Trajectory& nominal,
                           const GainSchedule* gains, const NoiseConfig& noise);

struct CrossResult {
  Trajectory trajectory;
  double cost = 0.0;
};

/// Applies a solution's controls (and optionally its feedback, on the slots
/// both models share) to another plant, starting from `target_initial`.
CrossResult cross_apply(const SolveResult& source, const DynamicsModel& target_model,
                        const CostModel& target_cost, const DelayWindow& target_initial,
                        bool use_gains);

enum class GainPolicy { None, VisibleCurrentOnly };

/// The m x n_visible block of K_0 acting on the visible coordinates of the
/// current augmented state. Columns for hidden states and delayed slots are dropped.
Matrix visible_current_gains(const StepGains& gains, int n_visible);

struct TransferResult {
  std::vector<Vector> states;    // real (theta, theta_dot), t = 0..N
  std::vector<Vector> observed;  // scaled bob position, t = 0..N
  std::vector<Vector> controls;  // applied torques
  double final_angle_error = 0.0;  // |wrap(theta_N)|
};

/// Runs the network-planned controls on the real pendulum from hanging rest.
/// With VisibleCurrentOnly, feedback acts on the gap between the real scaled
/// position and the network's visible prediction.
TransferResult transfer_to_real(const SolveResult& net_solution, const PendulumModel& real,
                                double position_scale, GainPolicy policy);

}  // namespace dddp
