#pragma once

#include <vector>

#include "dddp/core.hpp"
#include "dddp/models.hpp"

namespace dddp {

/// Finite-horizon LQR on the stacked state z = (x_i, ..., x_{i-k}).
struct LqrSolution {
  std::vector<Matrix> gains;  // u_i = gains[i] * z_i, each m x n(k+1)
  Trajectory trajectory;      // in the original delayed coordinates
  double cost = 0.0;          // 1/2 z_0^T S_0 z_0
};

/// Riccati recursion on the companion-form reformulation of a linear delayed
/// system with quadratic cost.
LqrSolution solve_augmented_lqr(const LinearDelayedModel& model, const QuadraticCost& cost,
                                const DelayWindow& initial, int horizon);

}  // namespace dddp
