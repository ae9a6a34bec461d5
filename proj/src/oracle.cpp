#include "dddp/oracle.hpp"

#include <stdexcept>

namespace dddp {

LqrSolution solve_augmented_lqr(const LinearDelayedModel& model, const QuadraticCost& cost,
                                const DelayWindow& initial, int horizon) {
  const int n = model.state_dim();
  const int m = model.control_dim();
  const int k = model.delay();
  const int big = n * (k + 1);
  if (initial.delay() != k || initial.state_dim() != n || horizon < 1) {
    throw std::invalid_argument("solve_augmented_lqr: inconsistent arguments");
  }

  Matrix a = Matrix::Zero(big, big);
  for (int j = 0; j <= k; ++j) a.block(0, j * n, n, n) = model.a()[static_cast<std::size_t>(j)];
  if (k > 0) a.block(n, 0, n * k, n * k).setIdentity();
  Matrix b = Matrix::Zero(big, m);
  b.topRows(n) = model.b();

  // Quadratic weights on z from the cost's own derivatives (exact for a quadratic form).
  const DelayWindow zero_window = DelayWindow::constant(Vector::Zero(n), k);
  CostDerivatives run;
  CostDerivatives term;
  cost.running_derivatives(0, zero_window, Vector::Zero(m), run);
  cost.terminal_derivatives(zero_window, term);
  const Matrix q = run.xx.dense();
  const Matrix r = run.uu;
  const Matrix qn = term.xx.dense();

  LqrSolution sol;
  sol.gains.resize(static_cast<std::size_t>(horizon));
  Matrix s = qn;
  for (int i = horizon - 1; i >= 0; --i) {
    const Matrix h = r + b.transpose() * s * b;
    const Matrix g = b.transpose() * s * a;
    const Matrix gain = -h.llt().solve(g);
    s = q + a.transpose() * s * a + g.transpose() * gain;
    s = (0.5 * (s + s.transpose())).eval();
    sol.gains[static_cast<std::size_t>(i)] = gain;
  }
  const Vector z0 = initial.stacked();
  sol.cost = 0.5 * z0.dot(s * z0);

  std::vector<Vector> controls;
  Vector z = z0;
  for (int i = 0; i < horizon; ++i) {
    Vector u = sol.gains[static_cast<std::size_t>(i)] * z;
    z = a * z + b * u;
    controls.push_back(std::move(u));
  }
  sol.trajectory = rollout(model, initial, controls);
  return sol;
}

}  // namespace dddp
