#include "dddp/deriv.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dddp {
namespace {

// Flattened argument v = (x_i, ..., x_{i-k}, u) of the dynamics and cost.
struct FlatPoint {
  int n = 0, k = 0, m = 0;
  Vector v;

  FlatPoint(const DelayWindow& window, const Vector& u)
      : n(window.state_dim()), k(window.delay()), m(static_cast<int>(u.size())) {
    v.resize(static_cast<Eigen::Index>(n) * (k + 1) + m);
    v.head(static_cast<Eigen::Index>(n) * (k + 1)) = window.stacked();
    v.tail(m) = u;
  }

  Eigen::Index state_len() const { return static_cast<Eigen::Index>(n) * (k + 1); }
  Eigen::Index size() const { return v.size(); }

  DelayWindow window_of(const Vector& flat) const {
    return DelayWindow::from_stacked(flat.head(state_len()), n, k);
  }
  Vector control_of(const Vector& flat) const { return flat.tail(m); }

  double step_for(Eigen::Index c, double eps) const { return eps * std::max(1.0, std::abs(v(c))); }
};

void require_positive(double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("finite-difference step must be positive");
}

// Central-difference Jacobian of g: R^D -> R^out at p.v.
template <class F>
Matrix central_jacobian(const FlatPoint& p, Eigen::Index out, double eps, F&& g) {
  Matrix jac(out, p.size());
  Vector probe = p.v;
  for (Eigen::Index c = 0; c < p.size(); ++c) {
    const double h = p.step_for(c, eps);
    probe(c) = p.v(c) + h;
    const Vector plus = g(probe);
    probe(c) = p.v(c) - h;
    const Vector minus = g(probe);
    probe(c) = p.v(c);
    jac.col(c) = (plus - minus) / (2.0 * h);
  }
  return jac;
}

// Direct second differences of g: R^D -> R^out. Returns one D x D Hessian per output.
template <class F>
std::vector<Matrix> direct_hessians(const FlatPoint& p, Eigen::Index out, double eps, F&& g) {
  const Eigen::Index d = p.size();
  std::vector<Matrix> hess(static_cast<std::size_t>(out), Matrix::Zero(d, d));
  Vector probe = p.v;
  const Vector center = g(probe);
  for (Eigen::Index a = 0; a < d; ++a) {
    const double ha = p.step_for(a, eps);
    probe(a) = p.v(a) + ha;
    const Vector plus = g(probe);
    probe(a) = p.v(a) - ha;
    const Vector minus = g(probe);
    probe(a) = p.v(a);
    const Vector diag = (plus - 2.0 * center + minus) / (ha * ha);
    for (Eigen::Index q = 0; q < out; ++q) hess[static_cast<std::size_t>(q)](a, a) = diag(q);

    for (Eigen::Index b = a + 1; b < d; ++b) {
      const double hb = p.step_for(b, eps);
      probe(a) = p.v(a) + ha;
      probe(b) = p.v(b) + hb;
      const Vector pp = g(probe);
      probe(b) = p.v(b) - hb;
      const Vector pm = g(probe);
      probe(a) = p.v(a) - ha;
      const Vector mm = g(probe);
      probe(b) = p.v(b) + hb;
      const Vector mp = g(probe);
      probe(a) = p.v(a);
      probe(b) = p.v(b);
      const Vector cross = (pp - pm - mp + mm) / (4.0 * ha * hb);
      for (Eigen::Index q = 0; q < out; ++q) {
        hess[static_cast<std::size_t>(q)](a, b) = cross(q);
        hess[static_cast<std::size_t>(q)](b, a) = cross(q);
      }
    }
  }
  return hess;
}

DynamicsSecondOrder split_dynamics_hessians(const std::vector<Matrix>& hess, int n, int k, int m) {
  const int s = k + 1;
  DynamicsSecondOrder out;
  out.f_xx.assign(static_cast<std::size_t>(s * s), Tensor3(n, n, n));
  out.f_xu.assign(static_cast<std::size_t>(s), Tensor3(n, n, m));
  out.f_uu = Tensor3(n, m, m);
  const Eigen::Index xs = static_cast<Eigen::Index>(n) * s;
  for (int p = 0; p < n; ++p) {
    const Matrix& h = hess[static_cast<std::size_t>(p)];
    for (int j = 0; j < s; ++j) {
      for (int l = 0; l < s; ++l) {
        out.f_xx[static_cast<std::size_t>(j * s + l)].set_component(p, h.block(j * n, l * n, n, n));
      }
      out.f_xu[static_cast<std::size_t>(j)].set_component(p, h.block(j * n, xs, n, m));
    }
    out.f_uu.set_component(p, h.block(xs, xs, m, m));
  }
  return out;
}

CostDerivatives split_cost(const Vector& grad, const Matrix& hess, int n, int k, int m) {
  const int s = k + 1;
  CostDerivatives d = CostDerivatives::zero(n, m, k);
  const Eigen::Index xs = static_cast<Eigen::Index>(n) * s;
  for (int j = 0; j < s; ++j) {
    d.x[static_cast<std::size_t>(j)] = grad.segment(j * n, n);
    for (int l = 0; l < s; ++l) d.xx(j, l) = hess.block(j * n, l * n, n, n);
    d.xu[static_cast<std::size_t>(j)] = hess.block(j * n, xs, n, m);
  }
  d.u = grad.tail(m);
  d.uu = hess.block(xs, xs, m, m);
  return d;
}

Matrix flat_jacobian(const DynamicsModel& model, const DelayWindow& window, const Vector& u) {
  std::vector<Matrix> fx;
  Matrix fu;
  if (!model.jacobians(window, u, fx, fu)) return {};
  const int n = model.state_dim();
  const int s = window.slots();
  Matrix jac(n, static_cast<Eigen::Index>(n) * s + fu.cols());
  for (int j = 0; j < s; ++j) jac.block(0, j * n, n, n) = fx[static_cast<std::size_t>(j)];
  jac.rightCols(fu.cols()) = fu;
  return jac;
}

CostDerivatives fd_scalar(const FlatPoint& p, FdSteps steps,
                           const std::function<double(const Vector&)>& g) {
  require_positive(steps.first);
  require_positive(steps.second);
  auto vec_g = [&](const Vector& v) {
    Vector out(1);
    out(0) = g(v);
    return out;
  };
  const Vector grad = central_jacobian(p, 1, steps.first, vec_g).row(0).transpose();
  Matrix hess = direct_hessians(p, 1, steps.second, vec_g).front();
  return split_cost(grad, hess, p.n, p.k, p.m);
}

}  // namespace

DynamicsFirstOrder fd_dynamics_first(const DynamicsModel& model, const DelayWindow& window,
                                     const Vector& u, double eps) {
  require_positive(eps);
  const FlatPoint p(window, u);
  const Matrix jac = central_jacobian(p, model.state_dim(), eps, [&](const Vector& v) {
    return model.step(p.window_of(v), p.control_of(v));
  });
  DynamicsFirstOrder out;
  const int n = p.n;
  for (int j = 0; j <= p.k; ++j) out.f_x.push_back(jac.block(0, j * n, n, n));
  out.f_u = jac.rightCols(p.m);
  return out;
}

DynamicsSecondOrder fd_dynamics_second(const DynamicsModel& model, const DelayWindow& window,
                                       const Vector& u, double eps) {
  require_positive(eps);
  const FlatPoint p(window, u);
  const int n = p.n;
  const Eigen::Index d = p.size();
  std::vector<Matrix> hess;

  const bool analytic = flat_jacobian(model, window, u).size() > 0;
  if (analytic) {
    hess.assign(static_cast<std::size_t>(n), Matrix::Zero(d, d));
    Vector probe = p.v;
    for (Eigen::Index b = 0; b < d; ++b) {
      const double h = p.step_for(b, eps);
      probe(b) = p.v(b) + h;
      const Matrix plus = flat_jacobian(model, p.window_of(probe), p.control_of(probe));
      probe(b) = p.v(b) - h;
      const Matrix minus = flat_jacobian(model, p.window_of(probe), p.control_of(probe));
      probe(b) = p.v(b);
      const Matrix col = (plus - minus) / (2.0 * h);  // col(q, a) = d^2 f_q / dv_a dv_b
      for (int q = 0; q < n; ++q) hess[static_cast<std::size_t>(q)].col(b) = col.row(q).transpose();
    }
    for (auto& h : hess) h = (0.5 * (h + h.transpose())).eval();
  } else {
    hess = direct_hessians(p, n, eps, [&](const Vector& v) {
      return model.step(p.window_of(v), p.control_of(v));
    });
  }
  return split_dynamics_hessians(hess, n, p.k, p.m);
}

CostDerivatives fd_cost(const CostModel& cost, int i, const DelayWindow& window, const Vector& u,
                        FdSteps steps) {
  const FlatPoint p(window, u);
  return fd_scalar(p, steps, [&](const Vector& v) {
    return cost.running(i, p.window_of(v), p.control_of(v));
  });
}

CostDerivatives fd_terminal_cost(const CostModel& cost, const DelayWindow& window, FdSteps steps) {
  const FlatPoint p(window, Vector());
  return fd_scalar(p, steps, [&](const Vector& v) { return cost.terminal(p.window_of(v)); });
}

DynamicsFirstOrder dynamics_first(const DynamicsModel& model, const DelayWindow& window,
                                  const Vector& u, FdSteps steps) {
  DynamicsFirstOrder out;
  if (model.jacobians(window, u, out.f_x, out.f_u)) return out;
  return fd_dynamics_first(model, window, u, steps.first);
}

CostDerivatives running_cost_derivatives(const CostModel& cost, int i, const DelayWindow& window,
                                         const Vector& u, FdSteps steps) {
  CostDerivatives out;
  if (cost.running_derivatives(i, window, u, out)) return out;
  return fd_cost(cost, i, window, u, steps);
}

CostDerivatives terminal_cost_derivatives(const CostModel& cost, const DelayWindow& window,
                                          FdSteps steps) {
  CostDerivatives out;
  if (cost.terminal_derivatives(window, out)) return out;
  return fd_terminal_cost(cost, window, steps);
}

DerivativeBundle compute_bundle(const DynamicsModel& model, const CostModel& cost, int i,
                                const DelayWindow& window, const Vector& u, bool second_order,
                                FdSteps steps) {
  DerivativeBundle b;
  auto first = dynamics_first(model, window, u, steps);
  b.f_x = std::move(first.f_x);
  b.f_u = std::move(first.f_u);
  b.cost = running_cost_derivatives(cost, i, window, u, steps);
  b.second_order_dynamics = second_order;
  if (second_order) {
    std::vector<Matrix> probe_fx;
    Matrix probe_fu;
    const bool analytic = model.jacobians(window, u, probe_fx, probe_fu);
    auto second = fd_dynamics_second(model, window, u, analytic ? steps.first : steps.second);
    b.f_xx = std::move(second.f_xx);
    b.f_xu = std::move(second.f_xu);
    b.f_uu = std::move(second.f_uu);
  }
  return b;
}

double max_relative_error(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument("max_relative_error: dimension mismatch");
  }
  double worst = 0.0;
  for (Eigen::Index c = 0; c < a.cols(); ++c) {
    for (Eigen::Index r = 0; r < a.rows(); ++r) {
      const double scale = std::max({1.0, std::abs(a(r, c)), std::abs(b(r, c))});
      worst = std::max(worst, std::abs(a(r, c) - b(r, c)) / scale);
    }
  }
  return worst;
}

namespace {

double tensor_error(const Tensor3& a, const Tensor3& b) {
  if (a.outputs() != b.outputs() || a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument("check_derivatives: tensor dimension mismatch");
  }
  double worst = 0.0;
  for (Eigen::Index p = 0; p < a.outputs(); ++p) {
    worst = std::max(worst, max_relative_error(a.component(p), b.component(p)));
  }
  return worst;
}

}  // namespace

DerivativeCheck check_derivatives(const DerivativeBundle& analytic, const DerivativeBundle& numeric,
                                  double rel_tol) {
  if (analytic.f_x.size() != numeric.f_x.size()) {
    throw std::invalid_argument("check_derivatives: delay order mismatch");
  }
  DerivativeCheck report;
  auto add = [&](std::string name, double err) {
    const bool ok = err <= rel_tol;
    report.blocks.push_back({std::move(name), err, ok});
    report.worst = std::max(report.worst, err);
    report.pass = report.pass && ok;
  };
  const int s = static_cast<int>(analytic.f_x.size());
  auto slot = [](const char* base, int j) { return std::string(base) + "[" + std::to_string(j) + "]"; };

  for (int j = 0; j < s; ++j) {
    add(slot("f_x", j), max_relative_error(analytic.f_x[static_cast<std::size_t>(j)],
                                           numeric.f_x[static_cast<std::size_t>(j)]));
  }
  add("f_u", max_relative_error(analytic.f_u, numeric.f_u));

  if (analytic.second_order_dynamics && numeric.second_order_dynamics) {
    for (int j = 0; j < s; ++j) {
      for (int l = 0; l < s; ++l) {
        add(slot("f_xx", j) + "[" + std::to_string(l) + "]",
            tensor_error(analytic.fxx(j, l), numeric.fxx(j, l)));
      }
      add(slot("f_xu", j), tensor_error(analytic.f_xu[static_cast<std::size_t>(j)],
                                        numeric.f_xu[static_cast<std::size_t>(j)]));
    }
    add("f_uu", tensor_error(analytic.f_uu, numeric.f_uu));
  }

  const auto& ca = analytic.cost;
  const auto& cn = numeric.cost;
  if (!ca.x.empty() && !cn.x.empty()) {
    for (int j = 0; j < s; ++j) {
      const auto js = static_cast<std::size_t>(j);
      add(slot("L_x", j), max_relative_error(ca.x[js], cn.x[js]));
      for (int l = 0; l < s; ++l) {
        add(slot("L_xx", j) + "[" + std::to_string(l) + "]",
            max_relative_error(ca.xx(j, l), cn.xx(j, l)));
      }
      add(slot("L_xu", j), max_relative_error(ca.xu[js], cn.xu[js]));
    }
    add("L_u", max_relative_error(ca.u, cn.u));
    add("L_uu", max_relative_error(ca.uu, cn.uu));
  }
  return report;
}

}  // namespace dddp
