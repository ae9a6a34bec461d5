#include "dddp/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace dddp {

std::string_view to_string(Mode mode) { return mode == Mode::FullDdp ? "full-ddp" : "ilqg"; }

std::optional<Mode> parse_mode(std::string_view text) {
  if (text == "full-ddp" || text == "ddp") return Mode::FullDdp;
  if (text == "ilqg" || text == "iLQG") return Mode::Ilqg;
  return std::nullopt;
}

std::string_view to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::Converged: return "converged";
    case SolveStatus::MaxIterations: return "max-iterations";
    case SolveStatus::LineSearchFailed: return "line-search-failed";
  }
  return "unknown";
}

ValueExpansion ValueExpansion::zero(int state_dim, int delay) {
  ValueExpansion v;
  v.x.assign(static_cast<std::size_t>(delay) + 1, Vector::Zero(state_dim));
  v.xx = BlockGrid(delay + 1, state_dim, state_dim);
  return v;
}

std::vector<double> SolverConfig::default_alphas() {
  std::vector<double> a;
  for (int j = 0; j <= 10; ++j) a.push_back(std::pow(0.5, j));
  return a;
}

void SolverConfig::validate() const {
  auto bad = [](const char* what) { throw std::invalid_argument(what); };
  if (max_iterations < 0) bad("max_iterations must be nonnegative");
  if (!(mu_min > 0.0)) bad("mu_min must be positive");
  if (mu_init < 0.0) bad("mu_init must be nonnegative");
  if (!(mu_max >= mu_min)) bad("mu_max must be at least mu_min");
  if (!(mu_factor > 1.0)) bad("mu_factor must exceed 1");
  if (!(accept_ratio_min >= 0.0 && accept_ratio_min < 1.0)) bad("accept_ratio_min must be in [0, 1)");
  if (fixed_alpha && !(*fixed_alpha > 0.0 && *fixed_alpha <= 1.0)) bad("fixed_alpha must be in (0, 1]");
  if (!fixed_alpha && alpha_sequence.empty()) bad("alpha_sequence is empty");
  for (double a : alpha_sequence) {
    if (!(a > 0.0 && a <= 1.0)) bad("every alpha must be in (0, 1]");
  }
  if (!(divergence_guard > 0.0)) bad("divergence_guard must be positive");
}

namespace {

void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) throw std::domain_error(std::string("non-finite ") + what);
}

}  // namespace

QCoefficients compute_q(const DerivativeBundle& b, const ValueExpansion& next, double mu,
                        Mode mode) {
  const int k = b.delay();
  const int s = k + 1;
  const auto n = b.f_u.rows();
  const auto m = b.f_u.cols();
  if (static_cast<int>(next.x.size()) != s || next.xx.size() != s) {
    throw std::invalid_argument("compute_q: value expansion has the wrong delay order");
  }
  const bool contract = mode == Mode::FullDdp;
  if (contract && !b.second_order_dynamics) {
    throw std::invalid_argument("compute_q: full DDP needs second-order dynamics derivatives");
  }
  const auto& L = b.cost;
  const Vector& v0 = next.x[0];
  const Matrix& v00 = next.xx(0, 0);

  QCoefficients q;
  q.x.resize(static_cast<std::size_t>(s));
  q.xu.resize(static_cast<std::size_t>(s));
  q.xx = BlockGrid(s, n, n);

  const Matrix v00_fu = v00 * b.f_u;
  q.u = L.u + b.f_u.transpose() * v0;
  q.uu = L.uu + b.f_u.transpose() * v00_fu;
  if (contract) q.uu += b.f_uu.contract(v0);
  q.uu = (0.5 * (q.uu + q.uu.transpose())).eval();

  // a[l] = V'_00 f_{x^l} + 1_{l!=k} V'_{0,l+1}
  std::vector<Matrix> a(static_cast<std::size_t>(s));
  for (int l = 0; l < s; ++l) {
    const auto ls = static_cast<std::size_t>(l);
    a[ls] = v00 * b.f_x[ls];
    if (l != k) a[ls] += next.xx(0, l + 1);
  }

  for (int j = 0; j < s; ++j) {
    const auto js = static_cast<std::size_t>(j);
    const Matrix fxt = b.f_x[js].transpose();
    q.x[js] = L.x[js] + fxt * v0;
    q.xu[js] = L.xu[js] + fxt * v00_fu;
    if (j != k) {
      q.x[js] += next.x[js + 1];
      q.xu[js].noalias() += next.xx(j + 1, 0) * b.f_u;
    }
    if (contract) q.xu[js] += b.f_xu[js].contract(v0);

    for (int l = j; l < s; ++l) {
      const auto ls = static_cast<std::size_t>(l);
      Matrix block = L.xx(j, l) + fxt * a[ls];
      if (j != k) {
        block.noalias() += next.xx(j + 1, 0) * b.f_x[ls];
        if (l != k) block += next.xx(j + 1, l + 1);
      }
      if (contract) block += b.fxx(j, l).contract(v0);
      if (l == j) {
        q.xx(j, j) = 0.5 * (block + block.transpose());
      } else {
        q.xx(l, j) = block.transpose();
        q.xx(j, l) = std::move(block);
      }
    }
  }

  q.uu_reg = q.uu + mu * Matrix::Identity(m, m);

  require_finite(q.u, "Q_u");
  require_finite(q.uu, "Q_uu");
  for (int j = 0; j < s; ++j) {
    require_finite(q.x[static_cast<std::size_t>(j)], "Q_x");
    require_finite(q.xu[static_cast<std::size_t>(j)], "Q_xu");
    for (int l = 0; l < s; ++l) require_finite(q.xx(j, l), "Q_xx");
  }
  return q;
}

std::optional<StepGains> compute_gains(const QCoefficients& q) {
  const Eigen::LLT<Matrix> llt(q.uu_reg);
  if (llt.info() != Eigen::Success) return std::nullopt;
  StepGains g;
  g.open_loop = -llt.solve(q.u);
  g.feedback.reserve(q.xu.size());
  for (const auto& qxu : q.xu) g.feedback.push_back(-llt.solve(qxu.transpose()));
  if (!g.open_loop.allFinite()) return std::nullopt;
  return g;
}

ValueExpansion update_value(const QCoefficients& q, const StepGains& g, const ValueExpansion& next) {
  const int s = static_cast<int>(q.x.size());
  const auto n = q.x.front().size();
  ValueExpansion v;
  v.x.resize(static_cast<std::size_t>(s));
  v.xx = BlockGrid(s, n, n);

  const Vector quu_k = q.uu_reg * g.open_loop;
  std::vector<Matrix> quu_K(static_cast<std::size_t>(s));
  for (int l = 0; l < s; ++l) quu_K[static_cast<std::size_t>(l)] = q.uu_reg * g.feedback[static_cast<std::size_t>(l)];

  for (int j = 0; j < s; ++j) {
    const auto js = static_cast<std::size_t>(j);
    const Matrix Kt = g.feedback[js].transpose();
    v.x[js] = q.x[js] + Kt * quu_k + Kt * q.u + q.xu[js] * g.open_loop;
    for (int l = j; l < s; ++l) {
      const auto ls = static_cast<std::size_t>(l);
      Matrix block = q.xx(j, l);
      block.noalias() += q.xu[js] * g.feedback[ls];
      block.noalias() += Kt * q.xu[ls].transpose();
      block.noalias() += Kt * quu_K[ls];
      if (l == j) {
        v.xx(j, j) = 0.5 * (block + block.transpose());
      } else {
        v.xx(l, j) = block.transpose();
        v.xx(j, l) = std::move(block);
      }
    }
  }
  v.dv_linear = next.dv_linear + g.open_loop.dot(q.u);
  v.dv_quad = next.dv_quad + 0.5 * g.open_loop.dot(quu_k);
  return v;
}

ValueExpansion terminal_value(const CostModel& cost, const DelayWindow& window, FdSteps steps) {
  const CostDerivatives d = terminal_cost_derivatives(cost, window, steps);
  ValueExpansion v;
  v.x = d.x;
  v.xx = d.xx;
  v.xx.symmetrize();
  return v;
}

BackwardResult backward_pass(std::span<const DerivativeBundle> bundles,
                             const ValueExpansion& terminal, double mu, Mode mode) {
  const int horizon = static_cast<int>(bundles.size());
  BackwardResult out;
  out.gains.resize(static_cast<std::size_t>(horizon));
  out.values.resize(static_cast<std::size_t>(horizon) + 1);
  out.values.back() = terminal;
  out.values.back().dv_linear = 0.0;
  out.values.back().dv_quad = 0.0;
  for (int i = horizon - 1; i >= 0; --i) {
    const auto is = static_cast<std::size_t>(i);
    const QCoefficients q = compute_q(bundles[is], out.values[is + 1], mu, mode);
    auto gains = compute_gains(q);
    if (!gains) {
      out.failed_at = i;
      return out;
    }
    out.values[is] = update_value(q, *gains, out.values[is + 1]);
    out.gains[is] = std::move(*gains);
  }
  out.dv_linear = out.values.front().dv_linear;
  out.dv_quad = out.values.front().dv_quad;
  return out;
}

ForwardResult forward_pass(const DynamicsModel& model, const CostModel& cost,
                           const Trajectory& nominal, const GainSchedule& gains, double alpha,
                           double guard) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("forward_pass: alpha must be in (0, 1]");
  const int horizon = nominal.horizon();
  if (static_cast<int>(gains.size()) != horizon) {
    throw std::invalid_argument("forward_pass: gain schedule length differs from the horizon");
  }
  const int k = nominal.delay();
  ForwardResult out;
  out.trajectory.initial = nominal.initial;
  out.trajectory.states.reserve(static_cast<std::size_t>(horizon));
  out.trajectory.controls.reserve(static_cast<std::size_t>(horizon));
  DelayWindow window = nominal.initial;
  for (int i = 0; i < horizon; ++i) {
    const auto is = static_cast<std::size_t>(i);
    const StepGains& g = gains[is];
    Vector u = nominal.controls[is] + alpha * g.open_loop;
    for (int j = 0; j <= k; ++j) {
      const int t = i - j;
      if (t <= 0) break;
      u.noalias() += g.feedback[static_cast<std::size_t>(j)] *
                     (out.trajectory.states[static_cast<std::size_t>(t - 1)] - nominal.states[static_cast<std::size_t>(t - 1)]);
    }
    Vector next = model.step(window, u);
    if (!next.allFinite() || next.cwiseAbs().maxCoeff() > guard || !u.allFinite()) {
      out.diverged = true;
      out.cost = std::numeric_limits<double>::infinity();
      return out;
    }
    window.shift_in(next);
    out.trajectory.states.push_back(std::move(next));
    out.trajectory.controls.push_back(std::move(u));
  }
  out.cost = total_cost(cost, out.trajectory);
  if (!std::isfinite(out.cost)) out.diverged = true;
  return out;
}

std::vector<DerivativeBundle> compute_bundles(const DynamicsModel& model, const CostModel& cost,
                                              const Trajectory& trajectory, bool second_order,
                                              FdSteps steps, int threads) {
  const int horizon = trajectory.horizon();
  std::vector<DerivativeBundle> bundles(static_cast<std::size_t>(horizon));
  parallel_for(horizon, threads, [&](int i) {
    bundles[static_cast<std::size_t>(i)] =
        compute_bundle(model, cost, i, trajectory.window_at(i),
                       trajectory.controls[static_cast<std::size_t>(i)], second_order, steps);
  });
  return bundles;
}

namespace {

// Multiplicative-factor regularization schedule.
struct MuSchedule {
  double mu;
  double delta = 1.0;
  const SolverConfig& cfg;

  // Returns false once mu would exceed mu_max.
  bool increase() {
    delta = std::max(delta * cfg.mu_factor, cfg.mu_factor);
    mu = std::max(mu * delta, cfg.mu_min * delta);
    return mu <= cfg.mu_max;
  }
  void decrease() {
    delta = std::min(delta / cfg.mu_factor, 1.0 / cfg.mu_factor);
    mu = mu * delta;
    if (mu < cfg.mu_min) mu = 0.0;
  }
};

double gradient_proxy(const GainSchedule& gains, const Trajectory& traj) {
  double worst = 0.0;
  for (std::size_t i = 0; i < gains.size(); ++i) {
    const double num = gains[i].open_loop.size() ? gains[i].open_loop.cwiseAbs().maxCoeff() : 0.0;
    const double den = (traj.controls[i].size() ? traj.controls[i].cwiseAbs().maxCoeff() : 0.0) + 1.0;
    worst = std::max(worst, num / den);
  }
  return worst;
}

}  // namespace

SolveResult solve(const DynamicsModel& model, const CostModel& cost,
                  const DelayWindow& initial_window, const std::vector<Vector>& u_init,
                  const SolverConfig& config, const IterationObserver& observer) {
  config.validate();
  if (initial_window.delay() != model.delay() || initial_window.state_dim() != model.state_dim()) {
    throw std::invalid_argument("solve: initial window does not match the model");
  }
  if (cost.state_dim() != model.state_dim() || cost.control_dim() != model.control_dim()) {
    throw std::invalid_argument("solve: cost dimensions do not match the model");
  }
  const bool second_order = config.mode == Mode::FullDdp;
  const std::vector<double> alphas =
      config.fixed_alpha ? std::vector<double>{*config.fixed_alpha} : config.alpha_sequence;

  SolveResult result;
  result.trajectory = rollout(model, initial_window, u_init);
  double j_nominal = total_cost(cost, result.trajectory);
  if (!std::isfinite(j_nominal)) throw std::invalid_argument("solve: initial rollout is not finite");
  result.initial_cost = j_nominal;

  MuSchedule mu{config.mu_init, 1.0, config};
  bool gains_current = false;  // result.gains linearized about result.trajectory
  int iteration = 0;

  auto emit = [&](const IterationRecord& r) {
    result.log.push_back(r);
    if (observer) observer(r);
  };

  while (result.iterations < config.max_iterations) {
    ++iteration;
    const auto bundles =
        compute_bundles(model, cost, result.trajectory, second_order, config.fd, config.threads);
    const ValueExpansion terminal =
        terminal_value(cost, result.trajectory.window_at(result.trajectory.horizon()), config.fd);

    BackwardResult bw = backward_pass(bundles, terminal, mu.mu, config.mode);
    while (!bw.ok()) {
      if (!mu.increase()) {
        result.status = SolveStatus::LineSearchFailed;
        return result;
      }
      bw = backward_pass(bundles, terminal, mu.mu, config.mode);
    }
    const double mu_used = mu.mu;
    mu.decrease();
    result.gains = bw.gains;
    gains_current = true;

    if (gradient_proxy(bw.gains, result.trajectory) < config.gradient_tol) {
      result.status = SolveStatus::Converged;
      result.converged = true;
      return result;
    }

    bool accepted = false;
    for (double alpha : alphas) {
      ForwardResult fw = forward_pass(model, cost, result.trajectory, bw.gains, alpha,
                                      config.divergence_guard);
      IterationRecord rec;
      rec.iteration = iteration;
      rec.mu = mu_used;
      rec.alpha = alpha;
      rec.expected = -(alpha * bw.dv_linear + alpha * alpha * bw.dv_quad);
      rec.diverged = fw.diverged;
      rec.cost = fw.diverged ? j_nominal : fw.cost;
      rec.actual = fw.diverged ? 0.0 : j_nominal - fw.cost;
      rec.accepted = !fw.diverged && rec.actual >= 0.0 &&
                     rec.actual >= config.accept_ratio_min * rec.expected;
      emit(rec);
      if (!rec.accepted) continue;

      const double rel_change = rec.actual / std::max(std::abs(j_nominal), 1e-300);
      result.trajectory = std::move(fw.trajectory);
      j_nominal = fw.cost;
      gains_current = false;
      result.cost_history.push_back(j_nominal);
      result.mu_history.push_back(mu_used);
      result.alpha_history.push_back(alpha);
      ++result.iterations;
      accepted = true;
      if (rel_change < config.convergence_tol) {
        result.status = SolveStatus::Converged;
        result.converged = true;
      }
      break;
    }

    if (!accepted && !mu.increase()) {
      result.status = SolveStatus::LineSearchFailed;
      break;
    }
    if (result.converged) break;
  }

  if (!result.converged && result.status != SolveStatus::LineSearchFailed) {
    result.status = SolveStatus::MaxIterations;
  }
  if (!gains_current) {
    // Re-linearize so the returned feedback gains belong to the returned trajectory.
    const auto bundles =
        compute_bundles(model, cost, result.trajectory, second_order, config.fd, config.threads);
    const ValueExpansion terminal =
        terminal_value(cost, result.trajectory.window_at(result.trajectory.horizon()), config.fd);
    MuSchedule final_mu = mu;
    BackwardResult bw = backward_pass(bundles, terminal, final_mu.mu, config.mode);
    while (!bw.ok() && final_mu.increase()) bw = backward_pass(bundles, terminal, final_mu.mu, config.mode);
    if (bw.ok()) result.gains = std::move(bw.gains);
  }
  return result;
}

}  // namespace dddp
