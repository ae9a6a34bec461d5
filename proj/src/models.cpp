#include "dddp/models.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace dddp {

CstrModel::CstrModel(double tau, double dt) : tau_(tau), dt_(dt) {
  if (!(dt > 0.0) || tau < 0.0) throw std::invalid_argument("CstrModel: need dt > 0 and tau >= 0");
  const double ratio = tau / dt;
  delay_ = static_cast<int>(std::lround(ratio));
  if (std::abs(ratio - delay_) > 1e-9 * std::max(1.0, ratio)) {
    throw std::invalid_argument("CstrModel: tau must be a whole multiple of dt");
  }
}

Vector CstrModel::rate(const Vector& x, const Vector& xd, const Vector& u) {
  const double r1 = (x(0) + 0.5) * std::exp(25.0 * x(1) / (x(1) + 2.0));
  const double r2 = (x(2) + 0.25) * std::exp(25.0 * x(3) / (x(3) + 2.0));
  Vector g(4);
  g(0) = 0.5 - x(0) - r1;
  g(1) = -2.0 * (x(1) + 0.25) - u(0) * (x(1) + 0.25) + r1;
  g(2) = xd(0) - x(2) - r2 + 0.25;
  g(3) = xd(1) - 2.0 * x(3) - u(1) * (x(3) + 0.25) + r2 - 0.25;
  return g;
}

Vector CstrModel::initial_state() { return (Vector(4) << 0.15, -0.03, 0.1, 0.0).finished(); }

Vector CstrModel::step(const DelayWindow& window, const Vector& u) const {
  const Vector& x = window[0];
  return x + dt_ * rate(x, window[delay_], u);
}

PendulumModel::PendulumModel(PendulumParams params) : params_(params) {
  if (!(params_.mass > 0.0 && params_.length > 0.0 && params_.dt > 0.0) || params_.damping < 0.0) {
    throw std::invalid_argument("PendulumModel: invalid physical parameters");
  }
}

Vector PendulumModel::step_state(const Vector& s, double torque) const {
  const auto& p = params_;
  const double inertia = p.mass * p.length * p.length;
  // theta = 0 is the unstable upright equilibrium, so gravity pushes away from it.
  const double accel =
      (torque - p.damping * s(1) + p.mass * p.gravity * p.length * std::sin(s(0))) / inertia;
  Vector next(2);
  next(1) = s(1) + p.dt * accel;
  next(0) = s(0) + p.dt * next(1);
  return next;
}

Vector PendulumModel::step(const DelayWindow& window, const Vector& u) const {
  return step_state(window[0], u(0));
}

bool PendulumModel::jacobians(const DelayWindow& window, const Vector& /*u*/,
                              std::vector<Matrix>& f_x, Matrix& f_u) const {
  const auto& p = params_;
  const double inertia = p.mass * p.length * p.length;
  const double dt = p.dt;
  const double theta = window[0](0);
  const double dw_dtheta = dt * p.mass * p.gravity * p.length * std::cos(theta) / inertia;
  const double dw_dw = 1.0 - dt * p.damping / inertia;
  const double dw_du = dt / inertia;
  Matrix a(2, 2);
  a << 1.0 + dt * dw_dtheta, dt * dw_dw,
       dw_dtheta, dw_dw;
  f_x.assign(1, a);
  f_u.resize(2, 1);
  f_u << dt * dw_du, dw_du;
  return true;
}

Vector observe_position(double theta) {
  return (Vector(2) << std::sin(theta), -std::cos(theta)).finished();
}

double angle_from_position(double x, double y) { return std::atan2(x, -y); }

double wrap_angle(double theta) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double w = std::fmod(theta + std::numbers::pi, two_pi);
  if (w <= 0.0) w += two_pi;
  return w - std::numbers::pi;
}

LinearDelayedModel::LinearDelayedModel(std::vector<Matrix> a, Matrix b)
    : a_(std::move(a)), b_(std::move(b)) {
  if (a_.empty()) throw std::invalid_argument("LinearDelayedModel needs at least A_0");
  for (const auto& aj : a_) {
    if (aj.rows() != b_.rows() || aj.cols() != b_.rows()) {
      throw std::invalid_argument("LinearDelayedModel: A_j must be n x n with n = rows(B)");
    }
  }
}

Vector LinearDelayedModel::step(const DelayWindow& window, const Vector& u) const {
  Vector next = b_ * u;
  for (int j = 0; j <= delay(); ++j) next.noalias() += a_[static_cast<std::size_t>(j)] * window[j];
  return next;
}

bool LinearDelayedModel::jacobians(const DelayWindow&, const Vector&, std::vector<Matrix>& f_x,
                                   Matrix& f_u) const {
  f_x = a_;
  f_u = b_;
  return true;
}

AugmentedModel::AugmentedModel(std::shared_ptr<const DynamicsModel> inner) : inner_(std::move(inner)) {
  if (!inner_) throw std::invalid_argument("AugmentedModel: null model");
}

DelayWindow AugmentedModel::lift(const DelayWindow& window) const {
  return DelayWindow(std::vector<Vector>{window.stacked()});
}

DelayWindow AugmentedModel::unlift(const DelayWindow& augmented) const {
  return DelayWindow::from_stacked(augmented[0], inner_->state_dim(), inner_->delay());
}

Vector AugmentedModel::step(const DelayWindow& window, const Vector& u) const {
  const int n = inner_->state_dim();
  const int k = inner_->delay();
  const Vector& z = window[0];
  Vector next(z.size());
  next.head(n) = inner_->step(unlift(window), u);
  if (k > 0) next.tail(static_cast<Eigen::Index>(n) * k) = z.head(static_cast<Eigen::Index>(n) * k);
  return next;
}

bool AugmentedModel::jacobians(const DelayWindow& window, const Vector& u, std::vector<Matrix>& f_x,
                               Matrix& f_u) const {
  std::vector<Matrix> inner_fx;
  Matrix inner_fu;
  if (!inner_->jacobians(unlift(window), u, inner_fx, inner_fu)) return false;
  const int n = inner_->state_dim();
  const int k = inner_->delay();
  const int big = n * (k + 1);
  Matrix a = Matrix::Zero(big, big);
  for (int j = 0; j <= k; ++j) a.block(0, j * n, n, n) = inner_fx[static_cast<std::size_t>(j)];
  if (k > 0) a.block(n, 0, n * k, n * k).setIdentity();
  f_x.assign(1, a);
  f_u = Matrix::Zero(big, inner_fu.cols());
  f_u.topRows(n) = inner_fu;
  return true;
}

AugmentedModel augment(std::shared_ptr<const DynamicsModel> model) {
  return AugmentedModel(std::move(model));
}

AugmentedCost::AugmentedCost(std::shared_ptr<const CostModel> inner, int delay)
    : inner_(std::move(inner)), delay_(delay) {
  if (!inner_ || delay_ < 0) throw std::invalid_argument("AugmentedCost: invalid arguments");
}

DelayWindow AugmentedCost::unlift(const DelayWindow& w) const {
  return DelayWindow::from_stacked(w[0], inner_->state_dim(), delay_);
}

double AugmentedCost::running(int i, const DelayWindow& window, const Vector& u) const {
  return inner_->running(i, unlift(window), u);
}

double AugmentedCost::terminal(const DelayWindow& window) const {
  return inner_->terminal(unlift(window));
}

namespace {

CostDerivatives stack_cost(const CostDerivatives& d, int n, int delay, Eigen::Index m) {
  const int s = delay + 1;
  CostDerivatives out = CostDerivatives::zero(n * s, static_cast<int>(m), 0);
  out.xx(0, 0) = d.xx.dense();
  for (int j = 0; j < s; ++j) {
    const auto js = static_cast<std::size_t>(j);
    out.x[0].segment(j * n, n) = d.x[js];
    if (m > 0) out.xu[0].block(j * n, 0, n, m) = d.xu[js];
  }
  out.u = d.u;
  out.uu = d.uu;
  return out;
}

}  // namespace

bool AugmentedCost::running_derivatives(int i, const DelayWindow& window, const Vector& u,
                                        CostDerivatives& out) const {
  CostDerivatives d;
  if (!inner_->running_derivatives(i, unlift(window), u, d)) return false;
  out = stack_cost(d, inner_->state_dim(), delay_, u.size());
  return true;
}

bool AugmentedCost::terminal_derivatives(const DelayWindow& window, CostDerivatives& out) const {
  CostDerivatives d;
  if (!inner_->terminal_derivatives(unlift(window), d)) return false;
  out = stack_cost(d, inner_->state_dim(), delay_, 0);
  return true;
}

Problem make_cstr_problem(double tau, double dt, int horizon) {
  Problem p;
  auto model = std::make_shared<CstrModel>(tau, dt);
  p.model = model;
  p.cost = std::make_shared<QuadraticCost>(Matrix::Identity(4, 4), 0.1 * Matrix::Identity(2, 2),
                                           WindowWeighting::AllSlots, 1.0);
  p.initial = DelayWindow::constant(CstrModel::initial_state(), model->delay());
  p.u_init.assign(static_cast<std::size_t>(horizon), Vector::Zero(2));
  p.config.mode = Mode::Ilqg;
  p.config.fixed_alpha = 0.4;
  p.config.mu_init = 0.0;
  p.config.max_iterations = 20;
  p.dt = dt;
  return p;
}

namespace {

Matrix random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double scale) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = scale * normal(rng);
  }
  return m;
}

double companion_spectral_radius(const std::vector<Matrix>& a) {
  const auto n = a.front().rows();
  const auto s = static_cast<Eigen::Index>(a.size());
  Matrix c = Matrix::Zero(n * s, n * s);
  for (Eigen::Index j = 0; j < s; ++j) c.block(0, j * n, n, n) = a[static_cast<std::size_t>(j)];
  if (s > 1) c.block(n, 0, n * (s - 1), n * (s - 1)).setIdentity();
  return Eigen::EigenSolver<Matrix>(c, false).eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace

Problem make_linear_lq_problem(int n, int m, int k, int horizon, std::uint64_t seed) {
  if (n < 1 || m < 1 || k < 0 || horizon < 1) throw std::invalid_argument("invalid LQ dimensions");
  std::mt19937_64 rng(seed);
  std::vector<Matrix> a;
  for (int j = 0; j <= k; ++j) a.push_back(random_matrix(rng, n, n, 0.6 / std::sqrt(n * (k + 1.0))));
  // Rescale until the companion form is strictly stable.
  for (double rho = companion_spectral_radius(a); rho >= 0.95; rho = companion_spectral_radius(a)) {
    for (auto& aj : a) aj *= 0.9 / rho;
  }
  const Matrix b = random_matrix(rng, n, m, 1.0);
  const Matrix gp = random_matrix(rng, n, n, 1.0);
  const Matrix gr = random_matrix(rng, m, m, 1.0);
  Matrix pw = gp.transpose() * gp / n + 0.1 * Matrix::Identity(n, n);
  Matrix rw = gr.transpose() * gr / m + 0.1 * Matrix::Identity(m, m);
  pw = (0.5 * (pw + pw.transpose())).eval();
  rw = (0.5 * (rw + rw.transpose())).eval();

  Problem p;
  p.model = std::make_shared<LinearDelayedModel>(a, b);
  p.cost = std::make_shared<QuadraticCost>(pw, rw, WindowWeighting::AllSlots, 1.0);
  std::vector<Vector> slots;
  for (int j = 0; j <= k; ++j) slots.push_back(random_matrix(rng, n, 1, 1.0));
  p.initial = DelayWindow(std::move(slots));
  p.u_init.assign(static_cast<std::size_t>(horizon), Vector::Zero(m));
  p.config.mode = Mode::Ilqg;
  p.config.mu_init = 0.0;
  p.config.max_iterations = 50;
  return p;
}

Problem make_pendulum_truth_problem(int horizon, PendulumParams params) {
  Problem p;
  p.model = std::make_shared<PendulumModel>(params);
  Matrix pw(2, 2);
  pw << 1.0, 0.0, 0.0, 0.01;
  Matrix rw(1, 1);
  rw << 1e-3;
  p.cost = std::make_shared<QuadraticCost>(pw, rw, WindowWeighting::AllSlots, 10.0);
  p.initial = DelayWindow::constant((Vector(2) << std::numbers::pi, 0.0).finished(), 0);
  p.u_init.assign(static_cast<std::size_t>(horizon), (Vector(1) << 0.1).finished());
  p.config.mode = Mode::FullDdp;
  p.config.mu_init = 1e-6;
  p.config.max_iterations = 100;
  p.dt = params.dt;
  return p;
}

}  // namespace dddp
