#include "dddp/core.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>

#include "dddp/kernels.hpp"

namespace dddp {

DelayWindow::DelayWindow(std::vector<Vector> states) : states_(std::move(states)) {
  if (states_.empty()) throw std::invalid_argument("DelayWindow needs at least one slot");
  const auto n = states_.front().size();
  for (const auto& s : states_) {
    if (s.size() != n) throw std::invalid_argument("DelayWindow slots must share one dimension");
  }
}

DelayWindow DelayWindow::constant(const Vector& x, int delay) {
  if (delay < 0) throw std::invalid_argument("delay order must be nonnegative");
  return DelayWindow(std::vector<Vector>(static_cast<std::size_t>(delay) + 1, x));
}

DelayWindow DelayWindow::from_stacked(const Vector& z, int state_dim, int delay) {
  if (z.size() != static_cast<Eigen::Index>(state_dim) * (delay + 1)) {
    throw std::invalid_argument("stacked vector length does not match n(k+1)");
  }
  std::vector<Vector> slots;
  slots.reserve(static_cast<std::size_t>(delay) + 1);
  for (int j = 0; j <= delay; ++j) slots.push_back(z.segment(j * state_dim, state_dim));
  return DelayWindow(std::move(slots));
}

void DelayWindow::shift_in(const Vector& y) {
  if (y.size() != state_dim()) throw std::invalid_argument("shift_in: dimension mismatch");
  std::rotate(states_.rbegin(), states_.rbegin() + 1, states_.rend());
  states_.front() = y;
}

DelayWindow DelayWindow::shifted(const Vector& y) const {
  DelayWindow w = *this;
  w.shift_in(y);
  return w;
}

Vector DelayWindow::stacked() const {
  const int n = state_dim();
  Vector z(static_cast<Eigen::Index>(n) * slots());
  for (int j = 0; j < slots(); ++j) z.segment(j * n, n) = states_[static_cast<std::size_t>(j)];
  return z;
}

const Vector& Trajectory::state(int i) const {
  if (i > horizon() || i < -delay()) throw std::out_of_range("Trajectory::state index out of range");
  if (i <= 0) return initial[-i];
  return states[static_cast<std::size_t>(i - 1)];
}

DelayWindow Trajectory::window_at(int i) const {
  if (i < 0 || i > horizon()) throw std::out_of_range("window_at: index out of range");
  const int k = delay();
  std::vector<Vector> slots;
  slots.reserve(static_cast<std::size_t>(k) + 1);
  for (int j = 0; j <= k; ++j) {
    const int t = i - j;
    slots.push_back(t <= 0 ? initial[j - i] : states[static_cast<std::size_t>(t - 1)]);
  }
  return DelayWindow(std::move(slots));
}

void Trajectory::validate() const {
  if (initial.slots() == 0) throw std::invalid_argument("trajectory has no initial window");
  if (states.size() != controls.size()) {
    throw std::invalid_argument("trajectory needs as many states as controls");
  }
  const auto n = initial.state_dim();
  for (const auto& x : states) {
    if (x.size() != n) throw std::invalid_argument("trajectory state dimension mismatch");
  }
  const auto m = control_dim();
  for (const auto& u : controls) {
    if (u.size() != m) throw std::invalid_argument("trajectory control dimension mismatch");
  }
}

BlockGrid::BlockGrid(int size, Eigen::Index rows, Eigen::Index cols)
    : size_(size), blocks_(static_cast<std::size_t>(size) * static_cast<std::size_t>(size),
                           Matrix::Zero(rows, cols)) {}

void BlockGrid::symmetrize() {
  for (int j = 0; j < size_; ++j) {
    Matrix& d = (*this)(j, j);
    d = 0.5 * (d + d.transpose()).eval();
    for (int l = j + 1; l < size_; ++l) {
      Matrix avg = 0.5 * ((*this)(j, l) + (*this)(l, j).transpose());
      (*this)(l, j) = avg.transpose();
      (*this)(j, l) = std::move(avg);
    }
  }
}

double BlockGrid::asymmetry() const {
  double worst = 0.0;
  for (int j = 0; j < size_; ++j) {
    for (int l = j; l < size_; ++l) {
      worst = std::max(worst, ((*this)(j, l) - (*this)(l, j).transpose()).cwiseAbs().maxCoeff());
    }
  }
  return worst;
}

Matrix BlockGrid::dense() const {
  if (size_ == 0) return {};
  const auto r = blocks_.front().rows();
  const auto c = blocks_.front().cols();
  Matrix out(r * size_, c * size_);
  for (int j = 0; j < size_; ++j) {
    for (int l = 0; l < size_; ++l) out.block(j * r, l * c, r, c) = (*this)(j, l);
  }
  return out;
}

Tensor3::Tensor3(Eigen::Index outputs, Eigen::Index rows, Eigen::Index cols)
    : outputs_(outputs), rows_(rows), cols_(cols),
      data_(static_cast<std::size_t>(outputs * rows * cols), 0.0) {}

Matrix Tensor3::component(Eigen::Index p) const {
  return Eigen::Map<const Matrix>(data_.data() + p * rows_ * cols_, rows_, cols_);
}

void Tensor3::set_component(Eigen::Index p, const Matrix& block) {
  Eigen::Map<Matrix>(data_.data() + p * rows_ * cols_, rows_, cols_) = block;
}

Matrix Tensor3::contract(const Vector& weights) const {
  if (weights.size() != outputs_) throw std::invalid_argument("Tensor3::contract: size mismatch");
  Matrix out = Matrix::Zero(rows_, cols_);
  kernels::gemv_t(data_, static_cast<std::size_t>(outputs_), static_cast<std::size_t>(rows_ * cols_),
                  std::span<const double>(weights.data(), static_cast<std::size_t>(outputs_)),
                  std::span<double>(out.data(), static_cast<std::size_t>(rows_ * cols_)));
  return out;
}

double Tensor3::max_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

CostDerivatives CostDerivatives::zero(int state_dim, int control_dim, int delay) {
  CostDerivatives d;
  const int s = delay + 1;
  d.x.assign(static_cast<std::size_t>(s), Vector::Zero(state_dim));
  d.u = Vector::Zero(control_dim);
  d.xx = BlockGrid(s, state_dim, state_dim);
  d.xu.assign(static_cast<std::size_t>(s), Matrix::Zero(state_dim, control_dim));
  d.uu = Matrix::Zero(control_dim, control_dim);
  return d;
}

QuadraticCost::QuadraticCost(Matrix p, Matrix r, WindowWeighting weighting, double terminal_weight)
    : p_(std::move(p)), r_(std::move(r)), weighting_(weighting), terminal_weight_(terminal_weight) {
  if (p_.rows() != p_.cols() || r_.rows() != r_.cols()) {
    throw std::invalid_argument("QuadraticCost weights must be square");
  }
  if (!p_.isApprox(p_.transpose()) || !r_.isApprox(r_.transpose())) {
    throw std::invalid_argument("QuadraticCost weights must be symmetric");
  }
  constexpr double kPsdSlack = -1e-12;
  if (p_.size() > 0 && Eigen::SelfAdjointEigenSolver<Matrix>(p_).eigenvalues().minCoeff() < kPsdSlack) {
    throw std::invalid_argument("QuadraticCost state weight must be positive semidefinite");
  }
  if (r_.size() > 0 && Eigen::SelfAdjointEigenSolver<Matrix>(r_).eigenvalues().minCoeff() < kPsdSlack) {
    throw std::invalid_argument("QuadraticCost control weight must be positive semidefinite");
  }
  if (terminal_weight_ < 0.0) throw std::invalid_argument("terminal weight must be nonnegative");
}

double QuadraticCost::state_term(const DelayWindow& window) const {
  const int last = weighting_ == WindowWeighting::AllSlots ? window.delay() : 0;
  double s = 0.0;
  for (int j = 0; j <= last; ++j) s += window[j].dot(p_ * window[j]);
  return 0.5 * s;
}

double QuadraticCost::running(int /*i*/, const DelayWindow& window, const Vector& u) const {
  return state_term(window) + 0.5 * u.dot(r_ * u);
}

double QuadraticCost::terminal(const DelayWindow& window) const {
  return terminal_weight_ * state_term(window);
}

void QuadraticCost::state_derivatives(const DelayWindow& window, double scale,
                                      CostDerivatives& out) const {
  const int last = weighting_ == WindowWeighting::AllSlots ? window.delay() : 0;
  for (int j = 0; j <= last; ++j) {
    out.x[static_cast<std::size_t>(j)] = scale * (p_ * window[j]);
    out.xx(j, j) = scale * p_;
  }
}

bool QuadraticCost::running_derivatives(int /*i*/, const DelayWindow& window, const Vector& u,
                                        CostDerivatives& out) const {
  out = CostDerivatives::zero(state_dim(), control_dim(), window.delay());
  state_derivatives(window, 1.0, out);
  out.u = r_ * u;
  out.uu = r_;
  return true;
}

bool QuadraticCost::terminal_derivatives(const DelayWindow& window, CostDerivatives& out) const {
  out = CostDerivatives::zero(state_dim(), 0, window.delay());
  state_derivatives(window, terminal_weight_, out);
  return true;
}

Trajectory rollout(const DynamicsModel& model, const DelayWindow& initial,
                   const std::vector<Vector>& controls) {
  if (initial.delay() != model.delay() || initial.state_dim() != model.state_dim()) {
    throw std::invalid_argument("rollout: initial window does not match the model");
  }
  Trajectory traj{initial, {}, controls};
  traj.states.reserve(controls.size());
  DelayWindow window = initial;
  for (const auto& u : controls) {
    if (u.size() != model.control_dim()) throw std::invalid_argument("rollout: control dimension");
    Vector next = model.step(window, u);
    window.shift_in(next);
    traj.states.push_back(std::move(next));
  }
  return traj;
}

double total_cost(const CostModel& cost, const Trajectory& trajectory) {
  trajectory.validate();
  if (trajectory.state_dim() != cost.state_dim() ||
      (trajectory.horizon() > 0 && trajectory.control_dim() != cost.control_dim())) {
    throw std::invalid_argument("total_cost: trajectory dimensions do not match the cost");
  }
  double j = 0.0;
  DelayWindow window = trajectory.initial;
  for (int i = 0; i < trajectory.horizon(); ++i) {
    j += cost.running(i, window, trajectory.controls[static_cast<std::size_t>(i)]);
    window.shift_in(trajectory.states[static_cast<std::size_t>(i)]);
  }
  return j + cost.terminal(window);
}

void parallel_for(int count, int threads, const std::function<void(int)>& body) {
  if (count <= 0) return;
  int workers = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::clamp(workers, 1, count);
  if (workers == 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next = count;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

bool all_finite(const Vector& v) { return v.allFinite(); }

}  // namespace dddp
