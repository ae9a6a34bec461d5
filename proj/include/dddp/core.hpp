#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <functional>
#include <memory>
#include <vector>

namespace dddp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// The k+1 most recent states (x_i, x_{i-1}, ..., x_{i-k}).
/// Slot 0 is the newest state, slot k the oldest.
class DelayWindow {
 public:
  DelayWindow() = default;
  explicit DelayWindow(std::vector<Vector> states);

  /// k+1 copies of `x`.
  static DelayWindow constant(const Vector& x, int delay);
  /// Inverse of stacked(): splits z = (x_i, ..., x_{i-k}) into k+1 slots.
  static DelayWindow from_stacked(const Vector& z, int state_dim, int delay);

  int delay() const { return static_cast<int>(states_.size()) - 1; }
  int slots() const { return static_cast<int>(states_.size()); }
  int state_dim() const { return states_.empty() ? 0 : static_cast<int>(states_.front().size()); }

  const Vector& operator[](int j) const { return states_[static_cast<std::size_t>(j)]; }
  Vector& operator[](int j) { return states_[static_cast<std::size_t>(j)]; }

  /// Drops the oldest slot and puts `y` in slot 0.
  void shift_in(const Vector& y);
  DelayWindow shifted(const Vector& y) const;

  Vector stacked() const;

  const std::vector<Vector>& states() const { return states_; }

 private:
  std::vector<Vector> states_;
};

/// States x_1..x_N, controls u_0..u_{N-1}, and the fixed pre-horizon window
/// (x_0, x_{-1}, ..., x_{-k}).
struct Trajectory {
  DelayWindow initial;
  std::vector<Vector> states;
  std::vector<Vector> controls;

  int horizon() const { return static_cast<int>(controls.size()); }
  int delay() const { return initial.delay(); }
  int state_dim() const { return initial.state_dim(); }
  int control_dim() const { return controls.empty() ? 0 : static_cast<int>(controls.front().size()); }

  /// x_i for -k <= i <= N. Indices <= 0 come from the initial window.
  const Vector& state(int i) const;
  /// The delay window at time 0 <= i <= N.
  DelayWindow window_at(int i) const;

  /// Throws std::invalid_argument when counts or dimensions disagree.
  void validate() const;
};

class DynamicsModel {
 public:
  virtual ~DynamicsModel() = default;

  virtual int state_dim() const = 0;
  virtual int control_dim() const = 0;
  virtual int delay() const = 0;

  /// x_{i+1} = f(window, u). Must be deterministic.
  virtual Vector step(const DelayWindow& window, const Vector& u) const = 0;

  /// Analytic first derivatives. Models without them return false and the
  /// caller falls back to finite differences. f_x gets one n x n block per slot.
  virtual bool jacobians(const DelayWindow& /*window*/, const Vector& /*u*/,
                         std::vector<Matrix>& /*f_x*/, Matrix& /*f_u*/) const {
    return false;
  }
};

/// (k+1) x (k+1) grid of equally sized matrix blocks, row-major over (j, l).
class BlockGrid {
 public:
  BlockGrid() = default;
  BlockGrid(int size, Eigen::Index rows, Eigen::Index cols);

  int size() const { return size_; }
  Matrix& operator()(int j, int l) { return blocks_[index(j, l)]; }
  const Matrix& operator()(int j, int l) const { return blocks_[index(j, l)]; }

  /// Replaces (j,l) and (l,j) by the average of (j,l) and (l,j)^T.
  void symmetrize();
  /// max over (j,l) of |B_jl - B_lj^T|.
  double asymmetry() const;
  /// Assembles the full block matrix.
  Matrix dense() const;

 private:
  std::size_t index(int j, int l) const {
    return static_cast<std::size_t>(j) * static_cast<std::size_t>(size_) + static_cast<std::size_t>(l);
  }
  int size_ = 0;
  std::vector<Matrix> blocks_;
};

/// Rank-3 tensor holding one rows x cols Hessian block per output component.
/// Stored as an (outputs) x (rows*cols) row-major buffer; row p is the
/// column-major vectorization of component p's block.
class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(Eigen::Index outputs, Eigen::Index rows, Eigen::Index cols);

  Eigen::Index outputs() const { return outputs_; }
  Eigen::Index rows() const { return rows_; }
  Eigen::Index cols() const { return cols_; }
  bool empty() const { return outputs_ == 0; }

  double& at(Eigen::Index p, Eigen::Index r, Eigen::Index c) {
    return data_[static_cast<std::size_t>(p * rows_ * cols_ + c * rows_ + r)];
  }
  double at(Eigen::Index p, Eigen::Index r, Eigen::Index c) const {
    return data_[static_cast<std::size_t>(p * rows_ * cols_ + c * rows_ + r)];
  }

  Matrix component(Eigen::Index p) const;
  void set_component(Eigen::Index p, const Matrix& block);

  /// sum_p weights(p) * component(p).
  Matrix contract(const Vector& weights) const;

  double max_abs() const;

 private:
  Eigen::Index outputs_ = 0, rows_ = 0, cols_ = 0;
  std::vector<double> data_;
};

/// First and second derivatives of a scalar function of (window, u).
/// Terminal-cost derivatives leave the u-blocks at size zero.
struct CostDerivatives {
  std::vector<Vector> x;
  Vector u;
  BlockGrid xx;
  std::vector<Matrix> xu;
  Matrix uu;

  static CostDerivatives zero(int state_dim, int control_dim, int delay);
};

class CostModel {
 public:
  virtual ~CostModel() = default;

  virtual int state_dim() const = 0;
  virtual int control_dim() const = 0;

  /// L^i(window, u) >= 0.
  virtual double running(int i, const DelayWindow& window, const Vector& u) const = 0;
  /// L^N(window) >= 0.
  virtual double terminal(const DelayWindow& window) const = 0;

  /// Analytic derivatives. Returning false selects finite differences.
  virtual bool running_derivatives(int /*i*/, const DelayWindow& /*window*/, const Vector& /*u*/,
                                   CostDerivatives& /*out*/) const {
    return false;
  }
  virtual bool terminal_derivatives(const DelayWindow& /*window*/, CostDerivatives& /*out*/) const {
    return false;
  }
};

enum class WindowWeighting {
  AllSlots,     // P applied to every state in the window
  CurrentOnly,  // P applied to slot 0 only
};

/// L = 1/2 sum_j x_{i-j}^T P x_{i-j} + 1/2 u^T R u. The terminal cost reuses the
/// state term scaled by `terminal_weight`.
class QuadraticCost final : public CostModel {
 public:
  QuadraticCost(Matrix p, Matrix r, WindowWeighting weighting = WindowWeighting::AllSlots,
                double terminal_weight = 1.0);

  int state_dim() const override { return static_cast<int>(p_.rows()); }
  int control_dim() const override { return static_cast<int>(r_.rows()); }

  double running(int i, const DelayWindow& window, const Vector& u) const override;
  double terminal(const DelayWindow& window) const override;
  bool running_derivatives(int i, const DelayWindow& window, const Vector& u,
                           CostDerivatives& out) const override;
  bool terminal_derivatives(const DelayWindow& window, CostDerivatives& out) const override;

  const Matrix& state_weight() const { return p_; }
  const Matrix& control_weight() const { return r_; }

 private:
  double state_term(const DelayWindow& window) const;
  void state_derivatives(const DelayWindow& window, double scale, CostDerivatives& out) const;

  Matrix p_;
  Matrix r_;
  WindowWeighting weighting_;
  double terminal_weight_;
};

/// x_1..x_N from the initial window under the given controls.
Trajectory rollout(const DynamicsModel& model, const DelayWindow& initial,
                   const std::vector<Vector>& controls);

/// J = sum_{i<N} L^i(x̄_i, u_i) + L^N(x̄_N).
double total_cost(const CostModel& cost, const Trajectory& trajectory);

/// Runs body(i) for i in [0, count). Uses up to `threads` workers (0 means
/// hardware concurrency); each index is processed exactly once.
void parallel_for(int count, int threads, const std::function<void(int)>& body);

bool all_finite(const Vector& v);

}  // namespace dddp
