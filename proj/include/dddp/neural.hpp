#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dddp/core.hpp"
#include "dddp/models.hpp"

namespace dddp {

struct NetworkDims {
  int n_visible = 2;
  int n_hidden = 30;
  int control_dim = 1;
  int delay = 3;

  int augmented() const { return n_visible + n_hidden; }
  std::size_t param_count() const;
  void validate() const;
};

/// x_{i+1} = tanh(W_u u + b_u + sum_j tanh(W_j x_{i-j} + b_j)) over augmented
/// states x = (visible, hidden).
///
/// Parameter layout (one flat buffer, matrices row-major):
///   W_u (a x m), b_u (a), then for j = 0..k: W_j (a x a), b_j (a).
class DelayedNetwork final : public DynamicsModel {
 public:
  DelayedNetwork() = default;
  /// All parameters zero.
  explicit DelayedNetwork(NetworkDims dims);
  DelayedNetwork(NetworkDims dims, std::vector<double> params);

  /// Uniform in +-1/sqrt(fan_in) per layer.
  static DelayedNetwork random(NetworkDims dims, std::uint64_t seed);

  int state_dim() const override { return dims_.augmented(); }
  int control_dim() const override { return dims_.control_dim; }
  int delay() const override { return dims_.delay; }
  Vector step(const DelayWindow& window, const Vector& u) const override;
  bool jacobians(const DelayWindow& window, const Vector& u, std::vector<Matrix>& f_x,
                 Matrix& f_u) const override;

  const NetworkDims& dims() const { return dims_; }
  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  std::span<const double> w_u() const;
  std::span<const double> b_u() const;
  std::span<const double> w(int j) const;
  std::span<const double> b(int j) const;
  std::span<double> w_u();
  std::span<double> b_u();
  std::span<double> w(int j);
  std::span<double> b(int j);

  std::size_t offset_w_u() const { return 0; }
  std::size_t offset_b_u() const;
  std::size_t offset_w(int j) const;
  std::size_t offset_b(int j) const;

 private:
  NetworkDims dims_;
  std::vector<double> params_;
};

Vector net_forward(const DelayedNetwork& net, const DelayWindow& window, const Vector& u);

struct NetJacobians {
  std::vector<Matrix> slots;  // d out / d x_{i-j}, a x a each
  Matrix control;             // d out / d u, a x m
};

NetJacobians net_jacobians(const DelayedNetwork& net, const DelayWindow& window, const Vector& u);

/// One training sequence. visible holds y_{-k}, ..., y_0, y_1, ..., y_T
/// (T + k + 1 entries), controls holds u_0..u_{T-1}.
struct Sequence {
  std::vector<Vector> visible;
  std::vector<Vector> controls;

  int steps() const { return static_cast<int>(controls.size()); }
};

struct SequenceDataset {
  std::vector<Sequence> sequences;
  int n_visible = 2;
  int control_dim = 1;
  int delay = 3;
  double dt = 0.02;
  double position_scale = 1.0;  // visible = position_scale * (sin th, -cos th)
  double control_min = 0.0;     // empirical range over all sequences
  double control_max = 0.0;
  std::uint64_t seed = 0;
};

/// The starting window of a rollout: slot j holds (y_{-j}, 0).
DelayWindow initial_window(const Sequence& seq, const NetworkDims& dims);

/// Closed-loop rollout from the sequence's initial window; returns x_1..x_T.
std::vector<Vector> net_rollout(const DelayedNetwork& net, const Sequence& seq);

/// Adds the gradient of J = sum_t mask_t * |vis(x_t) - y_t|^2, t = 1..T, to
/// `grad` and returns J. An empty mask means all ones.
double bptt_accumulate(const DelayedNetwork& net, const Sequence& seq,
                       std::span<const double> mask, std::span<double> grad);

struct BpttResult {
  double loss = 0.0;
  std::vector<double> gradient;
};

BpttResult bptt_gradient(const DelayedNetwork& net, const Sequence& seq,
                         std::span<const double> mask = {});

struct AdamState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::vector<double> m;
  std::vector<double> v;
  long step = 0;

  AdamState() = default;
  explicit AdamState(std::size_t n, double lr = 1e-3) : learning_rate(lr), m(n, 0.0), v(n, 0.0) {}
};

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads);

struct DatasetConfig {
  int trajectories = 12500;
  int steps = 50;  // 1 s at 20 ms
  int delay = 3;
  PendulumParams pendulum{};
  double position_scale = 0.8;
  double max_amplitude = 15.0;
  double freq_min = 0.5;  // Hz
  double freq_max = 3.0;
  int max_sinusoids = 3;
  double uniform_fraction = 0.25;  // share of trajectories driven by held uniform noise
  int hold_steps = 5;
  std::uint64_t seed = 1;
};

SequenceDataset generate_pendulum_dataset(const DatasetConfig& config);

struct TrainConfig {
  int epochs = 1000;
  int batch_size = 128;
  double learning_rate = 1e-3;
  double final_lr_fraction = 1.0;  // cosine decay to this share of learning_rate; 1 keeps it fixed
  double validation_fraction = 0.1;
  double clip_norm = 10.0;
  std::uint64_t seed = 7;  // weight init and shuffling
  int threads = 1;
  int log_every = 0;  // epochs between progress lines on stderr; 0 silences
};

struct TrainReport {
  std::vector<double> train_loss;  // per epoch, mean squared visible error
  std::vector<double> val_loss;
  double val_one_step = 0.0;       // teacher-forced one-step MSE on validation
  double val_persistence = 0.0;    // MSE of predicting y_{t+1} = y_t
  double val_rollout_rmse = 0.0;   // closed-loop visible RMSE over validation
  std::size_t train_count = 0;
  std::size_t val_count = 0;
};

struct TrainResult {
  DelayedNetwork net;
  TrainReport report;
};

/// Throws std::runtime_error on a non-finite loss.
TrainResult train(const SequenceDataset& data, const NetworkDims& dims, const TrainConfig& config);

/// Mean squared visible error over the given sequences, closed loop.
double rollout_mse(const DelayedNetwork& net, const SequenceDataset& data,
                   std::span<const std::size_t> indices);
/// Teacher-forced one-step error: visible slots from data, hidden from the net.
double one_step_mse(const DelayedNetwork& net, const SequenceDataset& data,
                    std::span<const std::size_t> indices);
double persistence_mse(const SequenceDataset& data, std::span<const std::size_t> indices);

/// Squared wrap-aware angle read off the first two coordinates of slot 0,
/// plus a quadratic control cost. angle = atan2(x, -y) is 0 upright.
class AngleCost final : public CostModel {
 public:
  AngleCost(int state_dim, int control_dim, double angle_weight, double control_weight,
            double terminal_weight);

  int state_dim() const override { return n_; }
  int control_dim() const override { return m_; }
  double running(int i, const DelayWindow& window, const Vector& u) const override;
  double terminal(const DelayWindow& window) const override;
  bool running_derivatives(int i, const DelayWindow& window, const Vector& u,
                           CostDerivatives& out) const override;
  bool terminal_derivatives(const DelayWindow& window, CostDerivatives& out) const override;

  double control_weight() const { return control_weight_; }

 private:
  void angle_terms(const DelayWindow& window, double weight, CostDerivatives& out) const;

  int n_;
  int m_;
  double angle_weight_;
  double control_weight_;
  double terminal_weight_;
};

struct PendulumNetOptions {
  int horizon = 60;
  double angle_weight = 1.0;
  double control_ratio = 10.0;  // control weight as a share of angle_weight, before range scaling
  double terminal_weight = 100.0;
  double u_init = 0.5;
  int max_iterations = 30;
};

/// Swing-up on the network: hanging initial window with zero hidden states.
/// The control weight is control_ratio * angle_weight / (control range / 2)^2.
Problem make_pendulum_ddp_problem(const DelayedNetwork& net, const SequenceDataset& meta,
                                  const PendulumNetOptions& options = {});

}  // namespace dddp
