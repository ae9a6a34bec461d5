#include "dddp/neural.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

#include "dddp/kernels.hpp"

namespace dddp {

namespace {

std::size_t sz(int v) { return static_cast<std::size_t>(v); }

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

// Evaluates one network step on raw slot pointers. `th` receives the k+1
// inner activations when non-null.
void forward_raw(const DelayedNetwork& net, const double* const* slots, const double* u,
                 double* th, double* out) {
  const auto& d = net.dims();
  const std::size_t a = sz(d.augmented());
  const std::size_t m = sz(d.control_dim);
  thread_local std::vector<double> z;
  thread_local std::vector<double> s;
  z.resize(a);
  s.assign(net.b_u().begin(), net.b_u().end());
  kernels::gemv(net.w_u(), a, m, {u, m}, s);
  for (int j = 0; j <= d.delay; ++j) {
    const auto b = net.b(j);
    std::copy(b.begin(), b.end(), z.begin());
    kernels::gemv(net.w(j), a, a, {slots[j], a}, z);
    const std::span<double> t = th ? std::span<double>(th + sz(j) * a, a) : std::span<double>(z);
    kernels::tanh(z, t);
    kernels::axpy(1.0, t, s);
  }
  kernels::tanh(s, {out, a});
}

}  // namespace

std::size_t NetworkDims::param_count() const {
  const std::size_t a = sz(augmented());
  return a * sz(control_dim) + a + sz(delay + 1) * (a * a + a);
}

void NetworkDims::validate() const {
  if (n_visible < 2 || n_hidden < 0 || control_dim < 1 || delay < 0) {
    throw std::invalid_argument("NetworkDims: need n_visible >= 2, n_hidden >= 0, m >= 1, k >= 0");
  }
}

DelayedNetwork::DelayedNetwork(NetworkDims dims) : dims_(dims) {
  dims_.validate();
  params_.assign(dims_.param_count(), 0.0);
}

DelayedNetwork::DelayedNetwork(NetworkDims dims, std::vector<double> params)
    : dims_(dims), params_(std::move(params)) {
  dims_.validate();
  if (params_.size() != dims_.param_count()) {
    throw std::invalid_argument("DelayedNetwork: expected " + std::to_string(dims_.param_count()) +
                                " parameters, got " + std::to_string(params_.size()));
  }
}

DelayedNetwork DelayedNetwork::random(NetworkDims dims, std::uint64_t seed) {
  DelayedNetwork net(dims);
  auto rng = stream(seed, 0);
  auto fill = [&](std::span<double> s, int fan_in) {
    const double r = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-r, r);
    for (double& v : s) v = dist(rng);
  };
  fill(net.w_u(), dims.control_dim);
  fill(net.b_u(), dims.control_dim);
  for (int j = 0; j <= dims.delay; ++j) {
    fill(net.w(j), dims.augmented());
    fill(net.b(j), dims.augmented());
  }
  return net;
}

std::size_t DelayedNetwork::offset_b_u() const {
  return sz(dims_.augmented()) * sz(dims_.control_dim);
}

std::size_t DelayedNetwork::offset_w(int j) const {
  const std::size_t a = sz(dims_.augmented());
  return offset_b_u() + a + sz(j) * (a * a + a);
}

std::size_t DelayedNetwork::offset_b(int j) const {
  const std::size_t a = sz(dims_.augmented());
  return offset_w(j) + a * a;
}

std::span<const double> DelayedNetwork::w_u() const {
  return std::span<const double>(params_).subspan(0, offset_b_u());
}
std::span<const double> DelayedNetwork::b_u() const {
  return std::span<const double>(params_).subspan(offset_b_u(), sz(dims_.augmented()));
}
std::span<const double> DelayedNetwork::w(int j) const {
  const std::size_t a = sz(dims_.augmented());
  return std::span<const double>(params_).subspan(offset_w(j), a * a);
}
std::span<const double> DelayedNetwork::b(int j) const {
  return std::span<const double>(params_).subspan(offset_b(j), sz(dims_.augmented()));
}
std::span<double> DelayedNetwork::w_u() { return std::span<double>(params_).subspan(0, offset_b_u()); }
std::span<double> DelayedNetwork::b_u() {
  return std::span<double>(params_).subspan(offset_b_u(), sz(dims_.augmented()));
}
std::span<double> DelayedNetwork::w(int j) {
  const std::size_t a = sz(dims_.augmented());
  return std::span<double>(params_).subspan(offset_w(j), a * a);
}
std::span<double> DelayedNetwork::b(int j) {
  return std::span<double>(params_).subspan(offset_b(j), sz(dims_.augmented()));
}

Vector DelayedNetwork::step(const DelayWindow& window, const Vector& u) const {
  if (window.delay() != dims_.delay || window.state_dim() != dims_.augmented() ||
      u.size() != dims_.control_dim) {
    throw std::invalid_argument("DelayedNetwork::step: dimension mismatch");
  }
  std::vector<const double*> slots(sz(dims_.delay + 1));
  for (int j = 0; j <= dims_.delay; ++j) slots[sz(j)] = window[j].data();
  Vector out(dims_.augmented());
  forward_raw(*this, slots.data(), u.data(), nullptr, out.data());
  return out;
}

bool DelayedNetwork::jacobians(const DelayWindow& window, const Vector& u, std::vector<Matrix>& f_x,
                               Matrix& f_u) const {
  auto jac = net_jacobians(*this, window, u);
  f_x = std::move(jac.slots);
  f_u = std::move(jac.control);
  return true;
}

Vector net_forward(const DelayedNetwork& net, const DelayWindow& window, const Vector& u) {
  return net.step(window, u);
}

NetJacobians net_jacobians(const DelayedNetwork& net, const DelayWindow& window, const Vector& u) {
  const auto& d = net.dims();
  const int a = d.augmented();
  const int m = d.control_dim;
  if (window.delay() != d.delay || window.state_dim() != a || u.size() != m) {
    throw std::invalid_argument("net_jacobians: dimension mismatch");
  }
  std::vector<const double*> slots(sz(d.delay + 1));
  for (int j = 0; j <= d.delay; ++j) slots[sz(j)] = window[j].data();
  std::vector<double> th(sz(d.delay + 1) * sz(a));
  Vector out(a);
  forward_raw(net, slots.data(), u.data(), th.data(), out.data());

  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const Vector d_outer = (1.0 - out.array().square()).matrix();
  NetJacobians jac;
  jac.control = d_outer.asDiagonal() * Eigen::Map<const RowMajor>(net.w_u().data(), a, m);
  jac.slots.reserve(sz(d.delay + 1));
  for (int j = 0; j <= d.delay; ++j) {
    const Eigen::Map<const Vector> t(th.data() + sz(j) * sz(a), a);
    const Vector scale = d_outer.cwiseProduct((1.0 - t.array().square()).matrix());
    jac.slots.push_back(scale.asDiagonal() * Eigen::Map<const RowMajor>(net.w(j).data(), a, a));
  }
  return jac;
}

DelayWindow initial_window(const Sequence& seq, const NetworkDims& dims) {
  const int k = dims.delay;
  if (static_cast<int>(seq.visible.size()) != seq.steps() + k + 1) {
    throw std::invalid_argument("Sequence: visible length must be T + k + 1");
  }
  std::vector<Vector> slots;
  slots.reserve(sz(k + 1));
  for (int j = 0; j <= k; ++j) {
    Vector x = Vector::Zero(dims.augmented());
    x.head(dims.n_visible) = seq.visible[sz(k - j)];
    slots.push_back(std::move(x));
  }
  return DelayWindow(std::move(slots));
}

std::vector<Vector> net_rollout(const DelayedNetwork& net, const Sequence& seq) {
  return rollout(net, initial_window(seq, net.dims()), seq.controls).states;
}

double bptt_accumulate(const DelayedNetwork& net, const Sequence& seq, std::span<const double> mask,
                       std::span<double> grad) {
  const auto& d = net.dims();
  const int k = d.delay;
  const int T = seq.steps();
  const std::size_t a = sz(d.augmented());
  const std::size_t m = sz(d.control_dim);
  const std::size_t nv = sz(d.n_visible);
  if (T < 1) throw std::invalid_argument("bptt: empty sequence");
  if (!mask.empty() && mask.size() != sz(T)) throw std::invalid_argument("bptt: mask length");
  if (grad.size() != net.params().size()) throw std::invalid_argument("bptt: gradient size");

  // x[s] is x_{s-k}; entries s <= k are the fixed starting window.
  std::vector<double> x(sz(T + k + 1) * a, 0.0);
  for (int s = 0; s <= k; ++s) {
    std::copy(seq.visible[sz(s)].data(), seq.visible[sz(s)].data() + nv, x.data() + sz(s) * a);
  }
  std::vector<double> th(sz(T) * sz(k + 1) * a);
  std::vector<const double*> slots(sz(k + 1));
  for (int t = 0; t < T; ++t) {
    for (int j = 0; j <= k; ++j) slots[sz(j)] = x.data() + sz(t + k - j) * a;
    forward_raw(net, slots.data(), seq.controls[sz(t)].data(), th.data() + sz(t) * sz(k + 1) * a,
                x.data() + sz(t + k + 1) * a);
  }

  std::vector<double> dx(x.size(), 0.0);
  double loss = 0.0;
  for (int t = 1; t <= T; ++t) {
    const double w = mask.empty() ? 1.0 : mask[sz(t - 1)];
    if (w == 0.0) continue;
    const double* xt = x.data() + sz(t + k) * a;
    const Vector& y = seq.visible[sz(t + k)];
    for (std::size_t v = 0; v < nv; ++v) {
      const double e = xt[v] - y[static_cast<Eigen::Index>(v)];
      loss += w * e * e;
      dx[sz(t + k) * a + v] += 2.0 * w * e;
    }
  }

  std::vector<double> ds(a);
  std::vector<double> dz(a);
  const auto g_wu = grad.subspan(net.offset_w_u(), a * m);
  const auto g_bu = grad.subspan(net.offset_b_u(), a);
  for (int t = T - 1; t >= 0; --t) {
    const double* out = x.data() + sz(t + k + 1) * a;
    const double* g = dx.data() + sz(t + k + 1) * a;
    for (std::size_t r = 0; r < a; ++r) ds[r] = g[r] * (1.0 - out[r] * out[r]);
    kernels::axpy(1.0, ds, g_bu);
    kernels::ger(ds, {seq.controls[sz(t)].data(), m}, g_wu);
    for (int j = 0; j <= k; ++j) {
      const double* tj = th.data() + (sz(t) * sz(k + 1) + sz(j)) * a;
      for (std::size_t r = 0; r < a; ++r) dz[r] = ds[r] * (1.0 - tj[r] * tj[r]);
      const std::size_t src = sz(t + k - j);
      kernels::axpy(1.0, dz, grad.subspan(net.offset_b(j), a));
      kernels::ger(dz, {x.data() + src * a, a}, grad.subspan(net.offset_w(j), a * a));
      if (src > sz(k)) kernels::gemv_t(net.w(j), a, a, dz, {dx.data() + src * a, a});
    }
  }
  return loss;
}

BpttResult bptt_gradient(const DelayedNetwork& net, const Sequence& seq,
                         std::span<const double> mask) {
  BpttResult r;
  r.gradient.assign(net.params().size(), 0.0);
  r.loss = bptt_accumulate(net, seq, mask, r.gradient);
  return r;
}

void adam_step(AdamState& st, std::span<double> params, std::span<const double> grads) {
  if (params.size() != grads.size() || st.m.size() != params.size() ||
      st.v.size() != params.size()) {
    throw std::invalid_argument("adam_step: shape mismatch");
  }
  ++st.step;
  const double c1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
  const double c2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    st.m[i] = st.beta1 * st.m[i] + (1.0 - st.beta1) * grads[i];
    st.v[i] = st.beta2 * st.v[i] + (1.0 - st.beta2) * grads[i] * grads[i];
    params[i] -= st.learning_rate * (st.m[i] / c1) / (std::sqrt(st.v[i] / c2) + st.epsilon);
  }
}

SequenceDataset generate_pendulum_dataset(const DatasetConfig& cfg) {
  if (cfg.trajectories < 1 || cfg.steps < 1 || cfg.delay < 0 || cfg.position_scale <= 0.0 ||
      cfg.position_scale > 1.0 || cfg.max_sinusoids < 1 || cfg.hold_steps < 1 ||
      cfg.freq_min > cfg.freq_max || cfg.max_amplitude < 0.0) {
    throw std::invalid_argument("DatasetConfig: invalid settings");
  }
  const PendulumModel pendulum(cfg.pendulum);
  const double dt = cfg.pendulum.dt;
  SequenceDataset data;
  data.n_visible = 2;
  data.control_dim = 1;
  data.delay = cfg.delay;
  data.dt = dt;
  data.position_scale = cfg.position_scale;
  data.seed = cfg.seed;
  data.sequences.resize(sz(cfg.trajectories));
  double umin = 0.0;
  double umax = 0.0;

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int r = 0; r < cfg.trajectories; ++r) {
    auto rng = stream(cfg.seed, static_cast<std::uint64_t>(r) + 1);
    std::vector<double> u(sz(cfg.steps));
    const double amp = cfg.max_amplitude * unit(rng);
    if (unit(rng) < cfg.uniform_fraction) {
      double held = 0.0;
      for (int i = 0; i < cfg.steps; ++i) {
        if (i % cfg.hold_steps == 0) held = amp * (2.0 * unit(rng) - 1.0);
        u[sz(i)] = held;
      }
    } else {
      const int count = std::uniform_int_distribution<int>(1, cfg.max_sinusoids)(rng);
      std::vector<double> weight(sz(count)), freq(sz(count)), phase(sz(count));
      for (int s = 0; s < count; ++s) {
        weight[sz(s)] = unit(rng);
        freq[sz(s)] = cfg.freq_min + (cfg.freq_max - cfg.freq_min) * unit(rng);
        phase[sz(s)] = 2.0 * std::numbers::pi * unit(rng);
      }
      const double total = std::accumulate(weight.begin(), weight.end(), 0.0);
      for (int i = 0; i < cfg.steps; ++i) {
        double v = 0.0;
        for (int s = 0; s < count; ++s) {
          v += weight[sz(s)] / total *
               std::sin(2.0 * std::numbers::pi * freq[sz(s)] * i * dt + phase[sz(s)]);
        }
        u[sz(i)] = amp * v;
      }
    }

    Sequence& seq = data.sequences[sz(r)];
    const Vector hanging = cfg.position_scale * observe_position(std::numbers::pi);
    seq.visible.assign(sz(cfg.delay + 1), hanging);
    Vector state = (Vector(2) << std::numbers::pi, 0.0).finished();
    for (int i = 0; i < cfg.steps; ++i) {
      state = pendulum.step_state(state, u[sz(i)]);
      seq.visible.push_back(cfg.position_scale * observe_position(state[0]));
      seq.controls.push_back((Vector(1) << u[sz(i)]).finished());
      umin = std::min(umin, u[sz(i)]);
      umax = std::max(umax, u[sz(i)]);
    }
  }
  data.control_min = umin;
  data.control_max = umax;
  return data;
}

double rollout_mse(const DelayedNetwork& net, const SequenceDataset& data,
                   std::span<const std::size_t> indices) {
  double sum = 0.0;
  double count = 0.0;
  const int k = data.delay;
  for (std::size_t idx : indices) {
    const auto& seq = data.sequences[idx];
    const auto states = net_rollout(net, seq);
    for (int t = 1; t <= seq.steps(); ++t) {
      const Vector e = states[sz(t - 1)].head(data.n_visible) - seq.visible[sz(t + k)];
      sum += e.squaredNorm();
      count += data.n_visible;
    }
  }
  return count > 0.0 ? sum / count : 0.0;
}

double one_step_mse(const DelayedNetwork& net, const SequenceDataset& data,
                    std::span<const std::size_t> indices) {
  double sum = 0.0;
  double count = 0.0;
  const int k = data.delay;
  const int nv = data.n_visible;
  for (std::size_t idx : indices) {
    const auto& seq = data.sequences[idx];
    DelayWindow window = initial_window(seq, net.dims());
    for (int t = 0; t < seq.steps(); ++t) {
      Vector pred = net.step(window, seq.controls[sz(t)]);
      const Vector& y = seq.visible[sz(t + k + 1)];
      sum += (pred.head(nv) - y).squaredNorm();
      count += nv;
      pred.head(nv) = y;
      window.shift_in(pred);
    }
  }
  return count > 0.0 ? sum / count : 0.0;
}

double persistence_mse(const SequenceDataset& data, std::span<const std::size_t> indices) {
  double sum = 0.0;
  double count = 0.0;
  const int k = data.delay;
  for (std::size_t idx : indices) {
    const auto& seq = data.sequences[idx];
    for (int t = 0; t < seq.steps(); ++t) {
      sum += (seq.visible[sz(t + k + 1)] - seq.visible[sz(t + k)]).squaredNorm();
      count += data.n_visible;
    }
  }
  return count > 0.0 ? sum / count : 0.0;
}

TrainResult train(const SequenceDataset& data, const NetworkDims& dims, const TrainConfig& cfg) {
  if (data.sequences.empty()) throw std::invalid_argument("train: empty dataset");
  if (dims.n_visible != data.n_visible || dims.control_dim != data.control_dim ||
      dims.delay != data.delay) {
    throw std::invalid_argument("train: network dims do not match the dataset");
  }
  if (cfg.epochs < 0 || cfg.batch_size < 1 || cfg.validation_fraction < 0.0 ||
      cfg.validation_fraction >= 1.0 || !(cfg.final_lr_fraction > 0.0)) {
    throw std::invalid_argument("TrainConfig: invalid settings");
  }

  TrainResult result{DelayedNetwork::random(dims, cfg.seed), {}};
  DelayedNetwork& net = result.net;
  TrainReport& rep = result.report;

  auto rng = stream(cfg.seed, 1);
  std::vector<std::size_t> order(data.sequences.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t n_val = static_cast<std::size_t>(std::lround(cfg.validation_fraction * order.size()));
  if (cfg.validation_fraction > 0.0 && n_val == 0 && order.size() > 1) n_val = 1;
  const std::vector<std::size_t> val(order.begin(), order.begin() + static_cast<long>(n_val));
  std::vector<std::size_t> trn(order.begin() + static_cast<long>(n_val), order.end());
  rep.train_count = trn.size();
  rep.val_count = val.size();

  const std::size_t np = net.params().size();
  AdamState adam(np, cfg.learning_rate);
  constexpr std::size_t chunk = 16;  // reduction granularity, fixed so results ignore thread count
  std::vector<double> grad(np);
  std::vector<std::vector<double>> part;
  std::vector<double> part_loss;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(trn.begin(), trn.end(), rng);
    if (cfg.epochs > 1) {
      const double phase = static_cast<double>(epoch) / (cfg.epochs - 1);
      const double low = cfg.final_lr_fraction;
      adam.learning_rate =
          cfg.learning_rate * (low + (1.0 - low) * 0.5 * (1.0 + std::cos(std::numbers::pi * phase)));
    }
    double epoch_loss = 0.0;
    double epoch_count = 0.0;
    for (std::size_t start = 0; start < trn.size(); start += sz(cfg.batch_size)) {
      const std::size_t stop = std::min(trn.size(), start + sz(cfg.batch_size));
      const std::size_t chunks = (stop - start + chunk - 1) / chunk;
      part.resize(chunks);
      part_loss.assign(chunks, 0.0);
      parallel_for(static_cast<int>(chunks), cfg.threads, [&](int c) {
        auto& g = part[sz(c)];
        g.assign(np, 0.0);
        const std::size_t lo = start + sz(c) * chunk;
        const std::size_t hi = std::min(stop, lo + chunk);
        for (std::size_t i = lo; i < hi; ++i) {
          part_loss[sz(c)] += bptt_accumulate(net, data.sequences[trn[i]], {}, g);
        }
      });
      double count = 0.0;
      for (std::size_t i = start; i < stop; ++i) {
        count += data.sequences[trn[i]].steps() * data.n_visible;
      }
      std::fill(grad.begin(), grad.end(), 0.0);
      double loss = 0.0;
      for (std::size_t c = 0; c < chunks; ++c) {
        loss += part_loss[c];
        kernels::axpy(1.0, part[c], grad);
      }
      if (!std::isfinite(loss)) {
        throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch) +
                                 ", batch starting at " + std::to_string(start));
      }
      const double scale = 1.0 / count;
      double norm2 = 0.0;
      for (double& g : grad) {
        g *= scale;
        norm2 += g * g;
      }
      const double norm = std::sqrt(norm2);
      if (cfg.clip_norm > 0.0 && norm > cfg.clip_norm) {
        for (double& g : grad) g *= cfg.clip_norm / norm;
      }
      adam_step(adam, net.params(), grad);
      epoch_loss += loss;
      epoch_count += count;
    }
    rep.train_loss.push_back(epoch_count > 0.0 ? epoch_loss / epoch_count : 0.0);
    rep.val_loss.push_back(rollout_mse(net, data, val));
    if (cfg.log_every > 0 && (epoch + 1) % cfg.log_every == 0) {
      std::fprintf(stderr, "epoch %d train %.6g val %.6g\n", epoch + 1, rep.train_loss.back(),
                   rep.val_loss.back());
    }
  }
  const bool has_val = !val.empty();
  const std::span<const std::size_t> eval = has_val ? std::span<const std::size_t>(val)
                                                    : std::span<const std::size_t>(trn);
  rep.val_one_step = one_step_mse(net, data, eval);
  rep.val_persistence = persistence_mse(data, eval);
  rep.val_rollout_rmse = std::sqrt(rollout_mse(net, data, eval));
  return result;
}

AngleCost::AngleCost(int state_dim, int control_dim, double angle_weight, double control_weight,
                     double terminal_weight)
    : n_(state_dim),
      m_(control_dim),
      angle_weight_(angle_weight),
      control_weight_(control_weight),
      terminal_weight_(terminal_weight) {
  if (n_ < 2 || m_ < 1 || angle_weight_ < 0.0 || control_weight_ < 0.0 || terminal_weight_ < 0.0) {
    throw std::invalid_argument("AngleCost: invalid weights or dimensions");
  }
}

namespace {
double slot_angle(const DelayWindow& w) { return angle_from_position(w[0][0], w[0][1]); }
}  // namespace

double AngleCost::running(int, const DelayWindow& window, const Vector& u) const {
  const double th = slot_angle(window);
  return angle_weight_ * th * th + control_weight_ * u.squaredNorm();
}

double AngleCost::terminal(const DelayWindow& window) const {
  const double th = slot_angle(window);
  return terminal_weight_ * th * th;
}

void AngleCost::angle_terms(const DelayWindow& window, double weight, CostDerivatives& out) const {
  const double x = window[0][0];
  const double y = window[0][1];
  const double r2 = x * x + y * y;
  const double th = angle_from_position(x, y);
  Eigen::Vector2d g(-y / r2, x / r2);
  Eigen::Matrix2d h;
  h << 2.0 * x * y, y * y - x * x, y * y - x * x, -2.0 * x * y;
  h /= r2 * r2;
  out.x[0].head<2>() = 2.0 * weight * th * g;
  out.xx(0, 0).topLeftCorner<2, 2>() = 2.0 * weight * (g * g.transpose() + th * h);
}

bool AngleCost::running_derivatives(int, const DelayWindow& window, const Vector& u,
                                    CostDerivatives& out) const {
  out = CostDerivatives::zero(n_, m_, window.delay());
  angle_terms(window, angle_weight_, out);
  out.u = 2.0 * control_weight_ * u;
  out.uu = 2.0 * control_weight_ * Matrix::Identity(m_, m_);
  return true;
}

bool AngleCost::terminal_derivatives(const DelayWindow& window, CostDerivatives& out) const {
  out = CostDerivatives::zero(n_, 0, window.delay());
  angle_terms(window, terminal_weight_, out);
  return true;
}

Problem make_pendulum_ddp_problem(const DelayedNetwork& net, const SequenceDataset& meta,
                                  const PendulumNetOptions& opt) {
  const auto& d = net.dims();
  if (opt.horizon < 1) throw std::invalid_argument("make_pendulum_ddp_problem: horizon");
  const double half_range = std::max(0.5 * (meta.control_max - meta.control_min), 1e-12);
  const double control_weight = opt.control_ratio * opt.angle_weight / (half_range * half_range);

  Problem p;
  p.model = std::make_shared<DelayedNetwork>(net);
  p.cost = std::make_shared<AngleCost>(d.augmented(), d.control_dim, opt.angle_weight,
                                       control_weight, opt.terminal_weight);
  Vector hanging = Vector::Zero(d.augmented());
  hanging.head(2) = meta.position_scale * observe_position(std::numbers::pi);
  p.initial = DelayWindow::constant(hanging, d.delay);
  p.u_init.assign(sz(opt.horizon), Vector::Constant(d.control_dim, opt.u_init));
  p.config.mode = Mode::Ilqg;
  p.config.mu_init = 1e-6;
  p.config.max_iterations = opt.max_iterations;
  p.config.convergence_tol = 1e-4;
  p.dt = meta.dt;
  return p;
}

}  // namespace dddp
