#include "dddp/harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>

namespace dddp {

namespace {

std::size_t sz(int v) { return static_cast<std::size_t>(v); }

std::mt19937_64 sample_stream(std::uint64_t seed, int sample) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(sample), 0x5eedu};
  return std::mt19937_64(seq);
}

}  // namespace

void NoiseConfig::validate() const {
  if (!(sigma >= 0.0) || !(dt > 0.0) || samples < 1 || !(divergence_threshold > 0.0)) {
    throw std::invalid_argument("NoiseConfig: need sigma >= 0, dt > 0, samples >= 1, threshold > 0");
  }
}

NoiseResult simulate_noisy(const DynamicsModel& model, const Trajectory& nominal,
                           const GainSchedule* gains, const NoiseConfig& noise) {
  noise.validate();
  nominal.validate();
  const int n = nominal.state_dim();
  const int k = nominal.delay();
  const int N = nominal.horizon();
  if (gains && static_cast<int>(gains->size()) != N) {
    throw std::invalid_argument("simulate_noisy: gain schedule length");
  }
  const double scale = noise.sigma * std::sqrt(noise.dt);

  NoiseResult out;
  out.samples.resize(sz(noise.samples));
  std::vector<char> diverged(sz(noise.samples), 0);
  std::vector<double> sq(sz(noise.samples), 0.0);

  parallel_for(noise.samples, noise.threads, [&](int s) {
    auto rng = sample_stream(noise.seed, s);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Trajectory& tr = out.samples[sz(s)];
    tr.initial = nominal.initial;
    DelayWindow window = nominal.initial;
    double acc = 0.0;
    for (int i = 0; i < N; ++i) {
      Vector u = nominal.controls[sz(i)];
      if (gains) {
        const auto& g = (*gains)[sz(i)];
        for (int j = 0; j <= k; ++j) {
          if (i - j <= 0) continue;  // pre-horizon and x_0 are fixed
          u += g.feedback[sz(j)] * (window[j] - nominal.state(i - j));
        }
      }
      Vector next = model.step(window, u);
      if (scale > 0.0) {
        for (int c = 0; c < n; ++c) next[c] += scale * gauss(rng);
      }
      tr.controls.push_back(u);
      const Vector dev = next - nominal.state(i + 1);
      if (!all_finite(next) || dev.cwiseAbs().maxCoeff() > noise.divergence_threshold) {
        diverged[sz(s)] = 1;
        if (all_finite(next)) {
          tr.states.push_back(next);
          acc += dev.squaredNorm();
        }
        break;
      }
      acc += dev.squaredNorm();
      tr.states.push_back(next);
      window.shift_in(next);
    }
    sq[sz(s)] = acc;
  });

  EnsembleStats& st = out.stats;
  st.samples = noise.samples;
  st.diverged.assign(diverged.begin(), diverged.end());
  st.divergent = static_cast<int>(std::count(diverged.begin(), diverged.end(), 1));
  st.sq_deviation = sq;
  st.mean = Matrix::Zero(N + 1, n);
  st.stderr_of_mean = Matrix::Zero(N + 1, n);
  st.min = Matrix::Constant(N + 1, n, std::numeric_limits<double>::quiet_NaN());
  st.max = st.min;

  double total = 0.0;
  double kept_total = 0.0;
  int kept = 0;
  for (int s = 0; s < noise.samples; ++s) {
    total += sq[sz(s)];
    if (!diverged[sz(s)]) {
      kept_total += sq[sz(s)];
      ++kept;
    }
  }
  st.mean_sq_deviation = total / noise.samples;
  st.mean_sq_deviation_kept = kept > 0 ? kept_total / kept : std::numeric_limits<double>::quiet_NaN();
  if (kept == 0) {
    st.mean.setConstant(std::numeric_limits<double>::quiet_NaN());
    st.stderr_of_mean = st.mean;
    return out;
  }
  for (int s = 0; s < noise.samples; ++s) {
    if (diverged[sz(s)]) continue;
    const auto& tr = out.samples[sz(s)];
    for (int t = 0; t <= N; ++t) {
      const Vector& x = t == 0 ? tr.initial[0] : tr.states[sz(t - 1)];
      st.mean.row(t) += x.transpose();
      for (int c = 0; c < n; ++c) {
        st.min(t, c) = std::isnan(st.min(t, c)) ? x[c] : std::min(st.min(t, c), x[c]);
        st.max(t, c) = std::isnan(st.max(t, c)) ? x[c] : std::max(st.max(t, c), x[c]);
      }
    }
  }
  st.mean /= kept;
  if (kept > 1) {
    Matrix ss = Matrix::Zero(N + 1, n);
    for (int s = 0; s < noise.samples; ++s) {
      if (diverged[sz(s)]) continue;
      const auto& tr = out.samples[sz(s)];
      for (int t = 0; t <= N; ++t) {
        const Vector& x = t == 0 ? tr.initial[0] : tr.states[sz(t - 1)];
        ss.row(t) += (x.transpose() - st.mean.row(t)).cwiseAbs2();
      }
    }
    st.stderr_of_mean = (ss / ((kept - 1.0) * kept)).cwiseSqrt();
  }
  return out;
}

CrossResult cross_apply(const SolveResult& source, const DynamicsModel& target_model,
                        const CostModel& target_cost, const DelayWindow& target_initial,
                        bool use_gains) {
  const Trajectory& nom = source.trajectory;
  const int N = nom.horizon();
  if (target_initial.delay() != target_model.delay() ||
      target_initial.state_dim() != nom.state_dim()) {
    throw std::invalid_argument("cross_apply: target window does not match");
  }
  if (use_gains && static_cast<int>(source.gains.size()) != N) {
    throw std::invalid_argument("cross_apply: source has no gains for every step");
  }
  const int shared = std::min(nom.delay(), target_model.delay());
  CrossResult r;
  r.trajectory.initial = target_initial;
  DelayWindow window = target_initial;
  for (int i = 0; i < N; ++i) {
    Vector u = nom.controls[sz(i)];
    if (use_gains) {
      const auto& g = source.gains[sz(i)];
      for (int j = 0; j <= shared; ++j) {
        if (i - j <= 0) continue;
        u += g.feedback[sz(j)] * (window[j] - nom.state(i - j));
      }
    }
    Vector next = target_model.step(window, u);
    r.trajectory.controls.push_back(u);
    r.trajectory.states.push_back(next);
    window.shift_in(next);
  }
  r.cost = total_cost(target_cost, r.trajectory);
  return r;
}

Matrix visible_current_gains(const StepGains& gains, int n_visible) {
  if (gains.feedback.empty() || gains.feedback.front().cols() < n_visible) {
    throw std::invalid_argument("visible_current_gains: gain block too small");
  }
  return gains.feedback.front().leftCols(n_visible);
}

TransferResult transfer_to_real(const SolveResult& net_solution, const PendulumModel& real,
                                double position_scale, GainPolicy policy) {
  const Trajectory& nom = net_solution.trajectory;
  const int N = nom.horizon();
  if (nom.state_dim() < 2) throw std::invalid_argument("transfer_to_real: no visible coordinates");
  if (policy == GainPolicy::VisibleCurrentOnly && static_cast<int>(net_solution.gains.size()) != N) {
    throw std::invalid_argument("transfer_to_real: solution has no gains");
  }
  TransferResult r;
  Vector state = (Vector(2) << std::numbers::pi, 0.0).finished();
  r.states.push_back(state);
  r.observed.push_back(position_scale * observe_position(state[0]));
  for (int i = 0; i < N; ++i) {
    Vector u = nom.controls[sz(i)];
    if (policy == GainPolicy::VisibleCurrentOnly) {
      const Matrix kv = visible_current_gains(net_solution.gains[sz(i)], 2);
      u += kv * (r.observed.back() - nom.state(i).head(2));
    }
    state = real.step_state(state, u[0]);
    r.controls.push_back(u);
    r.states.push_back(state);
    r.observed.push_back(position_scale * observe_position(state[0]));
  }
  r.final_angle_error = std::abs(wrap_angle(state[0]));
  return r;
}

}  // namespace dddp
