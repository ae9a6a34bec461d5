#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <random>

#include "dddp/app.hpp"
#include "dddp/deriv.hpp"
#include "dddp/harness.hpp"
#include "dddp/io.hpp"
#include "dddp/oracle.hpp"

namespace dddp::app {

namespace fs = std::filesystem;
using io::Json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

fs::path out_dir(const ExperimentConfig& cfg) {
  fs::path dir(cfg.output);
  fs::create_directories(dir);
  return dir;
}

fs::path checkpoint_path(const ExperimentConfig& cfg) {
  return cfg.checkpoint.empty() ? fs::path(cfg.output) / "network.json" : fs::path(cfg.checkpoint);
}

fs::path dataset_path(const ExperimentConfig& cfg) {
  return cfg.dataset_cache.empty() ? fs::path(cfg.output) / "dataset.json"
                                   : fs::path(cfg.dataset_cache);
}

void apply_overrides(const ExperimentConfig& cfg, SolverConfig& s) {
  if (cfg.mode) s.mode = *parse_mode(*cfg.mode);
  if (cfg.alpha) s.fixed_alpha = *cfg.alpha;
  if (cfg.line_search) s.fixed_alpha.reset();
  if (cfg.mu) s.mu_init = *cfg.mu;
  if (cfg.iterations) s.max_iterations = *cfg.iterations;
  if (cfg.tolerance) s.convergence_tol = *cfg.tolerance;
  s.threads = cfg.threads;
}

IterationObserver progress(std::ostream& log) {
  return [&log](const IterationRecord& r) {
    if (!r.accepted) return;
    log << "iter " << r.iteration << " cost " << std::setprecision(10) << r.cost << " alpha "
        << r.alpha << " mu " << r.mu << "\n";
  };
}

int exit_for(const SolveResult& r) { return r.converged ? kOk : kUnconverged; }

Json solve_json(const ExperimentConfig& cfg, const Problem& p, const SolveResult& r, double secs) {
  Json j = io::to_json(r);
  j["problem"] = cfg.problem;
  j["mode"] = std::string(to_string(p.config.mode));
  j["horizon"] = r.trajectory.horizon();
  j["delay"] = r.trajectory.delay();
  j["timing"] = {{"seconds", secs}};
  return j;
}

SolveResult run_solve(const Problem& p, std::ostream& log) {
  return solve(*p.model, *p.cost, p.initial, p.u_init, p.config, progress(log));
}

void write_rows(const fs::path& path, const std::string& header,
                const std::vector<std::vector<double>>& rows) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << std::setprecision(17) << header << "\n";
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out << ",";
      if (!std::isnan(row[c])) out << row[c];
    }
    out << "\n";
  }
}

// --- solve -----------------------------------------------------------------

int cmd_solve(const ExperimentConfig& cfg, std::ostream& log) {
  const auto dir = out_dir(cfg);
  const Problem p = build_problem(cfg);
  const auto t0 = Clock::now();
  const SolveResult r = run_solve(p, log);
  const double secs = seconds_since(t0);
  io::write_trajectory_csv(dir / "trajectory.csv", r.trajectory, p.dt);
  io::write_gains_csv(dir / "gains.csv", r.gains);
  io::write_trajectory_csv(dir / "uncontrolled.csv", rollout(*p.model, p.initial, p.u_init), p.dt);
  io::write_json(dir / "result.json", solve_json(cfg, p, r, secs));
  log << "status " << to_string(r.status) << " iterations " << r.iterations << " cost "
      << r.final_cost() << "\n";
  return exit_for(r);
}

// --- oracle ----------------------------------------------------------------

int cmd_oracle(const ExperimentConfig& cfg, std::ostream& log) {
  const auto dir = out_dir(cfg);
  const Problem p = build_problem(cfg);
  Json j{{"problem", cfg.problem}};
  Trajectory traj;
  if (cfg.problem == "linear-lq") {
    const auto& lin = dynamic_cast<const LinearDelayedModel&>(*p.model);
    const auto& quad = dynamic_cast<const QuadraticCost&>(*p.cost);
    const auto sol = solve_augmented_lqr(lin, quad, p.initial, static_cast<int>(p.u_init.size()));
    traj = sol.trajectory;
    j["method"] = "augmented-riccati";
    j["cost"] = sol.cost;
  } else {
    // Classic DDP on the stacked reformulation.
    const AugmentedModel aug(p.model);
    const AugmentedCost aug_cost(p.cost, p.model->delay());
    SolverConfig sc = p.config;
    const SolveResult r =
        solve(aug, aug_cost, aug.lift(p.initial), p.u_init, sc, progress(log));
    traj = rollout(*p.model, p.initial, r.trajectory.controls);
    j["method"] = "augmented-ddp";
    j["cost"] = total_cost(*p.cost, traj);
    j["status"] = std::string(to_string(r.status));
  }
  Json controls = Json::array();
  for (const auto& u : traj.controls) controls.push_back(io::vector_json(u));
  j["controls"] = controls;
  io::write_trajectory_csv(dir / "oracle_trajectory.csv", traj, p.dt);
  io::write_json(dir / "oracle.json", j);
  log << "oracle cost " << std::setprecision(12) << j["cost"].get<double>() << "\n";
  return kOk;
}

// --- check-derivs ----------------------------------------------------------

int cmd_check_derivs(const ExperimentConfig& cfg, std::ostream& log) {
  const auto dir = out_dir(cfg);
  Problem p;
  if (cfg.problem == "pendulum-net" && !fs::exists(checkpoint_path(cfg))) {
    // No trained network yet: check a random one.
    SequenceDataset meta;
    meta.control_min = -cfg.dataset.max_amplitude;
    meta.control_max = cfg.dataset.max_amplitude;
    meta.position_scale = cfg.dataset.position_scale;
    p = make_pendulum_ddp_problem(DelayedNetwork::random(cfg.dims, cfg.seed), meta, cfg.pendulum);
  } else {
    p = build_problem(cfg);
  }
  const auto& model = *p.model;
  const auto& cost = *p.cost;
  const int n = model.state_dim();
  const int m = model.control_dim();
  const int k = model.delay();
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> angle(-2.5, 2.5);

  const Trajectory base = rollout(model, p.initial, p.u_init);
  const bool analytic = [&] {
    std::vector<Matrix> fx;
    Matrix fu;
    return model.jacobians(p.initial, p.u_init.front(), fx, fu);
  }();

  DerivativeCheck worst;
  Json points = Json::array();
  bool pass = true;
  for (int s = 0; s < cfg.check_points; ++s) {
    const int i = static_cast<int>(rng() % static_cast<std::uint64_t>(base.horizon()));
    DelayWindow w = base.window_at(i);
    for (int j = 0; j <= k; ++j) {
      for (int c = 0; c < n; ++c) w[j][c] += 0.05 * gauss(rng);
      if (cfg.problem == "pendulum-net") {
        // Stay off the atan2 branch cut at the hanging position.
        w[j].head(2) = 0.8 * observe_position(angle(rng));
      }
    }
    Vector u = base.controls[static_cast<std::size_t>(i)];
    for (int c = 0; c < m; ++c) u[c] += 0.1 * gauss(rng);

    DerivativeBundle a;
    DerivativeBundle num;
    const double eps = p.config.fd.first;
    if (analytic) {
      auto d = dynamics_first(model, w, u, p.config.fd);
      a.f_x = std::move(d.f_x);
      a.f_u = std::move(d.f_u);
    } else {
      // Without analytic Jacobians, compare two step sizes for consistency.
      auto d = fd_dynamics_first(model, w, u, eps * 10.0);
      a.f_x = std::move(d.f_x);
      a.f_u = std::move(d.f_u);
    }
    auto nd = fd_dynamics_first(model, w, u, eps);
    num.f_x = std::move(nd.f_x);
    num.f_u = std::move(nd.f_u);
    a.cost = running_cost_derivatives(cost, i, w, u, p.config.fd);
    num.cost = fd_cost(cost, i, w, u, p.config.fd);
    const auto check = check_derivatives(a, num, cfg.check_tolerance);
    if (check.worst >= worst.worst) worst = check;
    pass = pass && check.pass;
    points.push_back({{"timestep", i}, {"worst", check.worst}, {"pass", check.pass}});
  }
  Json blocks = Json::array();
  for (const auto& b : worst.blocks) {
    blocks.push_back({{"block", b.name}, {"max_error", b.max_error}, {"pass", b.pass}});
  }
  io::write_json(dir / "derivs.json", {{"problem", cfg.problem},
                                       {"analytic_jacobians", analytic},
                                       {"tolerance", cfg.check_tolerance},
                                       {"points", points},
                                       {"worst_point", blocks},
                                       {"worst", worst.worst},
                                       {"pass", pass}});
  log << "derivative check " << (pass ? "passed" : "FAILED") << ", worst relative error "
      << worst.worst << "\n";
  return pass ? kOk : kToleranceFailure;
}

// --- noise -----------------------------------------------------------------

Json ensemble_json(const EnsembleStats& s) {
  return {{"samples", s.samples},
          {"divergent", s.divergent},
          {"mean_sq_deviation", s.mean_sq_deviation},
          {"mean_sq_deviation_kept", std::isnan(s.mean_sq_deviation_kept)
                                         ? Json(nullptr)
                                         : Json(s.mean_sq_deviation_kept)}};
}

int cmd_noise(const ExperimentConfig& cfg, std::ostream& log) {
  const auto dir = out_dir(cfg);
  const Problem p = build_problem(cfg);
  const auto t0 = Clock::now();
  const SolveResult r = run_solve(p, log);
  NoiseConfig nc;
  nc.sigma = cfg.sigma;
  nc.dt = p.dt > 0.0 ? p.dt : 1.0;
  nc.samples = cfg.samples;
  nc.seed = cfg.seed;
  nc.divergence_threshold = cfg.divergence_threshold;
  nc.threads = cfg.threads;
  const auto open = simulate_noisy(*p.model, r.trajectory, nullptr, nc);
  const auto fb = simulate_noisy(*p.model, r.trajectory, &r.gains, nc);
  io::write_trajectory_csv(dir / "nominal.csv", r.trajectory, p.dt);
  io::write_ensemble_csv(dir / "ensemble_open.csv", open.stats, p.dt);
  io::write_ensemble_csv(dir / "ensemble_feedback.csv", fb.stats, p.dt);
  io::write_samples_csv(dir / "samples_open.csv", open, p.dt);
  io::write_samples_csv(dir / "samples_feedback.csv", fb, p.dt);
  const double ratio = fb.stats.mean_sq_deviation > 0.0
                           ? open.stats.mean_sq_deviation / fb.stats.mean_sq_deviation
                           : std::numeric_limits<double>::infinity();
  io::write_json(dir / "noise.json",
                 {{"problem", cfg.problem},
                  {"sigma", nc.sigma},
                  {"dt", nc.dt},
                  {"seed", nc.seed},
                  {"divergence_threshold", nc.divergence_threshold},
                  {"nominal_cost", r.final_cost()},
                  {"open_loop", ensemble_json(open.stats)},
                  {"feedback", ensemble_json(fb.stats)},
                  {"deviation_ratio", std::isfinite(ratio) ? Json(ratio) : Json(nullptr)},
                  {"timing", {{"seconds", seconds_since(t0)}}}});
  log << "open-loop divergent " << open.stats.divergent << "/" << nc.samples
      << ", feedback divergent " << fb.stats.divergent << "/" << nc.samples
      << ", deviation ratio " << ratio << "\n";
  return exit_for(r);
}

// --- cross -----------------------------------------------------------------

int cmd_cross(const ExperimentConfig& cfg, std::ostream& log) {
  const auto dir = out_dir(cfg);
  const auto t0 = Clock::now();
  ExperimentConfig delayed_cfg = cfg;
  delayed_cfg.problem = "cstr";
  ExperimentConfig plain_cfg = cfg;
  plain_cfg.problem = "cstr-nodelay";
  const Problem delayed = build_problem(delayed_cfg);
  const Problem plain = build_problem(plain_cfg);

  log << "solving without delay\n";
  const SolveResult r0 = run_solve(plain, log);
  log << "solving with delay tau = " << cfg.tau << "\n";
  const SolveResult rd = run_solve(delayed, log);
  const auto replay = cross_apply(r0, *delayed.model, *delayed.cost, delayed.initial, false);
  const auto replay_fb = cross_apply(r0, *delayed.model, *delayed.cost, delayed.initial, true);
  const double ratio = replay.cost / rd.final_cost();

  io::write_trajectory_csv(dir / "nodelay_solution.csv", r0.trajectory, plain.dt);
  io::write_trajectory_csv(dir / "delayed_solution.csv", rd.trajectory, delayed.dt);
  io::write_trajectory_csv(dir / "replay.csv", replay.trajectory, delayed.dt);
  io::write_trajectory_csv(dir / "replay_feedback.csv", replay_fb.trajectory, delayed.dt);
  io::write_json(dir / "cross.json", {{"tau", cfg.tau},
                                      {"nodelay_cost_own_plant", r0.final_cost()},
                                      {"delayed_cost", rd.final_cost()},
                                      {"replay_cost", replay.cost},
                                      {"replay_feedback_cost", replay_fb.cost},
                                      {"cost_ratio", ratio},
                                      {"nodelay", io::to_json(r0)},
                                      {"delayed", io::to_json(rd)},
                                      {"timing", {{"seconds", seconds_since(t0)}}}});
  log << "replay cost " << replay.cost << " vs delayed DDP " << rd.final_cost() << " (ratio "
      << ratio << ")\n";
  return r0.converged && rd.converged ? kOk : kUnconverged;
}

// --- train-pendulum --------------------------------------------------------

bool same_dataset(const SequenceDataset& d, const DatasetConfig& c) {
  return static_cast<int>(d.sequences.size()) == c.trajectories && d.delay == c.delay &&
         d.seed == c.seed && d.position_scale == c.position_scale && d.dt == c.pendulum.dt &&
         !d.sequences.empty() && d.sequences.front().steps() == c.steps;
}

SequenceDataset obtain_dataset(const ExperimentConfig& cfg, std::ostream& log) {
  const auto path = dataset_path(cfg);
  if (fs::exists(path)) {
    auto data = io::load_dataset(path);
    if (same_dataset(data, cfg.dataset)) {
      log << "dataset loaded from " << path.string() << "\n";
      return data;
    }
    log << "dataset cache at " << path.string() << " has other settings, regenerating\n";
  }
  auto data = generate_pendulum_dataset(cfg.dataset);
  io::save_dataset(path, data);
  log << "dataset generated: " << data.sequences.size() << " trajectories\n";
  return data;
}

// Visible RMSE of a 20-step closed-loop network rollout against the true
// pendulum on held-out controls.
double fresh_rollout_rmse(const DelayedNetwork& net, const ExperimentConfig& cfg, int steps) {
  DatasetConfig dc = cfg.dataset;
  dc.trajectories = 200;
  dc.steps = steps;
  dc.seed = cfg.dataset.seed + 1000003;
  const auto fresh = generate_pendulum_dataset(dc);
  std::vector<std::size_t> all(fresh.sequences.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return std::sqrt(rollout_mse(net, fresh, all));
}

int cmd_train_pendulum(const ExperimentConfig& cfg, std::ostream& log) {
  const auto dir = out_dir(cfg);
  const auto t0 = Clock::now();
  const SequenceDataset data = obtain_dataset(cfg, log);
  TrainConfig tc = cfg.training;
  tc.threads = cfg.threads;
  const TrainResult tr = train(data, cfg.dims, tc);
  io::save_checkpoint(checkpoint_path(cfg), tr.net, data);
  io::write_loss_csv(dir / "loss.csv", tr.report);
  const double rmse20 = fresh_rollout_rmse(tr.net, cfg, 20);
  Json j = io::to_json(tr.report);
  j["dataset"] = {{"trajectories", data.sequences.size()},
                  {"control_min", data.control_min},
                  {"control_max", data.control_max},
                  {"position_scale", data.position_scale}};
  j["rollout20_rmse"] = rmse20;
  // The 20-step check passes below the full-length validation rollout error.
  j["rollout20_threshold"] = tr.report.val_rollout_rmse;
  j["beats_persistence"] = tr.report.val_one_step < tr.report.val_persistence;
  j["timing"] = {{"seconds", seconds_since(t0)}};
  io::write_json(dir / "train.json", j);
  log << "one-step " << tr.report.val_one_step << " vs persistence " << tr.report.val_persistence
      << ", 20-step rollout RMSE " << rmse20 << "\n";
  return kOk;
}

// --- pendulum --------------------------------------------------------------

int cmd_pendulum(const ExperimentConfig& cfg, std::ostream& log) {
  const auto dir = out_dir(cfg);
  const auto t0 = Clock::now();
  SequenceDataset meta;
  const DelayedNetwork net = io::load_checkpoint(checkpoint_path(cfg), meta);
  Problem p = make_pendulum_ddp_problem(net, meta, cfg.pendulum);
  apply_overrides(cfg, p.config);
  log << "solving on the network\n";
  const SolveResult r = run_solve(p, log);

  const PendulumModel real(cfg.dataset.pendulum);
  const auto open = transfer_to_real(r, real, meta.position_scale, GainPolicy::None);
  const auto fb = transfer_to_real(r, real, meta.position_scale, GainPolicy::VisibleCurrentOnly);

  Problem truth = make_pendulum_truth_problem(cfg.pendulum.horizon, cfg.dataset.pendulum);
  log << "solving classic DDP on the true pendulum\n";
  const SolveResult rt = run_solve(truth, log);

  const double dt = meta.dt;
  std::vector<std::vector<double>> net_rows;
  for (int t = 0; t <= r.trajectory.horizon(); ++t) {
    const Vector& x = r.trajectory.state(t);
    const double u = t < r.trajectory.horizon() ? r.trajectory.controls[std::size_t(t)][0] : std::nan("");
    net_rows.push_back({t * dt, x[0], x[1], angle_from_position(x[0], x[1]), u});
  }
  write_rows(dir / "net_solution.csv", "t,x,y,angle,u", net_rows);
  auto real_rows = [&](const TransferResult& tr) {
    std::vector<std::vector<double>> rows;
    for (std::size_t t = 0; t < tr.states.size(); ++t) {
      const double u = t < tr.controls.size() ? tr.controls[t][0] : std::nan("");
      rows.push_back({static_cast<double>(t) * dt, wrap_angle(tr.states[t][0]), tr.states[t][1],
                      tr.observed[t][0], tr.observed[t][1], u});
    }
    return rows;
  };
  write_rows(dir / "real_open.csv", "t,theta,theta_dot,x,y,u", real_rows(open));
  write_rows(dir / "real_feedback.csv", "t,theta,theta_dot,x,y,u", real_rows(fb));
  std::vector<std::vector<double>> truth_rows;
  for (int t = 0; t <= rt.trajectory.horizon(); ++t) {
    const Vector& x = rt.trajectory.state(t);
    const double u = t < rt.trajectory.horizon() ? rt.trajectory.controls[std::size_t(t)][0] : std::nan("");
    truth_rows.push_back({t * dt, wrap_angle(x[0]), x[1], u});
  }
  write_rows(dir / "truth_ddp.csv", "t,theta,theta_dot,u", truth_rows);
  io::write_gains_csv(dir / "net_gains.csv", r.gains);

  Json j{{"network", io::to_json(r)},
         {"truth", io::to_json(rt)},
         {"net_final_angle_error", std::abs(angle_from_position(r.trajectory.states.back()[0],
                                                                r.trajectory.states.back()[1]))},
         {"open_loop_final_angle_error", open.final_angle_error},
         {"feedback_final_angle_error", fb.final_angle_error},
         {"control_range", {meta.control_min, meta.control_max}},
         {"timing", {{"seconds", seconds_since(t0)}}}};
  io::write_json(dir / "pendulum.json", j);
  log << "final angle error: open loop " << open.final_angle_error << ", with position gains "
      << fb.final_angle_error << "\n";
  return exit_for(r);
}

}  // namespace

Problem build_problem(const ExperimentConfig& cfg) {
  cfg.validate();
  Problem p;
  if (cfg.problem == "cstr") {
    p = make_cstr_problem(cfg.tau, cfg.dt, cfg.horizon);
  } else if (cfg.problem == "cstr-nodelay") {
    p = make_cstr_problem(0.0, cfg.dt, cfg.horizon);
  } else if (cfg.problem == "linear-lq") {
    p = make_linear_lq_problem(cfg.lq_state_dim, cfg.lq_control_dim, cfg.lq_delay, cfg.lq_horizon,
                               cfg.seed);
  } else if (cfg.problem == "pendulum-truth") {
    p = make_pendulum_truth_problem(cfg.pendulum.horizon, cfg.dataset.pendulum);
  } else {
    SequenceDataset meta;
    const auto net = io::load_checkpoint(checkpoint_path(cfg), meta);
    p = make_pendulum_ddp_problem(net, meta, cfg.pendulum);
  }
  apply_overrides(cfg, p.config);
  return p;
}

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {"solve", "oracle", "check-derivs", "noise",
                                                 "cross", "train-pendulum", "pendulum"};
  return names;
}

int run_command(const std::string& command, const ExperimentConfig& cfg, std::ostream& log) {
  cfg.validate();
  if (command == "solve") return cmd_solve(cfg, log);
  if (command == "oracle") return cmd_oracle(cfg, log);
  if (command == "check-derivs") return cmd_check_derivs(cfg, log);
  if (command == "noise") return cmd_noise(cfg, log);
  if (command == "cross") return cmd_cross(cfg, log);
  if (command == "train-pendulum") return cmd_train_pendulum(cfg, log);
  if (command == "pendulum") return cmd_pendulum(cfg, log);
  throw ConfigError("unknown command '" + command + "'");
}

}  // namespace dddp::app
