#include <CLI11.hpp>
#include <algorithm>
#include <array>
#include <string_view>

#include "dddp/app.hpp"

namespace dddp::app {

namespace {

constexpr std::array<std::string_view, 5> kProblems = {"cstr", "cstr-nodelay", "linear-lq",
                                                       "pendulum-truth", "pendulum-net"};

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

template <typename T>
void add_optional(CLI::App& cli, const std::string& name, std::optional<T>& slot,
                  const std::string& help) {
  cli.add_option_function<T>(name, [&slot](const T& v) { slot = v; }, help);
}

}  // namespace

void ExperimentConfig::validate() const {
  require(std::find(kProblems.begin(), kProblems.end(), problem) != kProblems.end(),
          "unknown problem '" + problem + "'");
  require(!output.empty(), "output directory must be set");
  require(threads >= 0, "threads must be >= 0");
  require(dt > 0.0 && tau >= 0.0, "need dt > 0 and tau >= 0");
  require(horizon >= 1 && lq_horizon >= 1, "horizons must be >= 1");
  require(lq_state_dim >= 1 && lq_control_dim >= 1 && lq_delay >= 0, "bad linear-lq dimensions");
  if (mode) require(parse_mode(*mode).has_value(), "unknown mode '" + *mode + "'");
  if (alpha) require(*alpha > 0.0 && *alpha <= 1.0, "alpha must lie in (0, 1]");
  require(!(alpha && line_search), "--alpha and --line-search exclude each other");
  if (mu) require(*mu >= 0.0, "mu must be >= 0");
  if (iterations) require(*iterations >= 1, "iterations must be >= 1");
  if (tolerance) require(*tolerance > 0.0, "tolerance must be > 0");
  require(sigma >= 0.0 && samples >= 1 && divergence_threshold > 0.0, "bad noise settings");
  require(check_points >= 1 && check_tolerance > 0.0, "bad derivative-check settings");
  require(dataset.trajectories >= 1 && dataset.steps >= 1, "bad dataset size");
  require(dataset.delay == dims.delay, "dataset and network delay differ");
  require(dims.n_visible == 2 && dims.control_dim == 1, "the pendulum network has 2 visible states and 1 control");
  require(dims.n_hidden >= 0 && dims.delay >= 0, "bad network dimensions");
  require(training.epochs >= 0 && training.batch_size >= 1, "bad training settings");
  require(training.final_lr_fraction > 0.0, "final learning-rate fraction must be > 0");
  require(training.validation_fraction >= 0.0 && training.validation_fraction < 1.0,
          "validation fraction must lie in [0, 1)");
  require(pendulum.horizon >= 1 && pendulum.max_iterations >= 1, "bad pendulum DDP settings");
}

void register_options(CLI::App& cli, ExperimentConfig& c) {
  cli.add_option("--problem", c.problem, "cstr | cstr-nodelay | linear-lq | pendulum-truth | pendulum-net")
      ->capture_default_str();
  cli.add_option("--output", c.output, "artifact directory")->capture_default_str();
  cli.add_option("--seed", c.seed, "seed for random problems and noise")->capture_default_str();
  cli.add_option("--threads", c.threads, "worker threads, 0 for all cores")->capture_default_str();

  cli.add_option("--tau", c.tau, "CSTR transport delay [s]")->capture_default_str();
  cli.add_option("--dt", c.dt, "CSTR step [s]")->capture_default_str();
  cli.add_option("--horizon", c.horizon, "CSTR horizon [steps]")->capture_default_str();

  cli.add_option("--lq-state-dim", c.lq_state_dim)->capture_default_str();
  cli.add_option("--lq-control-dim", c.lq_control_dim)->capture_default_str();
  cli.add_option("--lq-delay", c.lq_delay)->capture_default_str();
  cli.add_option("--lq-horizon", c.lq_horizon)->capture_default_str();

  add_optional(cli, "--mode", c.mode, "full-ddp | ilqg");
  add_optional(cli, "--alpha", c.alpha, "fixed step length");
  cli.add_flag("--line-search", c.line_search, "backtracking line search instead of a fixed alpha");
  add_optional(cli, "--mu", c.mu, "initial regularization");
  add_optional(cli, "--iterations", c.iterations, "iteration cap");
  add_optional(cli, "--tolerance", c.tolerance, "relative cost-change stopping tolerance");

  cli.add_option("--sigma", c.sigma, "noise scale; per-step std is sigma*sqrt(dt)")->capture_default_str();
  cli.add_option("--samples", c.samples, "ensemble size")->capture_default_str();
  cli.add_option("--divergence-threshold", c.divergence_threshold,
                 "max |x - nominal| before a sample counts as divergent")
      ->capture_default_str();

  cli.add_option("--check-points", c.check_points)->capture_default_str();
  cli.add_option("--check-tolerance", c.check_tolerance)->capture_default_str();

  auto& d = c.dataset;
  cli.add_option("--trajectories", d.trajectories)->capture_default_str();
  cli.add_option("--steps", d.steps, "steps per training trajectory")->capture_default_str();
  cli.add_option("--position-scale", d.position_scale)->capture_default_str();
  cli.add_option("--max-amplitude", d.max_amplitude, "largest training torque")->capture_default_str();
  cli.add_option("--freq-min", d.freq_min)->capture_default_str();
  cli.add_option("--freq-max", d.freq_max)->capture_default_str();
  cli.add_option("--max-sinusoids", d.max_sinusoids)->capture_default_str();
  cli.add_option("--uniform-fraction", d.uniform_fraction)->capture_default_str();
  cli.add_option("--hold-steps", d.hold_steps)->capture_default_str();
  cli.add_option("--dataset-seed", d.seed)->capture_default_str();
  cli.add_option("--pendulum-mass", d.pendulum.mass)->capture_default_str();
  cli.add_option("--pendulum-length", d.pendulum.length)->capture_default_str();
  cli.add_option("--pendulum-gravity", d.pendulum.gravity)->capture_default_str();
  cli.add_option("--pendulum-damping", d.pendulum.damping)->capture_default_str();
  cli.add_option("--pendulum-dt", d.pendulum.dt)->capture_default_str();

  cli.add_option("--hidden", c.dims.n_hidden, "hidden units")->capture_default_str();
  cli.add_option_function<int>(
         "--delay", [&c](const int& k) { c.dims.delay = c.dataset.delay = k; },
         "network delay order")
      ->default_str(std::to_string(c.dims.delay));

  auto& t = c.training;
  cli.add_option("--epochs", t.epochs)->capture_default_str();
  cli.add_option("--batch-size", t.batch_size)->capture_default_str();
  cli.add_option("--learning-rate", t.learning_rate)->capture_default_str();
  cli.add_option("--final-lr-fraction", t.final_lr_fraction, "cosine decay target as a share of the learning rate")
      ->capture_default_str();
  cli.add_option("--validation-fraction", t.validation_fraction)->capture_default_str();
  cli.add_option("--clip-norm", t.clip_norm)->capture_default_str();
  cli.add_option("--train-seed", t.seed)->capture_default_str();
  cli.add_option("--log-every", t.log_every)->capture_default_str();

  auto& p = c.pendulum;
  cli.add_option("--ddp-horizon", p.horizon)->capture_default_str();
  cli.add_option("--angle-weight", p.angle_weight)->capture_default_str();
  cli.add_option("--control-ratio", p.control_ratio)->capture_default_str();
  cli.add_option("--terminal-weight", p.terminal_weight)->capture_default_str();
  cli.add_option("--u-init", p.u_init)->capture_default_str();
  cli.add_option("--ddp-iterations", p.max_iterations)->capture_default_str();

  cli.add_option("--checkpoint", c.checkpoint, "network checkpoint path");
  cli.add_option("--dataset-cache", c.dataset_cache, "dataset cache path");
}

}  // namespace dddp::app
