#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dddp/models.hpp"
#include "dddp/neural.hpp"

namespace CLI {
class App;
}

namespace dddp::app {

enum ExitCode : int {
  kOk = 0,
  kUnconverged = 2,
  kToleranceFailure = 3,
  kBadConfig = 64,
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Every knob a command reads. Defaults are the reference experiment settings.
struct ExperimentConfig {
  std::string problem = "cstr";  // cstr | cstr-nodelay | linear-lq | pendulum-truth | pendulum-net
  std::string output = "out";
  std::uint64_t seed = 1;
  int threads = 1;

  // CSTR
  double tau = 0.5;
  double dt = 0.05;
  int horizon = 100;

  // Random delayed LQ
  int lq_state_dim = 2;
  int lq_control_dim = 1;
  int lq_delay = 1;
  int lq_horizon = 20;

  // Solver overrides; unset keeps the problem's own setting.
  std::optional<std::string> mode;
  std::optional<double> alpha;
  std::optional<double> mu;
  std::optional<int> iterations;
  std::optional<double> tolerance;
  bool line_search = false;  // backtrack over the default step lengths instead of a fixed alpha

  // Noise ensembles
  double sigma = 0.01;
  int samples = 100;
  double divergence_threshold = 1.0;

  // Derivative check
  int check_points = 100;
  double check_tolerance = 1e-5;

  // Pendulum network
  DatasetConfig dataset{};
  NetworkDims dims{};
  TrainConfig training{};
  PendulumNetOptions pendulum{};
  std::string checkpoint;     // empty: <output>/network.json
  std::string dataset_cache;  // empty: <output>/dataset.json

  /// Throws ConfigError.
  void validate() const;
};

/// Binds every field to a long option. Config-file keys use the same names.
void register_options(CLI::App& cli, ExperimentConfig& cfg);

/// The commands understood by run_command.
const std::vector<std::string>& command_names();

/// Runs one command and returns its exit code. Progress goes to `log`.
int run_command(const std::string& command, const ExperimentConfig& cfg, std::ostream& log);

/// Builds the problem named by cfg.problem with the solver overrides applied.
/// pendulum-net loads the checkpoint.
Problem build_problem(const ExperimentConfig& cfg);

}  // namespace dddp::app
