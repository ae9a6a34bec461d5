#pragma once

#include <filesystem>
#include <json.hpp>
#include <string>

#include "dddp/core.hpp"
#include "dddp/harness.hpp"
#include "dddp/neural.hpp"
#include "dddp/solver.hpp"

namespace dddp::io {

using Json = nlohmann::json;
namespace fs = std::filesystem;

/// Thrown on unreadable or malformed artifact files.
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// t, x_1..x_n, u_1..u_m. One row per t = 0..N; the controls are empty on the
/// last row. t is seconds when dt > 0, the step index otherwise.
void write_trajectory_csv(const fs::path& path, const Trajectory& traj, double dt);

/// i, row, k, K0_1..K0_n, ..., Kk_1..Kk_n. One row per timestep and control row.
void write_gains_csv(const fs::path& path, const GainSchedule& gains);

/// t, state, mean, stderr, min, max.
void write_ensemble_csv(const fs::path& path, const EnsembleStats& stats, double dt);
/// sample, diverged, t, x_1..x_n.
void write_samples_csv(const fs::path& path, const NoiseResult& result, double dt);

/// epoch, train_loss, val_loss.
void write_loss_csv(const fs::path& path, const TrainReport& report);

Json to_json(const SolveResult& result);
Json to_json(const TrainReport& report);
Json vector_json(const Vector& v);

void write_json(const fs::path& path, const Json& j);
Json read_json(const fs::path& path);

/// Network checkpoint. Field order is documented in the README.
void save_checkpoint(const fs::path& path, const DelayedNetwork& net, const SequenceDataset& meta);
/// Returns the network; `meta` receives the normalization metadata (no sequences).
DelayedNetwork load_checkpoint(const fs::path& path, SequenceDataset& meta);

void save_dataset(const fs::path& path, const SequenceDataset& data);
SequenceDataset load_dataset(const fs::path& path);

}  // namespace dddp::io
