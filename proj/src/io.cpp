#include "dddp/io.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace dddp::io {

namespace {

constexpr int kCheckpointVersion = 1;
constexpr int kDatasetVersion = 1;

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << std::setprecision(17);
  return out;
}

double time_of(int t, double dt) { return dt > 0.0 ? t * dt : static_cast<double>(t); }

void put(std::ostream& os, double v) {
  if (std::isnan(v)) {
    os << "nan";
  } else {
    os << v;
  }
}

Json rows_json(std::span<const double> data, std::size_t rows, std::size_t cols) {
  Json out = Json::array();
  for (std::size_t r = 0; r < rows; ++r) {
    out.push_back(std::vector<double>(data.begin() + static_cast<long>(r * cols),
                                      data.begin() + static_cast<long>((r + 1) * cols)));
  }
  return out;
}

void read_rows(const Json& j, std::size_t rows, std::size_t cols, std::vector<double>& dst,
               const char* what) {
  if (!j.is_array() || j.size() != rows) throw FormatError(std::string("checkpoint: bad rows in ") + what);
  for (const auto& row : j) {
    if (!row.is_array() || row.size() != cols) {
      throw FormatError(std::string("checkpoint: bad row length in ") + what);
    }
    for (const auto& v : row) dst.push_back(v.get<double>());
  }
}

void read_vec(const Json& j, std::size_t n, std::vector<double>& dst, const char* what) {
  if (!j.is_array() || j.size() != n) throw FormatError(std::string("checkpoint: bad length of ") + what);
  for (const auto& v : j) dst.push_back(v.get<double>());
}

Json meta_json(const SequenceDataset& meta) {
  return Json{{"n_visible", meta.n_visible},         {"control_dim", meta.control_dim},
              {"delay", meta.delay},                 {"dt", meta.dt},
              {"position_scale", meta.position_scale}, {"control_min", meta.control_min},
              {"control_max", meta.control_max},     {"seed", meta.seed}};
}

void read_meta(const Json& j, SequenceDataset& meta) {
  meta.n_visible = j.at("n_visible").get<int>();
  meta.control_dim = j.at("control_dim").get<int>();
  meta.delay = j.at("delay").get<int>();
  meta.dt = j.at("dt").get<double>();
  meta.position_scale = j.at("position_scale").get<double>();
  meta.control_min = j.at("control_min").get<double>();
  meta.control_max = j.at("control_max").get<double>();
  meta.seed = j.at("seed").get<std::uint64_t>();
}

}  // namespace

void write_trajectory_csv(const fs::path& path, const Trajectory& traj, double dt) {
  traj.validate();
  auto out = open_out(path);
  const int n = traj.state_dim();
  const int m = traj.control_dim();
  out << "t";
  for (int c = 0; c < n; ++c) out << ",x_" << c + 1;
  for (int c = 0; c < m; ++c) out << ",u_" << c + 1;
  out << "\n";
  for (int t = 0; t <= traj.horizon(); ++t) {
    out << time_of(t, dt);
    const Vector& x = traj.state(t);
    for (int c = 0; c < n; ++c) {
      out << ",";
      put(out, x[c]);
    }
    for (int c = 0; c < m; ++c) {
      out << ",";
      if (t < traj.horizon()) put(out, traj.controls[static_cast<std::size_t>(t)][c]);
    }
    out << "\n";
  }
}

void write_gains_csv(const fs::path& path, const GainSchedule& gains) {
  auto out = open_out(path);
  if (gains.empty()) {
    out << "i,row,k\n";
    return;
  }
  const auto& first = gains.front();
  const int slots = static_cast<int>(first.feedback.size());
  const int n = slots > 0 ? static_cast<int>(first.feedback.front().cols()) : 0;
  out << "i,row,k";
  for (int j = 0; j < slots; ++j) {
    for (int c = 0; c < n; ++c) out << ",K" << j << "_" << c + 1;
  }
  out << "\n";
  for (std::size_t i = 0; i < gains.size(); ++i) {
    const auto& g = gains[i];
    for (Eigen::Index r = 0; r < g.open_loop.size(); ++r) {
      out << i << "," << r << ",";
      put(out, g.open_loop[r]);
      for (const auto& kj : g.feedback) {
        for (Eigen::Index c = 0; c < kj.cols(); ++c) {
          out << ",";
          put(out, kj(r, c));
        }
      }
      out << "\n";
    }
  }
}

void write_ensemble_csv(const fs::path& path, const EnsembleStats& st, double dt) {
  auto out = open_out(path);
  out << "t,state,mean,stderr,min,max\n";
  for (Eigen::Index t = 0; t < st.mean.rows(); ++t) {
    for (Eigen::Index c = 0; c < st.mean.cols(); ++c) {
      out << time_of(static_cast<int>(t), dt) << "," << c + 1;
      for (const Matrix* m : {&st.mean, &st.stderr_of_mean, &st.min, &st.max}) {
        out << ",";
        put(out, (*m)(t, c));
      }
      out << "\n";
    }
  }
}

void write_samples_csv(const fs::path& path, const NoiseResult& result, double dt) {
  auto out = open_out(path);
  const int n = result.samples.empty() ? 0 : result.samples.front().state_dim();
  out << "sample,diverged,t";
  for (int c = 0; c < n; ++c) out << ",x_" << c + 1;
  out << "\n";
  for (std::size_t s = 0; s < result.samples.size(); ++s) {
    const auto& tr = result.samples[s];
    const int diverged = result.stats.diverged.empty() ? 0 : static_cast<int>(result.stats.diverged[s]);
    for (int t = 0; t <= static_cast<int>(tr.states.size()); ++t) {
      const Vector& x = t == 0 ? tr.initial[0] : tr.states[static_cast<std::size_t>(t - 1)];
      out << s << "," << diverged << "," << time_of(t, dt);
      for (int c = 0; c < n; ++c) {
        out << ",";
        put(out, x[c]);
      }
      out << "\n";
    }
  }
}

void write_loss_csv(const fs::path& path, const TrainReport& report) {
  auto out = open_out(path);
  out << "epoch,train_loss,val_loss\n";
  for (std::size_t e = 0; e < report.train_loss.size(); ++e) {
    out << e + 1 << ",";
    put(out, report.train_loss[e]);
    out << ",";
    put(out, e < report.val_loss.size() ? report.val_loss[e] : std::nan(""));
    out << "\n";
  }
}

Json vector_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Json to_json(const SolveResult& r) {
  Json iters = Json::array();
  for (const auto& rec : r.log) {
    iters.push_back({{"iteration", rec.iteration},
                     {"cost", rec.cost},
                     {"mu", rec.mu},
                     {"alpha", rec.alpha},
                     {"accepted", rec.accepted},
                     {"diverged", rec.diverged},
                     {"expected_reduction", rec.expected},
                     {"actual_reduction", rec.actual}});
  }
  return Json{{"status", std::string(to_string(r.status))},
              {"converged", r.converged},
              {"iterations", r.iterations},
              {"initial_cost", r.initial_cost},
              {"final_cost", r.final_cost()},
              {"cost_history", r.cost_history},
              {"mu_history", r.mu_history},
              {"alpha_history", r.alpha_history},
              {"line_search", iters}};
}

Json to_json(const TrainReport& r) {
  return Json{{"train_count", r.train_count},
              {"val_count", r.val_count},
              {"final_train_loss", r.train_loss.empty() ? 0.0 : r.train_loss.back()},
              {"final_val_loss", r.val_loss.empty() ? 0.0 : r.val_loss.back()},
              {"val_one_step_mse", r.val_one_step},
              {"val_persistence_mse", r.val_persistence},
              {"val_rollout_rmse", r.val_rollout_rmse}};
}

void write_json(const fs::path& path, const Json& j) {
  auto out = open_out(path);
  out << j.dump(2) << "\n";
}

Json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void save_checkpoint(const fs::path& path, const DelayedNetwork& net, const SequenceDataset& meta) {
  const auto& d = net.dims();
  const std::size_t a = static_cast<std::size_t>(d.augmented());
  const std::size_t m = static_cast<std::size_t>(d.control_dim);
  Json slots = Json::array();
  for (int j = 0; j <= d.delay; ++j) {
    slots.push_back({{"w", rows_json(net.w(j), a, a)},
                     {"b", std::vector<double>(net.b(j).begin(), net.b(j).end())}});
  }
  Json j{{"format", "dddp-delayed-network"},
         {"version", kCheckpointVersion},
         {"dims",
          {{"n_visible", d.n_visible},
           {"n_hidden", d.n_hidden},
           {"control_dim", d.control_dim},
           {"delay", d.delay}}},
         {"w_u", rows_json(net.w_u(), a, m)},
         {"b_u", std::vector<double>(net.b_u().begin(), net.b_u().end())},
         {"slots", slots},
         {"normalization", meta_json(meta)}};
  write_json(path, j);
}

DelayedNetwork load_checkpoint(const fs::path& path, SequenceDataset& meta) {
  const Json j = read_json(path);
  try {
    if (j.at("format") != "dddp-delayed-network") throw FormatError("not a network checkpoint");
    if (j.at("version").get<int>() != kCheckpointVersion) {
      throw FormatError("unsupported checkpoint version");
    }
    NetworkDims d;
    const auto& jd = j.at("dims");
    d.n_visible = jd.at("n_visible").get<int>();
    d.n_hidden = jd.at("n_hidden").get<int>();
    d.control_dim = jd.at("control_dim").get<int>();
    d.delay = jd.at("delay").get<int>();
    d.validate();
    const std::size_t a = static_cast<std::size_t>(d.augmented());
    const std::size_t m = static_cast<std::size_t>(d.control_dim);
    std::vector<double> p;
    p.reserve(d.param_count());
    read_rows(j.at("w_u"), a, m, p, "w_u");
    read_vec(j.at("b_u"), a, p, "b_u");
    const auto& slots = j.at("slots");
    if (!slots.is_array() || slots.size() != static_cast<std::size_t>(d.delay + 1)) {
      throw FormatError("checkpoint: slot count does not match delay");
    }
    for (const auto& s : slots) {
      read_rows(s.at("w"), a, a, p, "w");
      read_vec(s.at("b"), a, p, "b");
    }
    meta = SequenceDataset{};
    read_meta(j.at("normalization"), meta);
    return DelayedNetwork(d, std::move(p));
  } catch (const Json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void save_dataset(const fs::path& path, const SequenceDataset& data) {
  Json seqs = Json::array();
  for (const auto& s : data.sequences) {
    Json vis = Json::array();
    for (const auto& v : s.visible) vis.push_back(vector_json(v));
    Json ctl = Json::array();
    for (const auto& u : s.controls) ctl.push_back(vector_json(u));
    seqs.push_back({{"visible", vis}, {"controls", ctl}});
  }
  Json j{{"format", "dddp-sequence-dataset"},
         {"version", kDatasetVersion},
         {"metadata", meta_json(data)},
         {"sequences", seqs}};
  auto out = open_out(path);
  out << j.dump() << "\n";
}

SequenceDataset load_dataset(const fs::path& path) {
  const Json j = read_json(path);
  try {
    if (j.at("format") != "dddp-sequence-dataset") throw FormatError("not a dataset file");
    if (j.at("version").get<int>() != kDatasetVersion) throw FormatError("unsupported dataset version");
    SequenceDataset data;
    read_meta(j.at("metadata"), data);
    for (const auto& s : j.at("sequences")) {
      Sequence seq;
      for (const auto& v : s.at("visible")) {
        const auto vals = v.get<std::vector<double>>();
        seq.visible.push_back(Eigen::Map<const Vector>(vals.data(), static_cast<Eigen::Index>(vals.size())));
      }
      for (const auto& u : s.at("controls")) {
        const auto vals = u.get<std::vector<double>>();
        seq.controls.push_back(Eigen::Map<const Vector>(vals.data(), static_cast<Eigen::Index>(vals.size())));
      }
      if (static_cast<int>(seq.visible.size()) != seq.steps() + data.delay + 1) {
        throw FormatError("dataset: sequence length does not match delay");
      }
      data.sequences.push_back(std::move(seq));
    }
    return data;
  } catch (const Json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace dddp::io
