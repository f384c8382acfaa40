#pragma once

// Persistence: CSV time series, JSON grid snapshots and the run manifest.
//
// Snapshots hold one dense N x N (S^2) or N (S^1) array per chart and field,
// column-major over the lattice (entry i + N j is lattice node (i, j), i along
// the first chart coordinate), with null where a node is not stored.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "otflow/config.hpp"
#include "otflow/diagnostics.hpp"
#include "otflow/errors.hpp"
#include "otflow/flow.hpp"
#include "otflow/run.hpp"

namespace otflow {

inline constexpr const char* kVersion = "1.0.0";

inline const char* kTimeSeriesHeader =
    "step,t,dt,H,theta_min,theta_max,eig_min,eig_max,sing_min,conservation_residual,newton_mean,newton_max,"
    "contact_residual_max";

inline std::string format_record(const DiagnosticsRecord& r) {
  using detail::format_double;
  return std::to_string(r.step) + "," + format_double(r.t) + "," + format_double(r.dt) + "," +
         format_double(r.oscillation) + "," + format_double(r.theta_min) + "," + format_double(r.theta_max) + "," +
         format_double(r.eig_min) + "," + format_double(r.eig_max) + "," + format_double(r.sing_min) + "," +
         format_double(r.conservation_residual) + "," + format_double(r.newton_mean) + "," +
         std::to_string(r.newton_max) + "," + format_double(r.contact_residual_max);
}

namespace detail {

inline std::ofstream open_for_write(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + p.string());
  return out;
}

inline void finish_write(std::ofstream& out, const std::filesystem::path& p) {
  out.flush();
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + p.string());
}

inline std::string utc_timestamp(std::chrono::system_clock::time_point tp) {
  const std::time_t tt = std::chrono::system_clock::to_time_t(tp);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace detail

inline void write_time_series(const std::filesystem::path& path, const std::vector<DiagnosticsRecord>& rows) {
  auto out = detail::open_for_write(path);
  out << kTimeSeriesHeader << "\n";
  for (const auto& r : rows) out << format_record(r) << "\n";
  detail::finish_write(out, path);
}

template <int Dim>
nlohmann::json snapshot_json(const Flow<Dim>& flow, const FlowState<Dim>& s) {
  const auto& g = flow.grid();
  const int n = g.resolution();
  const std::size_t cells = Dim == 2 ? static_cast<std::size_t>(n) * n : static_cast<std::size_t>(n);
  nlohmann::json j;
  j["manifold"] = Dim == 2 ? "s2" : "s1";
  j["cost"] = to_string(flow.cost());
  j["resolution"] = n;
  j["spacing"] = g.spacing();
  j["lattice_origin"] = g.lattice_origin();
  j["layout"] = "column-major";
  j["t"] = s.t;
  j["step"] = s.step_count;
  j["charts"] = nlohmann::json::array();
  for (ChartId chart : g.charts()) {
    nlohmann::json u(cells, nullptr), th(cells, nullptr), tc(cells, nullptr);
    std::array<nlohmann::json, Dim> tv;
    for (auto& a : tv) a = nlohmann::json(cells, nullptr);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const auto& p = g.point(i);
      if (p.coords().chart != chart) continue;
      const std::size_t cell = Dim == 2 ? p.lattice[0] + static_cast<std::size_t>(n) * p.lattice[1] : p.lattice[0];
      u[cell] = s.u[i];
      if (!p.active()) continue;
      th[cell] = s.theta[i];
      tc[cell] = to_string(s.target[i].chart);
      for (int k = 0; k < Dim; ++k) tv[k][cell] = s.target[i].v[k];
    }
    nlohmann::json c;
    c["id"] = to_string(chart);
    c["u"] = std::move(u);
    c["theta"] = std::move(th);
    c["target_chart"] = std::move(tc);
    c["target_a"] = std::move(tv[0]);
    if constexpr (Dim == 2) c["target_b"] = std::move(tv[1]);
    j["charts"].push_back(std::move(c));
  }
  return j;
}

template <int Dim>
void write_snapshot(const std::filesystem::path& path, const Flow<Dim>& flow, const FlowState<Dim>& s) {
  auto out = detail::open_for_write(path);
  out << snapshot_json(flow, s).dump(1) << "\n";
  detail::finish_write(out, path);
}

/// Stored fields of a snapshot mapped back onto grid storage order.
template <int Dim>
struct Snapshot {
  int resolution = 0;
  double t = 0.0;
  long step = 0;
  std::vector<double> u;
  std::vector<double> theta;
  std::vector<ChartCoords<Dim>> target;
};

template <int Dim>
Snapshot<Dim> read_snapshot(const std::filesystem::path& path, const SphereGrid<Dim>& g) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw Error(ErrorCode::IoError, path.string() + ": " + e.what());
  }
  Snapshot<Dim> snap;
  try {
    snap.resolution = j.at("resolution").get<int>();
    if (snap.resolution != g.resolution()) throw Error(ErrorCode::IoError, "snapshot resolution does not match the grid");
    snap.t = j.at("t").get<double>();
    snap.step = j.at("step").get<long>();
    const int n = snap.resolution;
    snap.u.assign(g.size(), 0.0);
    snap.theta.assign(g.size(), 0.0);
    snap.target.resize(g.size());
    for (const auto& c : j.at("charts")) {
      const std::string id = c.at("id").get<std::string>();
      for (std::size_t i = 0; i < g.size(); ++i) {
        const auto& p = g.point(i);
        if (id != to_string(p.coords().chart)) continue;
        const std::size_t cell = Dim == 2 ? p.lattice[0] + static_cast<std::size_t>(n) * p.lattice[1] : p.lattice[0];
        snap.u[i] = c.at("u").at(cell).get<double>();
        if (!p.active()) continue;
        snap.theta[i] = c.at("theta").at(cell).get<double>();
        const std::string tc = c.at("target_chart").at(cell).get<std::string>();
        snap.target[i].chart = tc == "A" ? ChartId::A : tc == "B" ? ChartId::B : ChartId::P;
        snap.target[i].v[0] = c.at("target_a").at(cell).get<double>();
        if constexpr (Dim == 2) snap.target[i].v[1] = c.at("target_b").at(cell).get<double>();
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::IoError, path.string() + ": malformed snapshot: " + e.what());
  }
  return snap;
}

/// Rebuilds a state from a snapshot; theta, w and T are recomputed from u with the stored T as warm start.
template <int Dim>
FlowState<Dim> restore_state(const Flow<Dim>& flow, const Snapshot<Dim>& snap) {
  FlowState<Dim> s = flow.initial_state(snap.u);
  flow.evaluate(s, snap.target);
  s.t = snap.t;
  s.step_count = snap.step;
  return s;
}

struct RunManifest {
  FlowConfig config;
  std::string version = kVersion;
  std::string started;
  std::string finished;
  std::string termination;
  std::string message;
  long steps = 0;
  double final_t = 0.0;
  double final_h = 0.0;
  double final_max_abs_theta = 0.0;
  double beta = std::nan("");
  double fit_quality = std::nan("");
  double eig_min = 0.0;
  double sing_min = 0.0;  // the stay-away margin epsilon_0 of the trajectory
  double max_conservation_residual = 0.0;
  double degree_mass = 0.0;
};

inline nlohmann::json manifest_json(const RunManifest& m) {
  nlohmann::json j;
  nlohmann::json cfg;
  const FlowConfig& c = m.config;
  cfg["cost"] = to_string(c.cost);
  cfg["manifold"] = to_string(c.manifold);
  cfg["source"] = c.source;
  cfg["target"] = c.target;
  cfg["resolution"] = c.resolution;
  cfg["cfl_safety"] = c.cfl_safety;
  cfg["tolerance"] = c.tolerance;
  cfg["max_steps"] = c.max_steps;
  cfg["seed"] = c.seed;
  cfg["output_cadence"] = c.output_cadence;
  cfg["initial_potential"] = c.initial_potential;
  j["config"] = cfg;
  j["version"] = m.version;
  j["seed"] = c.seed;
  j["started"] = m.started;
  j["finished"] = m.finished;
  j["termination"] = m.termination;
  if (!m.message.empty()) j["message"] = m.message;
  j["steps"] = m.steps;
  j["final_t"] = m.final_t;
  j["final_H"] = m.final_h;
  j["final_max_abs_theta"] = m.final_max_abs_theta;
  j["beta"] = std::isfinite(m.beta) ? nlohmann::json(m.beta) : nlohmann::json(nullptr);
  j["fit_quality"] = std::isfinite(m.fit_quality) ? nlohmann::json(m.fit_quality) : nlohmann::json(nullptr);
  j["min_eigenvalue_w"] = m.eig_min;
  j["stay_away_margin"] = m.sing_min;
  j["max_conservation_residual"] = m.max_conservation_residual;
  j["degree_mass"] = m.degree_mass;
  return j;
}

template <int Dim>
RunManifest make_manifest(const FlowConfig& c, const Flow<Dim>& flow, const RunResult<Dim>& r,
                          std::chrono::system_clock::time_point started, std::chrono::system_clock::time_point finished) {
  RunManifest m;
  m.config = c;
  m.started = detail::utc_timestamp(started);
  m.finished = detail::utc_timestamp(finished);
  m.termination = to_string(r.termination);
  m.message = r.message;
  m.steps = r.final_state.step_count;
  m.final_t = r.final_state.t;
  m.final_h = r.final_state.oscillation();
  m.final_max_abs_theta = r.final_state.max_abs_theta();
  if (r.decay) {
    m.beta = r.decay->beta;
    m.fit_quality = r.decay->r_squared;
  }
  m.eig_min = r.summary.eig_min;
  m.sing_min = r.summary.sing_min;
  m.max_conservation_residual = r.summary.max_conservation_residual;
  m.degree_mass = degree_proxy(flow, r.final_state).mass;
  return m;
}

/// Writes timeseries.csv, snapshot.json and manifest.json into `outdir`.
template <int Dim>
void emit_outputs(const std::filesystem::path& outdir, const Flow<Dim>& flow, const RunResult<Dim>& r,
                  const RunManifest& manifest) {
  std::error_code ec;
  std::filesystem::create_directories(outdir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + outdir.string() + ": " + ec.message());
  write_time_series(outdir / "timeseries.csv", r.records);
  write_snapshot(outdir / "snapshot.json", flow, r.final_state);
  auto out = detail::open_for_write(outdir / "manifest.json");
  out << manifest_json(manifest).dump(2) << "\n";
  detail::finish_write(out, outdir / "manifest.json");
}

}  // namespace otflow
