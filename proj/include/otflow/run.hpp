#pragma once

// Run driver: step until H <= tolerance or the step budget is spent, recording
// diagnostics at a fixed cadence and tracking trajectory-wide extremes.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "otflow/config.hpp"
#include "otflow/diagnostics.hpp"
#include "otflow/flow.hpp"

namespace otflow {

enum class Termination { Converged, MaxSteps, StepFailed };

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::Converged: return "Converged";
    case Termination::MaxSteps: return "MaxSteps";
    case Termination::StepFailed: return "StepFailed";
  }
  return "?";
}

struct RunOptions {
  double tolerance = 1e-8;
  long max_steps = 1000000;
  int cadence = 100;
  std::function<void(const DiagnosticsRecord&)> observer;
};

/// Extremes over every step of a trajectory (not only recorded ones).
struct TrajectorySummary {
  double eig_min = std::numeric_limits<double>::infinity();
  double sing_min = std::numeric_limits<double>::infinity();
  double max_h_increase = 0.0;           // largest H_{k+1} - H_k
  double max_theta_max_increase = 0.0;   // largest growth of max theta
  double max_theta_min_decrease = 0.0;   // largest drop of min theta
  double max_conservation_residual = 0.0;  // over recorded steps
  double max_enclosure_violation = 0.0;    // max(min theta, -max theta, 0) over every step
  long enclosure_break_step = -1;          // first step with min theta > 0 or max theta < 0
  double enclosure_break_h = std::numeric_limits<double>::quiet_NaN();  // H at that step
};

template <int Dim>
struct RunResult {
  std::vector<DiagnosticsRecord> records;
  FlowState<Dim> final_state;
  Termination termination = Termination::MaxSteps;
  std::string message;
  TrajectorySummary summary;
  std::optional<DecayFit> decay;
};

template <int Dim>
RunResult<Dim> run(const Flow<Dim>& flow, std::vector<double> u0, const RunOptions& opt) {
  RunResult<Dim> res;
  FlowState<Dim> cur = flow.initial_state(std::move(u0));
  FlowState<Dim> next;
  auto& sum = res.summary;

  auto track = [&](const FlowState<Dim>& s) {
    sum.eig_min = std::min(sum.eig_min, s.eig_min);
    sum.sing_min = std::min(sum.sing_min, s.sing_min);
    const double v = std::max(s.theta_min, -s.theta_max);
    if (v > 0.0 && sum.enclosure_break_step < 0) {
      sum.enclosure_break_step = s.step_count;
      sum.enclosure_break_h = s.oscillation();
    }
    sum.max_enclosure_violation = std::max(sum.max_enclosure_violation, v);
  };
  auto record = [&](const FlowState<Dim>& s) {
    const DiagnosticsRecord r = monitors(flow, s);
    sum.max_conservation_residual = std::max(sum.max_conservation_residual, r.conservation_residual);
    res.records.push_back(r);
    if (opt.observer) opt.observer(r);
  };

  track(cur);
  record(cur);
  res.termination = Termination::MaxSteps;
  if (cur.oscillation() <= opt.tolerance) {
    res.termination = Termination::Converged;
  } else {
    try {
      while (cur.step_count < opt.max_steps) {
        flow.step(cur, next);
        sum.max_h_increase = std::max(sum.max_h_increase, next.oscillation() - cur.oscillation());
        sum.max_theta_max_increase = std::max(sum.max_theta_max_increase, next.theta_max - cur.theta_max);
        sum.max_theta_min_decrease = std::max(sum.max_theta_min_decrease, cur.theta_min - next.theta_min);
        std::swap(cur, next);
        track(cur);
        const bool done = cur.oscillation() <= opt.tolerance;
        if (done || cur.step_count % opt.cadence == 0) record(cur);
        if (done) {
          res.termination = Termination::Converged;
          break;
        }
      }
      if (res.termination == Termination::MaxSteps && res.records.back().step != cur.step_count) record(cur);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::StepFailed) throw;
      res.termination = Termination::StepFailed;
      res.message = e.what();
      if (res.records.back().step != cur.step_count) record(cur);
    }
  }
  res.final_state = std::move(cur);

  std::vector<double> t, h;
  for (const auto& r : res.records) {
    t.push_back(r.t);
    h.push_back(r.oscillation);
  }
  try {
    res.decay = fit_decay(t, h);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::InsufficientData) throw;
  }
  return res;
}

template <int Dim>
Flow<Dim> make_flow(const FlowConfig& c) {
  auto grid = std::make_shared<const SphereGrid<Dim>>(c.resolution);
  return Flow<Dim>(c.cost, grid, DensityField<Dim>::parse(c.source), DensityField<Dim>::parse(c.target), c.cfl_safety);
}

template <int Dim>
RunResult<Dim> run(const FlowConfig& c, std::function<void(const DiagnosticsRecord&)> observer = {}) {
  const Flow<Dim> flow = make_flow<Dim>(c);
  RunOptions opt;
  opt.tolerance = c.tolerance;
  opt.max_steps = c.max_steps;
  opt.cadence = c.output_cadence;
  opt.observer = std::move(observer);
  return run(flow, initial_potential<Dim>(c.initial_potential, flow.grid(), c.seed), opt);
}

}  // namespace otflow
