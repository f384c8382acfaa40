// Acceptance run: one PASS/FAIL line per criterion, with the measured numbers
// on indented lines below it. Exit status is nonzero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "otflow/otflow.hpp"

using namespace otflow;

namespace {

int failures = 0;

void verdict(int id, bool ok, const std::string& what) {
  std::printf("criterion %2d: %s  %s\n", id, ok ? "PASS" : "FAIL", what.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

void detail(const char* fmt, auto... args) {
  std::printf("    ");
  std::printf(fmt, args...);
  std::printf("\n");
  std::fflush(stdout);
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

FlowConfig sphere_config(CostId cost, const std::string& source, const std::string& target, int resolution) {
  FlowConfig c;
  c.cost = cost;
  c.manifold = ManifoldId::S2;
  c.source = source;
  c.target = target;
  c.resolution = resolution;
  return c;
}

std::string tilt(double eps) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "tilt(eps=%g, e=(0,0,1))", eps);
  return buf;
}

// Trajectory facts shared by the conservation and convexity criteria.
struct TrajectoryReport {
  std::string name;
  bool completed = false;
  TrajectorySummary summary;
  double final_h = 0.0;
};

std::vector<TrajectoryReport> trajectories;

template <int Dim>
void keep(const std::string& name, const RunResult<Dim>& r) {
  trajectories.push_back({name, true, r.summary, r.final_state.oscillation()});
}

void run_failed(const std::string& name) { trajectories.push_back({name, false, {}, 0.0}); }

// 1 -----------------------------------------------------------------------
void identity_stationarity() {
  bool ok = true;
  for (const char* density : {"uniform", "bump(kappa=4, mu=(0,0,1), amp=0.3)"}) {
    Stopwatch sw;
    FlowConfig c = sphere_config(CostId::SquaredDistance, density, density, default_resolution(ManifoldId::S2));
    const auto r = run<2>(c);
    const double h0 = r.records.front().oscillation;
    const double secs = sw.seconds();
    const bool pass = h0 <= 1e-10 && r.termination == Termination::Converged && r.final_state.step_count == 0 &&
                      secs < 1.0;
    detail("%-40s H(0) = %.3e  steps = %ld  %.2f s", density, h0, r.final_state.step_count, secs);
    ok = ok && pass;
  }
  verdict(1, ok, "identity is stationary (H(0) <= 1e-10, stops at step 0, < 1 s)");
}

// 2 -----------------------------------------------------------------------
void exponential_decay() {
  Stopwatch sw;
  const FlowConfig c = sphere_config(CostId::SquaredDistance, "uniform", tilt(0.1), 129);
  try {
    const auto r = run<2>(c);
    keep("tilt 0.1, 129^2", r);
    const bool converged = r.termination == Termination::Converged && r.final_state.oscillation() <= 1e-8;
    const bool fit_ok = r.decay && r.decay->beta > 0.0 && r.decay->r_squared >= 0.99;
    const bool monotone = r.summary.max_h_increase <= 1e-8;
    detail("termination %s after %ld steps, t = %.4f, H = %.3e, %.0f s", to_string(r.termination),
           r.final_state.step_count, r.final_state.t, r.final_state.oscillation(), sw.seconds());
    if (r.decay) detail("beta = %.5f  fit quality r^2 = %.6f over %d samples", r.decay->beta, r.decay->r_squared,
                        r.decay->samples);
    detail("largest one-step increase of H = %.3e", r.summary.max_h_increase);
    verdict(2, converged && fit_ok && monotone, "exponential decay on 129^2 (H <= 1e-8, beta > 0, r^2 >= 0.99, monotone)");
  } catch (const Error& e) {
    run_failed("tilt 0.1, 129^2");
    detail("run threw %s: %s", to_string(e.code()), e.what());
    verdict(2, false, "exponential decay on 129^2");
  }
}

// 3 -----------------------------------------------------------------------
void circle_oracle() {
  Stopwatch sw;
  FlowConfig c;
  c.manifold = ManifoldId::S1;
  c.resolution = 256;
  c.target = "tilt(eps=0.5, e=(1,0))";
  const Flow<1> flow = make_flow<1>(c);
  RunOptions opt;
  opt.tolerance = c.tolerance;
  opt.max_steps = c.max_steps;
  opt.cadence = c.output_cadence;
  const auto r = run(flow, std::vector<double>(flow.grid().size(), 0.0), opt);
  keep("circle, N = 256", r);
  const auto oracle = circle_rearrangement(flow.source(), flow.target(), c.resolution);
  double sup = 0.0;
  for (int i = 0; i < c.resolution; ++i)
    sup = std::max(sup, std::abs(wrap_angle(r.final_state.target[i].v[0] - oracle.target[i])));
  const double secs = sw.seconds();
  detail("termination %s after %ld steps, H = %.3e", to_string(r.termination), r.final_state.step_count,
         r.final_state.oscillation());
  detail("sup |T_flow - T_oracle| = %.3e  (oracle shift %.3e, cost %.6f)  %.1f s", sup, oracle.shift, oracle.cost, secs);
  verdict(3, r.termination == Termination::Converged && sup <= 5e-3 && secs < 30.0,
          "circle flow matches monotone rearrangement (sup <= 5e-3, < 30 s)");
}

// 4 -----------------------------------------------------------------------
void linearization_oracle() {
  const std::vector<double> eps{0.025, 0.05, 0.1};
  std::vector<double> err;
  bool all_converged = true;
  for (double e : eps) {
    Stopwatch sw;
    const FlowConfig c = sphere_config(CostId::SquaredDistance, "uniform", tilt(e), 65);
    const Flow<2> flow = make_flow<2>(c);
    RunOptions opt;
    opt.tolerance = c.tolerance;
    opt.max_steps = c.max_steps;
    opt.cadence = c.output_cadence;
    try {
      const auto r = run(flow, std::vector<double>(flow.grid().size(), 0.0), opt);
      keep("tilt " + std::to_string(e) + ", 65^2", r);
      all_converged = all_converged && r.termination == Termination::Converged;
      const auto& g = flow.grid();
      const double mean = g.quadrature(r.final_state.u) / g.total_weight();
      const auto lin = poisson_linearization(e);
      double sup = 0.0;
      for (int i : g.owned()) sup = std::max(sup, std::abs(r.final_state.u[i] - mean - lin(g.point(i).sphere)));
      err.push_back(sup);
      detail("eps = %-6g %s after %ld steps, sup |u - mean - (eps/2) z| = %.4e, err/eps^2 = %.4f  %.0f s", e,
             to_string(r.termination), r.final_state.step_count, sup, sup / (e * e), sw.seconds());
    } catch (const Error& ex) {
      run_failed("tilt " + std::to_string(e) + ", 65^2");
      detail("eps = %g threw %s: %s", e, to_string(ex.code()), ex.what());
      verdict(4, false, "linearization oracle");
      return;
    }
  }
  // least squares slope of ln err against ln eps
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < eps.size(); ++k) {
    mx += std::log(eps[k]) / 3.0;
    my += std::log(err[k]) / 3.0;
  }
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t k = 0; k < eps.size(); ++k) {
    sxx += (std::log(eps[k]) - mx) * (std::log(eps[k]) - mx);
    sxy += (std::log(eps[k]) - mx) * (std::log(err[k]) - my);
  }
  const double exponent = sxy / sxx;
  detail("scaling exponent = %.3f, C = %.4f", exponent, std::exp(my - exponent * mx));
  verdict(4, all_converged && std::abs(exponent - 2.0) <= 0.3 && err[1] <= 0.01,
          "linearization oracle (exponent 2 +- 0.3, error <= 0.01 at eps = 0.05)");
}

// 5 -----------------------------------------------------------------------
void theta_evolution() {
  Stopwatch sw;
  const auto coarse = make_flow<2>(sphere_config(CostId::SquaredDistance, "uniform", tilt(0.1), 65));
  const auto fine = make_flow<2>(sphere_config(CostId::SquaredDistance, "uniform", tilt(0.1), 129));
  const auto s65 = coarse.initial_state();
  const auto s129 = fine.initial_state();
  const double dt = coarse.stable_dt(s65);

  // dt part: the h part cancels in differences between step sizes on one grid
  const auto a = check_theta_evolution(coarse, s65, dt);
  const auto b = check_theta_evolution(coarse, s65, dt / 2);
  const auto c = check_theta_evolution(coarse, s65, dt / 4);
  double d1 = 0.0, d2 = 0.0;
  for (int i : a.compared) {
    d1 = std::max(d1, std::abs(a.discrepancy[i] - b.discrepancy[i]));
    d2 = std::max(d2, std::abs(b.discrepancy[i] - c.discrepancy[i]));
  }
  const double dt_ratio = d1 / d2;
  detail("dt part: |e(dt) - e(dt/2)| = %.4e, |e(dt/2) - e(dt/4)| = %.4e, ratio %.4f", d1, d2, dt_ratio);

  // h halved with dt quartered on the same initial data
  const auto f = check_theta_evolution(fine, s129, dt / 4);
  const double h_ratio = a.max_discrepancy / f.max_discrepancy;
  detail("total: h = %.4f -> %.4e, h = %.4f -> %.4e, ratio %.4f", coarse.grid().spacing(), a.max_discrepancy,
         fine.grid().spacing(), f.max_discrepancy, h_ratio);

  // L annihilates constants on a state away from the identity
  const auto sr = fine.initial_state(initial_potential<2>("random(amp=0.05)", fine.grid(), 42));
  const auto lc = assemble_L(fine, sr).apply(std::vector<double>(fine.grid().size(), 1.0));
  double worst = 0.0;
  for (double v : lc) worst = std::max(worst, std::abs(v));
  detail("max |L 1| = %.1e on a random c-convex state   %.1f s", worst, sw.seconds());

  verdict(5, std::abs(dt_ratio - 2.0) <= 0.4 && std::abs(h_ratio - 4.0) <= 0.8 && worst == 0.0,
          "theta evolution orders (dt ratio 2 +- 20%, h ratio 4 +- 20%, L(const) = 0)");
}

// 6, 7 --------------------------------------------------------------------
void conservation_and_convexity() {
  bool mass_ok = true, enclosure_ok = true, convex_ok = true;
  for (const auto& t : trajectories) {
    if (!t.completed) {
      detail("%-22s did not complete", t.name.c_str());
      mass_ok = enclosure_ok = convex_ok = false;
      continue;
    }
    const auto& s = t.summary;
    mass_ok = mass_ok && s.max_conservation_residual <= 1e-3;
    enclosure_ok = enclosure_ok && s.max_enclosure_violation == 0.0;
    if (s.enclosure_break_step >= 0)
      detail("%-22s mass residual max %.3e; enclosure breaks at step %ld (H = %.3e), worst violation %.3e",
             t.name.c_str(), s.max_conservation_residual, s.enclosure_break_step, s.enclosure_break_h,
             s.max_enclosure_violation);
    else
      detail("%-22s mass residual max %.3e; min theta <= 0 <= max theta on every step", t.name.c_str(),
             s.max_conservation_residual);
  }
  verdict(6, mass_ok && enclosure_ok, "conservation (|mass - 1| <= 1e-3 recorded, min theta <= 0 <= max theta every step)");

  for (const auto& t : trajectories) {
    if (!t.completed) continue;
    const bool ok = t.summary.eig_min > 0.0 && t.summary.sing_min > 0.05;
    convex_ok = convex_ok && ok;
    detail("%-22s min eig(g^-1 w) = %.4e, eps0 = min sing distance = %.4f", t.name.c_str(), t.summary.eig_min,
           t.summary.sing_min);
  }
  verdict(7, convex_ok, "strict c-convexity and stay-away (eig > 0, eps0 > 0.05)");
}

// 8 -----------------------------------------------------------------------
void mtw_sampling() {
  Stopwatch sw;
  bool ok = true;
  for (CostId cost : {CostId::SquaredDistance, CostId::ReflectorAntenna}) {
    const auto a = sample_mtw_delta(cost, 10000, 0.3, 42);
    const auto b = sample_mtw_delta(cost, 20000, 0.3, 42);
    const double change = std::abs(b.delta - a.delta) / std::abs(a.delta);
    detail("%-18s delta(1e4) = %.6f  delta(2e4) = %.6f  relative change %.2e", to_string(cost), a.delta, b.delta,
           change);
    ok = ok && a.delta > 0.0 && b.delta > 0.0 && change <= 0.1;
  }
  // diagonal: unit V orthogonal to the raised covector, at a generic chart point
  const ChartCoords<2> x{ChartId::B, Vec<2>(-0.3, 0.55)};
  const double lam = chart_metric(x)(0, 0);
  const Vec<2> v(0.6 / std::sqrt(lam), 0.8 / std::sqrt(lam));
  const Vec<2> eta(-0.8 * std::sqrt(lam), 0.6 * std::sqrt(lam));
  const double jet = mtw_normalized(CostId::SquaredDistance, x, x, v, eta);
  const double fd = mtw_value_fd(CostId::SquaredDistance, x, x, v, eta) / detail::mtw_norms(x, v, eta);
  detail("squared distance diagonal: jet %.12f  finite differences %.12f  |diff| %.2e", jet, fd, std::abs(jet - fd));
  detail("frozen diagonal value 2/3 (the finite-difference oracle rules out 1.5)   %.1f s", sw.seconds());
  ok = ok && std::abs(jet - fd) <= 1e-6 && std::abs(jet - 2.0 / 3.0) <= 1e-6;
  verdict(8, ok, "MTW(delta) sampling positive and stable, diagonal matches the oracle");
}

// 9 -----------------------------------------------------------------------
void jet_engine() {
  Stopwatch sw;
  bool ok = true;
  std::mt19937_64 rng(42);
  std::normal_distribution<double> n01;
  auto point = [&] {
    for (;;) {
      const Ambient<2> v(n01(rng), n01(rng), n01(rng));
      if (v.norm() > 1e-6) return SpherePoint<2>(v);
    }
  };
  for (CostId cost : {CostId::SquaredDistance, CostId::ReflectorAntenna}) {
    double worst = 0.0;
    std::array<double, 5> per_order{};
    for (int k = 0; k < 1000; ++k) {
      SpherePoint<2> x, y;
      do {
        x = point();
        y = point();
      } while (sing_distance(cost, x, y) < 0.3);
      const auto rep = fd_cross_check<2>(cost, to_owning_chart(x), to_owning_chart(y), 4);
      worst = std::max(worst, rep.max_discrepancy);
      for (int o = 0; o <= 4; ++o) per_order[o] = std::max(per_order[o], rep.per_order[o]);
    }
    detail("%-18s max discrepancy %.3e  by order: %.1e %.1e %.1e %.1e %.1e", to_string(cost), worst, per_order[0],
           per_order[1], per_order[2], per_order[3], per_order[4]);
    ok = ok && worst <= 1e-6;
  }
  detail("10^3 pairs per cost, sing distance >= 0.3   %.1f s", sw.seconds());
  verdict(9, ok, "jet engine vs finite differences (<= 1e-6, orders <= 4)");
}

// 10 ----------------------------------------------------------------------
void reflector_run() {
  Stopwatch sw;
  const FlowConfig c =
      sphere_config(CostId::ReflectorAntenna, "uniform", "bump(kappa=4, mu=(0,0,1), amp=0.3)", 65);
  try {
    const Flow<2> flow = make_flow<2>(c);
    RunOptions opt;
    opt.tolerance = c.tolerance;
    opt.max_steps = c.max_steps;
    opt.cadence = c.output_cadence;
    const auto r = run(flow, std::vector<double>(flow.grid().size(), 0.0), opt);
    const auto deg = degree_proxy(flow, r.final_state);
    detail("termination %s after %ld steps, H = %.3e, %.0f s", to_string(r.termination), r.final_state.step_count,
           r.final_state.oscillation(), sw.seconds());
    if (r.decay) detail("beta = %.4f  r^2 = %.6f", r.decay->beta, r.decay->r_squared);
    detail("stay-away margin min d(x, T(x)) = %.4f, degree proxy = %.6f", r.summary.sing_min, deg.mass);
    const bool ok = r.termination == Termination::Converged && r.decay && r.decay->beta > 0.0 &&
                    r.summary.sing_min >= 0.05 && std::abs(deg.mass - 1.0) <= 1e-2;
    verdict(10, ok, "reflector run (converges, beta > 0, margin >= 0.05, degree within 1e-2 of 1)");
  } catch (const Error& e) {
    detail("run threw %s: %s", to_string(e.code()), e.what());
    verdict(10, false, "reflector run");
  }
}

}  // namespace

int main() {
  Stopwatch total;
  identity_stationarity();
  exponential_decay();
  circle_oracle();
  linearization_oracle();
  theta_evolution();
  conservation_and_convexity();
  mtw_sampling();
  jet_engine();
  reflector_run();
  std::printf("%d of 10 criteria failed, %.0f s total\n", failures, total.seconds());
  return failures == 0 ? 0 : 1;
}
