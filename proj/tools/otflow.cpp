// otflow command line: run a flow, sample MTW, solve the circle oracle, self-test.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "otflow/otflow.hpp"

namespace {

using namespace otflow;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitNonConvergence = 2;
constexpr int kExitConfig = 3;
constexpr int kExitStepFailed = 4;

int exit_code(Termination t) {
  switch (t) {
    case Termination::Converged: return kExitOk;
    case Termination::MaxSteps: return kExitNonConvergence;
    case Termination::StepFailed: return kExitStepFailed;
  }
  return kExitFailure;
}

template <int Dim>
int run_flow(const FlowConfig& cfg, const std::string& outdir, bool quiet) {
  const Flow<Dim> flow = make_flow<Dim>(cfg);
  RunOptions opt;
  opt.tolerance = cfg.tolerance;
  opt.max_steps = cfg.max_steps;
  opt.cadence = cfg.output_cadence;
  if (!quiet) {
    opt.observer = [](const DiagnosticsRecord& r) {
      std::fprintf(stderr, "step %8ld  t %.6e  H %.6e  eig_min %.4e  sing_min %.4f  mass %.3e\n", r.step, r.t,
                   r.oscillation, r.eig_min, r.sing_min, r.conservation_residual);
    };
  }
  const auto started = std::chrono::system_clock::now();
  const RunResult<Dim> res = run(flow, initial_potential<Dim>(cfg.initial_potential, flow.grid(), cfg.seed), opt);
  const auto finished = std::chrono::system_clock::now();
  const RunManifest manifest = make_manifest(cfg, flow, res, started, finished);
  emit_outputs(outdir, flow, res, manifest);

  std::printf("termination: %s\n", to_string(res.termination));
  if (!res.message.empty()) std::printf("message: %s\n", res.message.c_str());
  std::printf("steps: %ld  t: %.6g  H: %.6e  max|theta|: %.6e\n", res.final_state.step_count, res.final_state.t,
              res.final_state.oscillation(), res.final_state.max_abs_theta());
  if (res.decay) std::printf("beta: %.6g  r^2: %.6f\n", res.decay->beta, res.decay->r_squared);
  std::printf("min eig(w): %.6e  stay-away margin: %.6f  degree mass: %.6f\n", manifest.eig_min, manifest.sing_min,
              manifest.degree_mass);
  return exit_code(res.termination);
}

int cmd_mtw(const FlowConfig& cfg, int samples, double margin) {
  if (cfg.manifold != ManifoldId::S2) throw Error(ErrorCode::ConfigError, "mtw-sample needs manifold = s2");
  const MtwDeltaResult r = sample_mtw_delta(cfg.cost, samples, margin, cfg.seed);
  const auto& a = r.argmin;
  const Ambient<2> x = chart_to_sphere(a.x).coords(), xb = chart_to_sphere(a.xbar).coords();
  std::printf("cost: %s  samples: %d  margin: %g  seed: %llu\n", to_string(cfg.cost), r.samples, margin,
              static_cast<unsigned long long>(cfg.seed));
  std::printf("delta: %.10f\n", r.delta);
  std::printf("argmin x: (%.6f, %.6f, %.6f)  xbar: (%.6f, %.6f, %.6f)\n", x[0], x[1], x[2], xb[0], xb[1], xb[2]);
  return r.delta > 0.0 ? kExitOk : kExitFailure;
}

int cmd_circle(const FlowConfig& cfg) {
  if (cfg.manifold != ManifoldId::S1) throw Error(ErrorCode::ConfigError, "oracle-circle needs manifold = s1");
  if (cfg.cost != CostId::SquaredDistance)
    throw Error(ErrorCode::ConfigError, "oracle-circle solves the squared distance problem only");
  const auto rho = DensityField<1>::parse(cfg.source);
  const auto rhobar = DensityField<1>::parse(cfg.target);
  const CircleOracleResult r = circle_rearrangement(rho, rhobar, cfg.resolution);
  std::printf("# shift %.17g cost %.17g\n", r.shift, r.cost);
  std::printf("angle,target\n");
  for (std::size_t k = 0; k < r.angles.size(); ++k) std::printf("%.17g,%.17g\n", r.angles[k], r.target[k]);
  return kExitOk;
}

// Fast invariant checks; each prints one line.
int cmd_self_test() {
  int failures = 0;
  auto report = [&](const char* name, bool ok, double value) {
    std::printf("%s %-40s %.3e\n", ok ? "PASS" : "FAIL", name, value);
    if (!ok) ++failures;
  };
  auto guarded = [&](const char* name, const std::function<void()>& body) {
    try {
      body();
    } catch (const std::exception& e) {
      std::printf("FAIL %-40s threw: %s\n", name, e.what());
      ++failures;
    }
  };

  guarded("grid total area", [&] {
    const SphereGrid<2> g(45);
    const double err = std::abs(g.total_weight() - 4.0 * std::numbers::pi);
    report("grid total area", err < 1e-10, err);
  });
  guarded("density normalization", [&] {
    const double err = DensityField<2>::parse("bump(kappa=4, mu=(0,0,1), amp=0.3)").normalization_error();
    report("density normalization", err <= 1e-8, err);
  });
  guarded("jet vs finite differences", [&] {
    double worst = 0.0;
    for (CostId c : {CostId::SquaredDistance, CostId::ReflectorAntenna}) {
      const ChartCoords<2> x{ChartId::A, Vec<2>(0.2, -0.1)}, y{ChartId::A, Vec<2>(-0.3, 0.35)};
      worst = std::max(worst, fd_cross_check<2>(c, x, y).max_discrepancy);
    }
    report("jet vs finite differences", worst <= 1e-6, worst);
  });
  guarded("L(constant) = 0", [&] {
    const auto flow = make_flow<2>(parse_config_text("cost = squared_distance\nmanifold = s2\nresolution = 45\n"
                                                     "target = tilt(eps=0.1, e=(0,0,1))\n"));
    const auto s = flow.initial_state();
    const auto lc = assemble_L(flow, s).apply(std::vector<double>(flow.grid().size(), 1.0));
    double worst = 0.0;
    for (int i : flow.grid().owned()) worst = std::max(worst, std::abs(lc[i]));
    report("L(constant) = 0", worst == 0.0, worst);
  });
  guarded("MTW positivity (squared distance)", [&] {
    const auto r = sample_mtw_delta(CostId::SquaredDistance, 500, 0.3);
    report("MTW positivity (squared distance)", r.delta > 0.0, r.delta);
  });
  guarded("config round trip", [&] {
    FlowConfig c;
    c.cost = CostId::ReflectorAntenna;
    c.target = "bump(kappa=4, mu=(0,0,1), amp=0.3)";
    c.cfl_safety = 0.55;
    const bool ok = parse_config_text(emit_config(c)) == c;
    report("config round trip", ok, 0.0);
  });
  guarded("identity is stationary", [&] {
    const auto flow = make_flow<2>(parse_config_text("cost = squared_distance\nmanifold = s2\nresolution = 45\n"));
    const double h = flow.initial_state().oscillation();
    report("identity is stationary", h <= 1e-10, h);
  });
  return failures == 0 ? kExitOk : kExitFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Parabolic optimal transport flow on the sphere and circle"};
  app.require_subcommand(1);

  std::string config_path, outdir;
  bool deterministic = false, quiet = false;
  std::uint64_t seed = 0;
  long max_steps = -1;
  auto* run_cmd = app.add_subcommand("run", "Run the flow and write time series, snapshot and manifest");
  run_cmd->add_option("config", config_path, "Config file")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--out", outdir, "Output directory")->required();
  run_cmd->add_flag("--deterministic", deterministic, "Serial reductions (always the case in this build)");
  auto* seed_opt = run_cmd->add_option("--seed", seed, "Override the config seed");
  run_cmd->add_option("--max-steps", max_steps, "Override the step budget")->check(CLI::NonNegativeNumber);
  run_cmd->add_flag("-q,--quiet", quiet, "No progress lines on stderr");

  int samples = 10000;
  double margin = 0.3;
  auto* mtw_cmd = app.add_subcommand("mtw-sample", "Estimate the MTW constant by seeded sampling");
  mtw_cmd->add_option("config", config_path, "Config file")->required()->check(CLI::ExistingFile);
  mtw_cmd->add_option("--samples", samples, "Number of accepted samples")->check(CLI::PositiveNumber);
  mtw_cmd->add_option("--margin", margin, "Minimum distance from sing(c)")->check(CLI::NonNegativeNumber);

  auto* circle_cmd = app.add_subcommand("oracle-circle", "Print the rearrangement map on the circle as CSV");
  circle_cmd->add_option("config", config_path, "Config file")->required()->check(CLI::ExistingFile);

  bool self_test = false;
  auto* check_cmd = app.add_subcommand("check", "Invariant checks");
  check_cmd->add_flag("--self-test", self_test, "Run the quick invariant suite")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (check_cmd->parsed()) return cmd_self_test();
    FlowConfig cfg = parse_config(config_path);
    if (run_cmd->parsed()) {
      if (seed_opt->count()) cfg.seed = seed;
      if (max_steps >= 0) cfg.max_steps = max_steps;
      validate_config(cfg, config_path);
      return cfg.manifold == ManifoldId::S2 ? run_flow<2>(cfg, outdir, quiet) : run_flow<1>(cfg, outdir, quiet);
    }
    if (mtw_cmd->parsed()) return cmd_mtw(cfg, samples, margin);
    if (circle_cmd->parsed()) return cmd_circle(cfg);
  } catch (const Error& e) {
    std::fprintf(stderr, "error (%s): %s\n", to_string(e.code()), e.what());
    switch (e.code()) {
      case ErrorCode::ConfigError: return kExitConfig;
      case ErrorCode::StepFailed: return kExitStepFailed;
      case ErrorCode::NonConvergence: return kExitNonConvergence;
      default: return kExitFailure;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitFailure;
  }
  return kExitFailure;
}
