#pragma once

// Flat key/value run configuration.
//
//   # comment
//   cost = squared_distance        (or reflector_antenna)
//   manifold = s2                  (or s1)
//   source = uniform
//   target = tilt(eps=0.1, e=(0,0,1))
//
// `key: value` is accepted as well. cost and manifold are required; every
// other key has a default. Unknown or repeated keys are rejected.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "otflow/cost.hpp"
#include "otflow/density.hpp"
#include "otflow/errors.hpp"
#include "otflow/grid.hpp"

namespace otflow {

enum class ManifoldId { S1, S2 };

inline const char* to_string(ManifoldId m) { return m == ManifoldId::S1 ? "s1" : "s2"; }

struct FlowConfig {
  CostId cost = CostId::SquaredDistance;
  ManifoldId manifold = ManifoldId::S2;
  std::string source = "uniform";
  std::string target = "uniform";
  int resolution = 129;  // per chart axis on S^2, points around S^1
  double cfl_safety = 0.8;
  double tolerance = 1e-8;
  long max_steps = 1000000;
  std::uint64_t seed = 42;
  int output_cadence = 100;
  std::string initial_potential = "zero";

  bool operator==(const FlowConfig&) const = default;
};

inline int default_resolution(ManifoldId m) { return m == ManifoldId::S1 ? 256 : 129; }

/// Initial potential sampled on a grid: "zero", "linear(amp=a, e=(...))" or "random(amp=a)".
/// The random family is a seeded combination of ambient monomials of degree <= 2.
template <int Dim>
std::vector<double> initial_potential(std::string_view spec, const SphereGrid<Dim>& grid, std::uint64_t seed) {
  detail::SpecReader in(spec);
  const std::string name = in.word();
  double amp = 0.0;
  Ambient<Dim> dir = Ambient<Dim>::Zero();
  dir[Dim] = 1.0;
  bool have_amp = false;
  if (in.accept('(') && !in.accept(')')) {
    do {
      const std::string key = in.word();
      in.expect('=');
      if (key == "amp") {
        amp = in.number();
        have_amp = true;
      } else if (key == "e") {
        const auto v = in.tuple();
        if (static_cast<int>(v.size()) != Dim + 1) in.fail("direction has the wrong length");
        for (int k = 0; k <= Dim; ++k) dir[k] = v[k];
      } else {
        in.fail("unknown parameter '" + key + "'");
      }
    } while (in.accept(','));
    in.expect(')');
  }
  if (!in.done()) in.fail("trailing characters");

  if (name == "zero") return std::vector<double>(grid.size(), 0.0);
  if (!have_amp) in.fail(name + " needs amp");
  if (name == "linear") {
    if (!(dir.norm() > 0.0)) in.fail("direction must be nonzero");
    dir.normalize();
    return grid.sample([&](const SpherePoint<Dim>& p) { return amp * dir.dot(p.coords()); });
  }
  if (name == "random") {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n01;
    Ambient<Dim> lin;
    Mat<Dim + 1> quad;
    for (int a = 0; a <= Dim; ++a) lin[a] = n01(rng);
    for (int a = 0; a <= Dim; ++a)
      for (int b = 0; b <= Dim; ++b) quad(a, b) = n01(rng);
    const double scale = amp / (lin.norm() + quad.norm());
    return grid.sample([&](const SpherePoint<Dim>& p) {
      const auto& x = p.coords();
      return scale * (lin.dot(x) + x.dot(quad * x));
    });
  }
  in.fail("unknown initial potential '" + name + "'");
}

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

[[noreturn]] inline void config_fail(const std::string& origin, int line, const std::string& key, const std::string& msg) {
  std::string where = origin;
  if (line > 0) where += ":" + std::to_string(line);
  if (!key.empty()) where += ": " + key;
  throw Error(ErrorCode::ConfigError, where + ": " + msg);
}

template <class T>
T parse_number(const std::string& v, const std::string& origin, int line, const std::string& key) {
  std::size_t used = 0;
  T out{};
  try {
    if constexpr (std::is_same_v<T, double>) out = std::stod(v, &used);
    else if constexpr (std::is_same_v<T, std::uint64_t>) out = std::stoull(v, &used);
    else out = static_cast<T>(std::stoll(v, &used));
  } catch (const std::exception&) {
    config_fail(origin, line, key, "not a number: '" + v + "'");
  }
  if (used != v.size()) config_fail(origin, line, key, "not a number: '" + v + "'");
  return out;
}

}  // namespace detail

/// Validates ranges and that every spec string parses for the chosen manifold.
/// `lines` maps keys to source lines for error messages.
inline void validate_config(const FlowConfig& c, const std::string& origin = "config",
                            const std::map<std::string, int>& lines = {}) {
  auto line_of = [&](const std::string& k) {
    const auto it = lines.find(k);
    return it == lines.end() ? 0 : it->second;
  };
  auto fail = [&](const std::string& k, const std::string& msg) { detail::config_fail(origin, line_of(k), k, msg); };
  if (!(c.cfl_safety > 0.0 && c.cfl_safety <= 1.0)) fail("cfl_safety", "must lie in (0, 1]");
  if (!(c.tolerance > 0.0)) fail("tolerance", "must be positive");
  if (c.max_steps < 0) fail("max_steps", "must be nonnegative");
  if (c.output_cadence < 1) fail("output_cadence", "must be at least 1");
  const int min_res = c.manifold == ManifoldId::S1 ? 8 : 45;
  if (c.resolution < min_res) fail("resolution", "must be at least " + std::to_string(min_res));
  for (const auto& [key, spec] : {std::pair<std::string, std::string>{"source", c.source}, {"target", c.target}}) {
    try {
      if (c.manifold == ManifoldId::S1) DensityField<1>::parse(spec);
      else DensityField<2>::parse(spec);
    } catch (const Error& e) {
      fail(key, e.what());
    }
  }
  try {
    if (c.manifold == ManifoldId::S1) initial_potential<1>(c.initial_potential, SphereGrid<1>(8), c.seed);
    else initial_potential<2>(c.initial_potential, SphereGrid<2>(45), c.seed);
  } catch (const Error& e) {
    fail("initial_potential", e.what());
  }
}

inline FlowConfig parse_config_text(std::string_view text, const std::string& origin = "config") {
  FlowConfig c;
  std::map<std::string, int> lines;
  std::map<std::string, std::string> values;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::size_t hash = raw.find('#');
    const std::string body = detail::trim(std::string_view(raw).substr(0, hash));
    if (body.empty()) continue;
    const std::size_t sep = body.find_first_of("=:");
    if (sep == std::string::npos) detail::config_fail(origin, line, "", "expected 'key = value'");
    const std::string key = detail::trim(std::string_view(body).substr(0, sep));
    const std::string value = detail::trim(std::string_view(body).substr(sep + 1));
    if (key.empty()) detail::config_fail(origin, line, "", "missing key");
    if (lines.count(key)) detail::config_fail(origin, line, key, "repeated key (first on line " + std::to_string(lines[key]) + ")");
    lines[key] = line;
    values[key] = value;
  }

  for (const auto& [key, value] : values) {
    const int ln = lines[key];
    if (key == "cost") {
      try {
        c.cost = parse_cost_id(value);
      } catch (const Error&) {
        detail::config_fail(origin, ln, key, "expected squared_distance or reflector_antenna");
      }
    } else if (key == "manifold") {
      if (value == "s1") c.manifold = ManifoldId::S1;
      else if (value == "s2") c.manifold = ManifoldId::S2;
      else detail::config_fail(origin, ln, key, "expected s1 or s2");
    } else if (key == "source") c.source = value;
    else if (key == "target") c.target = value;
    else if (key == "resolution") c.resolution = detail::parse_number<int>(value, origin, ln, key);
    else if (key == "cfl_safety") c.cfl_safety = detail::parse_number<double>(value, origin, ln, key);
    else if (key == "tolerance") c.tolerance = detail::parse_number<double>(value, origin, ln, key);
    else if (key == "max_steps") c.max_steps = detail::parse_number<long>(value, origin, ln, key);
    else if (key == "seed") c.seed = detail::parse_number<std::uint64_t>(value, origin, ln, key);
    else if (key == "output_cadence") c.output_cadence = detail::parse_number<int>(value, origin, ln, key);
    else if (key == "initial_potential") c.initial_potential = value;
    else detail::config_fail(origin, ln, key, "unknown key");
  }
  if (!values.count("cost")) detail::config_fail(origin, 0, "cost", "required key missing");
  if (!values.count("manifold")) detail::config_fail(origin, 0, "manifold", "required key missing");
  if (!values.count("resolution")) c.resolution = default_resolution(c.manifold);
  validate_config(c, origin, lines);
  return c;
}

inline FlowConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path.string());
}

/// Every field, one per line; parse_config_text(emit_config(c)) == c.
inline std::string emit_config(const FlowConfig& c) {
  std::string out;
  auto put = [&](const std::string& k, const std::string& v) { out += k + " = " + v + "\n"; };
  put("cost", to_string(c.cost));
  put("manifold", to_string(c.manifold));
  put("source", c.source);
  put("target", c.target);
  put("resolution", std::to_string(c.resolution));
  put("cfl_safety", detail::format_double(c.cfl_safety));
  put("tolerance", detail::format_double(c.tolerance));
  put("max_steps", std::to_string(c.max_steps));
  put("seed", std::to_string(c.seed));
  put("output_cadence", std::to_string(c.output_cadence));
  put("initial_potential", c.initial_potential);
  return out;
}

}  // namespace otflow
