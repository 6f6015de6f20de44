#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "gaugeflow/cascades.hpp"
#include "gaugeflow/io.hpp"
#include "gaugeflow/lie.hpp"

namespace gaugeflow {

// Flat `key = value` configuration, '#' starts a comment.

struct ExperimentConfig {
  std::string kind;
  Group group = Group::U1;
  int class_label = 0;
  int n_r = 32;
  int n_t = 64;
  double ds = 0.05;
  double s_total = 10.0;
  std::optional<std::uint64_t> seed;
  double amplitude = 0.1;
  double smoothness = 2.0;
  int samples = 10;
  double tol = 1e-3;
  double stop_gradient = 0.0;
  double max_energy = 30.0;
  int n_modes = 16;
  std::string fixture = "sphere-z2";
  double raise = 0.2;      // theta: f- = f+ + raise |grad f+|^2
  double ds_loop = 0.0;    // heat flow step; 0 picks half the stability limit
  int record_every = 1;
  std::string init;        // optional checkpoint to start from
  std::string out;         // output directory (CLI flag and env take part too)
  ShootingOptions shooting;
};

inline const char* const kExperimentKinds[] = {"flow-ym", "flow-loop", "hybrid", "energy-identity",
                                               "geodesics", "index-match", "morse", "theta"};

inline bool known_kind(const std::string& k) {
  for (const char* s : kExperimentKinds)
    if (k == s) return true;
  return false;
}

inline std::map<std::string, std::string> parse_key_values(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw InvalidInput("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (key.empty()) throw InvalidInput("config line " + std::to_string(lineno) + ": empty key");
    if (!kv.emplace(key, value).second) throw InvalidInput("config: duplicate key '" + key + "'");
  }
  return kv;
}

namespace detail {

inline int as_int(const std::string& key, const std::string& v) {
  const double d = parse_double(v);
  if (d != std::floor(d) || std::abs(d) > 1e9) throw InvalidInput("config: '" + key + "' must be an integer");
  return static_cast<int>(d);
}

inline double as_real(const std::string& key, const std::string& v) {
  const double d = parse_double(v);
  if (!std::isfinite(d)) throw InvalidInput("config: '" + key + "' must be finite");
  return d;
}

inline void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidInput("config: " + what);
}

}  // namespace detail

inline ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig c;
  for (const auto& [k, v] : parse_key_values(text)) {
    using namespace detail;
    if (k == "kind") c.kind = v;
    else if (k == "group") c.group = parse_group(v);
    else if (k == "class") c.class_label = as_int(k, v);
    else if (k == "n_r") c.n_r = as_int(k, v);
    else if (k == "n_t") c.n_t = as_int(k, v);
    else if (k == "ds") c.ds = as_real(k, v);
    else if (k == "s_total") c.s_total = as_real(k, v);
    else if (k == "seed") {
      const double d = parse_double(v);
      require(d >= 0 && d == std::floor(d) && d < 9.0e15, "'seed' must be a nonnegative integer");
      c.seed = static_cast<std::uint64_t>(d);
    }
    else if (k == "amplitude") c.amplitude = as_real(k, v);
    else if (k == "smoothness") c.smoothness = as_real(k, v);
    else if (k == "samples") c.samples = as_int(k, v);
    else if (k == "tol") c.tol = as_real(k, v);
    else if (k == "stop_gradient") c.stop_gradient = as_real(k, v);
    else if (k == "max_energy") c.max_energy = as_real(k, v);
    else if (k == "n_modes") c.n_modes = as_int(k, v);
    else if (k == "fixture") c.fixture = v;
    else if (k == "raise") c.raise = as_real(k, v);
    else if (k == "ds_loop") c.ds_loop = as_real(k, v);
    else if (k == "record_every") c.record_every = as_int(k, v);
    else if (k == "init") c.init = v;
    else if (k == "out") c.out = v;
    else if (k == "delta_land") c.shooting.delta_land = as_real(k, v);
    else if (k == "shoot_step") c.shooting.step = as_real(k, v);
    else if (k == "shoot_seeds") c.shooting.seeds = as_int(k, v);
    else throw InvalidInput("config: unknown key '" + k + "'");
  }
  return c;
}

/// Range checks; documented in README.
inline void validate(const ExperimentConfig& c) {
  using detail::require;
  require(c.kind.empty() || known_kind(c.kind), "unknown experiment kind '" + c.kind + "'");
  require(c.n_r >= 2 && c.n_r <= 4096, "n_r must be in [2, 4096]");
  require(is_power_of_two(c.n_t) && c.n_t >= 4 && c.n_t <= 4096, "n_t must be a power of two in [4, 4096]");
  require(c.ds > 0.0 && c.ds <= 10.0, "ds must be in (0, 10]");
  require(c.s_total >= 0.0 && c.s_total <= 1e6, "s_total must be in [0, 1e6]");
  require(c.amplitude >= 0.0 && c.amplitude <= 1.0, "amplitude must be in [0, 1]");
  require(c.smoothness >= 0.0 && c.smoothness <= 10.0, "smoothness must be in [0, 10]");
  require(c.samples >= 1 && c.samples <= 100000, "samples must be in [1, 100000]");
  require(c.tol > 0.0 && c.tol < 1.0, "tol must be in (0, 1)");
  require(c.stop_gradient >= 0.0, "stop_gradient must be >= 0");
  require(c.max_energy >= 0.0 && c.max_energy <= 1e4, "max_energy must be in [0, 1e4]");
  require(c.n_modes >= 1 && 2 * c.n_modes < c.n_t, "n_modes must satisfy 1 <= n_modes < n_t / 2");
  require(c.raise >= 0.0 && c.raise <= 1.0, "raise must be in [0, 1]");
  require(c.ds_loop >= 0.0, "ds_loop must be >= 0");
  require(c.record_every >= 1, "record_every must be >= 1");
  require(c.shooting.delta_land > 0.0 && c.shooting.delta_land < 0.1, "delta_land must be in (0, 0.1)");
  require(c.shooting.step > 0.0 && c.shooting.step <= 0.1, "shoot_step must be in (0, 0.1]");
  require(c.shooting.seeds >= 8 && c.shooting.seeds <= 100000, "shoot_seeds must be in [8, 100000]");
  require(c.group == Group::U1 || c.class_label >= 0, "SU(2) class must be >= 0");
}

}  // namespace gaugeflow
