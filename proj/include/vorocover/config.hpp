#pragma once

// Experiment configuration: a YAML file with sections domain, densities,
// robots, schedules, gp, comm, oracle and experiment. Every key is checked;
// unknown keys and invariant violations are rejected at load with the
// offending line. The full schema with defaults is documented in README.md.

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "vorocover/rng.hpp"
#include "vorocover/sim.hpp"

namespace vorocover {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentSpec {
  std::string name = "experiment";
  std::vector<ScenarioConfig> scenarios;  // one per density
  std::vector<RunMode> modes;
  std::vector<std::uint64_t> seeds;
  std::uint64_t experiment_seed = 42;
  std::string output_dir = "out";
  int parallelism = 0;  // 0 = hardware concurrency
};

namespace cfg_detail {

inline std::string where(const YAML::Node& node) {
  return "line " + std::to_string(node.Mark().line + 1) + ": ";
}

[[noreturn]] inline void fail(const YAML::Node& node, const std::string& message) {
  throw ConfigError(where(node) + message);
}

inline void require_map(const YAML::Node& node, const std::string& section) {
  if (!node.IsMap()) fail(node, "section '" + section + "' must be a mapping");
}

inline void check_keys(const YAML::Node& map, const std::string& section,
                       std::initializer_list<const char*> allowed) {
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& kv : map) {
    const std::string key = kv.first.as<std::string>();
    if (ok.count(key) == 0) fail(kv.first, "unknown key '" + key + "' in section '" + section + "'");
  }
}

inline double as_double(const YAML::Node& node, const char* what) {
  try {
    return node.as<double>();
  } catch (const YAML::Exception&) {
    fail(node, std::string("expected a number for ") + what);
  }
}

inline int as_int(const YAML::Node& node, const char* what) {
  try {
    return node.as<int>();
  } catch (const YAML::Exception&) {
    fail(node, std::string("expected an integer for ") + what);
  }
}

inline std::uint64_t as_u64(const YAML::Node& node, const char* what) {
  try {
    return node.as<std::uint64_t>();
  } catch (const YAML::Exception&) {
    fail(node, std::string("expected an unsigned integer for ") + what);
  }
}

inline std::string as_string(const YAML::Node& node, const char* what) {
  try {
    return node.as<std::string>();
  } catch (const YAML::Exception&) {
    fail(node, std::string("expected a string for ") + what);
  }
}

inline Point2 as_point(const YAML::Node& node, const char* what) {
  if (!node.IsSequence() || node.size() != 2)
    fail(node, std::string(what) + " must be a [x, y] pair");
  return {as_double(node[0], what), as_double(node[1], what)};
}

inline ConvexDomain parse_domain(const YAML::Node& node) {
  std::vector<Point2> vertices = {{0.0, 0.0}, {1.0, 0.0}, {1.0, 1.0}, {0.0, 1.0}};
  int resolution = 100;
  if (node) {
    require_map(node, "domain");
    check_keys(node, "domain", {"vertices", "grid_resolution"});
    if (node["vertices"]) {
      const YAML::Node& vs = node["vertices"];
      if (!vs.IsSequence() || vs.size() < 3) fail(vs, "domain.vertices must list at least 3 points");
      vertices.clear();
      for (const auto& v : vs) vertices.push_back(as_point(v, "domain vertex"));
    }
    if (node["grid_resolution"]) resolution = as_int(node["grid_resolution"], "domain.grid_resolution");
  }
  try {
    return ConvexDomain(std::move(vertices), resolution);
  } catch (const std::exception& e) {
    if (node) fail(node, e.what());
    throw ConfigError(e.what());
  }
}

inline DensitySpec parse_density(const YAML::Node& node, const ConvexDomain& domain) {
  require_map(node, "densities entry");
  check_keys(node, "densities entry", {"name", "offset", "components", "random_components"});
  DensitySpec spec;
  if (!node["name"]) fail(node, "density needs a 'name'");
  spec.name = as_string(node["name"], "density name");
  if (node["offset"]) spec.offset = as_double(node["offset"], "density offset");
  const bool has_components = static_cast<bool>(node["components"]);
  const bool has_random = static_cast<bool>(node["random_components"]);
  if (has_components == has_random)
    fail(node, "density '" + spec.name + "' needs exactly one of components/random_components");
  if (has_components) {
    const YAML::Node& comps = node["components"];
    if (!comps.IsSequence() || comps.size() == 0) fail(comps, "components must be a non-empty list");
    for (const auto& c : comps) {
      require_map(c, "component");
      check_keys(c, "component", {"weight", "mean", "std"});
      GaussianComponent gc;
      if (c["weight"]) gc.weight = as_double(c["weight"], "component weight");
      if (!c["mean"]) fail(c, "component needs a 'mean'");
      gc.mean = as_point(c["mean"], "component mean");
      if (!c["std"]) fail(c, "component needs a 'std'");
      gc.std = as_double(c["std"], "component std");
      if (gc.std <= 0.0) fail(c["std"], "component std must be positive");
      spec.components.push_back(gc);
    }
  } else {
    const YAML::Node& rc = node["random_components"];
    require_map(rc, "random_components");
    check_keys(rc, "random_components", {"count", "weight", "std", "seed"});
    if (!rc["count"] || !rc["std"] || !rc["seed"])
      fail(rc, "random_components needs count, std and seed");
    const int count = as_int(rc["count"], "random_components.count");
    if (count < 1) fail(rc["count"], "random_components.count must be positive");
    const double weight = rc["weight"] ? as_double(rc["weight"], "random_components.weight") : 1.0;
    const double sd = as_double(rc["std"], "random_components.std");
    if (sd <= 0.0) fail(rc["std"], "random_components.std must be positive");
    const std::uint64_t seed = as_u64(rc["seed"], "random_components.seed");
    RngStream stream(derive_seed(seed, fnv1a(spec.name)));
    const Point2 lo = domain.bbox_min();
    const Point2 hi = domain.bbox_max();
    const double mx = 0.15 * (hi.x - lo.x);
    const double my = 0.15 * (hi.y - lo.y);
    for (int k = 0; k < count; ++k) {
      GaussianComponent gc;
      gc.weight = weight;
      gc.std = sd;
      do {
        gc.mean = {stream.uniform(lo.x + mx, hi.x - mx), stream.uniform(lo.y + my, hi.y - my)};
      } while (!domain.contains(gc.mean));
      spec.components.push_back(gc);
    }
  }
  return spec;
}

inline std::vector<double> parse_schedule(const YAML::Node& node, const char* name, int iterations,
                                          const std::vector<double>& fallback) {
  if (!node) return fallback;
  require_map(node, name);
  const std::string type = node["type"] ? as_string(node["type"], "schedule type") : "";
  std::vector<double> out(static_cast<std::size_t>(iterations));
  if (type == "list") {
    check_keys(node, name, {"type", "values"});
    const YAML::Node& vals = node["values"];
    if (!vals.IsSequence() || static_cast<int>(vals.size()) != iterations)
      fail(node, std::string(name) + ".values must list one value per iteration");
    for (int k = 0; k < iterations; ++k) out[static_cast<std::size_t>(k)] = as_double(vals[k], name);
  } else if (type == "log_growth") {
    check_keys(node, name, {"type", "scale"});
    const double scale = node["scale"] ? as_double(node["scale"], "scale") : 1.0;
    for (int n = 1; n <= iterations; ++n) out[static_cast<std::size_t>(n - 1)] = scale * std::log(n + 1.0);
  } else if (type == "geometric") {
    check_keys(node, name, {"type", "initial", "ratio"});
    if (!node["initial"] || !node["ratio"]) fail(node, std::string(name) + " needs initial and ratio");
    const double initial = as_double(node["initial"], "initial");
    const double ratio = as_double(node["ratio"], "ratio");
    for (int n = 1; n <= iterations; ++n)
      out[static_cast<std::size_t>(n - 1)] = initial * std::pow(ratio, n - 1);
  } else {
    fail(node, std::string(name) + ".type must be one of list, log_growth, geometric");
  }
  return out;
}

inline RunMode parse_mode(const YAML::Node& node) {
  const std::string s = as_string(node, "mode");
  if (s == "vec") return RunMode::Vec;
  if (s == "dvec_nc") return RunMode::DvecNaive;
  if (s == "dvec_cc") return RunMode::DvecConstrained;
  fail(node, "unknown mode '" + s + "' (expected vec, dvec_nc or dvec_cc)");
}

}  // namespace cfg_detail

inline ExperimentSpec load_config(const std::string& path) {
  using namespace cfg_detail;
  YAML::Node root;
  try {
    root = YAML::LoadFile(path);
  } catch (const YAML::BadFile&) {
    throw ConfigError("cannot read config file '" + path + "'");
  } catch (const YAML::ParserException& e) {
    throw ConfigError("line " + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  if (!root.IsMap()) throw ConfigError("config must be a YAML mapping");
  check_keys(root, "top level",
             {"domain", "densities", "robots", "schedules", "gp", "comm", "oracle", "experiment"});

  ExperimentSpec spec;

  // experiment section first: the iteration count sizes the schedules.
  int iterations = 15;
  const YAML::Node exp = root["experiment"];
  if (exp) {
    require_map(exp, "experiment");
    check_keys(exp, "experiment",
               {"name", "modes", "seeds", "iterations", "experiment_seed", "output_dir", "parallelism"});
    if (exp["name"]) spec.name = as_string(exp["name"], "experiment.name");
    if (exp["iterations"]) iterations = as_int(exp["iterations"], "experiment.iterations");
    if (iterations < 1) fail(exp["iterations"], "experiment.iterations must be >= 1");
    if (exp["experiment_seed"]) spec.experiment_seed = as_u64(exp["experiment_seed"], "experiment_seed");
    if (exp["output_dir"]) spec.output_dir = as_string(exp["output_dir"], "experiment.output_dir");
    if (exp["parallelism"]) {
      spec.parallelism = as_int(exp["parallelism"], "experiment.parallelism");
      if (spec.parallelism < 0) fail(exp["parallelism"], "experiment.parallelism must be >= 0");
    }
    if (exp["modes"]) {
      if (!exp["modes"].IsSequence() || exp["modes"].size() == 0)
        fail(exp["modes"], "experiment.modes must be a non-empty list");
      for (const auto& mnode : exp["modes"]) spec.modes.push_back(parse_mode(mnode));
    }
    if (exp["seeds"]) {
      if (!exp["seeds"].IsSequence() || exp["seeds"].size() == 0)
        fail(exp["seeds"], "experiment.seeds must be a non-empty list");
      for (const auto& snode : exp["seeds"]) spec.seeds.push_back(as_u64(snode, "seed"));
    }
  }
  if (spec.modes.empty())
    spec.modes = {RunMode::Vec, RunMode::DvecNaive, RunMode::DvecConstrained};
  if (spec.seeds.empty()) spec.seeds = {1, 2, 3, 4, 5};

  const ConvexDomain domain = parse_domain(root["domain"]);
  const double diam = domain.diameter();

  ScenarioConfig base;
  base.domain = domain;
  base.iterations = iterations;
  base.schedules = ScheduleParams::defaults(iterations);
  base.gp_search = SearchConfig::for_diameter(diam);

  const YAML::Node robots = root["robots"];
  if (robots) {
    require_map(robots, "robots");
    check_keys(robots, "robots", {"count", "min_separation"});
    if (robots["count"]) base.robot_count = as_int(robots["count"], "robots.count");
    if (robots["min_separation"])
      base.min_separation = as_double(robots["min_separation"], "robots.min_separation");
  }

  const YAML::Node sched = root["schedules"];
  if (sched) {
    require_map(sched, "schedules");
    check_keys(sched, "schedules", {"beta", "gamma", "kappa", "dt", "eps_conv", "max_steps"});
    base.schedules.beta = parse_schedule(sched["beta"], "beta", iterations, base.schedules.beta);
    base.schedules.gamma = parse_schedule(sched["gamma"], "gamma", iterations, base.schedules.gamma);
    if (sched["kappa"]) base.schedules.kappa = as_double(sched["kappa"], "schedules.kappa");
    if (sched["dt"]) base.schedules.dt = as_double(sched["dt"], "schedules.dt");
    if (sched["eps_conv"]) base.schedules.eps_conv = as_double(sched["eps_conv"], "schedules.eps_conv");
    if (sched["max_steps"]) base.schedules.max_steps = as_int(sched["max_steps"], "schedules.max_steps");
    try {
      base.schedules.validate();
    } catch (const std::exception& e) {
      fail(sched, e.what());
    }
  }

  const YAML::Node gp = root["gp"];
  if (gp) {
    require_map(gp, "gp");
    check_keys(gp, "gp", {"sigma_m", "tau_min", "tau_max", "tau_grid"});
    if (gp["sigma_m"]) base.measurement.noise_std = as_double(gp["sigma_m"], "gp.sigma_m");
    if (gp["tau_min"]) base.gp_search.tau_min = as_double(gp["tau_min"], "gp.tau_min") * diam;
    if (gp["tau_max"]) base.gp_search.tau_max = as_double(gp["tau_max"], "gp.tau_max") * diam;
    if (gp["tau_grid"]) base.gp_search.grid_points = as_int(gp["tau_grid"], "gp.tau_grid");
    base.gp_search.tau_default = std::sqrt(base.gp_search.tau_min * base.gp_search.tau_max);
  }

  const YAML::Node comm = root["comm"];
  if (comm) {
    require_map(comm, "comm");
    check_keys(comm, "comm", {"theta", "direction", "invalid_bounds"});
    if (comm["theta"]) base.theta = as_double(comm["theta"], "comm.theta");
    if (comm["direction"]) {
      const std::string dir = as_string(comm["direction"], "comm.direction");
      if (dir == "accept_if_geq")
        base.direction = ThresholdDirection::AcceptIfGeq;
      else if (dir == "accept_if_leq")
        base.direction = ThresholdDirection::AcceptIfLeq;
      else
        fail(comm["direction"], "comm.direction must be accept_if_geq or accept_if_leq");
    }
    if (comm["invalid_bounds"]) {
      const std::string policy = as_string(comm["invalid_bounds"], "comm.invalid_bounds");
      if (policy == "accept")
        base.invalid_policy = InvalidBoundPolicy::Accept;
      else if (policy == "reject")
        base.invalid_policy = InvalidBoundPolicy::Reject;
      else
        fail(comm["invalid_bounds"], "comm.invalid_bounds must be accept or reject");
    }
  }

  const YAML::Node oracle = root["oracle"];
  if (oracle) {
    require_map(oracle, "oracle");
    check_keys(oracle, "oracle", {"restarts", "seed"});
    if (oracle["restarts"]) base.oracle_restarts = as_int(oracle["restarts"], "oracle.restarts");
    if (oracle["seed"]) base.oracle_seed = as_u64(oracle["seed"], "oracle.seed");
  }

  const YAML::Node densities = root["densities"];
  if (!densities || !densities.IsSequence() || densities.size() == 0)
    throw ConfigError("config needs a non-empty 'densities' list");
  std::set<std::string> names;
  for (const auto& dnode : densities) {
    ScenarioConfig scenario = base;
    scenario.density = parse_density(dnode, domain);
    if (!names.insert(scenario.density.name).second)
      fail(dnode, "duplicate density name '" + scenario.density.name + "'");
    try {
      scenario.validate();
    } catch (const std::exception& e) {
      fail(dnode, e.what());
    }
    spec.scenarios.push_back(std::move(scenario));
  }

  return spec;
}

}  // namespace vorocover
