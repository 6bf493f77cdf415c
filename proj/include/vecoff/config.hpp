#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "vecoff/dag.hpp"
#include "vecoff/fed.hpp"
#include "vecoff/policy.hpp"
#include "vecoff/rl.hpp"
#include "vecoff/schedulers.hpp"
#include "vecoff/sim.hpp"

namespace vecoff {

// (density, fat) crossing used to give servers and the held-out set distinct
// DAG shapes.
struct Topology {
  double density = 0.8;
  double fat = 0.5;
  bool operator==(const Topology&) const = default;
};

// Every knob of a run, flattened to key = value pairs. Defaults reproduce the
// reference system settings; a config file overrides defaults and command-line
// options override the file.
struct RunConfig {
  std::string command;
  std::string out;          // output file for single-artifact commands; empty = stdout
  std::string out_dir = "out";
  std::string scenario;     // input Scenario JSON (simulate / schedule / oracle)
  std::string assignment;   // input Assignment JSON (simulate)
  std::string checkpoint;   // meta-parameter checkpoint for adapt; empty = train first
  std::uint64_t seed = 1;
  std::size_t threads = 1;

  ScenarioDistribution dist;

  std::size_t servers = 3;
  std::size_t scenarios_per_round = 2;
  std::size_t rounds = 10;
  double beta_meta = 1.0;
  std::vector<Topology> server_topologies{{0.7, 0.4}, {0.7, 0.6}, {0.9, 0.4}};
  Topology heldout_topology{0.9, 0.6};
  std::size_t heldout_scenarios = 8;
  std::size_t checkpoint_every = 1;

  rl::PpoConfig ppo;
  nn::PolicyDims dims;
  bool no_gat = false;
  bool no_fed = false;

  std::string scheduler = "greedy-eft";
  double exhaustive_cap = 1e6;
  std::size_t adapt_steps = 5;
  std::size_t adapt_scenarios = 4;

  bool operator==(const RunConfig&) const = default;

  // Throws ConfigError for unknown keys or unparsable values.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  static const std::vector<std::string>& keys();
  static bool is_flag(const std::string& key);

  // Cross-field checks (counts, ranges, dimension agreement).
  void validate() const;

  nn::PolicyDims policy_dims() const;
  ScenarioDistribution distribution_for(const Topology& topo) const;
  fed::FedConfig fed_config() const;
  SchedulerOptions scheduler_options() const;
};

// One `key = value` per line in keys() order. '#' starts a comment.
std::string serialize_config(const RunConfig& cfg);
// serialize_config with the run-location and scheduling keys (command, out,
// out_dir, scenario, assignment, checkpoint, threads) reset to defaults, so the
// text depends only on what determines the results.
std::string serialize_portable_config(const RunConfig& cfg);
RunConfig parse_config(const std::string& text, RunConfig base = {});
RunConfig load_config(const std::string& path, RunConfig base = {});

std::string format_double(double x);  // 17 significant digits

}  // namespace vecoff
