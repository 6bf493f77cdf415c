#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "vecoff/dag.hpp"

namespace vecoff {

struct VehicleSpec {
  double local_freq = 0.0;   // f_v, cycles/s
  double tx_power_mw = 0.0;  // q_v
  double gain = 0.0;         // g_v, shared by uplink and downlink

  bool operator==(const VehicleSpec&) const = default;
};

struct Scenario {
  std::vector<VehicleSpec> vehicles;
  std::vector<double> uplink_bw_hz;     // w_r, one per subchannel (R entries)
  double downlink_bw_hz = 0.0;          // w_d
  double mec_tx_power_mw = 0.0;         // q_m
  std::vector<double> edge_freqs;       // f_m, one per edge processor (M entries)
  double noise_mw = 0.0;                // varpi
  std::vector<TaskDag> dags;            // one per vehicle

  std::size_t num_vehicles() const { return vehicles.size(); }
  std::size_t num_channels() const { return uplink_bw_hz.size(); }
  std::size_t num_processors() const { return edge_freqs.size(); }
  std::size_t num_actions() const { return 1 + num_channels() * num_processors(); }
  std::size_t total_subtasks() const;

  // Throws InputError when an invariant is broken.
  void validate() const;

  bool operator==(const Scenario&) const = default;
};

// Offloading decision for one subtask. channel == 0 means local execution;
// otherwise channel in 1..R and processor in 1..M.
struct Action {
  int channel = 0;
  int processor = 0;

  static Action local() { return {}; }
  static Action edge(int r, int m) { return {r, m}; }
  bool is_local() const { return channel == 0; }

  // 0 for local, 1 + (r-1)*M + (m-1) for Edge(r, m).
  std::size_t index(std::size_t num_processors) const;
  static Action from_index(std::size_t idx, std::size_t num_processors);

  bool operator==(const Action&) const = default;
};

// Indexed [vehicle][node].
using Assignment = std::vector<std::vector<Action>>;
using PartialAssignment = std::vector<std::vector<std::optional<Action>>>;

// Decision sequence: vehicles in order, each vehicle's subtasks in topological order.
struct DecisionSlot {
  std::size_t vehicle;
  std::size_t node;
};
std::vector<DecisionSlot> decision_order(const Scenario& scn);

enum class ResourceKind { Local, Uplink, Edge, Downlink };
enum class JobKind { Upload, Download, Compute };

struct ServiceRecord {
  JobKind kind;
  std::size_t vehicle;
  std::size_t node;  // subtask served; for downloads, the edge parent whose output is sent
  double arrival;
  double start;
  double end;
};

struct ResourceLog {
  ResourceKind kind;
  std::size_t index;  // vehicle for Local, 1-based channel/processor otherwise, 0 for downlink
  std::vector<ServiceRecord> log;
  std::string name() const;
};

struct SubtaskTimes {
  double te = 0.0;  // all inputs present at the execution site
  double cs = 0.0;  // computation start
  double ce = 0.0;  // computation end
};

struct Timeline {
  // Indexed [vehicle][node]; undecided subtasks of a prefix run are nullopt.
  std::vector<std::vector<std::optional<SubtaskTimes>>> subtasks;
  std::vector<ResourceLog> resources;
  std::vector<double> vehicle_et;  // max CE - ST over decided subtasks (0 when none)

  const SubtaskTimes& at(std::size_t v, std::size_t p) const;
  double aet() const;
};

double uplink_rate(const Scenario& scn, std::size_t vehicle, std::size_t channel_1based);
double downlink_rate(const Scenario& scn, std::size_t vehicle);
double compute_duration(double cycles, double freq);

void check_assignment(const Scenario& scn, const Assignment& asg);

Timeline simulate(const Scenario& scn, const Assignment& asg);

// Simulates only the decided subtasks. Decided subtasks must be closed under
// the parent relation; throws InputError otherwise.
Timeline simulate_partial(const Scenario& scn, const PartialAssignment& partial);

struct PrefixResult {
  Timeline timeline;
  // Sum over vehicles with at least one decided subtask of their max CE.
  // With one vehicle this is the max CE over decided subtasks.
  double makespan = 0.0;
};

// `decisions` are the first t entries of decision_order(scn).
PrefixResult simulate_prefix(const Scenario& scn, std::span<const Action> decisions);

double aet(const Scenario& scn, const Assignment& asg);

struct Range {
  double lo = 0.0;
  double hi = 0.0;
  double mid() const { return 0.5 * (lo + hi); }
  bool operator==(const Range&) const = default;
};

struct ScenarioDistribution {
  std::size_t vehicles = 1;
  std::size_t channels = 4;
  std::size_t processors = 3;
  Range uplink_bw_hz{3e6, 6e6};
  Range downlink_bw_hz{10e6, 10e6};
  Range mec_tx_power_mw{1000.0, 1000.0};
  Range edge_freq{2e9, 3e9};
  Range local_freq{1e9, 2e9};
  Range tx_power_mw{100.0, 200.0};
  Range gain{1.0, 3.0};
  Range noise_mw{1e-5, 1e-5};
  DagGenParams dag;  // seed field ignored; per-vehicle seeds come from rng_seed
  std::uint64_t seed = 0;

  void validate() const;
  // Rate and frequency of the all-midpoints scenario; used for ccr calibration.
  double reference_rate() const;
  double reference_freq() const;

  bool operator==(const ScenarioDistribution&) const = default;
};

Scenario sample_scenario(const ScenarioDistribution& dist);

nlohmann::json scenario_to_json(const Scenario& scn);
Scenario scenario_from_json(const nlohmann::json& j);
nlohmann::json assignment_to_json(const Assignment& asg);
Assignment assignment_from_json(const nlohmann::json& j);
nlohmann::json timeline_to_json(const Timeline& tl);

}  // namespace vecoff
