#pragma once

#include <vector>

#include "vecoff/sim.hpp"

namespace fixtures {

using vecoff::Action;
using vecoff::Edge;
using vecoff::Scenario;
using vecoff::SubtaskSpec;
using vecoff::TaskDag;
using vecoff::VehicleSpec;

// Powers, gains and noise all 1, so every rate equals its bandwidth exactly
// (log2(1 + 1) = 1). Times in the hand-worked cases come out as short decimals.
inline Scenario unit_scenario(std::vector<TaskDag> dags, std::vector<double> uplinks = {1e6, 2e6},
                              std::vector<double> edge_freqs = {2e9, 4e9}, double local_freq = 1e9,
                              double downlink = 4e6) {
  Scenario s;
  for (std::size_t v = 0; v < dags.size(); ++v) s.vehicles.push_back({local_freq, 1.0, 1.0});
  s.uplink_bw_hz = std::move(uplinks);
  s.downlink_bw_hz = downlink;
  s.mec_tx_power_mw = 1.0;
  s.edge_freqs = std::move(edge_freqs);
  s.noise_mw = 1.0;
  s.dags = std::move(dags);
  return s;
}

// 0 -> {1, 2} -> 3
inline TaskDag diamond(int vehicle = 0, double submit = 0.0) {
  return TaskDag(vehicle,
                 {{1e6, 1e9, 2e6}, {1e6, 2e9, 1e6}, {2e6, 1e9, 1e6}, {1e6, 1e9, 0.5e6}},
                 {{0, 1}, {0, 2}, {1, 3}, {2, 3}}, submit);
}

inline TaskDag chain(std::size_t n, int vehicle = 0) {
  std::vector<SubtaskSpec> nodes;
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i) {
    nodes.push_back({1e6 + 2.5e5 * static_cast<double>(i), 1e9 + 1e8 * static_cast<double>(i), 1.5e6});
    if (i > 0) edges.push_back({i - 1, i});
  }
  return TaskDag(vehicle, nodes, edges);
}

// Root 0 feeding n-1 leaves.
inline TaskDag fork(std::size_t n, int vehicle = 0) {
  std::vector<SubtaskSpec> nodes;
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i) {
    nodes.push_back({2e6 - 1e5 * static_cast<double>(i), 1.2e9 - 5e7 * static_cast<double>(i), 1e6});
    if (i > 0) edges.push_back({0, i});
  }
  return TaskDag(vehicle, nodes, edges);
}

inline vecoff::Assignment all_local(const Scenario& s) {
  vecoff::Assignment a(s.num_vehicles());
  for (std::size_t v = 0; v < s.num_vehicles(); ++v) a[v].assign(s.dags[v].size(), Action::local());
  return a;
}

}  // namespace fixtures
