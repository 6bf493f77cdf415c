#pragma once

#include <cstdint>

#include "vecoff/rng.hpp"
#include "vecoff/sim.hpp"

namespace cases {

// Sampled scenario with small DAGs of random shape; n, density and fat are
// drawn per vehicle unless `n` is fixed.
inline vecoff::Scenario small_scenario(std::uint64_t seed, std::size_t vehicles, std::size_t R,
                                       std::size_t M, std::size_t n = 0) {
  vecoff::Rng rng(vecoff::derive_seed(seed, 0x7e57));
  vecoff::ScenarioDistribution d;
  d.vehicles = vehicles;
  d.channels = R;
  d.processors = M;
  d.dag.n = n ? n : static_cast<std::size_t>(rng.uniform_int(1, 5));
  d.dag.density = rng.uniform(0.2, 1.0);
  d.dag.fat = rng.uniform(0.2, 1.0);
  d.seed = seed;
  return vecoff::sample_scenario(d);
}

inline vecoff::Assignment random_assignment(const vecoff::Scenario& s, std::uint64_t seed) {
  vecoff::Rng rng(seed);
  vecoff::Assignment a(s.num_vehicles());
  for (std::size_t v = 0; v < s.num_vehicles(); ++v)
    for (std::size_t p = 0; p < s.dags[v].size(); ++p)
      a[v].push_back(vecoff::Action::from_index(
          static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(s.num_actions()) - 1)),
          s.num_processors()));
  return a;
}

// Decision-order flattening of an assignment.
inline std::vector<vecoff::Action> flatten(const vecoff::Scenario& s, const vecoff::Assignment& a) {
  std::vector<vecoff::Action> out;
  for (const auto& slot : vecoff::decision_order(s)) out.push_back(a[slot.vehicle][slot.node]);
  return out;
}

}  // namespace cases
