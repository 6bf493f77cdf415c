#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "vecoff/sim.hpp"

namespace vecoff {

enum class SchedulerKind { AllLocal, AllEdgeRoundRobin, Random, GreedyEFT, Exhaustive };

struct SchedulerOptions {
  std::uint64_t seed = 0;            // Random
  double exhaustive_cap = 1e6;       // max number of assignments Exhaustive may enumerate
  std::size_t threads = 1;           // Exhaustive fan-out
};

SchedulerKind parse_scheduler_kind(const std::string& name);
std::string scheduler_name(SchedulerKind kind);

// prod over vehicles of (1 + R*M)^{n_v}, saturating at +inf.
double assignment_space_size(const Scenario& scn);

Assignment schedule(SchedulerKind kind, const Scenario& scn, const SchedulerOptions& opts = {});

// aet(asg) / aet(exhaustive optimum). Throws CapExceeded when the space is too large.
double oracle_gap(const Scenario& scn, const Assignment& asg, const SchedulerOptions& opts = {});

}  // namespace vecoff
