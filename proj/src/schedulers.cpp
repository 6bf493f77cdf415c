#include "vecoff/schedulers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>
#include <vector>

#include "vecoff/errors.hpp"
#include "vecoff/rng.hpp"

namespace vecoff {

SchedulerKind parse_scheduler_kind(const std::string& name) {
  if (name == "local" || name == "all-local") return SchedulerKind::AllLocal;
  if (name == "round-robin" || name == "all-edge") return SchedulerKind::AllEdgeRoundRobin;
  if (name == "random") return SchedulerKind::Random;
  if (name == "greedy" || name == "greedy-eft") return SchedulerKind::GreedyEFT;
  if (name == "exhaustive" || name == "oracle") return SchedulerKind::Exhaustive;
  throw ConfigError("unknown scheduler '" + name + "'");
}

std::string scheduler_name(SchedulerKind kind) {
  switch (kind) {
    case SchedulerKind::AllLocal: return "all-local";
    case SchedulerKind::AllEdgeRoundRobin: return "round-robin";
    case SchedulerKind::Random: return "random";
    case SchedulerKind::GreedyEFT: return "greedy-eft";
    case SchedulerKind::Exhaustive: return "exhaustive";
  }
  return "?";
}

double assignment_space_size(const Scenario& scn) {
  const double base = static_cast<double>(scn.num_actions());
  double total = 1.0;
  for (const auto& d : scn.dags) total *= std::pow(base, static_cast<double>(d.size()));
  return total;
}

namespace {

Assignment from_decisions(const Scenario& scn, const std::vector<DecisionSlot>& order,
                          const std::vector<Action>& decisions) {
  Assignment asg(scn.num_vehicles());
  for (std::size_t v = 0; v < scn.num_vehicles(); ++v) asg[v].resize(scn.dags[v].size());
  for (std::size_t i = 0; i < order.size(); ++i) asg[order[i].vehicle][order[i].node] = decisions[i];
  return asg;
}

Assignment greedy_eft(const Scenario& scn) {
  const auto order = decision_order(scn);
  const std::size_t A = scn.num_actions();
  const std::size_t M = scn.num_processors();
  std::vector<Action> decided;
  decided.reserve(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    Action best_action;
    decided.push_back(Action::local());
    for (std::size_t a = 0; a < A; ++a) {
      decided.back() = Action::from_index(a, M);
      const double ms = simulate_prefix(scn, decided).makespan;
      if (ms < best) {
        best = ms;
        best_action = decided.back();
      }
    }
    decided.back() = best_action;
  }
  return from_decisions(scn, order, decided);
}

struct Best {
  double aet = std::numeric_limits<double>::infinity();
  std::uint64_t code = 0;
};

// Decodes `code` as a base-A number, most significant digit first in decision order,
// so increasing codes enumerate assignments lexicographically.
void decode(std::uint64_t code, std::size_t A, std::size_t M, std::vector<Action>& out) {
  for (std::size_t i = out.size(); i-- > 0;) {
    out[i] = Action::from_index(static_cast<std::size_t>(code % A), M);
    code /= A;
  }
}

Assignment exhaustive(const Scenario& scn, const SchedulerOptions& opts) {
  const double space = assignment_space_size(scn);
  if (space > opts.exhaustive_cap) {
    throw CapExceeded("exhaustive search over " + std::to_string(space) +
                      " assignments exceeds cap " + std::to_string(opts.exhaustive_cap));
  }
  const auto order = decision_order(scn);
  const std::size_t A = scn.num_actions();
  const std::size_t M = scn.num_processors();
  const auto total = static_cast<std::uint64_t>(space);

  const std::size_t workers = std::max<std::size_t>(1, std::min<std::uint64_t>(opts.threads, total));
  std::vector<Best> partial(workers);
  auto run = [&](std::size_t w) {
    const std::uint64_t lo = total * w / workers;
    const std::uint64_t hi = total * (w + 1) / workers;
    std::vector<Action> decisions(order.size());
    Best best;
    for (std::uint64_t code = lo; code < hi; ++code) {
      decode(code, A, M, decisions);
      const double value = simulate(scn, from_decisions(scn, order, decisions)).aet();
      if (value < best.aet) best = {value, code};
    }
    partial[w] = best;
  };
  if (workers == 1) {
    run(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run, w);
    for (auto& t : pool) t.join();
  }
  // Chunks are in code order, so a strict comparison keeps the lexicographic minimum.
  Best best = partial[0];
  for (std::size_t w = 1; w < workers; ++w)
    if (partial[w].aet < best.aet) best = partial[w];
  std::vector<Action> decisions(order.size());
  decode(best.code, A, M, decisions);
  return from_decisions(scn, order, decisions);
}

}  // namespace

Assignment schedule(SchedulerKind kind, const Scenario& scn, const SchedulerOptions& opts) {
  scn.validate();
  const auto order = decision_order(scn);
  const std::size_t M = scn.num_processors();
  const std::size_t A = scn.num_actions();
  std::vector<Action> decisions(order.size());
  switch (kind) {
    case SchedulerKind::AllLocal:
      break;
    case SchedulerKind::AllEdgeRoundRobin:
      for (std::size_t i = 0; i < decisions.size(); ++i)
        decisions[i] = Action::from_index(1 + i % (A - 1), M);
      break;
    case SchedulerKind::Random: {
      Rng rng(opts.seed);
      for (auto& d : decisions)
        d = Action::from_index(static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(A) - 1)), M);
      break;
    }
    case SchedulerKind::GreedyEFT:
      return greedy_eft(scn);
    case SchedulerKind::Exhaustive:
      return exhaustive(scn, opts);
  }
  return from_decisions(scn, order, decisions);
}

double oracle_gap(const Scenario& scn, const Assignment& asg, const SchedulerOptions& opts) {
  const Assignment best = schedule(SchedulerKind::Exhaustive, scn, opts);
  return aet(scn, asg) / aet(scn, best);
}

}  // namespace vecoff
