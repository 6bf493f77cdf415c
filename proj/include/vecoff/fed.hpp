#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "vecoff/params.hpp"
#include "vecoff/policy.hpp"
#include "vecoff/rl.hpp"
#include "vecoff/sim.hpp"

namespace vecoff::fed {

// The only payload a server sends to the aggregator.
struct DeltaMessage {
  std::size_t round = 0;
  std::size_t server = 0;
  std::size_t scenario = 0;
  std::vector<double> delta;
  double mean_aet = 0.0;  // scalar diagnostics
  double actor_loss = 0.0;
  double critic_loss = 0.0;

  std::uint64_t payload_hash() const;
};

struct FedConfig {
  std::size_t servers = 3;              // K
  std::size_t scenarios_per_round = 2;  // B
  std::size_t rounds = 10;              // K_outer
  double beta_meta = 1.0;
  rl::PpoConfig ppo;
  nn::PolicyDims dims;
  std::vector<ScenarioDistribution> server_dists;  // one per server; seed fields are overridden
  ScenarioDistribution heldout_dist;
  std::size_t heldout_scenarios = 8;
  std::uint64_t seed = 1;
  std::size_t threads = 1;

  void validate() const;
};

struct AdaptResult {
  nn::ParamVector adapted;
  std::vector<double> delta;
  rl::UpdateReport report;
};

// Starts from `meta`, collects episodes on `scenario` and runs cfg.epochs PPO
// epochs. Trajectories stay inside this call.
AdaptResult local_adapt(const nn::ParamVector& meta, const nn::PolicyLayout& layout,
                        std::shared_ptr<const Scenario> scenario, const rl::PpoConfig& cfg,
                        std::uint64_t seed);

// theta + beta * mean(deltas); deltas summed in the given order.
nn::ParamVector aggregate(const nn::ParamVector& meta, std::span<const std::vector<double>> deltas,
                          double beta);

struct RoundReport {
  std::size_t round = 0;
  std::vector<double> server_delta_norm;  // mean L2 norm of each server's deltas
  double heldout_aet = 0.0;
  double heldout_ci95 = 0.0;
  double wall_seconds = 0.0;
};

struct UpdateRecord {
  std::size_t update = 0;  // global counter in (round, server, scenario) order
  std::size_t round = 0;
  std::size_t server = 0;
  std::size_t scenario = 0;
  rl::UpdateReport report;
};

struct TrainHooks {
  // Every message crossing the server boundary, in (server, scenario) order after the barrier.
  std::function<void(const DeltaMessage&)> audit;
  std::function<void(const UpdateRecord&)> on_update;
  // After aggregation and held-out evaluation; params are the new meta-parameters
  // (or, for independent training, one vector per server).
  std::function<void(const RoundReport&, std::span<const nn::ParamVector>)> on_round;
};

struct TrainResult {
  std::vector<nn::ParamVector> params;  // one meta vector, or one per server without federation
  std::vector<RoundReport> rounds;
};

std::uint64_t scenario_seed(std::uint64_t master, std::size_t round, std::size_t server,
                            std::size_t index);
std::vector<Scenario> heldout_set(const FedConfig& cfg);
nn::ParamVector initial_params(const FedConfig& cfg);

TrainResult train_federated(const FedConfig& cfg, const TrainHooks& hooks = {});

// No aggregation: each server runs plain PPO on its own scenarios, starting from the
// same initialization.
TrainResult train_independent(const FedConfig& cfg, const TrainHooks& hooks = {});

struct AdaptCurve {
  nn::ParamVector params;
  std::vector<double> aet;  // greedy AET before any update, then after each update
};

AdaptCurve fast_adapt(const nn::ParamVector& meta, const nn::PolicyLayout& layout,
                      std::shared_ptr<const Scenario> scenario, std::size_t steps,
                      const rl::PpoConfig& cfg, std::uint64_t seed);

// Runs `count` jobs over up to `threads` workers; job i writes only its own slot.
void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& job);

}  // namespace vecoff::fed
