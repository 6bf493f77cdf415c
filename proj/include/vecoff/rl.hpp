#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "vecoff/params.hpp"
#include "vecoff/policy.hpp"
#include "vecoff/sim.hpp"

namespace vecoff::rl {

struct PpoConfig {
  double clip = 0.2;         // epsilon
  double kl_coef = 0.01;     // beta_KL
  double gamma = 0.99;
  double gae_lambda = 0.95;
  std::size_t epochs = 4;    // inner steps m
  double lr = 1e-3;          // alpha
  std::size_t minibatch = 64;
  std::size_t episodes = 8;  // episodes collected per scenario

  void validate() const;
  bool operator==(const PpoConfig&) const = default;
};

struct Step {
  std::size_t vehicle = 0;
  std::size_t node = 0;
  std::size_t action = 0;  // 0 = local, 1 + (r-1)*M + (m-1) = Edge(r, m)
  double log_prob = 0.0;   // under the behaviour policy
  double value = 0.0;
  double reward = 0.0;
  double advantage = 0.0;
  double ret = 0.0;
};

struct Trajectory {
  std::shared_ptr<const Scenario> scenario;
  std::vector<Step> steps;  // decision order
  Assignment assignment;
  double aet = 0.0;         // AET of the complete assignment
};

enum class RolloutMode { Sample, Greedy };

// One episode: every vehicle's DAG in decision order. Rewards are
// r_t = -(M_t - M_{t-1}) with M the prefix makespan, so they sum to -M_N.
Trajectory rollout(const nn::ParamVector& params, const nn::PolicyLayout& layout,
                   std::shared_ptr<const Scenario> scenario, std::uint64_t seed,
                   RolloutMode mode = RolloutMode::Sample);

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

// Terminal bootstrap value is zero.
GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values,
                      double gamma, double lambda);
void compute_gae(Trajectory& traj, double gamma, double lambda);

// Scales advantages across the batch to mean 0 and (population) std 1.
// A single sample, or zero spread, is only centered.
void normalize_advantages(std::span<Trajectory> batch);

struct UpdateReport {
  double actor_loss = 0.0;   // clipped surrogate term, averaged over minibatches
  double critic_loss = 0.0;
  double kl = 0.0;           // E[log pi_old - log pi]
  double entropy = 0.0;
  double mean_aet = 0.0;     // AET of the collected episodes
  double max_grad_norm = 0.0;
  std::size_t sgd_steps = 0;
};

// -min(rho * A, clip(rho, 1 - eps, 1 + eps) * A), rho = exp(log_prob - old_log_prob).
nn::Var clipped_surrogate_loss(nn::Tape& t, nn::Var log_prob, double old_log_prob,
                               double advantage, double clip);

// cfg.epochs passes of shuffled minibatches (whole episodes, at least
// cfg.minibatch steps each), one SGD step per minibatch. Computes GAE and
// normalizes advantages first. Throws std::invalid_argument on an empty batch.
UpdateReport ppo_update(nn::ParamVector& params, const nn::PolicyLayout& layout,
                        std::vector<Trajectory>& batch, const PpoConfig& cfg,
                        std::uint64_t shuffle_seed);

// Collects cfg.episodes sampled episodes on `scenario`, then runs ppo_update.
UpdateReport collect_and_update(nn::ParamVector& params, const nn::PolicyLayout& layout,
                                std::shared_ptr<const Scenario> scenario, const PpoConfig& cfg,
                                std::uint64_t seed);

struct Evaluation {
  double mean_aet = 0.0;
  double ci95 = 0.0;  // half-width, 1.96 * s / sqrt(n); 0 for a single scenario
  std::vector<double> per_scenario;
};

// Greedy (argmax) rollouts, one per scenario.
Evaluation evaluate_policy(const nn::ParamVector& params, const nn::PolicyLayout& layout,
                           std::span<const Scenario> scenarios);

Evaluation summarize(std::vector<double> values);

}  // namespace vecoff::rl
