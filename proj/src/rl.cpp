#include "vecoff/rl.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "vecoff/errors.hpp"
#include "vecoff/rng.hpp"

namespace vecoff::rl {

using nn::Tape;
using nn::Var;

void PpoConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("PpoConfig: " + m); };
  if (!(clip >= 0.0 && clip < 1.0)) fail("clip must lie in [0,1)");
  if (!(gamma > 0.0 && gamma <= 1.0)) fail("gamma must lie in (0,1]");
  if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) fail("gae_lambda must lie in [0,1]");
  if (!(lr > 0.0) || !std::isfinite(lr)) fail("lr must be positive");
  if (!(kl_coef >= 0.0)) fail("kl_coef must be >= 0");
  if (minibatch < 1) fail("minibatch must be >= 1");
  if (episodes < 1) fail("episodes must be >= 1");
}

Trajectory rollout(const nn::ParamVector& params, const nn::PolicyLayout& layout,
                   std::shared_ptr<const Scenario> scenario, std::uint64_t seed,
                   RolloutMode mode) {
  const Scenario& scn = *scenario;
  Tape tape(false);
  const nn::BoundParams bp(tape, params);
  Rng rng(seed);
  auto choose = [&](std::span<const double> probs) -> std::size_t {
    if (mode == RolloutMode::Greedy)
      return static_cast<std::size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin());
    const double u = rng.uniform01();
    double acc = 0.0;
    for (std::size_t a = 0; a < probs.size(); ++a) {
      acc += probs[a];
      if (u < acc) return a;
    }
    return probs.size() - 1;
  };
  const auto records = nn::run_policy(tape, bp, layout, scn, choose);

  Trajectory traj;
  traj.scenario = scenario;
  traj.steps.reserve(records.size());
  std::vector<Action> decisions;
  decisions.reserve(records.size());
  double prev_makespan = 0.0;
  for (const auto& r : records) {
    Step s;
    s.vehicle = r.vehicle;
    s.node = r.node;
    s.action = r.action;
    s.log_prob = tape.value(r.log_probs)[r.action];
    s.value = tape.scalar(r.value);
    decisions.push_back(Action::from_index(r.action, scn.num_processors()));
    const double makespan = simulate_prefix(scn, decisions).makespan;
    s.reward = -(makespan - prev_makespan);
    prev_makespan = makespan;
    traj.steps.push_back(s);
  }
  traj.assignment.resize(scn.num_vehicles());
  for (std::size_t v = 0; v < scn.num_vehicles(); ++v) traj.assignment[v].resize(scn.dags[v].size());
  for (std::size_t i = 0; i < records.size(); ++i)
    traj.assignment[records[i].vehicle][records[i].node] = decisions[i];
  traj.aet = aet(scn, traj.assignment);
  return traj;
}

GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values,
                      double gamma, double lambda) {
  if (rewards.size() != values.size()) throw std::invalid_argument("compute_gae: length mismatch");
  const std::size_t n = rewards.size();
  GaeResult out{std::vector<double>(n), std::vector<double>(n)};
  double running = 0.0;
  for (std::size_t t = n; t-- > 0;) {
    const double next_value = t + 1 < n ? values[t + 1] : 0.0;
    const double delta = rewards[t] + gamma * next_value - values[t];
    running = delta + gamma * lambda * running;
    out.advantages[t] = running;
    out.returns[t] = running + values[t];
  }
  return out;
}

void compute_gae(Trajectory& traj, double gamma, double lambda) {
  std::vector<double> r, v;
  for (const auto& s : traj.steps) {
    r.push_back(s.reward);
    v.push_back(s.value);
  }
  const auto g = compute_gae(r, v, gamma, lambda);
  for (std::size_t i = 0; i < traj.steps.size(); ++i) {
    traj.steps[i].advantage = g.advantages[i];
    traj.steps[i].ret = g.returns[i];
  }
}

void normalize_advantages(std::span<Trajectory> batch) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& t : batch)
    for (const auto& s : t.steps) {
      sum += s.advantage;
      ++n;
    }
  if (n == 0) return;
  const double mean = sum / static_cast<double>(n);
  double sq = 0.0;
  for (const auto& t : batch)
    for (const auto& s : t.steps) sq += (s.advantage - mean) * (s.advantage - mean);
  const double sd = std::sqrt(sq / static_cast<double>(n));
  const bool scale = n > 1 && sd > 1e-12;
  for (auto& t : batch)
    for (auto& s : t.steps) s.advantage = scale ? (s.advantage - mean) / sd : s.advantage - mean;
}

Var clipped_surrogate_loss(Tape& t, Var log_prob, double old_log_prob, double advantage,
                           double clip) {
  const Var ratio = t.exp(t.add_scalar(log_prob, -old_log_prob));
  const Var unclipped = t.scale(ratio, advantage);
  const Var clipped = t.scale(t.clamp(ratio, 1.0 - clip, 1.0 + clip), advantage);
  return t.scale(t.min(unclipped, clipped), -1.0);
}

UpdateReport ppo_update(nn::ParamVector& params, const nn::PolicyLayout& layout,
                        std::vector<Trajectory>& batch, const PpoConfig& cfg,
                        std::uint64_t shuffle_seed) {
  cfg.validate();
  if (batch.empty()) throw std::invalid_argument("ppo_update: empty batch");
  for (auto& traj : batch) compute_gae(traj, cfg.gamma, cfg.gae_lambda);
  normalize_advantages(batch);

  UpdateReport report;
  double aet_sum = 0.0;
  for (const auto& traj : batch) aet_sum += traj.aet;
  report.mean_aet = aet_sum / static_cast<double>(batch.size());

  Rng rng(shuffle_seed);
  std::size_t evaluations = 0;
  std::vector<double> grad(params.values.size());
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<std::size_t> order(batch.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(order[i - 1], order[j]);
    }
    std::size_t cursor = 0;
    while (cursor < order.size()) {
      std::vector<std::size_t> members;
      std::size_t steps = 0;
      while (cursor < order.size() && (members.empty() || steps < cfg.minibatch)) {
        members.push_back(order[cursor]);
        steps += batch[order[cursor]].steps.size();
        ++cursor;
      }

      Tape tape(true);
      const nn::BoundParams bp(tape, params);
      std::vector<Var> actor_terms, critic_terms;
      double surrogate = 0.0, kl = 0.0, entropy = 0.0;
      for (std::size_t idx : members) {
        const Trajectory& traj = batch[idx];
        std::size_t next = 0;
        auto replay = [&](std::span<const double>) { return traj.steps[next++].action; };
        const auto records = nn::run_policy(tape, bp, layout, *traj.scenario, replay);
        for (std::size_t i = 0; i < records.size(); ++i) {
          const Step& s = traj.steps[i];
          const Var logp = tape.pick(records[i].log_probs, s.action);
          const Var surr = clipped_surrogate_loss(tape, logp, s.log_prob, s.advantage, cfg.clip);
          // KL[old || new] estimated on the sampled action: log pi_old - log pi.
          const Var kl_term = tape.add_scalar(tape.scale(logp, -1.0), s.log_prob);
          actor_terms.push_back(tape.add(surr, tape.scale(kl_term, cfg.kl_coef)));
          critic_terms.push_back(tape.square(tape.add_scalar(records[i].value, -s.ret)));
          surrogate += tape.scalar(surr);
          kl += tape.scalar(kl_term);
          for (double lp : tape.value(records[i].log_probs)) entropy -= std::exp(lp) * lp;
        }
      }
      const double count = static_cast<double>(actor_terms.size());
      const Var actor = tape.mean(actor_terms);
      const Var critic = tape.mean(critic_terms);
      const Var loss = tape.add(actor, critic);
      tape.backward(loss);
      std::fill(grad.begin(), grad.end(), 0.0);
      tape.accumulate_param_grads(grad);
      double norm = 0.0;
      for (double g : grad) norm += g * g;
      if (!std::isfinite(norm) || !std::isfinite(tape.scalar(loss)))
        throw std::runtime_error("ppo_update: non-finite loss or gradient (learning rate too large?)");
      report.max_grad_norm = std::max(report.max_grad_norm, std::sqrt(norm));
      for (std::size_t i = 0; i < grad.size(); ++i) params.values[i] -= cfg.lr * grad[i];

      report.actor_loss += surrogate / count;
      report.critic_loss += tape.scalar(critic);
      report.kl += kl / count;
      report.entropy += entropy / count;
      ++evaluations;
      ++report.sgd_steps;
    }
  }
  if (evaluations > 0) {
    const double e = static_cast<double>(evaluations);
    report.actor_loss /= e;
    report.critic_loss /= e;
    report.kl /= e;
    report.entropy /= e;
  }
  return report;
}

UpdateReport collect_and_update(nn::ParamVector& params, const nn::PolicyLayout& layout,
                                std::shared_ptr<const Scenario> scenario, const PpoConfig& cfg,
                                std::uint64_t seed) {
  std::vector<Trajectory> batch;
  batch.reserve(cfg.episodes);
  for (std::size_t e = 0; e < cfg.episodes; ++e)
    batch.push_back(rollout(params, layout, scenario, derive_seed(seed, 0xe9, e)));
  return ppo_update(params, layout, batch, cfg, derive_seed(seed, 0x5f));
}

Evaluation summarize(std::vector<double> values) {
  Evaluation ev;
  ev.per_scenario = std::move(values);
  const auto n = static_cast<double>(ev.per_scenario.size());
  if (ev.per_scenario.empty()) return ev;
  double sum = 0.0;
  for (double x : ev.per_scenario) sum += x;
  ev.mean_aet = sum / n;
  if (ev.per_scenario.size() > 1) {
    double sq = 0.0;
    for (double x : ev.per_scenario) sq += (x - ev.mean_aet) * (x - ev.mean_aet);
    ev.ci95 = 1.96 * std::sqrt(sq / (n - 1.0)) / std::sqrt(n);
  }
  return ev;
}

Evaluation evaluate_policy(const nn::ParamVector& params, const nn::PolicyLayout& layout,
                           std::span<const Scenario> scenarios) {
  if (scenarios.empty()) throw std::invalid_argument("evaluate_policy: no scenarios");
  std::vector<double> values;
  values.reserve(scenarios.size());
  for (const auto& scn : scenarios) {
    auto ptr = std::make_shared<const Scenario>(scn);
    values.push_back(rollout(params, layout, ptr, 0, RolloutMode::Greedy).aet);
  }
  return summarize(std::move(values));
}

}  // namespace vecoff::rl
