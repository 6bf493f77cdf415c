#include "vecoff/fed.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "vecoff/errors.hpp"
#include "vecoff/rng.hpp"

namespace vecoff::fed {

std::uint64_t DeltaMessage::payload_hash() const {
  std::vector<double> scalars{static_cast<double>(round), static_cast<double>(server),
                              static_cast<double>(scenario), mean_aet, actor_loss, critic_loss};
  return nn::fnv1a64(delta) ^ mix_seed(nn::fnv1a64(scalars));
}

void FedConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("FedConfig: " + m); };
  if (servers < 1) fail("servers must be >= 1");
  if (scenarios_per_round < 1) fail("scenarios_per_round must be >= 1");
  if (!(beta_meta > 0.0 && beta_meta <= 1.0)) fail("beta_meta must lie in (0,1]");
  if (server_dists.size() != servers) fail("need one scenario distribution per server");
  if (heldout_scenarios < 1) fail("heldout_scenarios must be >= 1");
  for (const auto& d : server_dists) {
    d.validate();
    if (d.channels != dims.channels || d.processors != dims.processors)
      fail("server distribution R/M differ from the policy dimensions");
  }
  heldout_dist.validate();
  ppo.validate();
}

void parallel_for(std::size_t count, std::size_t threads,
                  const std::function<void(std::size_t)>& job) {
  const std::size_t workers = std::max<std::size_t>(1, std::min(threads, count));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(count);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          job(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

AdaptResult local_adapt(const nn::ParamVector& meta, const nn::PolicyLayout& layout,
                        std::shared_ptr<const Scenario> scenario, const rl::PpoConfig& cfg,
                        std::uint64_t seed) {
  AdaptResult out{meta, {}, {}};
  if (cfg.epochs > 0) out.report = rl::collect_and_update(out.adapted, layout, scenario, cfg, seed);
  out.delta.resize(meta.values.size());
  for (std::size_t i = 0; i < out.delta.size(); ++i)
    out.delta[i] = out.adapted.values[i] - meta.values[i];
  return out;
}

nn::ParamVector aggregate(const nn::ParamVector& meta, std::span<const std::vector<double>> deltas,
                          double beta) {
  if (deltas.empty()) throw std::invalid_argument("aggregate: no deltas");
  const std::size_t n = meta.values.size();
  std::vector<double> sum(n, 0.0);
  for (const auto& d : deltas) {
    if (d.size() != n) throw std::invalid_argument("aggregate: delta length mismatch");
    for (std::size_t i = 0; i < n; ++i) sum[i] += d[i];
  }
  const double count = static_cast<double>(deltas.size());
  nn::ParamVector out = meta;
  for (std::size_t i = 0; i < n; ++i) out.values[i] = meta.values[i] + beta * (sum[i] / count);
  return out;
}

std::uint64_t scenario_seed(std::uint64_t master, std::size_t round, std::size_t server,
                            std::size_t index) {
  return derive_seed(master, 0x5ce0 + server, round, index);
}

std::vector<Scenario> heldout_set(const FedConfig& cfg) {
  std::vector<Scenario> out;
  for (std::size_t i = 0; i < cfg.heldout_scenarios; ++i) {
    ScenarioDistribution d = cfg.heldout_dist;
    d.seed = derive_seed(cfg.seed, 0x4e1d, i);
    out.push_back(sample_scenario(d));
  }
  return out;
}

nn::ParamVector initial_params(const FedConfig& cfg) {
  return nn::init_policy(cfg.dims, derive_seed(cfg.seed, 0x1417));
}

namespace {

double l2(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

struct ServerOutput {
  std::vector<DeltaMessage> messages;
  std::vector<rl::UpdateReport> reports;
};

// One server's work for a round. `base` is the parameter vector it starts every
// scenario from; with `sequential`, each scenario continues from the previous one.
ServerOutput run_server(const FedConfig& cfg, const nn::PolicyLayout& layout, nn::ParamVector& base,
                        std::size_t round, std::size_t server, bool sequential) {
  ServerOutput out;
  for (std::size_t i = 0; i < cfg.scenarios_per_round; ++i) {
    ScenarioDistribution d = cfg.server_dists[server];
    d.seed = scenario_seed(cfg.seed, round, server, i);
    auto scn = std::make_shared<const Scenario>(sample_scenario(d));
    AdaptResult r = local_adapt(base, layout, scn, cfg.ppo, derive_seed(d.seed, 0xada));
    DeltaMessage msg;
    msg.round = round;
    msg.server = server;
    msg.scenario = i;
    msg.delta = std::move(r.delta);
    msg.mean_aet = r.report.mean_aet;
    msg.actor_loss = r.report.actor_loss;
    msg.critic_loss = r.report.critic_loss;
    out.messages.push_back(std::move(msg));
    out.reports.push_back(r.report);
    if (sequential) base = std::move(r.adapted);
  }
  return out;
}

template <class Body>
TrainResult train_loop(const FedConfig& cfg, const TrainHooks& hooks, Body&& round_body,
                       std::size_t replicas) {
  cfg.validate();
  const nn::PolicyLayout layout(cfg.dims);
  TrainResult result;
  result.params.assign(replicas, initial_params(cfg));
  const auto heldout = heldout_set(cfg);
  std::size_t update_counter = 0;
  for (std::size_t round = 0; round < cfg.rounds; ++round) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<ServerOutput> outputs(cfg.servers);
    round_body(layout, result.params, round, outputs);

    RoundReport report;
    report.round = round;
    for (std::size_t k = 0; k < cfg.servers; ++k) {
      double norm = 0.0;
      for (std::size_t i = 0; i < outputs[k].messages.size(); ++i) {
        const DeltaMessage& msg = outputs[k].messages[i];
        if (hooks.audit) hooks.audit(msg);
        norm += l2(msg.delta);
        if (hooks.on_update) hooks.on_update({update_counter, round, k, i, outputs[k].reports[i]});
        ++update_counter;
      }
      report.server_delta_norm.push_back(norm / static_cast<double>(outputs[k].messages.size()));
    }
    std::vector<rl::Evaluation> evals(result.params.size());
    parallel_for(result.params.size(), cfg.threads, [&](std::size_t r) {
      evals[r] = rl::evaluate_policy(result.params[r], layout, heldout);
    });
    if (evals.size() == 1) {
      report.heldout_aet = evals[0].mean_aet;
      report.heldout_ci95 = evals[0].ci95;
    } else {
      std::vector<double> means;
      for (const auto& e : evals) means.push_back(e.mean_aet);
      const auto ev = rl::summarize(std::move(means));
      report.heldout_aet = ev.mean_aet;
      report.heldout_ci95 = ev.ci95;
    }
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (hooks.on_round) hooks.on_round(report, result.params);
    result.rounds.push_back(std::move(report));
  }
  return result;
}

}  // namespace

TrainResult train_federated(const FedConfig& cfg, const TrainHooks& hooks) {
  auto body = [&](const nn::PolicyLayout& layout, std::vector<nn::ParamVector>& params,
                  std::size_t round, std::vector<ServerOutput>& outputs) {
    const nn::ParamVector& meta = params[0];
    parallel_for(cfg.servers, cfg.threads, [&](std::size_t k) {
      nn::ParamVector base = meta;
      outputs[k] = run_server(cfg, layout, base, round, k, false);
    });
    // Barrier passed: only the messages are visible to the aggregator.
    std::vector<std::vector<double>> deltas;
    for (const auto& o : outputs)
      for (const auto& m : o.messages) deltas.push_back(m.delta);
    params[0] = aggregate(meta, deltas, cfg.beta_meta);
  };
  return train_loop(cfg, hooks, body, 1);
}

TrainResult train_independent(const FedConfig& cfg, const TrainHooks& hooks) {
  auto body = [&](const nn::PolicyLayout& layout, std::vector<nn::ParamVector>& params,
                  std::size_t round, std::vector<ServerOutput>& outputs) {
    parallel_for(cfg.servers, cfg.threads, [&](std::size_t k) {
      outputs[k] = run_server(cfg, layout, params[k], round, k, true);
    });
  };
  return train_loop(cfg, hooks, body, cfg.servers);
}

AdaptCurve fast_adapt(const nn::ParamVector& meta, const nn::PolicyLayout& layout,
                      std::shared_ptr<const Scenario> scenario, std::size_t steps,
                      const rl::PpoConfig& cfg, std::uint64_t seed) {
  AdaptCurve curve{meta, {}};
  const std::span<const Scenario> one(scenario.get(), 1);
  curve.aet.push_back(rl::evaluate_policy(curve.params, layout, one).mean_aet);
  for (std::size_t s = 0; s < steps; ++s) {
    rl::collect_and_update(curve.params, layout, scenario, cfg, derive_seed(seed, 0xfa57, s));
    curve.aet.push_back(rl::evaluate_policy(curve.params, layout, one).mean_aet);
  }
  return curve;
}

}  // namespace vecoff::fed
