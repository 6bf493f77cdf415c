#include "vecoff/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <tuple>

#include "vecoff/errors.hpp"
#include "vecoff/rng.hpp"

namespace vecoff {

std::size_t Scenario::total_subtasks() const {
  std::size_t n = 0;
  for (const auto& d : dags) n += d.size();
  return n;
}

void Scenario::validate() const {
  auto fail = [](const std::string& m) { throw InputError("invalid scenario: " + m); };
  auto positive = [](double x) { return std::isfinite(x) && x > 0.0; };
  if (vehicles.empty()) fail("no vehicles");
  if (uplink_bw_hz.empty()) fail("R must be >= 1");
  if (edge_freqs.empty()) fail("M must be >= 1");
  if (dags.size() != vehicles.size()) fail("need exactly one DAG per vehicle");
  for (const auto& v : vehicles) {
    if (!positive(v.local_freq) || !positive(v.tx_power_mw) || !positive(v.gain))
      fail("vehicle parameters must be positive");
  }
  for (double w : uplink_bw_hz)
    if (!positive(w)) fail("uplink bandwidths must be positive");
  for (double f : edge_freqs)
    if (!positive(f)) fail("edge frequencies must be positive");
  if (!positive(downlink_bw_hz) || !positive(mec_tx_power_mw) || !positive(noise_mw))
    fail("downlink bandwidth, MEC power and noise must be positive");
}

std::size_t Action::index(std::size_t num_processors) const {
  if (is_local()) return 0;
  return 1 + static_cast<std::size_t>(channel - 1) * num_processors +
         static_cast<std::size_t>(processor - 1);
}

Action Action::from_index(std::size_t idx, std::size_t num_processors) {
  if (idx == 0) return local();
  const std::size_t k = idx - 1;
  return edge(static_cast<int>(k / num_processors) + 1, static_cast<int>(k % num_processors) + 1);
}

std::vector<DecisionSlot> decision_order(const Scenario& scn) {
  std::vector<DecisionSlot> order;
  order.reserve(scn.total_subtasks());
  for (std::size_t v = 0; v < scn.dags.size(); ++v)
    for (std::size_t p : scn.dags[v].topo_order()) order.push_back({v, p});
  return order;
}

std::string ResourceLog::name() const {
  switch (kind) {
    case ResourceKind::Local: return "local" + std::to_string(index);
    case ResourceKind::Uplink: return "uplink" + std::to_string(index);
    case ResourceKind::Edge: return "edge" + std::to_string(index);
    case ResourceKind::Downlink: return "downlink";
  }
  return "?";
}

const SubtaskTimes& Timeline::at(std::size_t v, std::size_t p) const {
  const auto& s = subtasks.at(v).at(p);
  if (!s) throw std::out_of_range("Timeline::at: subtask was not simulated");
  return *s;
}

double Timeline::aet() const {
  if (vehicle_et.empty()) return 0.0;
  double sum = 0.0;
  for (double e : vehicle_et) sum += e;
  return sum / static_cast<double>(vehicle_et.size());
}

double uplink_rate(const Scenario& scn, std::size_t vehicle, std::size_t channel_1based) {
  const auto& v = scn.vehicles.at(vehicle);
  const double w = scn.uplink_bw_hz.at(channel_1based - 1);
  return w * std::log2(1.0 + v.tx_power_mw * v.gain / scn.noise_mw);
}

double downlink_rate(const Scenario& scn, std::size_t vehicle) {
  const auto& v = scn.vehicles.at(vehicle);
  return scn.downlink_bw_hz * std::log2(1.0 + scn.mec_tx_power_mw * v.gain / scn.noise_mw);
}

double compute_duration(double cycles, double freq) { return cycles / freq; }

void check_assignment(const Scenario& scn, const Assignment& asg) {
  if (asg.size() != scn.num_vehicles()) throw InputError("assignment: wrong vehicle count");
  for (std::size_t v = 0; v < asg.size(); ++v) {
    if (asg[v].size() != scn.dags[v].size())
      throw InputError("assignment: vehicle " + std::to_string(v) + " does not cover every subtask");
  }
}

namespace {

struct Job {
  JobKind kind;
  std::size_t vehicle;
  std::size_t node;
  std::size_t topo_pos;
  std::size_t resource;
  double duration;
  double base;  // earliest arrival regardless of predecessors (ST)
  std::vector<std::size_t> succ;
  std::size_t pending = 0;
  double arrival = 0.0;
  double start = 0.0;
  double end = 0.0;
};

// (arrival, vehicle, topo position) with the job id as a final total-order guard.
struct QueueKey {
  double arrival;
  std::size_t vehicle;
  std::size_t topo_pos;
  std::size_t job;
  bool operator>(const QueueKey& o) const {
    return std::tie(arrival, vehicle, topo_pos, job) >
           std::tie(o.arrival, o.vehicle, o.topo_pos, o.job);
  }
};

template <class T>
using MinHeap = std::priority_queue<T, std::vector<T>, std::greater<>>;

void check_action(const Scenario& scn, std::size_t v, std::size_t p, const Action& a) {
  if (a.is_local()) {
    if (a.processor != 0) throw InputError("local action must have processor 0");
    return;
  }
  if (a.channel < 1 || static_cast<std::size_t>(a.channel) > scn.num_channels() ||
      a.processor < 1 || static_cast<std::size_t>(a.processor) > scn.num_processors()) {
    throw InputError("action for vehicle " + std::to_string(v) + " node " + std::to_string(p) +
                     " is out of range");
  }
}

}  // namespace

Timeline simulate_partial(const Scenario& scn, const PartialAssignment& partial) {
  scn.validate();
  const std::size_t V = scn.num_vehicles();
  const std::size_t R = scn.num_channels();
  const std::size_t M = scn.num_processors();
  if (partial.size() != V) throw InputError("assignment: wrong vehicle count");

  // Resource ids: [0, V) local, [V, V+R) uplinks, [V+R, V+R+M) edge, V+R+M downlink.
  const std::size_t downlink = V + R + M;
  std::vector<Job> jobs;
  std::vector<std::vector<std::size_t>> compute_job(V);
  std::vector<std::vector<std::size_t>> download_job(V);

  auto add_job = [&](JobKind kind, std::size_t v, std::size_t node, std::size_t resource,
                     double duration) {
    Job j{kind, v, node, scn.dags[v].topo_position(node), resource, duration,
          scn.dags[v].submit_time(), {}, 0, 0.0, 0.0, 0.0};
    jobs.push_back(std::move(j));
    return jobs.size() - 1;
  };
  auto add_dep = [&](std::size_t from, std::size_t to) {
    jobs[from].succ.push_back(to);
    ++jobs[to].pending;
  };

  for (std::size_t v = 0; v < V; ++v) {
    const TaskDag& dag = scn.dags[v];
    if (partial[v].size() != dag.size())
      throw InputError("assignment: vehicle " + std::to_string(v) + " has wrong subtask count");
    constexpr std::size_t none = std::numeric_limits<std::size_t>::max();
    compute_job[v].assign(dag.size(), none);
    download_job[v].assign(dag.size(), none);
    for (std::size_t p : dag.topo_order()) {
      if (!partial[v][p]) continue;
      const Action a = *partial[v][p];
      check_action(scn, v, p, a);
      for (std::size_t k : dag.parents(p)) {
        if (!partial[v][k]) {
          throw InputError("prefix out of order: vehicle " + std::to_string(v) + " node " +
                           std::to_string(p) + " decided before parent " + std::to_string(k));
        }
      }
      const SubtaskSpec& s = dag.node(p);
      if (a.is_local()) {
        const std::size_t c = add_job(JobKind::Compute, v, p, v,
                                      compute_duration(s.cycles, scn.vehicles[v].local_freq));
        compute_job[v][p] = c;
        for (std::size_t k : dag.parents(p)) {
          if (partial[v][k]->is_local()) {
            add_dep(compute_job[v][k], c);
          } else {
            if (download_job[v][k] == none) {
              const double bits = dag.node(k).output_bits;
              download_job[v][k] = add_job(JobKind::Download, v, k, downlink,
                                           bits / downlink_rate(scn, v));
              add_dep(compute_job[v][k], download_job[v][k]);
            }
            add_dep(download_job[v][k], c);
          }
        }
      } else {
        double payload = s.input_bits;
        for (std::size_t k : dag.parents(p))
          if (partial[v][k]->is_local()) payload += dag.node(k).output_bits;
        const auto r = static_cast<std::size_t>(a.channel);
        const auto m = static_cast<std::size_t>(a.processor);
        const std::size_t u = add_job(JobKind::Upload, v, p, V + r - 1,
                                      payload / uplink_rate(scn, v, r));
        const std::size_t c = add_job(JobKind::Compute, v, p, V + R + m - 1,
                                      compute_duration(s.cycles, scn.edge_freqs[m - 1]));
        compute_job[v][p] = c;
        add_dep(u, c);
        for (std::size_t k : dag.parents(p)) {
          if (partial[v][k]->is_local())
            add_dep(compute_job[v][k], u);
          else
            add_dep(compute_job[v][k], c);
        }
      }
    }
  }

  // Event loop. At each event time: completions, then arrivals, then dispatch.
  const std::size_t num_resources = V + R + M + 1;
  std::vector<MinHeap<QueueKey>> queues(num_resources);
  std::vector<bool> busy(num_resources, false);
  std::vector<std::vector<std::size_t>> served(num_resources);
  MinHeap<QueueKey> released;
  MinHeap<std::pair<double, std::size_t>> running;

  auto release = [&](std::size_t id) {
    Job& j = jobs[id];
    released.push({j.arrival, j.vehicle, j.topo_pos, id});
  };
  for (std::size_t id = 0; id < jobs.size(); ++id) {
    if (jobs[id].pending == 0) {
      jobs[id].arrival = jobs[id].base;
      release(id);
    }
  }

  constexpr double inf = std::numeric_limits<double>::infinity();
  std::size_t finished = 0;
  while (finished < jobs.size()) {
    const double t_done = running.empty() ? inf : running.top().first;
    const double t_arrive = released.empty() ? inf : released.top().arrival;
    const double t = std::min(t_done, t_arrive);
    if (t == inf) throw std::logic_error("simulate: deadlock in job graph");

    while (!running.empty() && running.top().first == t) {
      const std::size_t id = running.top().second;
      running.pop();
      busy[jobs[id].resource] = false;
      ++finished;
      for (std::size_t s : jobs[id].succ) {
        Job& next = jobs[s];
        next.arrival = std::max(next.arrival, jobs[id].end);
        if (--next.pending == 0) {
          next.arrival = std::max(next.arrival, next.base);
          release(s);
        }
      }
    }
    while (!released.empty() && released.top().arrival <= t) {
      const QueueKey k = released.top();
      released.pop();
      queues[jobs[k.job].resource].push(k);
    }
    for (std::size_t r = 0; r < num_resources; ++r) {
      if (busy[r] || queues[r].empty()) continue;
      const std::size_t id = queues[r].top().job;
      queues[r].pop();
      Job& j = jobs[id];
      j.start = t;
      j.end = t + j.duration;
      busy[r] = true;
      served[r].push_back(id);
      running.push({j.end, id});
    }
  }

  Timeline tl;
  tl.subtasks.resize(V);
  tl.vehicle_et.assign(V, 0.0);
  for (std::size_t v = 0; v < V; ++v) {
    tl.subtasks[v].assign(scn.dags[v].size(), std::nullopt);
    double max_ce = -inf;
    for (std::size_t p = 0; p < scn.dags[v].size(); ++p) {
      const std::size_t id = compute_job[v][p];
      if (id >= jobs.size()) continue;
      const Job& j = jobs[id];
      tl.subtasks[v][p] = SubtaskTimes{j.arrival, j.start, j.end};
      max_ce = std::max(max_ce, j.end);
    }
    if (max_ce > -inf) tl.vehicle_et[v] = max_ce - scn.dags[v].submit_time();
  }
  tl.resources.reserve(num_resources);
  for (std::size_t r = 0; r < num_resources; ++r) {
    ResourceLog log;
    if (r < V) {
      log.kind = ResourceKind::Local;
      log.index = r;
    } else if (r < V + R) {
      log.kind = ResourceKind::Uplink;
      log.index = r - V + 1;
    } else if (r < V + R + M) {
      log.kind = ResourceKind::Edge;
      log.index = r - V - R + 1;
    } else {
      log.kind = ResourceKind::Downlink;
      log.index = 0;
    }
    for (std::size_t id : served[r]) {
      const Job& j = jobs[id];
      log.log.push_back({j.kind, j.vehicle, j.node, j.arrival, j.start, j.end});
    }
    tl.resources.push_back(std::move(log));
  }
  return tl;
}

Timeline simulate(const Scenario& scn, const Assignment& asg) {
  check_assignment(scn, asg);
  PartialAssignment partial(asg.size());
  for (std::size_t v = 0; v < asg.size(); ++v) partial[v].assign(asg[v].begin(), asg[v].end());
  return simulate_partial(scn, partial);
}

PrefixResult simulate_prefix(const Scenario& scn, std::span<const Action> decisions) {
  const auto order = decision_order(scn);
  if (decisions.size() > order.size()) throw InputError("prefix longer than the decision sequence");
  PartialAssignment partial(scn.num_vehicles());
  for (std::size_t v = 0; v < scn.num_vehicles(); ++v)
    partial[v].assign(scn.dags[v].size(), std::nullopt);
  for (std::size_t i = 0; i < decisions.size(); ++i)
    partial[order[i].vehicle][order[i].node] = decisions[i];

  PrefixResult out{simulate_partial(scn, partial), 0.0};
  for (std::size_t v = 0; v < scn.num_vehicles(); ++v) {
    double max_ce = 0.0;
    bool any = false;
    for (const auto& s : out.timeline.subtasks[v]) {
      if (!s) continue;
      max_ce = any ? std::max(max_ce, s->ce) : s->ce;
      any = true;
    }
    if (any) out.makespan += max_ce;
  }
  return out;
}

double aet(const Scenario& scn, const Assignment& asg) { return simulate(scn, asg).aet(); }

void ScenarioDistribution::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("ScenarioDistribution: " + m); };
  if (vehicles < 1 || channels < 1 || processors < 1) fail("vehicles, R and M must be >= 1");
  for (const Range* r : {&uplink_bw_hz, &downlink_bw_hz, &mec_tx_power_mw, &edge_freq,
                         &local_freq, &tx_power_mw, &gain, &noise_mw}) {
    if (!(r->lo > 0.0 && r->lo <= r->hi && std::isfinite(r->hi)))
      fail("every range must satisfy 0 < lo <= hi");
  }
  DagGenParams d = dag;
  d.validate();
}

double ScenarioDistribution::reference_rate() const {
  return uplink_bw_hz.mid() * std::log2(1.0 + tx_power_mw.mid() * gain.mid() / noise_mw.mid());
}

double ScenarioDistribution::reference_freq() const { return edge_freq.mid(); }

Scenario sample_scenario(const ScenarioDistribution& dist) {
  dist.validate();
  Rng rng(dist.seed);
  Scenario scn;
  scn.uplink_bw_hz.resize(dist.channels);
  for (auto& w : scn.uplink_bw_hz) w = rng.uniform(dist.uplink_bw_hz.lo, dist.uplink_bw_hz.hi);
  scn.edge_freqs.resize(dist.processors);
  for (auto& f : scn.edge_freqs) f = rng.uniform(dist.edge_freq.lo, dist.edge_freq.hi);
  scn.downlink_bw_hz = rng.uniform(dist.downlink_bw_hz.lo, dist.downlink_bw_hz.hi);
  scn.mec_tx_power_mw = rng.uniform(dist.mec_tx_power_mw.lo, dist.mec_tx_power_mw.hi);
  scn.noise_mw = rng.uniform(dist.noise_mw.lo, dist.noise_mw.hi);
  scn.vehicles.resize(dist.vehicles);
  for (auto& v : scn.vehicles) {
    v.local_freq = rng.uniform(dist.local_freq.lo, dist.local_freq.hi);
    v.tx_power_mw = rng.uniform(dist.tx_power_mw.lo, dist.tx_power_mw.hi);
    v.gain = rng.uniform(dist.gain.lo, dist.gain.hi);
  }
  DagGenParams gp = dist.dag;
  if (gp.ref_rate <= 0.0) gp.ref_rate = dist.reference_rate();
  if (gp.ref_freq <= 0.0) gp.ref_freq = dist.reference_freq();
  for (std::size_t v = 0; v < dist.vehicles; ++v) {
    gp.seed = derive_seed(dist.seed, 0xda6, v);
    scn.dags.push_back(generate_dag(gp, static_cast<int>(v)));
  }
  return scn;
}

nlohmann::json scenario_to_json(const Scenario& scn) {
  nlohmann::json vehicles = nlohmann::json::array();
  for (const auto& v : scn.vehicles) {
    vehicles.push_back(
        {{"local_freq", v.local_freq}, {"tx_power_mw", v.tx_power_mw}, {"gain", v.gain}});
  }
  nlohmann::json dags = nlohmann::json::array();
  for (const auto& d : scn.dags) dags.push_back(dag_to_json(d));
  return {{"vehicles", vehicles},
          {"uplink_bw_hz", scn.uplink_bw_hz},
          {"downlink_bw_hz", scn.downlink_bw_hz},
          {"mec_tx_power_mw", scn.mec_tx_power_mw},
          {"edge_freqs", scn.edge_freqs},
          {"noise_mw", scn.noise_mw},
          {"dags", dags}};
}

Scenario scenario_from_json(const nlohmann::json& j) {
  try {
    Scenario scn;
    for (const auto& v : j.at("vehicles")) {
      scn.vehicles.push_back({v.at("local_freq").get<double>(), v.at("tx_power_mw").get<double>(),
                              v.at("gain").get<double>()});
    }
    scn.uplink_bw_hz = j.at("uplink_bw_hz").get<std::vector<double>>();
    scn.downlink_bw_hz = j.at("downlink_bw_hz").get<double>();
    scn.mec_tx_power_mw = j.at("mec_tx_power_mw").get<double>();
    scn.edge_freqs = j.at("edge_freqs").get<std::vector<double>>();
    scn.noise_mw = j.at("noise_mw").get<double>();
    for (const auto& d : j.at("dags")) scn.dags.push_back(dag_from_json(d));
    scn.validate();
    return scn;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed scenario document: ") + e.what());
  }
}

// Actions are written as 0 (local) or [r, m] with 1-based indices.
nlohmann::json assignment_to_json(const Assignment& asg) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& per_vehicle : asg) {
    nlohmann::json row = nlohmann::json::array();
    for (const auto& a : per_vehicle) {
      if (a.is_local())
        row.push_back(0);
      else
        row.push_back({a.channel, a.processor});
    }
    out.push_back(row);
  }
  return {{"assignment", out}};
}

Assignment assignment_from_json(const nlohmann::json& j) {
  try {
    Assignment asg;
    for (const auto& row : j.at("assignment")) {
      std::vector<Action> actions;
      for (const auto& a : row) {
        if (a.is_number_integer() && a.get<int>() == 0) {
          actions.push_back(Action::local());
        } else if (a.is_array() && a.size() == 2) {
          actions.push_back(Action::edge(a[0].get<int>(), a[1].get<int>()));
        } else {
          throw InputError("action must be 0 or [channel, processor]");
        }
      }
      asg.push_back(std::move(actions));
    }
    return asg;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed assignment document: ") + e.what());
  }
}

namespace {
const char* job_kind_name(JobKind k) {
  switch (k) {
    case JobKind::Upload: return "upload";
    case JobKind::Download: return "download";
    case JobKind::Compute: return "compute";
  }
  return "?";
}
}  // namespace

nlohmann::json timeline_to_json(const Timeline& tl) {
  nlohmann::json subtasks = nlohmann::json::array();
  for (std::size_t v = 0; v < tl.subtasks.size(); ++v) {
    for (std::size_t p = 0; p < tl.subtasks[v].size(); ++p) {
      const auto& s = tl.subtasks[v][p];
      if (!s) continue;
      subtasks.push_back({{"vehicle", v}, {"node", p}, {"TE", s->te}, {"CS", s->cs}, {"CE", s->ce}});
    }
  }
  nlohmann::json resources = nlohmann::json::array();
  for (const auto& r : tl.resources) {
    nlohmann::json log = nlohmann::json::array();
    for (const auto& e : r.log) {
      log.push_back({{"kind", job_kind_name(e.kind)},
                     {"vehicle", e.vehicle},
                     {"node", e.node},
                     {"arrival", e.arrival},
                     {"start", e.start},
                     {"end", e.end}});
    }
    resources.push_back({{"name", r.name()}, {"log", log}});
  }
  return {{"subtasks", subtasks},
          {"resources", resources},
          {"vehicle_et", tl.vehicle_et},
          {"aet", tl.aet()}};
}

}  // namespace vecoff
