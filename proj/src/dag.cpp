#include "vecoff/dag.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <set>
#include <sstream>

#include "vecoff/errors.hpp"
#include "vecoff/rng.hpp"

namespace vecoff {

namespace {

// Midpoint of the default ranges: 4.5 MHz subchannel, 150 mW, gain 2,
// 1e-5 mW noise, 2.5 GHz edge processor.
double default_ref_rate() { return 4.5e6 * std::log2(1.0 + 150.0 * 2.0 / 1e-5); }
constexpr double kDefaultRefFreq = 2.5e9;

}  // namespace

TaskDag::TaskDag(int vehicle_id, std::vector<SubtaskSpec> nodes, std::vector<Edge> edges,
                 double submit_time)
    : vehicle_id_(vehicle_id), submit_time_(submit_time), nodes_(std::move(nodes)),
      edges_(std::move(edges)) {
  std::sort(edges_.begin(), edges_.end());
  if (auto v = validate_dag(nodes_, edges_)) {
    throw InputError("invalid DAG (" + v->kind + "): " + v->detail);
  }
  if (!std::isfinite(submit_time_) || submit_time_ < 0.0) {
    throw InputError("invalid DAG: submit_time must be finite and non-negative");
  }
  parents_.assign(nodes_.size(), {});
  children_.assign(nodes_.size(), {});
  for (auto [p, c] : edges_) {
    parents_[c].push_back(p);
    children_[p].push_back(c);
  }
  for (auto& v : parents_) std::sort(v.begin(), v.end());
  for (auto& v : children_) std::sort(v.begin(), v.end());
  topo_order_ = topo_sort(nodes_.size(), edges_);
  topo_pos_.assign(nodes_.size(), 0);
  for (std::size_t i = 0; i < topo_order_.size(); ++i) topo_pos_[topo_order_[i]] = i;
}

const std::vector<std::size_t>& TaskDag::parents(std::size_t p) const {
  if (p >= parents_.size()) throw std::out_of_range("parents: node index out of range");
  return parents_[p];
}

const std::vector<std::size_t>& TaskDag::children(std::size_t p) const {
  if (p >= children_.size()) throw std::out_of_range("children: node index out of range");
  return children_[p];
}

std::optional<DagViolation> validate_dag(const std::vector<SubtaskSpec>& nodes,
                                         const std::vector<Edge>& edges) {
  if (nodes.empty()) return DagViolation{"empty", "DAG has no nodes"};
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& s = nodes[i];
    for (double x : {s.input_bits, s.cycles, s.output_bits}) {
      if (!std::isfinite(x) || !(x > 0.0)) {
        return DagViolation{"node-value", "node " + std::to_string(i) +
                                              " has a non-positive or non-finite field"};
      }
    }
  }
  std::set<Edge> seen;
  for (auto [p, c] : edges) {
    const std::string name = "(" + std::to_string(p) + "," + std::to_string(c) + ")";
    if (p >= nodes.size() || c >= nodes.size()) {
      return DagViolation{"index", "edge " + name + " references a missing node"};
    }
    if (p == c) return DagViolation{"self-edge", "edge " + name};
    if (!seen.insert({p, c}).second) return DagViolation{"duplicate-edge", "edge " + name};
  }
  try {
    topo_sort(nodes.size(), edges);
  } catch (const InputError& e) {
    return DagViolation{"cycle", e.what()};
  }
  return std::nullopt;
}

std::optional<DagViolation> validate_dag(const TaskDag& dag) {
  auto v = validate_dag(dag.nodes(), dag.edges());
  if (v) return v;
  const auto& order = dag.topo_order();
  if (order.size() != dag.size()) return DagViolation{"topo-order", "wrong length"};
  for (auto [p, c] : dag.edges()) {
    if (dag.topo_position(p) >= dag.topo_position(c)) {
      return DagViolation{"topo-order", "parent " + std::to_string(p) + " after child " +
                                            std::to_string(c)};
    }
  }
  return std::nullopt;
}

std::vector<std::size_t> topo_sort(std::size_t node_count, const std::vector<Edge>& edges) {
  std::vector<std::size_t> indegree(node_count, 0);
  std::vector<std::vector<std::size_t>> out(node_count);
  for (auto [p, c] : edges) {
    if (p >= node_count || c >= node_count) throw InputError("topo_sort: edge index out of range");
    out[p].push_back(c);
    ++indegree[c];
  }
  std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
  for (std::size_t i = 0; i < node_count; ++i)
    if (indegree[i] == 0) ready.push(i);
  std::vector<std::size_t> order;
  order.reserve(node_count);
  while (!ready.empty()) {
    std::size_t u = ready.top();
    ready.pop();
    order.push_back(u);
    for (std::size_t c : out[u])
      if (--indegree[c] == 0) ready.push(c);
  }
  if (order.size() != node_count) {
    for (std::size_t i = 0; i < node_count; ++i) {
      if (indegree[i] > 0) throw InputError("cycle through node " + std::to_string(i));
    }
  }
  return order;
}

double total_input_bits(const TaskDag& dag, std::size_t p) {
  double total = dag.node(p).input_bits;
  for (std::size_t k : dag.parents(p)) total += dag.node(k).output_bits;
  return total;
}

void DagGenParams::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("DagGenParams: " + m); };
  if (n < 1) fail("n must be >= 1");
  if (!(density > 0.0 && density <= 1.0)) fail("density must lie in (0,1]");
  if (!(fat > 0.0 && fat <= 1.0)) fail("fat must lie in (0,1]");
  if (!(ccr > 0.0) || !std::isfinite(ccr)) fail("ccr must be positive");
  if (!(size_lo_bits > 0.0 && size_lo_bits <= size_hi_bits)) fail("invalid size range");
  if (!(cycles_lo > 0.0 && cycles_lo <= cycles_hi)) fail("invalid cycle range");
  if (ref_rate < 0.0 || ref_freq < 0.0) fail("reference rate/frequency must be >= 0");
}

std::size_t mean_level_width(std::size_t n, double fat) {
  const double w = std::round(fat * std::sqrt(static_cast<double>(n)));
  return std::max<std::size_t>(1, static_cast<std::size_t>(w));
}

TaskDag generate_dag(const DagGenParams& params, int vehicle_id) {
  params.validate();
  Rng rng(params.seed);
  const std::size_t n = params.n;

  // (a) level widths
  const std::size_t wbar = mean_level_width(n, params.fat);
  const auto wmin = static_cast<std::int64_t>(std::max<std::size_t>(1, (wbar + 1) / 2));
  const auto wmax = static_cast<std::int64_t>((3 * wbar + 1) / 2);
  std::vector<std::vector<std::size_t>> levels;
  std::size_t placed = 0;
  while (placed < n) {
    auto w = static_cast<std::size_t>(rng.uniform_int(wmin, wmax));
    w = std::min(w, n - placed);
    std::vector<std::size_t> level(w);
    for (std::size_t i = 0; i < w; ++i) level[i] = placed + i;
    placed += w;
    levels.push_back(std::move(level));
  }

  // (b) inter-level edges
  std::vector<Edge> edges;
  for (std::size_t l = 1; l < levels.size(); ++l) {
    const auto& prev = levels[l - 1];
    for (std::size_t child : levels[l]) {
      bool has_parent = false;
      for (std::size_t parent : prev) {
        if (rng.bernoulli(params.density)) {
          edges.emplace_back(parent, child);
          has_parent = true;
        }
      }
      if (!has_parent) {
        auto pick = rng.uniform_int(0, static_cast<std::int64_t>(prev.size()) - 1);
        edges.emplace_back(prev[static_cast<std::size_t>(pick)], child);
      }
    }
  }

  // (c) node attributes
  std::vector<SubtaskSpec> nodes(n);
  for (auto& s : nodes) {
    s.input_bits = rng.uniform(params.size_lo_bits, params.size_hi_bits);
    s.output_bits = rng.uniform(params.size_lo_bits, params.size_hi_bits);
    s.cycles = rng.uniform(params.cycles_lo, params.cycles_hi);
  }

  // (d) rescale outputs so the communication/computation ratio equals ccr
  const double ref_rate = params.ref_rate > 0.0 ? params.ref_rate : default_ref_rate();
  const double ref_freq = params.ref_freq > 0.0 ? params.ref_freq : kDefaultRefFreq;
  double sum_out = 0.0, sum_cycles = 0.0;
  for (const auto& s : nodes) {
    sum_out += s.output_bits;
    sum_cycles += s.cycles;
  }
  const double scale = params.ccr * (sum_cycles / ref_freq) / (sum_out / ref_rate);
  for (auto& s : nodes) s.output_bits *= scale;

  return TaskDag(vehicle_id, std::move(nodes), std::move(edges), 0.0);
}

double empirical_ccr(const TaskDag& dag, double ref_rate, double ref_freq) {
  if (ref_rate <= 0.0) ref_rate = default_ref_rate();
  if (ref_freq <= 0.0) ref_freq = kDefaultRefFreq;
  double comm = 0.0, comp = 0.0;
  for (const auto& s : dag.nodes()) {
    comm += s.output_bits / ref_rate;
    comp += s.cycles / ref_freq;
  }
  return comm / comp;
}

nlohmann::json dag_to_json(const TaskDag& dag) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& s : dag.nodes()) {
    nodes.push_back({{"d_L_bits", s.input_bits}, {"cycles", s.cycles}, {"d_O_bits", s.output_bits}});
  }
  nlohmann::json edges = nlohmann::json::array();
  for (auto [p, c] : dag.edges()) edges.push_back({p, c});
  return {{"vehicle_id", dag.vehicle_id()},
          {"nodes", nodes},
          {"edges", edges},
          {"submit_time", dag.submit_time()}};
}

TaskDag dag_from_json(const nlohmann::json& j) {
  try {
    std::vector<SubtaskSpec> nodes;
    for (const auto& n : j.at("nodes")) {
      nodes.push_back({n.at("d_L_bits").get<double>(), n.at("cycles").get<double>(),
                       n.at("d_O_bits").get<double>()});
    }
    std::vector<Edge> edges;
    for (const auto& e : j.at("edges")) {
      if (!e.is_array() || e.size() != 2) throw InputError("edge must be a [parent, child] pair");
      edges.emplace_back(e[0].get<std::size_t>(), e[1].get<std::size_t>());
    }
    return TaskDag(j.at("vehicle_id").get<int>(), std::move(nodes), std::move(edges),
                   j.value("submit_time", 0.0));
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed DAG document: ") + e.what());
  }
}

}  // namespace vecoff
