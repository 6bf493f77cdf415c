#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace vecoff {

// Decimal kilobyte, used for every size conversion.
inline constexpr double kBitsPerKB = 8000.0;

struct SubtaskSpec {
  double input_bits = 0.0;   // d_L: the subtask's own input (code, parameters)
  double cycles = 0.0;       // c: CPU cycles required
  double output_bits = 0.0;  // d_O: output shipped to every child

  bool operator==(const SubtaskSpec&) const = default;
};

using Edge = std::pair<std::size_t, std::size_t>;  // (parent, child)

class TaskDag {
public:
  TaskDag() = default;
  TaskDag(int vehicle_id, std::vector<SubtaskSpec> nodes, std::vector<Edge> edges,
          double submit_time = 0.0);

  int vehicle_id() const { return vehicle_id_; }
  double submit_time() const { return submit_time_; }
  std::size_t size() const { return nodes_.size(); }
  const std::vector<SubtaskSpec>& nodes() const { return nodes_; }
  const SubtaskSpec& node(std::size_t i) const { return nodes_.at(i); }
  SubtaskSpec& mutable_node(std::size_t i) { return nodes_.at(i); }
  // Sorted lexicographically, duplicates removed only if the DAG validates.
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<std::size_t>& topo_order() const { return topo_order_; }
  // Inverse of topo_order(): position of node i in the decision sequence.
  std::size_t topo_position(std::size_t i) const { return topo_pos_.at(i); }

  const std::vector<std::size_t>& parents(std::size_t p) const;
  const std::vector<std::size_t>& children(std::size_t p) const;

  void set_vehicle_id(int id) { vehicle_id_ = id; }

  bool operator==(const TaskDag& o) const {
    return vehicle_id_ == o.vehicle_id_ && submit_time_ == o.submit_time_ &&
           nodes_ == o.nodes_ && edges_ == o.edges_;
  }

private:
  int vehicle_id_ = 0;
  double submit_time_ = 0.0;
  std::vector<SubtaskSpec> nodes_;
  std::vector<Edge> edges_;
  std::vector<std::vector<std::size_t>> parents_;
  std::vector<std::vector<std::size_t>> children_;
  std::vector<std::size_t> topo_order_;
  std::vector<std::size_t> topo_pos_;
};

struct DagViolation {
  std::string kind;  // "empty", "node-value", "index", "self-edge", "duplicate-edge", "cycle"
  std::string detail;
};

// Returns nullopt when every TaskDag invariant holds, otherwise the first violation.
std::optional<DagViolation> validate_dag(const std::vector<SubtaskSpec>& nodes,
                                         const std::vector<Edge>& edges);
std::optional<DagViolation> validate_dag(const TaskDag& dag);

// Kahn's algorithm, smallest ready index first. Throws InputError on a cycle.
std::vector<std::size_t> topo_sort(std::size_t node_count, const std::vector<Edge>& edges);

// d_I = d_L + sum of parent outputs.
double total_input_bits(const TaskDag& dag, std::size_t p);

struct DagGenParams {
  std::size_t n = 20;
  double density = 0.8;
  double fat = 0.5;
  double ccr = 0.5;
  double size_lo_bits = 200 * kBitsPerKB;
  double size_hi_bits = 400 * kBitsPerKB;
  double cycles_lo = 50e6;
  double cycles_hi = 60e6;
  std::uint64_t seed = 0;
  // Reference uplink rate (bits/s) and processor frequency (cycles/s) for
  // ccr calibration. Zero means the all-midpoints default scenario.
  double ref_rate = 0.0;
  double ref_freq = 0.0;

  void validate() const;
  bool operator==(const DagGenParams&) const = default;
};

// Mean level width max(1, round(fat * sqrt(n))).
std::size_t mean_level_width(std::size_t n, double fat);

// Layered random DAG, fully determined by params.seed.
TaskDag generate_dag(const DagGenParams& params, int vehicle_id = 0);

// Empirical (mean d_O / ref_rate) / (mean c / ref_freq).
double empirical_ccr(const TaskDag& dag, double ref_rate, double ref_freq);

nlohmann::json dag_to_json(const TaskDag& dag);
TaskDag dag_from_json(const nlohmann::json& j);

}  // namespace vecoff
