#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "vecoff/params.hpp"
#include "vecoff/sim.hpp"
#include "vecoff/tape.hpp"

namespace vecoff::nn {

// Feature normalizers: maxima of the default parameter ranges.
inline constexpr double kSizeScaleBits = 400 * kBitsPerKB;
inline constexpr double kCycleScale = 60e6;
inline constexpr double kLocalFreqScale = 2e9;
inline constexpr double kEdgeFreqScale = 3e9;
inline constexpr double kBandwidthScale = 6e6;

struct PolicyDims {
  std::size_t channels = 4;     // R
  std::size_t processors = 3;   // M
  std::size_t heads = 4;        // GAT heads K
  std::size_t head_dim = 8;
  std::size_t max_parents = 6;  // P_max, length of the parent/child index lists
  std::size_t enc_hidden = 64;  // per direction
  std::size_t dec_hidden = 64;
  std::size_t action_embed = 8;
  bool use_gat = true;          // false: zero-padded raw features replace the GAT

  std::size_t feature_dim() const { return 4 + processors + channels; }
  std::size_t actions() const { return 1 + channels * processors; }
  std::size_t embed_dim() const { return heads * head_dim; }
  std::size_t agg_dim() const { return embed_dim() + 2 * max_parents; }

  bool operator==(const PolicyDims&) const = default;
};

// Registry in fixed order: per-head GAT W and a, forward GRU, backward GRU,
// decoder GRU, decoder attention, action embedding (last row = start token),
// actor head, critic head.
ParamRegistry make_registry(const PolicyDims& dims);

ParamVector init_policy(const PolicyDims& dims, std::uint64_t seed);

struct SubtaskState {
  std::vector<double> features;    // [I/n, d_L, c, f_local, f_1..f_M, w_1..w_R], normalized
  std::vector<double> parent_pos;  // topo positions / n, padded with -1 to max_parents
  std::vector<double> child_pos;
};

// Indexed by node.
std::vector<SubtaskState> build_states(const Scenario& scn, std::size_t vehicle,
                                       const PolicyDims& dims);

// Indices of every block in the registry, resolved once.
struct PolicyLayout {
  explicit PolicyLayout(const PolicyDims& dims);
  PolicyDims dims;
  std::vector<std::size_t> gat_w, gat_a;
  std::size_t enc_f_w, enc_f_u, enc_f_b;
  std::size_t enc_b_w, enc_b_u, enc_b_b;
  std::size_t dec_w, dec_u, dec_b;
  std::size_t att_we, att_wd, att_v;
  std::size_t embed;
  std::size_t actor_w, actor_b;
  std::size_t critic_w, critic_b;
};

// Parameter leaves of one ParamVector on one tape.
class BoundParams {
public:
  BoundParams(Tape& tape, const ParamVector& params);
  Var operator[](std::size_t block) const { return vars_.at(block); }

private:
  std::vector<Var> vars_;
};

struct GruWeights {
  Var w, u, b;
};

// z = s(Wz x + Uz h + bz), r = s(Wr x + Ur h + br),
// n = tanh(Wn x + bn + r * (Un h)), h' = n + z * (h - n).
Var gru_cell(Tape& t, const GruWeights& g, Var h, Var x, std::size_t hidden);

// Per node embeddings F'. Also returns per-head attention weights if `attention` is set,
// indexed [node][head] in neighbourhood order (ascending node index).
std::vector<Var> gat_encode(Tape& t, const BoundParams& bp, const PolicyLayout& layout,
                            const TaskDag& dag, std::span<const SubtaskState> states,
                            std::vector<std::vector<std::vector<double>>>* attention = nullptr);

// Sorted neighbourhood used by the GAT: parents, children and the node itself.
std::vector<std::size_t> gat_neighbourhood(const TaskDag& dag, std::size_t i);

// H_i = [F'_i, I^p_i, I^s_i].
Var aggregate(Tape& t, Var embedding, const SubtaskState& state);

// e_i = [forward_i, backward_i] over H in topological order.
std::vector<Var> encode_sequence(Tape& t, const BoundParams& bp, const PolicyLayout& layout,
                                 std::span<const Var> inputs);

struct EncodedDag {
  std::vector<Var> states;  // encoder outputs, topo order
  std::vector<Var> keys;    // W_e * e_i, reused by every decoder step
};

EncodedDag encode_dag(Tape& t, const BoundParams& bp, const PolicyLayout& layout,
                      const Scenario& scn, std::size_t vehicle);

struct DecodeOutput {
  Var logits;
  Var hidden;
  Var context;
  Var attention;  // weights over encoder states
};

// prev_action == dims.actions() is the start token.
DecodeOutput decode_step(Tape& t, const BoundParams& bp, const PolicyLayout& layout,
                         Var prev_hidden, const EncodedDag& enc, std::size_t prev_action);

Var value_head(Tape& t, const BoundParams& bp, const PolicyLayout& layout, Var hidden);

struct StepRecord {
  std::size_t vehicle;
  std::size_t node;
  std::size_t action;
  Var log_probs;
  Var value;
};

// Chooses an action from the action distribution of one step.
using ActionChooser = std::function<std::size_t(std::span<const double> probs)>;

// Runs the policy over every vehicle of the scenario in decision order.
// `choose` is consulted for each step; decoding restarts per vehicle.
std::vector<StepRecord> run_policy(Tape& t, const BoundParams& bp, const PolicyLayout& layout,
                                   const Scenario& scn, const ActionChooser& choose);

}  // namespace vecoff::nn
