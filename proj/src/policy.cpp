#include "vecoff/policy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace vecoff::nn {

ParamRegistry make_registry(const PolicyDims& d) {
  ParamRegistry reg;
  const std::size_t F = d.feature_dim();
  const std::size_t Hh = d.head_dim;
  for (std::size_t k = 0; k < d.heads; ++k) {
    reg.add("gat.W" + std::to_string(k), Hh, F, false, F, Hh);
    reg.add("gat.a" + std::to_string(k), 2 * Hh, 1, false, 2 * Hh, 1);
  }
  const std::size_t H = d.enc_hidden;
  for (const char* dir : {"enc_f", "enc_b"}) {
    const std::string p = dir;
    reg.add(p + ".W", 3 * H, d.agg_dim(), false, d.agg_dim(), H);
    reg.add(p + ".U", 3 * H, H, false, H, H);
    reg.add(p + ".b", 3 * H, 1, true, 0, 0);
  }
  const std::size_t D = d.dec_hidden;
  const std::size_t dec_in = 2 * H + d.action_embed;
  reg.add("dec.W", 3 * D, dec_in, false, dec_in, D);
  reg.add("dec.U", 3 * D, D, false, D, D);
  reg.add("dec.b", 3 * D, 1, true, 0, 0);
  reg.add("att.We", D, 2 * H, false, 2 * H, D);
  reg.add("att.Wd", D, D, false, D, D);
  reg.add("att.v", D, 1, false, D, 1);
  reg.add("embed", d.actions() + 1, d.action_embed, false, d.actions() + 1, d.action_embed);
  reg.add("actor.W", d.actions(), D, false, D, d.actions());
  reg.add("actor.b", d.actions(), 1, true, 0, 0);
  reg.add("critic.w", 1, D, false, D, 1);
  reg.add("critic.b", 1, 1, true, 0, 0);
  return reg;
}

ParamVector init_policy(const PolicyDims& dims, std::uint64_t seed) {
  return init_params(make_registry(dims), seed);
}

PolicyLayout::PolicyLayout(const PolicyDims& d) : dims(d) {
  const ParamRegistry reg = make_registry(d);
  for (std::size_t k = 0; k < d.heads; ++k) {
    gat_w.push_back(reg.find("gat.W" + std::to_string(k)));
    gat_a.push_back(reg.find("gat.a" + std::to_string(k)));
  }
  enc_f_w = reg.find("enc_f.W");
  enc_f_u = reg.find("enc_f.U");
  enc_f_b = reg.find("enc_f.b");
  enc_b_w = reg.find("enc_b.W");
  enc_b_u = reg.find("enc_b.U");
  enc_b_b = reg.find("enc_b.b");
  dec_w = reg.find("dec.W");
  dec_u = reg.find("dec.U");
  dec_b = reg.find("dec.b");
  att_we = reg.find("att.We");
  att_wd = reg.find("att.Wd");
  att_v = reg.find("att.v");
  embed = reg.find("embed");
  actor_w = reg.find("actor.W");
  actor_b = reg.find("actor.b");
  critic_w = reg.find("critic.w");
  critic_b = reg.find("critic.b");
}

BoundParams::BoundParams(Tape& tape, const ParamVector& params) {
  const auto& blocks = params.registry.blocks();
  vars_.reserve(blocks.size());
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    vars_.push_back(tape.parameter(params.block(i), blocks[i].rows, blocks[i].cols, blocks[i].offset));
  }
}

std::vector<SubtaskState> build_states(const Scenario& scn, std::size_t vehicle,
                                       const PolicyDims& dims) {
  if (scn.num_channels() != dims.channels || scn.num_processors() != dims.processors)
    throw std::invalid_argument("build_states: scenario R/M do not match the policy dimensions");
  const TaskDag& dag = scn.dags.at(vehicle);
  const double n = static_cast<double>(dag.size());
  std::vector<SubtaskState> states(dag.size());
  auto positions = [&](const std::vector<std::size_t>& nodes) {
    std::vector<std::size_t> pos;
    for (std::size_t k : nodes) pos.push_back(dag.topo_position(k));
    std::sort(pos.begin(), pos.end());
    std::vector<double> out(dims.max_parents, -1.0);
    for (std::size_t i = 0; i < pos.size() && i < dims.max_parents; ++i)
      out[i] = static_cast<double>(pos[i]) / n;
    return out;
  };
  for (std::size_t p = 0; p < dag.size(); ++p) {
    const SubtaskSpec& s = dag.node(p);
    auto& st = states[p];
    st.features.reserve(dims.feature_dim());
    st.features.push_back(static_cast<double>(dag.topo_position(p)) / n);
    st.features.push_back(s.input_bits / kSizeScaleBits);
    st.features.push_back(s.cycles / kCycleScale);
    st.features.push_back(scn.vehicles[vehicle].local_freq / kLocalFreqScale);
    for (double f : scn.edge_freqs) st.features.push_back(f / kEdgeFreqScale);
    for (double w : scn.uplink_bw_hz) st.features.push_back(w / kBandwidthScale);
    st.parent_pos = positions(dag.parents(p));
    st.child_pos = positions(dag.children(p));
  }
  return states;
}

Var gru_cell(Tape& t, const GruWeights& g, Var h, Var x, std::size_t H) {
  Var gx = t.add(t.matvec(g.w, x), g.b);
  Var gh = t.matvec(g.u, h);
  Var z = t.sigmoid(t.add(t.slice(gx, 0, H), t.slice(gh, 0, H)));
  Var r = t.sigmoid(t.add(t.slice(gx, H, H), t.slice(gh, H, H)));
  Var n = t.tanh(t.add(t.slice(gx, 2 * H, H), t.mul(r, t.slice(gh, 2 * H, H))));
  return t.add(n, t.mul(z, t.sub(h, n)));
}

std::vector<std::size_t> gat_neighbourhood(const TaskDag& dag, std::size_t i) {
  std::vector<std::size_t> nb = dag.parents(i);
  nb.insert(nb.end(), dag.children(i).begin(), dag.children(i).end());
  nb.push_back(i);
  std::sort(nb.begin(), nb.end());
  nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
  return nb;
}

std::vector<Var> gat_encode(Tape& t, const BoundParams& bp, const PolicyLayout& layout,
                            const TaskDag& dag, std::span<const SubtaskState> states,
                            std::vector<std::vector<std::vector<double>>>* attention) {
  const PolicyDims& d = layout.dims;
  const std::size_t n = dag.size();
  if (states.size() != n) throw std::invalid_argument("gat_encode: one state per node required");
  std::vector<Var> features(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (states[i].features.size() != d.feature_dim())
      throw std::invalid_argument("gat_encode: feature dimension mismatch");
    features[i] = t.constant(states[i].features);
  }
  std::vector<Var> out(n);
  if (!d.use_gat) {
    if (d.feature_dim() > d.embed_dim())
      throw std::invalid_argument("gat_encode: features wider than the embedding");
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> padded(states[i].features);
      padded.resize(d.embed_dim(), 0.0);
      out[i] = t.constant(std::move(padded));
    }
    return out;
  }
  if (attention) attention->assign(n, std::vector<std::vector<double>>(d.heads));
  std::vector<std::vector<Var>> head_out(n);
  const std::size_t Hh = d.head_dim;
  for (std::size_t k = 0; k < d.heads; ++k) {
    const Var W = bp[layout.gat_w[k]];
    const Var a = bp[layout.gat_a[k]];
    const Var a_self = t.slice(a, 0, Hh);
    const Var a_nb = t.slice(a, Hh, Hh);
    std::vector<Var> z(n), s_self(n), s_nb(n);
    for (std::size_t j = 0; j < n; ++j) {
      z[j] = t.matvec(W, features[j]);
      s_self[j] = t.dot(a_self, z[j]);
      s_nb[j] = t.dot(a_nb, z[j]);
    }
    for (std::size_t i = 0; i < n; ++i) {
      const auto nb = gat_neighbourhood(dag, i);
      std::vector<Var> scores, values;
      for (std::size_t j : nb) {
        scores.push_back(t.leaky_relu(t.add(s_self[i], s_nb[j]), 0.2));
        values.push_back(z[j]);
      }
      const Var att = t.softmax(t.concat(scores));
      if (attention) (*attention)[i][k] = t.value(att);
      head_out[i].push_back(t.elu(t.weighted_sum(values, att)));
    }
  }
  for (std::size_t i = 0; i < n; ++i) out[i] = t.concat(head_out[i]);
  return out;
}

Var aggregate(Tape& t, Var embedding, const SubtaskState& state) {
  const Var idx = t.constant([&] {
    std::vector<double> v(state.parent_pos);
    v.insert(v.end(), state.child_pos.begin(), state.child_pos.end());
    return v;
  }());
  const Var parts[] = {embedding, idx};
  return t.concat(parts);
}

std::vector<Var> encode_sequence(Tape& t, const BoundParams& bp, const PolicyLayout& layout,
                                 std::span<const Var> inputs) {
  if (inputs.empty()) throw std::invalid_argument("encode_sequence: empty sequence");
  const std::size_t H = layout.dims.enc_hidden;
  const GruWeights fwd{bp[layout.enc_f_w], bp[layout.enc_f_u], bp[layout.enc_f_b]};
  const GruWeights bwd{bp[layout.enc_b_w], bp[layout.enc_b_u], bp[layout.enc_b_b]};
  const std::size_t n = inputs.size();
  std::vector<Var> f(n), b(n);
  Var h = t.constant(std::vector<double>(H, 0.0));
  for (std::size_t i = 0; i < n; ++i) h = f[i] = gru_cell(t, fwd, h, inputs[i], H);
  h = t.constant(std::vector<double>(H, 0.0));
  for (std::size_t i = n; i-- > 0;) h = b[i] = gru_cell(t, bwd, h, inputs[i], H);
  std::vector<Var> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Var parts[] = {f[i], b[i]};
    out[i] = t.concat(parts);
  }
  return out;
}

EncodedDag encode_dag(Tape& t, const BoundParams& bp, const PolicyLayout& layout,
                      const Scenario& scn, std::size_t vehicle) {
  const TaskDag& dag = scn.dags.at(vehicle);
  const auto states = build_states(scn, vehicle, layout.dims);
  const auto emb = gat_encode(t, bp, layout, dag, states);
  std::vector<Var> seq;
  seq.reserve(dag.size());
  for (std::size_t p : dag.topo_order()) seq.push_back(aggregate(t, emb[p], states[p]));
  EncodedDag enc;
  enc.states = encode_sequence(t, bp, layout, seq);
  const Var We = bp[layout.att_we];
  for (Var e : enc.states) enc.keys.push_back(t.matvec(We, e));
  return enc;
}

DecodeOutput decode_step(Tape& t, const BoundParams& bp, const PolicyLayout& layout,
                         Var prev_hidden, const EncodedDag& enc, std::size_t prev_action) {
  const PolicyDims& d = layout.dims;
  if (prev_action > d.actions()) throw std::out_of_range("decode_step: action index out of range");
  const Var q = t.matvec(bp[layout.att_wd], prev_hidden);
  const Var v = bp[layout.att_v];
  std::vector<Var> scores;
  scores.reserve(enc.keys.size());
  for (Var k : enc.keys) scores.push_back(t.dot(v, t.tanh(t.add(k, q))));
  const Var att = t.softmax(t.concat(scores));
  const Var context = t.weighted_sum(enc.states, att);
  const Var emb = t.row(bp[layout.embed], prev_action);
  const Var parts[] = {context, emb};
  const Var x = t.concat(parts);
  const GruWeights dec{bp[layout.dec_w], bp[layout.dec_u], bp[layout.dec_b]};
  const Var hidden = gru_cell(t, dec, prev_hidden, x, d.dec_hidden);
  const Var logits = t.add(t.matvec(bp[layout.actor_w], hidden), bp[layout.actor_b]);
  return {logits, hidden, context, att};
}

Var value_head(Tape& t, const BoundParams& bp, const PolicyLayout& layout, Var hidden) {
  return t.add(t.matvec(bp[layout.critic_w], hidden), bp[layout.critic_b]);
}

std::vector<StepRecord> run_policy(Tape& t, const BoundParams& bp, const PolicyLayout& layout,
                                   const Scenario& scn, const ActionChooser& choose) {
  const PolicyDims& d = layout.dims;
  std::vector<StepRecord> steps;
  steps.reserve(scn.total_subtasks());
  for (std::size_t v = 0; v < scn.num_vehicles(); ++v) {
    const EncodedDag enc = encode_dag(t, bp, layout, scn, v);
    Var hidden = t.constant(std::vector<double>(d.dec_hidden, 0.0));
    std::size_t prev = d.actions();
    for (std::size_t p : scn.dags[v].topo_order()) {
      const DecodeOutput out = decode_step(t, bp, layout, hidden, enc, prev);
      const Var logp = t.log_softmax(out.logits);
      std::vector<double> probs(t.value(logp));
      for (double& x : probs) x = std::exp(x);
      const std::size_t a = choose(probs);
      if (a >= d.actions()) throw std::out_of_range("run_policy: chooser returned invalid action");
      steps.push_back({v, p, a, logp, value_head(t, bp, layout, out.hidden)});
      hidden = out.hidden;
      prev = a;
    }
  }
  return steps;
}

}  // namespace vecoff::nn
