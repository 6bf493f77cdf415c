#include "vecoff/tape.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vecoff::nn {

Var Tape::push(std::vector<double> value, std::size_t rows, std::size_t cols, Backward back) {
  Node n;
  n.value = std::move(value);
  n.rows = rows;
  n.cols = cols;
  if (record_) n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

std::vector<double>& Tape::grad_of(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
  return n.grad;
}

Var Tape::constant(std::vector<double> values) {
  const std::size_t n = values.size();
  return push(std::move(values), n, 1, nullptr);
}

Var Tape::parameter(std::span<const double> values, std::size_t rows, std::size_t cols,
                    std::size_t offset) {
  if (values.size() != rows * cols) throw std::invalid_argument("parameter: shape mismatch");
  Var v = push(std::vector<double>(values.begin(), values.end()), rows, cols, nullptr);
  nodes_[v.id].param_offset = static_cast<std::ptrdiff_t>(offset);
  return v;
}

Var Tape::matvec(Var m, Var x) {
  const Node& M = nodes_[m.id];
  const Node& X = nodes_[x.id];
  if (M.cols != X.value.size()) throw std::invalid_argument("matvec: dimension mismatch");
  const std::size_t R = M.rows, C = M.cols;
  std::vector<double> out(R, 0.0);
  for (std::size_t r = 0; r < R; ++r) {
    const double* w = &M.value[r * C];
    double acc = 0.0;
    for (std::size_t c = 0; c < C; ++c) acc += w[c] * X.value[c];
    out[r] = acc;
  }
  return push(std::move(out), R, 1, [m, x, R, C](Tape& t, std::size_t self) {
    const std::vector<double> g = t.nodes_[self].grad;
    auto& gm = t.grad_of(m.id);
    auto& gx = t.grad_of(x.id);
    const auto& W = t.nodes_[m.id].value;
    const auto& X = t.nodes_[x.id].value;
    for (std::size_t r = 0; r < R; ++r) {
      const double gr = g[r];
      if (gr == 0.0) continue;
      for (std::size_t c = 0; c < C; ++c) {
        gm[r * C + c] += gr * X[c];
        gx[c] += gr * W[r * C + c];
      }
    }
  });
}

namespace {
void check_same(const std::vector<double>& a, const std::vector<double>& b, const char* op) {
  if (a.size() != b.size()) throw std::invalid_argument(std::string(op) + ": size mismatch");
}
}  // namespace

Var Tape::add(Var a, Var b) {
  const auto& A = nodes_[a.id].value;
  const auto& B = nodes_[b.id].value;
  check_same(A, B, "add");
  std::vector<double> out(A.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] + B[i];
  return push(std::move(out), A.size(), 1, [a, b](Tape& t, std::size_t self) {
    const std::vector<double> g = t.nodes_[self].grad;
    auto& ga = t.grad_of(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    auto& gb = t.grad_of(b.id);
    for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
  });
}

Var Tape::sub(Var a, Var b) {
  const auto& A = nodes_[a.id].value;
  const auto& B = nodes_[b.id].value;
  check_same(A, B, "sub");
  std::vector<double> out(A.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] - B[i];
  return push(std::move(out), A.size(), 1, [a, b](Tape& t, std::size_t self) {
    const std::vector<double> g = t.nodes_[self].grad;
    auto& ga = t.grad_of(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    auto& gb = t.grad_of(b.id);
    for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
  });
}

Var Tape::mul(Var a, Var b) {
  const auto& A = nodes_[a.id].value;
  const auto& B = nodes_[b.id].value;
  check_same(A, B, "mul");
  std::vector<double> out(A.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] * B[i];
  return push(std::move(out), A.size(), 1, [a, b](Tape& t, std::size_t self) {
    const std::vector<double> g = t.nodes_[self].grad;
    const std::vector<double> A = t.nodes_[a.id].value;
    const std::vector<double> B = t.nodes_[b.id].value;
    auto& ga = t.grad_of(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * B[i];
    auto& gb = t.grad_of(b.id);
    for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * A[i];
  });
}

template <class F, class D>
Var Tape::unary(Var a, F f, D dfdx) {
  const auto& A = nodes_[a.id].value;
  std::vector<double> out(A.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(A[i]);
  return push(std::move(out), A.size(), 1, [a, dfdx](Tape& t, std::size_t self) {
    const std::vector<double> g = t.nodes_[self].grad;
    const auto& x = t.nodes_[a.id].value;
    const auto& y = t.nodes_[self].value;
    std::vector<double> local(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) local[i] = g[i] * dfdx(x[i], y[i]);
    auto& ga = t.grad_of(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += local[i];
  });
}

Var Tape::scale(Var a, double k) {
  return unary(a, [k](double x) { return k * x; }, [k](double, double) { return k; });
}

Var Tape::add_scalar(Var a, double k) {
  return unary(a, [k](double x) { return x + k; }, [](double, double) { return 1.0; });
}

Var Tape::sigmoid(Var a) {
  return unary(
      a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double, double y) { return y * (1.0 - y); });
}

Var Tape::tanh(Var a) {
  return unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var Tape::elu(Var a) {
  return unary(
      a, [](double x) { return x > 0.0 ? x : std::expm1(x); },
      [](double x, double y) { return x > 0.0 ? 1.0 : y + 1.0; });
}

Var Tape::leaky_relu(Var a, double slope) {
  return unary(
      a, [slope](double x) { return x > 0.0 ? x : slope * x; },
      [slope](double x, double) { return x > 0.0 ? 1.0 : slope; });
}

Var Tape::exp(Var a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var Tape::square(Var a) {
  return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var Tape::clamp(Var a, double lo, double hi) {
  return unary(
      a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x, double) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

Var Tape::min(Var a, Var b) {
  const auto& A = nodes_[a.id].value;
  const auto& B = nodes_[b.id].value;
  check_same(A, B, "min");
  std::vector<double> out(A.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::min(A[i], B[i]);
  return push(std::move(out), A.size(), 1, [a, b](Tape& t, std::size_t self) {
    const std::vector<double> g = t.nodes_[self].grad;
    const std::vector<double> A = t.nodes_[a.id].value;
    const std::vector<double> B = t.nodes_[b.id].value;
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (A[i] <= B[i])
        t.grad_of(a.id)[i] += g[i];
      else
        t.grad_of(b.id)[i] += g[i];
    }
  });
}

Var Tape::concat(std::span<const Var> parts) {
  std::vector<double> out;
  std::vector<std::size_t> ids;
  for (Var p : parts) {
    const auto& v = nodes_[p.id].value;
    out.insert(out.end(), v.begin(), v.end());
    ids.push_back(p.id);
  }
  const std::size_t n = out.size();
  return push(std::move(out), n, 1, [ids](Tape& t, std::size_t self) {
    const std::vector<double> g = t.nodes_[self].grad;
    std::size_t off = 0;
    for (std::size_t id : ids) {
      auto& gp = t.grad_of(id);
      for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g[off + i];
      off += gp.size();
    }
  });
}

Var Tape::slice(Var a, std::size_t offset, std::size_t len) {
  const auto& A = nodes_[a.id].value;
  if (offset + len > A.size()) throw std::invalid_argument("slice: out of range");
  std::vector<double> out(A.begin() + static_cast<std::ptrdiff_t>(offset),
                          A.begin() + static_cast<std::ptrdiff_t>(offset + len));
  return push(std::move(out), len, 1, [a, offset](Tape& t, std::size_t self) {
    const std::vector<double> g = t.nodes_[self].grad;
    auto& ga = t.grad_of(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) ga[offset + i] += g[i];
  });
}

Var Tape::row(Var m, std::size_t r) {
  const Node& M = nodes_[m.id];
  if (r >= M.rows) throw std::invalid_argument("row: index out of range");
  const std::size_t C = M.cols;
  std::vector<double> out(M.value.begin() + static_cast<std::ptrdiff_t>(r * C),
                          M.value.begin() + static_cast<std::ptrdiff_t>((r + 1) * C));
  return push(std::move(out), C, 1, [m, r, C](Tape& t, std::size_t self) {
    const std::vector<double> g = t.nodes_[self].grad;
    auto& gm = t.grad_of(m.id);
    for (std::size_t i = 0; i < C; ++i) gm[r * C + i] += g[i];
  });
}

Var Tape::dot(Var a, Var b) {
  const auto& A = nodes_[a.id].value;
  const auto& B = nodes_[b.id].value;
  check_same(A, B, "dot");
  double acc = 0.0;
  for (std::size_t i = 0; i < A.size(); ++i) acc += A[i] * B[i];
  return push({acc}, 1, 1, [a, b](Tape& t, std::size_t self) {
    const double g = t.nodes_[self].grad[0];
    const std::vector<double> A = t.nodes_[a.id].value;
    const std::vector<double> B = t.nodes_[b.id].value;
    auto& ga = t.grad_of(a.id);
    for (std::size_t i = 0; i < A.size(); ++i) ga[i] += g * B[i];
    auto& gb = t.grad_of(b.id);
    for (std::size_t i = 0; i < B.size(); ++i) gb[i] += g * A[i];
  });
}

Var Tape::sum(Var a) {
  double acc = 0.0;
  for (double x : nodes_[a.id].value) acc += x;
  return push({acc}, 1, 1, [a](Tape& t, std::size_t self) {
    const double g = t.nodes_[self].grad[0];
    for (double& x : t.grad_of(a.id)) x += g;
  });
}

Var Tape::mean(std::span<const Var> scalars) {
  if (scalars.empty()) throw std::invalid_argument("mean: no inputs");
  Var total = concat(scalars);
  return scale(sum(total), 1.0 / static_cast<double>(scalars.size()));
}

Var Tape::softmax(Var a) {
  const auto& A = nodes_[a.id].value;
  if (A.empty()) throw std::invalid_argument("softmax: empty input");
  const double mx = *std::max_element(A.begin(), A.end());
  std::vector<double> out(A.size());
  double z = 0.0;
  for (std::size_t i = 0; i < A.size(); ++i) z += (out[i] = std::exp(A[i] - mx));
  for (double& x : out) x /= z;
  return push(std::move(out), A.size(), 1, [a](Tape& t, std::size_t self) {
    const std::vector<double> g = t.nodes_[self].grad;
    const auto& y = t.nodes_[self].value;
    double gy = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) gy += g[i] * y[i];
    std::vector<double> local(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) local[i] = y[i] * (g[i] - gy);
    auto& ga = t.grad_of(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += local[i];
  });
}

Var Tape::log_softmax(Var a) {
  const auto& A = nodes_[a.id].value;
  if (A.empty()) throw std::invalid_argument("log_softmax: empty input");
  const double mx = *std::max_element(A.begin(), A.end());
  double z = 0.0;
  for (double x : A) z += std::exp(x - mx);
  const double lse = mx + std::log(z);
  std::vector<double> out(A.size());
  for (std::size_t i = 0; i < A.size(); ++i) out[i] = A[i] - lse;
  return push(std::move(out), A.size(), 1, [a](Tape& t, std::size_t self) {
    const std::vector<double> g = t.nodes_[self].grad;
    const auto& y = t.nodes_[self].value;
    double gs = 0.0;
    for (double x : g) gs += x;
    std::vector<double> local(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) local[i] = g[i] - std::exp(y[i]) * gs;
    auto& ga = t.grad_of(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += local[i];
  });
}

Var Tape::pick(Var a, std::size_t i) {
  const auto& A = nodes_[a.id].value;
  if (i >= A.size()) throw std::invalid_argument("pick: index out of range");
  return push({A[i]}, 1, 1, [a, i](Tape& t, std::size_t self) {
    const double g = t.nodes_[self].grad[0];
    t.grad_of(a.id)[i] += g;
  });
}

Var Tape::weighted_sum(std::span<const Var> vs, Var w) {
  const auto& W = nodes_[w.id].value;
  if (vs.size() != W.size() || vs.empty()) throw std::invalid_argument("weighted_sum: size mismatch");
  const std::size_t d = nodes_[vs[0].id].value.size();
  std::vector<double> out(d, 0.0);
  std::vector<std::size_t> ids;
  for (std::size_t k = 0; k < vs.size(); ++k) {
    const auto& v = nodes_[vs[k].id].value;
    if (v.size() != d) throw std::invalid_argument("weighted_sum: ragged inputs");
    for (std::size_t i = 0; i < d; ++i) out[i] += W[k] * v[i];
    ids.push_back(vs[k].id);
  }
  return push(std::move(out), d, 1, [ids, w, d](Tape& t, std::size_t self) {
    const std::vector<double> g = t.nodes_[self].grad;
    const std::vector<double> W = t.nodes_[w.id].value;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      const std::vector<double> v = t.nodes_[ids[k]].value;
      double gw = 0.0;
      auto& gv = t.grad_of(ids[k]);
      for (std::size_t i = 0; i < d; ++i) {
        gw += g[i] * v[i];
        gv[i] += g[i] * W[k];
      }
      t.grad_of(w.id)[k] += gw;
    }
  });
}

void Tape::backward(Var loss) {
  if (!record_) throw std::logic_error("backward: tape was not recording");
  if (nodes_.empty()) throw std::logic_error("backward: tape is empty");
  if (nodes_[loss.id].value.size() != 1) throw std::invalid_argument("backward: loss must be scalar");
  grad_of(loss.id)[0] += 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.back && !n.grad.empty()) n.back(*this, i);
  }
}

void Tape::accumulate_param_grads(std::span<double> out) const {
  for (const Node& n : nodes_) {
    if (n.param_offset < 0 || n.grad.empty()) continue;
    const auto off = static_cast<std::size_t>(n.param_offset);
    if (off + n.grad.size() > out.size()) throw std::out_of_range("param gradient out of range");
    for (std::size_t i = 0; i < n.grad.size(); ++i) out[off + i] += n.grad[i];
  }
}

}  // namespace vecoff::nn
