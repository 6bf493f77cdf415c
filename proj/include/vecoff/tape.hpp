#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace vecoff::nn {

// Handle to a value recorded on a Tape.
struct Var {
  std::size_t id = 0;
};

// Dense-tensor computation record supporting exact reverse-mode gradients.
// Values are vectors (cols == 1) or row-major matrices. A tape built with
// record == false still evaluates every op but keeps no backward closures.
class Tape {
public:
  explicit Tape(bool record = true) : record_(record) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }
  std::size_t size() const { return nodes_.size(); }

  Var constant(std::vector<double> values);
  // Parameter leaf; its gradient is scattered to [offset, offset + rows*cols).
  Var parameter(std::span<const double> values, std::size_t rows, std::size_t cols,
                std::size_t offset);

  Var matvec(Var m, Var x);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double k);
  Var add_scalar(Var a, double k);
  Var sigmoid(Var a);
  Var tanh(Var a);
  Var elu(Var a);
  Var leaky_relu(Var a, double slope);
  Var exp(Var a);
  Var square(Var a);
  // Elementwise clamp; gradient passes only strictly inside (lo, hi).
  Var clamp(Var a, double lo, double hi);
  // Elementwise minimum; ties send the gradient to `a`.
  Var min(Var a, Var b);
  Var concat(std::span<const Var> parts);
  Var slice(Var a, std::size_t offset, std::size_t len);
  Var row(Var m, std::size_t r);
  Var dot(Var a, Var b);
  Var sum(Var a);
  Var mean(std::span<const Var> scalars);
  Var softmax(Var a);
  Var log_softmax(Var a);
  Var pick(Var a, std::size_t i);
  // sum_i w[i] * vs[i]; w has one entry per vector.
  Var weighted_sum(std::span<const Var> vs, Var w);

  const std::vector<double>& value(Var v) const { return nodes_[v.id].value; }
  double scalar(Var v) const { return nodes_[v.id].value.at(0); }
  std::size_t rows(Var v) const { return nodes_[v.id].rows; }

  // Seeds d(loss)/d(loss) = 1 and propagates. `loss` must be a scalar.
  void backward(Var loss);
  // Adds parameter-leaf gradients into `out` (indexed by parameter offset).
  void accumulate_param_grads(std::span<double> out) const;
  const std::vector<double>& grad(Var v) const { return nodes_[v.id].grad; }

private:
  using Backward = std::function<void(Tape&, std::size_t self)>;
  struct Node {
    std::vector<double> value;
    std::vector<double> grad;
    std::size_t rows = 0;
    std::size_t cols = 1;
    Backward back;
    std::ptrdiff_t param_offset = -1;
  };

  Var push(std::vector<double> value, std::size_t rows, std::size_t cols, Backward back);
  std::vector<double>& grad_of(std::size_t id);
  template <class F, class D>
  Var unary(Var a, F f, D dfdx);

  bool record_;
  std::vector<Node> nodes_;
};

}  // namespace vecoff::nn
