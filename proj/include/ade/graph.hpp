#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "ade/tensor.hpp"

namespace ade {

// Handle to a node in a Graph.
struct Var {
  std::uint32_t id = UINT32_MAX;
  bool valid() const { return id != UINT32_MAX; }
};

// Gradient treatment of the mutual-information bound denominator:
//   Exact       - adjoint of the value actually computed (per-row statistic).
//   EmaBlended  - the per-row denominator is replaced in the adjoint by an
//                 externally maintained moving-average statistic (passed as
//                 log value) to reduce small-batch gradient bias. The forward
//                 value is unchanged.
enum class MiGrad { Exact, EmaBlended };

// Reverse-mode tape over dense tensors. Node values are computed eagerly at
// creation; backward() replays recorded adjoint closures in reverse creation
// order. With checked=true every op output is scanned for NaN/Inf and a
// GraphError naming the op is thrown on the first hit.
//
// Masks passed to the masked_* ops are captured by value and treated as
// non-differentiable structure. Masked slots of an op output are exactly 0
// and receive no gradient.
class Graph {
 public:
  explicit Graph(bool checked = true) : checked_(checked) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var input(Tensor value, bool requires_grad = false);
  Var constant(Tensor value) { return input(std::move(value), false); }

  // Elementwise / broadcast arithmetic.
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double c);
  Var add_rowvec(Var m, Var v);   // m: RxC, v: C; adds v to every row
  Var add_scalar(Var m, Var s);   // s: shape {1}, broadcast add
  Var relu(Var a);
  Var log_e(Var a);
  Var exp_e(Var a);

  // Linear algebra.
  Var matmul(Var a, Var b);
  Var transpose(Var a);
  Var reshape(Var a, Shape shape);
  Var dot(Var u, Var v);          // rank-1 x rank-1 -> scalar
  Var sum_all(Var a);             // -> scalar
  Var diagonal(Var m);            // NxN -> N
  Var gather_rows(Var table, std::vector<std::size_t> ids);
  Var stack_rows(const std::vector<Var>& rows);        // n vectors d -> n x d
  Var stack_scalars(const std::vector<Var>& cells,
                    std::size_t rows, std::size_t cols);

  // Masked reductions. Column masks apply identically to every row.
  Var masked_softmax_rows(Var m, Mask col_mask);
  Var masked_log_softmax_rows(Var m, Mask col_mask);
  Var masked_max_rows(Var m, Mask col_mask);           // -> rows() vector
  Var masked_softmax_vec(Var v, Mask mask);
  Var masked_mean_rows(Var m, Mask row_mask);          // -> cols() vector

  // out[d] = sum_i w[i] rows[i][d]; w rank-1 n, rows n x d.
  Var weighted_row_sum(Var w, Var rows);

  // Row-cosine similarity: a: M x D, b: N x D -> M x N, norms floored.
  Var cosine_matrix(Var a, Var b);
  Var cosine_vec(Var u, Var v);   // -> scalar, norms floored

  // Per-row layer normalization with learnable gain/bias (both rank-1 D).
  Var layer_norm_rows(Var m, Var gain, Var bias);

  // Leave-one-out mutual-information bound over a KxK logit matrix:
  //   (1/K) sum_n [ logits[n][n] - log( (1/(K-1)) sum_{n'!=n} exp(logits[n][n']) ) ]
  // K must be >= 2. See MiGrad for the adjoint options; ema_log is only read
  // in EmaBlended mode.
  Var mi_bound(Var logits, MiGrad grad_mode, double ema_log = 0.0);

  const Tensor& value(Var v) const { return cnode(v).value; }
  double scalar_value(Var v) const;
  bool wants_grad(Var v) const { return cnode(v).requires_grad; }

  // Seeds d(root)=1 and accumulates adjoints for every node. root must be a
  // scalar (shape {1}). May be called once per graph.
  void backward(Var root);
  const Tensor& gradient(Var v) const;

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    const char* op = "";
    bool requires_grad = false;
    std::function<void(Graph&)> back;
  };

  std::vector<Node> nodes_;
  bool checked_ = true;
  bool ran_backward_ = false;

  Var emit(const char* op, Tensor value, bool requires_grad,
           std::function<void(Graph&)> back);
  Node& node(Var v);
  const Node& cnode(Var v) const;
  Tensor& grad_ref(Var v) { return node(v).grad; }
  const Tensor& val(Var v) const { return cnode(v).value; }
};

}  // namespace ade
