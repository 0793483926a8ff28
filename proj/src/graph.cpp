#include "ade/graph.hpp"

#include <cassert>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include "ade/errors.hpp"
#include "ade/kernels.hpp"

namespace ade {

namespace {

[[noreturn]] void shape_fail(const char* op, const Tensor& a) {
  throw std::invalid_argument(std::string(op) + ": bad shape " + shape_str(a.shape()));
}

[[noreturn]] void shape_fail2(const char* op, const Tensor& a, const Tensor& b) {
  throw std::invalid_argument(std::string(op) + ": incompatible shapes " +
                              shape_str(a.shape()) + " and " + shape_str(b.shape()));
}

void require_rank2(const char* op, const Tensor& t) {
  if (t.rank() != 2) shape_fail(op, t);
}

void require_rank1(const char* op, const Tensor& t) {
  if (t.rank() != 1) shape_fail(op, t);
}

}  // namespace

Var Graph::emit(const char* op, Tensor value, bool requires_grad,
                std::function<void(Graph&)> back) {
  if (checked_ && !value.all_finite()) {
    throw GraphError(std::string("non-finite values in output of ") + op);
  }
  Node n;
  n.value = std::move(value);
  n.op = op;
  n.requires_grad = requires_grad;
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Graph::Node& Graph::node(Var v) {
  if (!v.valid() || v.id >= nodes_.size()) throw std::logic_error("invalid graph handle");
  return nodes_[v.id];
}

const Graph::Node& Graph::cnode(Var v) const {
  if (!v.valid() || v.id >= nodes_.size()) throw std::logic_error("invalid graph handle");
  return nodes_[v.id];
}

double Graph::scalar_value(Var v) const {
  const Tensor& t = cnode(v).value;
  if (t.size() != 1) throw std::logic_error("scalar_value on tensor " + shape_str(t.shape()));
  return t[0];
}

const Tensor& Graph::gradient(Var v) const {
  const Node& n = cnode(v);
  if (!ran_backward_ || n.grad.size() == 0) {
    throw std::logic_error("gradient requested before backward()");
  }
  return n.grad;
}

Var Graph::input(Tensor value, bool requires_grad) {
  return emit("input", std::move(value), requires_grad, nullptr);
}

Var Graph::add(Var a, Var b) {
  const Tensor& ta = val(a);
  const Tensor& tb = val(b);
  if (!ta.same_shape(tb)) shape_fail2("add", ta, tb);
  Tensor out = ta;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += tb[i];
  Var r = emit("add", std::move(out), wants_grad(a) || wants_grad(b), nullptr);
  node(r).back = [a, b, r](Graph& g) {
    const Tensor& go = g.grad_ref(r);
    if (g.wants_grad(a)) {
      Tensor& ga = g.grad_ref(a);
      for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
    }
    if (g.wants_grad(b)) {
      Tensor& gb = g.grad_ref(b);
      for (std::size_t i = 0; i < go.size(); ++i) gb[i] += go[i];
    }
  };
  return r;
}

Var Graph::sub(Var a, Var b) {
  const Tensor& ta = val(a);
  const Tensor& tb = val(b);
  if (!ta.same_shape(tb)) shape_fail2("sub", ta, tb);
  Tensor out = ta;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= tb[i];
  Var r = emit("sub", std::move(out), wants_grad(a) || wants_grad(b), nullptr);
  node(r).back = [a, b, r](Graph& g) {
    const Tensor& go = g.grad_ref(r);
    if (g.wants_grad(a)) {
      Tensor& ga = g.grad_ref(a);
      for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
    }
    if (g.wants_grad(b)) {
      Tensor& gb = g.grad_ref(b);
      for (std::size_t i = 0; i < go.size(); ++i) gb[i] -= go[i];
    }
  };
  return r;
}

Var Graph::mul(Var a, Var b) {
  const Tensor& ta = val(a);
  const Tensor& tb = val(b);
  if (!ta.same_shape(tb)) shape_fail2("mul", ta, tb);
  Tensor out = ta;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= tb[i];
  Var r = emit("mul", std::move(out), wants_grad(a) || wants_grad(b), nullptr);
  node(r).back = [a, b, r](Graph& g) {
    const Tensor& go = g.grad_ref(r);
    const Tensor& ta = g.val(a);
    const Tensor& tb = g.val(b);
    if (g.wants_grad(a)) {
      Tensor& ga = g.grad_ref(a);
      for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * tb[i];
    }
    if (g.wants_grad(b)) {
      Tensor& gb = g.grad_ref(b);
      for (std::size_t i = 0; i < go.size(); ++i) gb[i] += go[i] * ta[i];
    }
  };
  return r;
}

Var Graph::scale(Var a, double c) {
  Tensor out = val(a);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= c;
  Var r = emit("scale", std::move(out), wants_grad(a), nullptr);
  node(r).back = [a, c, r](Graph& g) {
    if (!g.wants_grad(a)) return;
    const Tensor& go = g.grad_ref(r);
    Tensor& ga = g.grad_ref(a);
    for (std::size_t i = 0; i < go.size(); ++i) ga[i] += c * go[i];
  };
  return r;
}

Var Graph::add_rowvec(Var m, Var v) {
  const Tensor& tm = val(m);
  const Tensor& tv = val(v);
  require_rank2("add_rowvec", tm);
  require_rank1("add_rowvec", tv);
  if (tm.cols() != tv.size()) shape_fail2("add_rowvec", tm, tv);
  Tensor out = tm;
  const std::size_t rows = tm.rows(), cols = tm.cols();
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) out(i, j) += tv[j];
  Var r = emit("add_rowvec", std::move(out), wants_grad(m) || wants_grad(v), nullptr);
  node(r).back = [m, v, r](Graph& g) {
    const Tensor& go = g.grad_ref(r);
    const std::size_t rows = go.rows(), cols = go.cols();
    if (g.wants_grad(m)) {
      Tensor& gm = g.grad_ref(m);
      for (std::size_t i = 0; i < go.size(); ++i) gm[i] += go[i];
    }
    if (g.wants_grad(v)) {
      Tensor& gv = g.grad_ref(v);
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) gv[j] += go(i, j);
    }
  };
  return r;
}

Var Graph::add_scalar(Var m, Var s) {
  const Tensor& tm = val(m);
  const Tensor& ts = val(s);
  if (ts.size() != 1) shape_fail("add_scalar", ts);
  Tensor out = tm;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += ts[0];
  Var r = emit("add_scalar", std::move(out), wants_grad(m) || wants_grad(s), nullptr);
  node(r).back = [m, s, r](Graph& g) {
    const Tensor& go = g.grad_ref(r);
    if (g.wants_grad(m)) {
      Tensor& gm = g.grad_ref(m);
      for (std::size_t i = 0; i < go.size(); ++i) gm[i] += go[i];
    }
    if (g.wants_grad(s)) {
      double total = 0.0;
      for (std::size_t i = 0; i < go.size(); ++i) total += go[i];
      g.grad_ref(s)[0] += total;
    }
  };
  return r;
}

Var Graph::relu(Var a) {
  Tensor out = val(a);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = out[i] > 0.0 ? out[i] : 0.0;
  Var r = emit("relu", std::move(out), wants_grad(a), nullptr);
  node(r).back = [a, r](Graph& g) {
    if (!g.wants_grad(a)) return;
    const Tensor& go = g.grad_ref(r);
    const Tensor& ta = g.val(a);
    Tensor& ga = g.grad_ref(a);
    for (std::size_t i = 0; i < go.size(); ++i) {
      if (ta[i] > 0.0) ga[i] += go[i];
    }
  };
  return r;
}

Var Graph::log_e(Var a) {
  const Tensor& ta = val(a);
  Tensor out = ta;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(out[i]);
  Var r = emit("log", std::move(out), wants_grad(a), nullptr);
  node(r).back = [a, r](Graph& g) {
    if (!g.wants_grad(a)) return;
    const Tensor& go = g.grad_ref(r);
    const Tensor& ta = g.val(a);
    Tensor& ga = g.grad_ref(a);
    for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] / ta[i];
  };
  return r;
}

Var Graph::exp_e(Var a) {
  Tensor out = val(a);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(out[i]);
  Var r = emit("exp", std::move(out), wants_grad(a), nullptr);
  node(r).back = [a, r](Graph& g) {
    if (!g.wants_grad(a)) return;
    const Tensor& go = g.grad_ref(r);
    const Tensor& to = g.val(r);
    Tensor& ga = g.grad_ref(a);
    for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * to[i];
  };
  return r;
}

Var Graph::matmul(Var a, Var b) {
  const Tensor& ta = val(a);
  const Tensor& tb = val(b);
  require_rank2("matmul", ta);
  require_rank2("matmul", tb);
  if (ta.cols() != tb.rows()) shape_fail2("matmul", ta, tb);
  Tensor out(Shape{ta.rows(), tb.cols()});
  kernels::matmul_accumulate(ta, tb, out);
  Var r = emit("matmul", std::move(out), wants_grad(a) || wants_grad(b), nullptr);
  node(r).back = [a, b, r](Graph& g) {
    const Tensor& go = g.grad_ref(r);
    const Tensor& ta = g.val(a);
    const Tensor& tb = g.val(b);
    const std::size_t m = ta.rows(), k = ta.cols(), n = tb.cols();
    if (g.wants_grad(a)) {
      // ga[i][kk] += sum_j go[i][j] * tb[kk][j]
      Tensor& ga = g.grad_ref(a);
      for (std::size_t i = 0; i < m; ++i) {
        const double* grow = go.data() + i * n;
        double* garow = ga.data() + i * k;
        for (std::size_t kk = 0; kk < k; ++kk) {
          const double* brow = tb.data() + kk * n;
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
          garow[kk] += acc;
        }
      }
    }
    if (g.wants_grad(b)) {
      // gb[kk][j] += sum_i ta[i][kk] * go[i][j]
      Tensor& gb = g.grad_ref(b);
      for (std::size_t i = 0; i < m; ++i) {
        const double* arow = ta.data() + i * k;
        const double* grow = go.data() + i * n;
        for (std::size_t kk = 0; kk < k; ++kk) {
          const double av = arow[kk];
          if (av == 0.0) continue;
          double* gbrow = gb.data() + kk * n;
          for (std::size_t j = 0; j < n; ++j) gbrow[j] += av * grow[j];
        }
      }
    }
  };
  return r;
}

Var Graph::transpose(Var a) {
  const Tensor& ta = val(a);
  require_rank2("transpose", ta);
  const std::size_t m = ta.rows(), n = ta.cols();
  Tensor out(Shape{n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out(j, i) = ta(i, j);
  Var r = emit("transpose", std::move(out), wants_grad(a), nullptr);
  node(r).back = [a, r](Graph& g) {
    if (!g.wants_grad(a)) return;
    const Tensor& go = g.grad_ref(r);
    Tensor& ga = g.grad_ref(a);
    const std::size_t m = ga.rows(), n = ga.cols();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) ga(i, j) += go(j, i);
  };
  return r;
}

Var Graph::reshape(Var a, Shape shape) {
  const Tensor& ta = val(a);
  Tensor out(shape);
  if (out.size() != ta.size()) shape_fail2("reshape", ta, out);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ta[i];
  Var r = emit("reshape", std::move(out), wants_grad(a), nullptr);
  node(r).back = [a, r](Graph& g) {
    if (!g.wants_grad(a)) return;
    const Tensor& go = g.grad_ref(r);
    Tensor& ga = g.grad_ref(a);
    for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
  };
  return r;
}

Var Graph::dot(Var u, Var v) {
  const Tensor& tu = val(u);
  const Tensor& tv = val(v);
  require_rank1("dot", tu);
  require_rank1("dot", tv);
  if (tu.size() != tv.size()) shape_fail2("dot", tu, tv);
  double acc = 0.0;
  for (std::size_t i = 0; i < tu.size(); ++i) acc += tu[i] * tv[i];
  Var r = emit("dot", Tensor::scalar(acc), wants_grad(u) || wants_grad(v), nullptr);
  node(r).back = [u, v, r](Graph& g) {
    const double go = g.grad_ref(r)[0];
    const Tensor& tu = g.val(u);
    const Tensor& tv = g.val(v);
    if (g.wants_grad(u)) {
      Tensor& gu = g.grad_ref(u);
      for (std::size_t i = 0; i < tu.size(); ++i) gu[i] += go * tv[i];
    }
    if (g.wants_grad(v)) {
      Tensor& gv = g.grad_ref(v);
      for (std::size_t i = 0; i < tu.size(); ++i) gv[i] += go * tu[i];
    }
  };
  return r;
}

Var Graph::sum_all(Var a) {
  const Tensor& ta = val(a);
  double acc = 0.0;
  for (std::size_t i = 0; i < ta.size(); ++i) acc += ta[i];
  Var r = emit("sum", Tensor::scalar(acc), wants_grad(a), nullptr);
  node(r).back = [a, r](Graph& g) {
    if (!g.wants_grad(a)) return;
    const double go = g.grad_ref(r)[0];
    Tensor& ga = g.grad_ref(a);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += go;
  };
  return r;
}

Var Graph::diagonal(Var m) {
  const Tensor& tm = val(m);
  require_rank2("diagonal", tm);
  if (tm.rows() != tm.cols()) shape_fail("diagonal", tm);
  const std::size_t n = tm.rows();
  Tensor out(Shape{n});
  for (std::size_t i = 0; i < n; ++i) out[i] = tm(i, i);
  Var r = emit("diagonal", std::move(out), wants_grad(m), nullptr);
  node(r).back = [m, r](Graph& g) {
    if (!g.wants_grad(m)) return;
    const Tensor& go = g.grad_ref(r);
    Tensor& gm = g.grad_ref(m);
    for (std::size_t i = 0; i < go.size(); ++i) gm(i, i) += go[i];
  };
  return r;
}

Var Graph::gather_rows(Var table, std::vector<std::size_t> ids) {
  const Tensor& tt = val(table);
  require_rank2("gather_rows", tt);
  const std::size_t v = tt.rows(), d = tt.cols();
  for (std::size_t id : ids) {
    if (id >= v) {
      throw std::out_of_range("gather_rows: id " + std::to_string(id) +
                              " out of range for table with " + std::to_string(v) + " rows");
    }
  }
  Tensor out(Shape{ids.size(), d});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const double* src = tt.data() + ids[i] * d;
    double* dst = out.data() + i * d;
    for (std::size_t c = 0; c < d; ++c) dst[c] = src[c];
  }
  Var r = emit("gather_rows", std::move(out), wants_grad(table), nullptr);
  node(r).back = [table, ids = std::move(ids), r](Graph& g) {
    if (!g.wants_grad(table)) return;
    const Tensor& go = g.grad_ref(r);
    Tensor& gt = g.grad_ref(table);
    const std::size_t d = go.cols();
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const double* src = go.data() + i * d;
      double* dst = gt.data() + ids[i] * d;
      for (std::size_t c = 0; c < d; ++c) dst[c] += src[c];
    }
  };
  return r;
}

Var Graph::stack_rows(const std::vector<Var>& rows) {
  if (rows.empty()) throw std::invalid_argument("stack_rows: no rows");
  const std::size_t d = val(rows[0]).size();
  bool rg = false;
  for (Var v : rows) {
    require_rank1("stack_rows", val(v));
    if (val(v).size() != d) shape_fail2("stack_rows", val(rows[0]), val(v));
    rg = rg || wants_grad(v);
  }
  Tensor out(Shape{rows.size(), d});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Tensor& t = val(rows[i]);
    for (std::size_t c = 0; c < d; ++c) out(i, c) = t[c];
  }
  Var r = emit("stack_rows", std::move(out), rg, nullptr);
  node(r).back = [rows, r](Graph& g) {
    const Tensor& go = g.grad_ref(r);
    const std::size_t d = go.cols();
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (!g.wants_grad(rows[i])) continue;
      Tensor& gi = g.grad_ref(rows[i]);
      for (std::size_t c = 0; c < d; ++c) gi[c] += go(i, c);
    }
  };
  return r;
}

Var Graph::stack_scalars(const std::vector<Var>& cells, std::size_t rows,
                         std::size_t cols) {
  if (cells.size() != rows * cols) {
    throw std::invalid_argument("stack_scalars: " + std::to_string(cells.size()) +
                                " cells for " + std::to_string(rows) + "x" + std::to_string(cols));
  }
  bool rg = false;
  Tensor out(Shape{rows, cols});
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const Tensor& t = val(cells[i]);
    if (t.size() != 1) shape_fail("stack_scalars", t);
    out[i] = t[0];
    rg = rg || wants_grad(cells[i]);
  }
  Var r = emit("stack_scalars", std::move(out), rg, nullptr);
  node(r).back = [cells, r](Graph& g) {
    const Tensor& go = g.grad_ref(r);
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (g.wants_grad(cells[i])) g.grad_ref(cells[i])[0] += go[i];
    }
  };
  return r;
}

Var Graph::masked_softmax_rows(Var m, Mask col_mask) {
  const Tensor& tm = val(m);
  require_rank2("masked_softmax_rows", tm);
  if (col_mask.size() != tm.cols()) shape_fail("masked_softmax_rows", tm);
  const std::size_t rows = tm.rows(), cols = tm.cols();
  Tensor out(Shape{rows, cols});
  for (std::size_t i = 0; i < rows; ++i) {
    kernels::masked_softmax(tm.data() + i * cols, col_mask.data(), cols,
                            out.data() + i * cols);
  }
  Var r = emit("masked_softmax_rows", std::move(out), wants_grad(m), nullptr);
  node(r).back = [m, r, mask = std::move(col_mask)](Graph& g) {
    if (!g.wants_grad(m)) return;
    const Tensor& go = g.grad_ref(r);
    const Tensor& y = g.val(r);
    Tensor& gm = g.grad_ref(m);
    const std::size_t rows = y.rows(), cols = y.cols();
    for (std::size_t i = 0; i < rows; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < cols; ++j) {
        if (mask[j]) s += go(i, j) * y(i, j);
      }
      for (std::size_t j = 0; j < cols; ++j) {
        if (mask[j]) gm(i, j) += y(i, j) * (go(i, j) - s);
      }
    }
  };
  return r;
}

Var Graph::masked_log_softmax_rows(Var m, Mask col_mask) {
  const Tensor& tm = val(m);
  require_rank2("masked_log_softmax_rows", tm);
  if (col_mask.size() != tm.cols()) shape_fail("masked_log_softmax_rows", tm);
  const std::size_t rows = tm.rows(), cols = tm.cols();
  Tensor out(Shape{rows, cols});
  for (std::size_t i = 0; i < rows; ++i) {
    kernels::masked_log_softmax(tm.data() + i * cols, col_mask.data(), cols,
                                out.data() + i * cols);
  }
  Var r = emit("masked_log_softmax_rows", std::move(out), wants_grad(m), nullptr);
  node(r).back = [m, r, mask = std::move(col_mask)](Graph& g) {
    if (!g.wants_grad(m)) return;
    const Tensor& go = g.grad_ref(r);
    const Tensor& y = g.val(r);  // log softmax; softmax = exp(y)
    Tensor& gm = g.grad_ref(m);
    const std::size_t rows = y.rows(), cols = y.cols();
    for (std::size_t i = 0; i < rows; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < cols; ++j) {
        if (mask[j]) s += go(i, j);
      }
      for (std::size_t j = 0; j < cols; ++j) {
        if (mask[j]) gm(i, j) += go(i, j) - std::exp(y(i, j)) * s;
      }
    }
  };
  return r;
}

Var Graph::masked_max_rows(Var m, Mask col_mask) {
  const Tensor& tm = val(m);
  require_rank2("masked_max_rows", tm);
  if (col_mask.size() != tm.cols()) shape_fail("masked_max_rows", tm);
  const std::size_t rows = tm.rows(), cols = tm.cols();
  Tensor out(Shape{rows});
  std::vector<std::size_t> arg(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    arg[i] = kernels::masked_argmax(tm.data() + i * cols, col_mask.data(), cols);
    out[i] = tm(i, arg[i]);
  }
  Var r = emit("masked_max_rows", std::move(out), wants_grad(m), nullptr);
  node(r).back = [m, r, arg = std::move(arg)](Graph& g) {
    if (!g.wants_grad(m)) return;
    const Tensor& go = g.grad_ref(r);
    Tensor& gm = g.grad_ref(m);
    for (std::size_t i = 0; i < go.size(); ++i) gm(i, arg[i]) += go[i];
  };
  return r;
}

Var Graph::masked_softmax_vec(Var v, Mask mask) {
  const Tensor& tv = val(v);
  require_rank1("masked_softmax_vec", tv);
  if (mask.size() != tv.size()) shape_fail("masked_softmax_vec", tv);
  Tensor out(Shape{tv.size()});
  kernels::masked_softmax(tv.data(), mask.data(), tv.size(), out.data());
  Var r = emit("masked_softmax_vec", std::move(out), wants_grad(v), nullptr);
  node(r).back = [v, r, mask = std::move(mask)](Graph& g) {
    if (!g.wants_grad(v)) return;
    const Tensor& go = g.grad_ref(r);
    const Tensor& y = g.val(r);
    Tensor& gv = g.grad_ref(v);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (mask[i]) s += go[i] * y[i];
    }
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (mask[i]) gv[i] += y[i] * (go[i] - s);
    }
  };
  return r;
}

Var Graph::masked_mean_rows(Var m, Mask row_mask) {
  const Tensor& tm = val(m);
  require_rank2("masked_mean_rows", tm);
  if (row_mask.size() != tm.rows()) shape_fail("masked_mean_rows", tm);
  Tensor out(Shape{tm.cols()});
  kernels::masked_mean_rows(tm, row_mask.data(), out.data());
  Var r = emit("masked_mean_rows", std::move(out), wants_grad(m), nullptr);
  node(r).back = [m, r, mask = std::move(row_mask)](Graph& g) {
    if (!g.wants_grad(m)) return;
    const Tensor& go = g.grad_ref(r);
    Tensor& gm = g.grad_ref(m);
    const std::size_t rows = gm.rows(), cols = gm.cols();
    const double inv = 1.0 / static_cast<double>(mask_count(mask));
    for (std::size_t i = 0; i < rows; ++i) {
      if (!mask[i]) continue;
      double* grow = gm.data() + i * cols;
      for (std::size_t c = 0; c < cols; ++c) grow[c] += inv * go[c];
    }
  };
  return r;
}

Var Graph::weighted_row_sum(Var w, Var rows) {
  const Tensor& tw = val(w);
  const Tensor& tr = val(rows);
  require_rank1("weighted_row_sum", tw);
  require_rank2("weighted_row_sum", tr);
  if (tw.size() != tr.rows()) shape_fail2("weighted_row_sum", tw, tr);
  Tensor out(Shape{tr.cols()});
  kernels::weighted_row_sum(tw.data(), tr, out.data());
  Var r = emit("weighted_row_sum", std::move(out), wants_grad(w) || wants_grad(rows), nullptr);
  node(r).back = [w, rows, r](Graph& g) {
    const Tensor& go = g.grad_ref(r);
    const Tensor& tw = g.val(w);
    const Tensor& tr = g.val(rows);
    const std::size_t n = tr.rows(), d = tr.cols();
    if (g.wants_grad(w)) {
      Tensor& gw = g.grad_ref(w);
      for (std::size_t i = 0; i < n; ++i) {
        const double* row = tr.data() + i * d;
        double acc = 0.0;
        for (std::size_t c = 0; c < d; ++c) acc += go[c] * row[c];
        gw[i] += acc;
      }
    }
    if (g.wants_grad(rows)) {
      Tensor& gr = g.grad_ref(rows);
      for (std::size_t i = 0; i < n; ++i) {
        const double wi = tw[i];
        if (wi == 0.0) continue;
        double* grow = gr.data() + i * d;
        for (std::size_t c = 0; c < d; ++c) grow[c] += wi * go[c];
      }
    }
  };
  return r;
}

namespace {

// Row norms with the cosine floor applied; flags mark rows above the floor
// (those contribute the norm-direction gradient term).
void floored_row_norms(const Tensor& t, std::vector<double>& norms,
                       std::vector<std::uint8_t>& above) {
  const std::size_t n = t.rows(), d = t.cols();
  norms.resize(n);
  above.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double ss = 0.0;
    const double* row = t.data() + i * d;
    for (std::size_t c = 0; c < d; ++c) ss += row[c] * row[c];
    const double raw = std::sqrt(ss);
    above[i] = raw > kernels::kNormFloor;
    norms[i] = std::max(raw, kernels::kNormFloor);
  }
}

}  // namespace

Var Graph::cosine_matrix(Var a, Var b) {
  const Tensor& ta = val(a);
  const Tensor& tb = val(b);
  require_rank2("cosine_matrix", ta);
  require_rank2("cosine_matrix", tb);
  if (ta.cols() != tb.cols()) shape_fail2("cosine_matrix", ta, tb);
  const std::size_t m = ta.rows(), n = tb.rows(), d = ta.cols();
  Tensor out(Shape{m, n});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      out(i, j) = kernels::cosine(ta.data() + i * d, tb.data() + j * d, d);
    }
  }
  Var r = emit("cosine_matrix", std::move(out), wants_grad(a) || wants_grad(b), nullptr);
  node(r).back = [a, b, r](Graph& g) {
    const Tensor& go = g.grad_ref(r);
    const Tensor& s = g.val(r);
    const Tensor& ta = g.val(a);
    const Tensor& tb = g.val(b);
    const std::size_t m = ta.rows(), n = tb.rows(), d = ta.cols();
    std::vector<double> na, nb;
    std::vector<std::uint8_t> fa, fb;
    floored_row_norms(ta, na, fa);
    floored_row_norms(tb, nb, fb);
    if (g.wants_grad(a)) {
      Tensor& ga = g.grad_ref(a);
      for (std::size_t i = 0; i < m; ++i) {
        const double* arow = ta.data() + i * d;
        double* garow = ga.data() + i * d;
        double coef = 0.0;  // sum_j go_ij * s_ij
        for (std::size_t j = 0; j < n; ++j) {
          const double gij = go(i, j);
          if (gij == 0.0) continue;
          coef += gij * s(i, j);
          const double f = gij / (na[i] * nb[j]);
          const double* brow = tb.data() + j * d;
          for (std::size_t c = 0; c < d; ++c) garow[c] += f * brow[c];
        }
        if (fa[i] && coef != 0.0) {
          const double f = coef / (na[i] * na[i]);
          for (std::size_t c = 0; c < d; ++c) garow[c] -= f * arow[c];
        }
      }
    }
    if (g.wants_grad(b)) {
      Tensor& gb = g.grad_ref(b);
      for (std::size_t j = 0; j < n; ++j) {
        const double* brow = tb.data() + j * d;
        double* gbrow = gb.data() + j * d;
        double coef = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
          const double gij = go(i, j);
          if (gij == 0.0) continue;
          coef += gij * s(i, j);
          const double f = gij / (na[i] * nb[j]);
          const double* arow = ta.data() + i * d;
          for (std::size_t c = 0; c < d; ++c) gbrow[c] += f * arow[c];
        }
        if (fb[j] && coef != 0.0) {
          const double f = coef / (nb[j] * nb[j]);
          for (std::size_t c = 0; c < d; ++c) gbrow[c] -= f * brow[c];
        }
      }
    }
  };
  return r;
}

Var Graph::cosine_vec(Var u, Var v) {
  const Tensor& tu = val(u);
  const Tensor& tv = val(v);
  require_rank1("cosine_vec", tu);
  require_rank1("cosine_vec", tv);
  if (tu.size() != tv.size()) shape_fail2("cosine_vec", tu, tv);
  const std::size_t d = tu.size();
  const double c = kernels::cosine(tu.data(), tv.data(), d);
  Var r = emit("cosine_vec", Tensor::scalar(c), wants_grad(u) || wants_grad(v), nullptr);
  node(r).back = [u, v, r](Graph& g) {
    const double go = g.grad_ref(r)[0];
    const double c = g.val(r)[0];
    const Tensor& tu = g.val(u);
    const Tensor& tv = g.val(v);
    const std::size_t d = tu.size();
    double uu = 0.0, vv = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      uu += tu[i] * tu[i];
      vv += tv[i] * tv[i];
    }
    const double rawu = std::sqrt(uu), rawv = std::sqrt(vv);
    const double nu = std::max(rawu, kernels::kNormFloor);
    const double nv = std::max(rawv, kernels::kNormFloor);
    if (g.wants_grad(u)) {
      Tensor& gu = g.grad_ref(u);
      for (std::size_t i = 0; i < d; ++i) {
        double der = tv[i] / (nu * nv);
        if (rawu > kernels::kNormFloor) der -= c * tu[i] / (nu * nu);
        gu[i] += go * der;
      }
    }
    if (g.wants_grad(v)) {
      Tensor& gv = g.grad_ref(v);
      for (std::size_t i = 0; i < d; ++i) {
        double der = tu[i] / (nu * nv);
        if (rawv > kernels::kNormFloor) der -= c * tv[i] / (nv * nv);
        gv[i] += go * der;
      }
    }
  };
  return r;
}

Var Graph::layer_norm_rows(Var m, Var gain, Var bias) {
  const Tensor& tm = val(m);
  const Tensor& tg = val(gain);
  const Tensor& tb = val(bias);
  require_rank2("layer_norm_rows", tm);
  require_rank1("layer_norm_rows", tg);
  require_rank1("layer_norm_rows", tb);
  if (tg.size() != tm.cols() || tb.size() != tm.cols()) shape_fail2("layer_norm_rows", tm, tg);
  const std::size_t rows = tm.rows(), cols = tm.cols();
  Tensor out(Shape{rows, cols});
  Tensor xhat(Shape{rows, cols});
  std::vector<double> inv_sigma(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    const double* x = tm.data() + i * cols;
    double mean = 0.0;
    for (std::size_t c = 0; c < cols; ++c) mean += x[c];
    mean /= static_cast<double>(cols);
    double var = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      const double dlt = x[c] - mean;
      var += dlt * dlt;
    }
    var /= static_cast<double>(cols);
    const double is = 1.0 / std::sqrt(var + kernels::kLayerNormEps);
    inv_sigma[i] = is;
    for (std::size_t c = 0; c < cols; ++c) {
      const double xh = (x[c] - mean) * is;
      xhat(i, c) = xh;
      out(i, c) = tg[c] * xh + tb[c];
    }
  }
  const bool rg = wants_grad(m) || wants_grad(gain) || wants_grad(bias);
  Var r = emit("layer_norm_rows", std::move(out), rg, nullptr);
  node(r).back = [m, gain, bias, r, xhat = std::move(xhat),
                  inv_sigma = std::move(inv_sigma)](Graph& g) {
    const Tensor& go = g.grad_ref(r);
    const Tensor& tg = g.val(gain);
    const std::size_t rows = go.rows(), cols = go.cols();
    if (g.wants_grad(gain)) {
      Tensor& gg = g.grad_ref(gain);
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t c = 0; c < cols; ++c) gg[c] += go(i, c) * xhat(i, c);
    }
    if (g.wants_grad(bias)) {
      Tensor& gb = g.grad_ref(bias);
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t c = 0; c < cols; ++c) gb[c] += go(i, c);
    }
    if (g.wants_grad(m)) {
      Tensor& gm = g.grad_ref(m);
      const double invn = 1.0 / static_cast<double>(cols);
      for (std::size_t i = 0; i < rows; ++i) {
        double mean_t = 0.0, mean_tx = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
          const double t = go(i, c) * tg[c];
          mean_t += t;
          mean_tx += t * xhat(i, c);
        }
        mean_t *= invn;
        mean_tx *= invn;
        for (std::size_t c = 0; c < cols; ++c) {
          const double t = go(i, c) * tg[c];
          gm(i, c) += inv_sigma[i] * (t - mean_t - xhat(i, c) * mean_tx);
        }
      }
    }
  };
  return r;
}

Var Graph::mi_bound(Var logits, MiGrad grad_mode, double ema_log) {
  const Tensor& tl = val(logits);
  require_rank2("mi_bound", tl);
  if (tl.rows() != tl.cols() || tl.rows() < 2) {
    throw std::invalid_argument("mi_bound: needs a KxK logit matrix with K >= 2, got " +
                                shape_str(tl.shape()));
  }
  const std::size_t k = tl.rows();
  const double log_km1 = std::log(static_cast<double>(k - 1));
  // Per-row log of sum_{n'!=n} exp(logits[n][n']), max-stabilized.
  std::vector<double> lse(k);
  Mask offdiag(k, 1);
  for (std::size_t n = 0; n < k; ++n) {
    offdiag[n] = 0;
    lse[n] = kernels::masked_logsumexp(tl.data() + n * k, offdiag.data(), k);
    offdiag[n] = 1;
  }
  double total = 0.0;
  for (std::size_t n = 0; n < k; ++n) total += tl(n, n) - (lse[n] - log_km1);
  total /= static_cast<double>(k);
  Var r = emit("mi_bound", Tensor::scalar(total), wants_grad(logits), nullptr);
  node(r).back = [logits, r, grad_mode, ema_log, log_km1,
                  lse = std::move(lse)](Graph& g) {
    if (!g.wants_grad(logits)) return;
    const double go = g.grad_ref(r)[0];
    const Tensor& tl = g.val(logits);
    Tensor& gl = g.grad_ref(logits);
    const std::size_t k = tl.rows();
    const double invk = go / static_cast<double>(k);
    for (std::size_t n = 0; n < k; ++n) {
      gl(n, n) += invk;
      // d/dl[n][m] of log denominator: ratio of exp(l[n][m]) to the
      // denominator statistic; the EMA mode swaps in the moving average.
      const double log_denom = grad_mode == MiGrad::Exact
                                   ? lse[n]
                                   : ema_log + log_km1;
      for (std::size_t mcol = 0; mcol < k; ++mcol) {
        if (mcol == n) continue;
        gl(n, mcol) -= invk * std::exp(tl(n, mcol) - log_denom);
      }
    }
  };
  return r;
}

void Graph::backward(Var root) {
  if (ran_backward_) throw std::logic_error("backward() already ran on this graph");
  const Node& rn = cnode(root);
  if (rn.value.size() != 1) {
    throw std::logic_error("backward root must be scalar, got " + shape_str(rn.value.shape()));
  }
  ran_backward_ = true;
  for (std::uint32_t i = 0; i <= root.id; ++i) {
    Node& n = nodes_[i];
    n.grad = Tensor(n.value.shape());
  }
  nodes_[root.id].grad[0] = 1.0;
  for (std::uint32_t i = root.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.requires_grad && n.back) n.back(*this);
  }
}

}  // namespace ade
