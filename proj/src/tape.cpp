#include "pgdcrnn/tape.hpp"

#include <algorithm>
#include <cmath>

#include "pgdcrnn/error.hpp"
#include "pgdcrnn/kernels.hpp"

namespace pgdcrnn {

double sigmoid(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Var Tape::constant(Tensor value) {
  nodes_.push_back({std::move(value), {}, {}, false});
  return Var{nodes_.size() - 1};
}

Var Tape::variable(Tensor value) {
  nodes_.push_back({std::move(value), {}, {}, true});
  return Var{nodes_.size() - 1};
}

Var Tape::record(Tensor value, const std::vector<Var> &inputs, BackwardFn backward) {
  bool rg = false;
  for (Var in : inputs) rg = rg || node(in).requires_grad;
  nodes_.push_back({std::move(value), {}, rg ? std::move(backward) : BackwardFn{}, rg});
  return Var{nodes_.size() - 1};
}

const Tape::Node &Tape::node(Var v) const {
  if (!v.valid() || v.id >= nodes_.size()) throw_config("variable is not on this tape");
  return nodes_[v.id];
}

const Tensor &Tape::value(Var v) const { return node(v).value; }

Tensor Tape::grad(Var v) const {
  const Node &n = node(v);
  if (n.grad.empty() && !n.value.empty()) return Tensor(n.value.shape());
  return n.grad;
}

bool Tape::requires_grad(Var v) const { return node(v).requires_grad; }

Tensor &Tape::grad_buffer(std::size_t id) {
  Node &n = nodes_[id];
  if (n.grad.size() != n.value.size()) n.grad = Tensor(n.value.shape());
  return n.grad;
}

void Tape::backward(Var loss) {
  if (!loss.valid() || loss.id >= nodes_.size()) throw_config("loss is not on this tape");
  if (nodes_[loss.id].value.size() != 1) throw_config("loss must be a scalar");
  for (Node &n : nodes_) n.grad = Tensor();
  if (!nodes_[loss.id].requires_grad) return;
  grad_buffer(loss.id)[0] = 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node &n = nodes_[i];
    if (!n.backward || n.grad.empty()) continue;
    n.backward(*this, i);
  }
}

namespace ops {

namespace {

void require_same_shape(const Tensor &a, const Tensor &b, const char *op) {
  if (a.shape() != b.shape()) {
    throw_config(std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                 " vs " + shape_string(b.shape()));
  }
}

void accumulate(Tape &t, std::size_t id, const Tensor &g) {
  if (!t.needs_grad(id)) return;
  Tensor &dst = t.grad_buffer(id);
  for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
}

}  // namespace

Var matmul(Tape &t, Var a, Var b) {
  const Tensor &av = t.value(a);
  const Tensor &bv = t.value(b);
  if (av.rank() != 2 || bv.rank() != 2 || av.cols() != bv.rows()) {
    throw_config("matmul: shape mismatch " + shape_string(av.shape()) + " x " +
                 shape_string(bv.shape()));
  }
  const std::size_t n = av.rows(), k = av.cols(), m = bv.cols();
  Tensor out({n, m});
  kernels::gemm(av.data(), bv.data(), out.data(), n, k, m, false);
  const std::size_t ia = a.id, ib = b.id;
  return t.record(std::move(out), {a, b}, [ia, ib, n, k, m](Tape &tp, std::size_t self) {
    const Tensor &g = tp.grad_buffer(self);
    if (tp.needs_grad(ia)) {
      kernels::gemm_nt_acc(g.data(), tp.value_of(ib).data(), tp.grad_buffer(ia).data(), n, m, k);
    }
    if (tp.needs_grad(ib)) {
      kernels::gemm_tn_acc(tp.value_of(ia).data(), g.data(), tp.grad_buffer(ib).data(), n, k, m);
    }
  });
}

Var spmm(Tape &t, const SparseMatrix &s, const SparseMatrix &s_transpose, Var x) {
  const Tensor &xv = t.value(x);
  if (s.cols() == 0 || xv.rank() != 2 || xv.rows() % s.cols() != 0 ||
      s_transpose.rows() != s.cols() || s_transpose.cols() != s.rows()) {
    throw_config("spmm: shape mismatch " + std::to_string(s.rows()) + "x" +
                 std::to_string(s.cols()) + " * " + shape_string(xv.shape()));
  }
  const std::size_t batch = xv.rows() / s.cols();
  const std::size_t width = batch * xv.cols();
  Tensor out({s.rows() * batch, xv.cols()});
  kernels::spmm(s, xv.data(), width, out.data(), false);
  const std::size_t ix = x.id;
  const SparseMatrix *st = &s_transpose;
  return t.record(std::move(out), {x}, [ix, st, width](Tape &tp, std::size_t self) {
    kernels::spmm(*st, tp.grad_buffer(self).data(), width, tp.grad_buffer(ix).data(), true);
  });
}

Var add(Tape &t, Var a, Var b) {
  const Tensor &av = t.value(a);
  const Tensor &bv = t.value(b);
  require_same_shape(av, bv, "add");
  Tensor out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  const std::size_t ia = a.id, ib = b.id;
  return t.record(std::move(out), {a, b}, [ia, ib](Tape &tp, std::size_t self) {
    const Tensor &g = tp.grad_buffer(self);
    accumulate(tp, ia, g);
    accumulate(tp, ib, g);
  });
}

Var sub(Tape &t, Var a, Var b) {
  const Tensor &av = t.value(a);
  const Tensor &bv = t.value(b);
  require_same_shape(av, bv, "sub");
  Tensor out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  const std::size_t ia = a.id, ib = b.id;
  return t.record(std::move(out), {a, b}, [ia, ib](Tape &tp, std::size_t self) {
    const Tensor &g = tp.grad_buffer(self);
    accumulate(tp, ia, g);
    if (tp.needs_grad(ib)) {
      Tensor &gb = tp.grad_buffer(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

Var hadamard(Tape &t, Var a, Var b) {
  const Tensor &av = t.value(a);
  const Tensor &bv = t.value(b);
  require_same_shape(av, bv, "hadamard");
  Tensor out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  const std::size_t ia = a.id, ib = b.id;
  return t.record(std::move(out), {a, b}, [ia, ib](Tape &tp, std::size_t self) {
    const Tensor &g = tp.grad_buffer(self);
    if (tp.needs_grad(ia)) {
      Tensor &ga = tp.grad_buffer(ia);
      const Tensor &bv = tp.value_of(ib);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (tp.needs_grad(ib)) {
      Tensor &gb = tp.grad_buffer(ib);
      const Tensor &av = tp.value_of(ia);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

Var sigmoid(Tape &t, Var x) {
  Tensor out = t.value(x);
  for (double &v : out.values()) v = pgdcrnn::sigmoid(v);
  const std::size_t ix = x.id;
  return t.record(std::move(out), {x}, [ix](Tape &tp, std::size_t self) {
    const Tensor &g = tp.grad_buffer(self);
    const Tensor &y = tp.value_of(self);
    Tensor &gx = tp.grad_buffer(ix);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

Var tanh(Tape &t, Var x) {
  Tensor out = t.value(x);
  for (double &v : out.values()) v = std::tanh(v);
  const std::size_t ix = x.id;
  return t.record(std::move(out), {x}, [ix](Tape &tp, std::size_t self) {
    const Tensor &g = tp.grad_buffer(self);
    const Tensor &y = tp.value_of(self);
    Tensor &gx = tp.grad_buffer(ix);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * (1.0 - y[i] * y[i]);
  });
}

Var one_minus(Tape &t, Var x) {
  Tensor out = t.value(x);
  for (double &v : out.values()) v = 1.0 - v;
  const std::size_t ix = x.id;
  return t.record(std::move(out), {x}, [ix](Tape &tp, std::size_t self) {
    const Tensor &g = tp.grad_buffer(self);
    Tensor &gx = tp.grad_buffer(ix);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] -= g[i];
  });
}

Var scale(Tape &t, Var x, double factor) {
  Tensor out = t.value(x);
  for (double &v : out.values()) v *= factor;
  const std::size_t ix = x.id;
  return t.record(std::move(out), {x}, [ix, factor](Tape &tp, std::size_t self) {
    const Tensor &g = tp.grad_buffer(self);
    Tensor &gx = tp.grad_buffer(ix);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * factor;
  });
}

Var add_bias(Tape &t, Var x, Var bias) {
  const Tensor &xv = t.value(x);
  const Tensor &bv = t.value(bias);
  if (xv.rank() != 2 || bv.size() != xv.cols()) {
    throw_config("add_bias: shape mismatch " + shape_string(xv.shape()) + " + " +
                 shape_string(bv.shape()));
  }
  Tensor out = xv;
  const std::size_t rows = xv.rows(), cols = xv.cols();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] += bv[c];
  }
  const std::size_t ix = x.id, ib = bias.id;
  return t.record(std::move(out), {x, bias}, [ix, ib, rows, cols](Tape &tp, std::size_t self) {
    const Tensor &g = tp.grad_buffer(self);
    accumulate(tp, ix, g);
    if (tp.needs_grad(ib)) {
      Tensor &gb = tp.grad_buffer(ib);
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) gb[c] += g[r * cols + c];
      }
    }
  });
}

Var concat_cols(Tape &t, const std::vector<Var> &parts) {
  if (parts.empty()) throw_config("concat_cols: no inputs");
  const std::size_t rows = t.value(parts[0]).rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (Var p : parts) {
    const Tensor &v = t.value(p);
    if (v.rank() != 2 || v.rows() != rows) throw_config("concat_cols: row count mismatch");
    widths.push_back(v.cols());
    total += v.cols();
  }
  Tensor out({rows, total});
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor &v = t.value(parts[k]);
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(v.data() + r * widths[k], widths[k], out.data() + r * total + offset);
    }
    offset += widths[k];
  }
  std::vector<std::size_t> ids;
  for (Var p : parts) ids.push_back(p.id);
  return t.record(std::move(out), parts, [ids, widths, rows, total](Tape &tp, std::size_t self) {
    const Tensor &g = tp.grad_buffer(self);
    std::size_t offset = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (tp.needs_grad(ids[k])) {
        Tensor &gk = tp.grad_buffer(ids[k]);
        for (std::size_t r = 0; r < rows; ++r) {
          const double *src = g.data() + r * total + offset;
          double *dst = gk.data() + r * widths[k];
          for (std::size_t c = 0; c < widths[k]; ++c) dst[c] += src[c];
        }
      }
      offset += widths[k];
    }
  });
}

Var concat_rows(Tape &t, const std::vector<Var> &parts) {
  if (parts.empty()) throw_config("concat_rows: no inputs");
  const std::size_t cols = t.value(parts[0]).cols();
  std::vector<std::size_t> sizes;
  std::size_t rows = 0;
  for (Var p : parts) {
    const Tensor &v = t.value(p);
    if (v.cols() != cols) throw_config("concat_rows: column count mismatch");
    sizes.push_back(v.size());
    rows += v.rows();
  }
  Tensor out({rows, cols});
  std::size_t offset = 0;
  for (Var p : parts) {
    const Tensor &v = t.value(p);
    std::copy_n(v.data(), v.size(), out.data() + offset);
    offset += v.size();
  }
  std::vector<std::size_t> ids;
  for (Var p : parts) ids.push_back(p.id);
  return t.record(std::move(out), parts, [ids, sizes](Tape &tp, std::size_t self) {
    const Tensor &g = tp.grad_buffer(self);
    std::size_t offset = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (tp.needs_grad(ids[k])) {
        Tensor &gk = tp.grad_buffer(ids[k]);
        for (std::size_t i = 0; i < sizes[k]; ++i) gk[i] += g[offset + i];
      }
      offset += sizes[k];
    }
  });
}

Var slice_cols(Tape &t, Var x, std::size_t begin, std::size_t end) {
  const Tensor &xv = t.value(x);
  if (xv.rank() != 2 || begin >= end || end > xv.cols()) {
    throw_config("slice_cols: bad range for " + shape_string(xv.shape()));
  }
  const std::size_t rows = xv.rows(), cols = xv.cols(), width = end - begin;
  Tensor out({rows, width});
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(xv.data() + r * cols + begin, width, out.data() + r * width);
  }
  const std::size_t ix = x.id;
  return t.record(std::move(out), {x}, [ix, rows, cols, begin, width](Tape &tp, std::size_t self) {
    const Tensor &g = tp.grad_buffer(self);
    Tensor &gx = tp.grad_buffer(ix);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < width; ++c) gx[r * cols + begin + c] += g[r * width + c];
    }
  });
}

Var mean_abs_error(Tape &t, Var pred, Var target) {
  const Tensor &pv = t.value(pred);
  const Tensor &tv = t.value(target);
  require_same_shape(pv, tv, "mean_abs_error");
  if (pv.empty()) throw_config("mean_abs_error: empty input");
  double sum = 0.0;
  for (std::size_t i = 0; i < pv.size(); ++i) sum += std::abs(pv[i] - tv[i]);
  const double n = static_cast<double>(pv.size());
  const std::size_t ip = pred.id, it = target.id;
  return t.record(Tensor({1}, {sum / n}), {pred, target}, [ip, it, n](Tape &tp, std::size_t self) {
    const double g = tp.grad_buffer(self)[0] / n;
    const Tensor &pv = tp.value_of(ip);
    const Tensor &tv = tp.value_of(it);
    for (std::size_t id : {ip, it}) {
      if (!tp.needs_grad(id)) continue;
      const double sign_of_id = id == ip ? 1.0 : -1.0;
      Tensor &gd = tp.grad_buffer(id);
      for (std::size_t i = 0; i < pv.size(); ++i) {
        const double d = pv[i] - tv[i];
        const double s = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
        gd[i] += sign_of_id * s * g;
      }
    }
  });
}

}  // namespace ops
}  // namespace pgdcrnn
