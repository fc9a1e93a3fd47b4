// Copyright (c) 2026 the loom authors.
// SPDX-License-Identifier: Apache-2.0

#include "loom/graph.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>

namespace loom {

namespace {
constexpr double kLn2Pi = 1.8378770664093454836;

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                                b.shape_str());
  }
}

void check_same_graph(Var a, Var b, const char* op) {
  if (a.g != b.g) throw std::invalid_argument(std::string(op) + ": vars from different graphs");
}
}  // namespace

Var make_node(Graph& g, Tensor value, std::function<void(Graph&, int)> back) {
  Graph::Node n;
  n.value = std::move(value);
  n.back = std::move(back);
  g.nodes_.push_back(std::move(n));
  return Var{&g, static_cast<int>(g.nodes_.size()) - 1};
}

Tensor& node_grad(Graph& g, int i) { return g.nodes_[static_cast<std::size_t>(i)].grad; }
const Tensor& node_value(const Graph& g, int i) {
  return g.nodes_[static_cast<std::size_t>(i)].value;
}

Var Graph::constant(Tensor t) { return make_node(*this, std::move(t), nullptr); }

Var Graph::param(int index) {
  if (!store_) throw std::logic_error("graph has no parameter store");
  auto it = param_nodes_.find(index);
  if (it != param_nodes_.end()) return Var{this, it->second};
  Var v = make_node(*this, store_->value(index), nullptr);
  nodes_[static_cast<std::size_t>(v.i)].param_index = index;
  param_nodes_[index] = v.i;
  return v;
}

Var Graph::param(const std::string& name) {
  if (!store_) throw std::logic_error("graph has no parameter store");
  int idx = store_->index_of(name);
  if (idx < 0) throw std::invalid_argument("unknown parameter: " + name);
  return param(idx);
}

const Tensor& Graph::grad(Var v) const {
  if (!ran_backward_) throw std::logic_error("grad() before backward()");
  return nodes_[static_cast<std::size_t>(v.i)].grad;
}

void Graph::backward(Var loss) {
  if (loss.g != this) throw std::invalid_argument("backward: var from different graph");
  const Tensor& lv = value(loss);
  if (lv.size() != 1) throw std::invalid_argument("backward: loss must be scalar");
  if (!std::isfinite(lv.at(0))) throw std::invalid_argument("backward: non-finite loss");

  for (auto& n : nodes_) n.grad = Tensor::zeros(n.value.shape);
  nodes_[static_cast<std::size_t>(loss.i)].grad.at(0) = 1.0;
  ran_backward_ = true;

  for (int i = loss.i; i >= 0; --i) {
    auto& n = nodes_[static_cast<std::size_t>(i)];
    if (n.back) n.back(*this, i);
  }
  for (auto& [pidx, nidx] : param_nodes_) {
    axpy(1.0, nodes_[static_cast<std::size_t>(nidx)].grad, store_->grad(pidx));
  }
}

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

Var add(Var a, Var b) {
  check_same_graph(a, b, "add");
  Graph& g = *a.g;
  const Tensor& av = g.value(a);
  const Tensor& bv = g.value(b);
  check_same_shape(av, bv, "add");
  Tensor out = av;
  axpy(1.0, bv, out);
  int ai = a.i, bi = b.i;
  return make_node(g, std::move(out), [ai, bi](Graph& gg, int self) {
    axpy(1.0, node_grad(gg, self), node_grad(gg, ai));
    axpy(1.0, node_grad(gg, self), node_grad(gg, bi));
  });
}

Var sub(Var a, Var b) {
  check_same_graph(a, b, "sub");
  Graph& g = *a.g;
  const Tensor& av = g.value(a);
  const Tensor& bv = g.value(b);
  check_same_shape(av, bv, "sub");
  Tensor out = av;
  axpy(-1.0, bv, out);
  int ai = a.i, bi = b.i;
  return make_node(g, std::move(out), [ai, bi](Graph& gg, int self) {
    axpy(1.0, node_grad(gg, self), node_grad(gg, ai));
    axpy(-1.0, node_grad(gg, self), node_grad(gg, bi));
  });
}

Var mul(Var a, Var b) {
  check_same_graph(a, b, "mul");
  Graph& g = *a.g;
  const Tensor& av = g.value(a);
  const Tensor& bv = g.value(b);
  check_same_shape(av, bv, "mul");
  Tensor out = av;
  for (std::int64_t i = 0; i < out.size(); ++i) out.data[i] *= bv.data[i];
  int ai = a.i, bi = b.i;
  return make_node(g, std::move(out), [ai, bi](Graph& gg, int self) {
    const Tensor& go = node_grad(gg, self);
    const Tensor& va = node_value(gg, ai);
    const Tensor& vb = node_value(gg, bi);
    Tensor& ga = node_grad(gg, ai);
    Tensor& gb = node_grad(gg, bi);
    for (std::int64_t i = 0; i < go.size(); ++i) {
      ga.data[i] += go.data[i] * vb.data[i];
      gb.data[i] += go.data[i] * va.data[i];
    }
  });
}

Var scale(Var a, double c) {
  Graph& g = *a.g;
  Tensor out = g.value(a);
  for (auto& v : out.data) v *= c;
  int ai = a.i;
  return make_node(g, std::move(out), [ai, c](Graph& gg, int self) {
    axpy(c, node_grad(gg, self), node_grad(gg, ai));
  });
}

Var add_n(std::span<const Var> xs) {
  if (xs.empty()) throw std::invalid_argument("add_n: empty");
  Graph& g = *xs[0].g;
  Tensor out = g.value(xs[0]);
  std::vector<int> idx;
  idx.push_back(xs[0].i);
  for (std::size_t i = 1; i < xs.size(); ++i) {
    check_same_graph(xs[0], xs[i], "add_n");
    check_same_shape(out, g.value(xs[i]), "add_n");
    axpy(1.0, g.value(xs[i]), out);
    idx.push_back(xs[i].i);
  }
  return make_node(g, std::move(out), [idx](Graph& gg, int self) {
    for (int i : idx) axpy(1.0, node_grad(gg, self), node_grad(gg, i));
  });
}

namespace {
template <class Fwd, class Bwd>
Var unary_elementwise(Var a, Fwd fwd, Bwd dfdx_from_xy) {
  Graph& g = *a.g;
  Tensor out = g.value(a);
  for (auto& v : out.data) v = fwd(v);
  int ai = a.i;
  return make_node(g, std::move(out), [ai, dfdx_from_xy](Graph& gg, int self) {
    const Tensor& go = node_grad(gg, self);
    const Tensor& y = node_value(gg, self);
    const Tensor& x = node_value(gg, ai);
    Tensor& ga = node_grad(gg, ai);
    for (std::int64_t i = 0; i < go.size(); ++i) {
      ga.data[i] += go.data[i] * dfdx_from_xy(x.data[i], y.data[i]);
    }
  });
}
}  // namespace

Var tanh(Var a) {
  return unary_elementwise(
      a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(Var a) {
  return unary_elementwise(
      a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double, double y) { return y * (1.0 - y); });
}

Var exp_elem(Var a) {
  return unary_elementwise(
      a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var abs_elem(Var a) {
  return unary_elementwise(
      a, [](double x) { return std::fabs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var gelu(Var a) {
  // tanh approximation
  constexpr double c = 0.7978845608028654;  // sqrt(2/pi)
  constexpr double k = 0.044715;
  return unary_elementwise(
      a,
      [](double x) {
        double u = c * (x + k * x * x * x);
        return 0.5 * x * (1.0 + std::tanh(u));
      },
      [](double x, double) {
        double u = c * (x + k * x * x * x);
        double t = std::tanh(u);
        double du = c * (1.0 + 3.0 * k * x * x);
        return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
      });
}

Var detach(Var a) { return a.g->constant(a.g->value(a)); }

// ---------------------------------------------------------------------------
// shape / linear algebra
// ---------------------------------------------------------------------------

Var matmul(Var a, Var b) {
  check_same_graph(a, b, "matmul");
  Graph& g = *a.g;
  const Tensor& av = g.value(a);
  const Tensor& bv = g.value(b);
  if (av.cols() != bv.rows()) {
    throw std::invalid_argument("matmul: inner dims " + av.shape_str() + " x " + bv.shape_str());
  }
  int n = av.rows(), k = av.cols(), m = bv.cols();
  Tensor out = Tensor::zeros({n, m});
  matmul_acc(av.ptr(), bv.ptr(), out.ptr(), n, k, m);
  int ai = a.i, bi = b.i;
  return make_node(g, std::move(out), [ai, bi, n, k, m](Graph& gg, int self) {
    const Tensor& go = node_grad(gg, self);
    // dA += dC B^T ; dB += A^T dC
    matmul_nt_acc(go.ptr(), node_value(gg, bi).ptr(), node_grad(gg, ai).ptr(), n, m, k);
    matmul_tn_acc(node_value(gg, ai).ptr(), go.ptr(), node_grad(gg, bi).ptr(), n, k, m);
  });
}

Var matmul_nt(Var a, Var b) {
  check_same_graph(a, b, "matmul_nt");
  Graph& g = *a.g;
  const Tensor& av = g.value(a);
  const Tensor& bv = g.value(b);
  if (av.cols() != bv.cols()) {
    throw std::invalid_argument("matmul_nt: inner dims " + av.shape_str() + " x " +
                                bv.shape_str());
  }
  int n = av.rows(), k = av.cols(), m = bv.rows();
  Tensor out = Tensor::zeros({n, m});
  matmul_nt_acc(av.ptr(), bv.ptr(), out.ptr(), n, k, m);
  int ai = a.i, bi = b.i;
  return make_node(g, std::move(out), [ai, bi, n, k, m](Graph& gg, int self) {
    const Tensor& go = node_grad(gg, self);
    // C = A B^T : dA += dC B ; dB += dC^T A
    matmul_acc(go.ptr(), node_value(gg, bi).ptr(), node_grad(gg, ai).ptr(), n, m, k);
    matmul_tn_acc(go.ptr(), node_value(gg, ai).ptr(), node_grad(gg, bi).ptr(), n, m, k);
  });
}

Var add_bias(Var m, Var bias) {
  check_same_graph(m, bias, "add_bias");
  Graph& g = *m.g;
  const Tensor& mv = g.value(m);
  const Tensor& bv = g.value(bias);
  if (bv.size() != mv.cols()) {
    throw std::invalid_argument("add_bias: bias " + bv.shape_str() + " vs " + mv.shape_str());
  }
  Tensor out = mv;
  int rows = mv.rows(), cols = mv.cols();
  for (int r = 0; r < rows; ++r) {
    double* p = out.row_ptr(r);
    for (int c = 0; c < cols; ++c) p[c] += bv.data[static_cast<std::size_t>(c)];
  }
  int mi = m.i, bi = bias.i;
  return make_node(g, std::move(out), [mi, bi, rows, cols](Graph& gg, int self) {
    const Tensor& go = node_grad(gg, self);
    axpy(1.0, go, node_grad(gg, mi));
    Tensor& gb = node_grad(gg, bi);
    for (int r = 0; r < rows; ++r) {
      const double* p = go.row_ptr(r);
      for (int c = 0; c < cols; ++c) gb.data[static_cast<std::size_t>(c)] += p[c];
    }
  });
}

Var gather_rows(Var table, std::span<const int> ids) {
  Graph& g = *table.g;
  const Tensor& tv = g.value(table);
  int v = tv.rows(), h = tv.cols();
  int t = static_cast<int>(ids.size());
  if (t == 0) throw std::invalid_argument("gather_rows: empty id list");
  Tensor out = Tensor::zeros({t, h});
  std::vector<int> idv(ids.begin(), ids.end());
  for (int r = 0; r < t; ++r) {
    int id = idv[static_cast<std::size_t>(r)];
    if (id < 0 || id >= v) {
      throw std::out_of_range("gather_rows: id " + std::to_string(id) + " out of range [0," +
                              std::to_string(v) + ")");
    }
    const double* src = tv.row_ptr(id);
    double* dst = out.row_ptr(r);
    for (int c = 0; c < h; ++c) dst[c] = src[c];
  }
  int ti = table.i;
  return make_node(g, std::move(out), [ti, idv, h](Graph& gg, int self) {
    const Tensor& go = node_grad(gg, self);
    Tensor& gt = node_grad(gg, ti);
    for (std::size_t r = 0; r < idv.size(); ++r) {
      const double* src = go.row_ptr(static_cast<int>(r));
      double* dst = gt.row_ptr(idv[r]);
      for (int c = 0; c < h; ++c) dst[c] += src[c];
    }
  });
}

Var concat_rows(Var a, Var b) {
  check_same_graph(a, b, "concat_rows");
  Graph& g = *a.g;
  const Tensor& av = g.value(a);
  const Tensor& bv = g.value(b);
  if (av.cols() != bv.cols()) throw std::invalid_argument("concat_rows: column mismatch");
  int na = av.rows(), nb = bv.rows(), c = av.cols();
  Tensor out = Tensor::zeros({na + nb, c});
  std::copy(av.data.begin(), av.data.end(), out.data.begin());
  std::copy(bv.data.begin(), bv.data.end(), out.data.begin() + av.size());
  int ai = a.i, bi = b.i;
  return make_node(g, std::move(out), [ai, bi, na, nb, c](Graph& gg, int self) {
    const Tensor& go = node_grad(gg, self);
    Tensor& ga = node_grad(gg, ai);
    Tensor& gb = node_grad(gg, bi);
    for (std::int64_t i = 0; i < ga.size(); ++i) ga.data[i] += go.data[i];
    for (std::int64_t i = 0; i < gb.size(); ++i) gb.data[i] += go.data[ga.size() + i];
  });
}

Var concat_cols(Var a, Var b) {
  check_same_graph(a, b, "concat_cols");
  Graph& g = *a.g;
  const Tensor& av = g.value(a);
  const Tensor& bv = g.value(b);
  if (av.rows() != bv.rows()) throw std::invalid_argument("concat_cols: row mismatch");
  int n = av.rows(), ca = av.cols(), cb = bv.cols();
  Tensor out = Tensor::zeros({n, ca + cb});
  for (int r = 0; r < n; ++r) {
    std::copy(av.row_ptr(r), av.row_ptr(r) + ca, out.row_ptr(r));
    std::copy(bv.row_ptr(r), bv.row_ptr(r) + cb, out.row_ptr(r) + ca);
  }
  int ai = a.i, bi = b.i;
  return make_node(g, std::move(out), [ai, bi, n, ca, cb](Graph& gg, int self) {
    const Tensor& go = node_grad(gg, self);
    Tensor& ga = node_grad(gg, ai);
    Tensor& gb = node_grad(gg, bi);
    for (int r = 0; r < n; ++r) {
      const double* src = go.row_ptr(r);
      double* pa = ga.row_ptr(r);
      double* pb = gb.row_ptr(r);
      for (int c = 0; c < ca; ++c) pa[c] += src[c];
      for (int c = 0; c < cb; ++c) pb[c] += src[ca + c];
    }
  });
}

Var slice_rows(Var a, int r0, int r1) {
  Graph& g = *a.g;
  const Tensor& av = g.value(a);
  if (r0 < 0 || r1 > av.rows() || r0 >= r1) throw std::invalid_argument("slice_rows: bad range");
  int c = av.cols();
  Tensor out = Tensor::zeros({r1 - r0, c});
  std::copy(av.row_ptr(r0), av.row_ptr(r0) + out.size(), out.data.begin());
  int ai = a.i;
  return make_node(g, std::move(out), [ai, r0, c](Graph& gg, int self) {
    const Tensor& go = node_grad(gg, self);
    Tensor& ga = node_grad(gg, ai);
    double* dst = ga.row_ptr(r0);
    for (std::int64_t i = 0; i < go.size(); ++i) dst[i] += go.data[i];
  });
}

Var slice_cols(Var a, int c0, int c1) {
  Graph& g = *a.g;
  const Tensor& av = g.value(a);
  if (c0 < 0 || c1 > av.cols() || c0 >= c1) throw std::invalid_argument("slice_cols: bad range");
  int n = av.rows(), w = c1 - c0;
  Tensor out = Tensor::zeros({n, w});
  for (int r = 0; r < n; ++r) {
    std::copy(av.row_ptr(r) + c0, av.row_ptr(r) + c1, out.row_ptr(r));
  }
  int ai = a.i;
  return make_node(g, std::move(out), [ai, c0, n, w](Graph& gg, int self) {
    const Tensor& go = node_grad(gg, self);
    Tensor& ga = node_grad(gg, ai);
    for (int r = 0; r < n; ++r) {
      const double* src = go.row_ptr(r);
      double* dst = ga.row_ptr(r) + c0;
      for (int c = 0; c < w; ++c) dst[c] += src[c];
    }
  });
}

Var reshape(Var a, std::vector<int> shape) {
  Graph& g = *a.g;
  Tensor out(shape, g.value(a).data);
  int ai = a.i;
  return make_node(g, std::move(out), [ai](Graph& gg, int self) {
    const Tensor& go = node_grad(gg, self);
    Tensor& ga = node_grad(gg, ai);
    for (std::int64_t i = 0; i < go.size(); ++i) ga.data[i] += go.data[i];
  });
}

Var concat_vecs(std::span<const Var> xs) {
  if (xs.empty()) throw std::invalid_argument("concat_vecs: empty");
  Graph& g = *xs[0].g;
  int total = 0;
  std::vector<int> idx, sizes;
  for (const Var& x : xs) {
    check_same_graph(xs[0], x, "concat_vecs");
    int n = static_cast<int>(g.value(x).size());
    idx.push_back(x.i);
    sizes.push_back(n);
    total += n;
  }
  Tensor out = Tensor::zeros({total});
  int off = 0;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const Tensor& v = node_value(g, idx[i]);
    std::copy(v.data.begin(), v.data.end(), out.data.begin() + off);
    off += sizes[i];
  }
  return make_node(g, std::move(out), [idx, sizes](Graph& gg, int self) {
    const Tensor& go = node_grad(gg, self);
    int off = 0;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      Tensor& gx = node_grad(gg, idx[i]);
      for (int j = 0; j < sizes[i]; ++j) gx.data[static_cast<std::size_t>(j)] += go.data[off + j];
      off += sizes[i];
    }
  });
}

// ---------------------------------------------------------------------------
// rows
// ---------------------------------------------------------------------------

Var softmax_rows(Var a) {
  Graph& g = *a.g;
  Tensor out = g.value(a);
  int n = out.rows(), m = out.cols();
  for (int r = 0; r < n; ++r) softmax_inplace(out.row_ptr(r), m);
  int ai = a.i;
  return make_node(g, std::move(out), [ai, n, m](Graph& gg, int self) {
    const Tensor& go = node_grad(gg, self);
    const Tensor& y = node_value(gg, self);
    Tensor& ga = node_grad(gg, ai);
    for (int r = 0; r < n; ++r) {
      const double* gy = go.row_ptr(r);
      const double* p = y.row_ptr(r);
      double* gx = ga.row_ptr(r);
      double s = dot(gy, p, m);
      for (int c = 0; c < m; ++c) gx[c] += p[c] * (gy[c] - s);
    }
  });
}

Var layer_norm_rows(Var a, Var gain, Var bias) {
  check_same_graph(a, gain, "layer_norm_rows");
  check_same_graph(a, bias, "layer_norm_rows");
  Graph& g = *a.g;
  const Tensor& av = g.value(a);
  int n = av.rows(), m = av.cols();
  const Tensor& gv = g.value(gain);
  const Tensor& bv = g.value(bias);
  if (gv.size() != m || bv.size() != m) throw std::invalid_argument("layer_norm_rows: dims");
  constexpr double eps = 1e-5;
  Tensor out = Tensor::zeros({n, m});
  Tensor xhat = Tensor::zeros({n, m});
  Tensor inv_sigma = Tensor::zeros({n});
  for (int r = 0; r < n; ++r) {
    const double* x = av.row_ptr(r);
    double mu = 0.0;
    for (int c = 0; c < m; ++c) mu += x[c];
    mu /= m;
    double var = 0.0;
    for (int c = 0; c < m; ++c) var += (x[c] - mu) * (x[c] - mu);
    var /= m;
    double is = 1.0 / std::sqrt(var + eps);
    inv_sigma.at(r) = is;
    double* xh = xhat.row_ptr(r);
    double* o = out.row_ptr(r);
    for (int c = 0; c < m; ++c) {
      xh[c] = (x[c] - mu) * is;
      o[c] = xh[c] * gv.data[static_cast<std::size_t>(c)] + bv.data[static_cast<std::size_t>(c)];
    }
  }
  int ai = a.i, gi = gain.i, bi = bias.i;
  auto xh_shared = std::make_shared<Tensor>(std::move(xhat));
  auto is_shared = std::make_shared<Tensor>(std::move(inv_sigma));
  return make_node(g, std::move(out), [ai, gi, bi, n, m, xh_shared, is_shared](Graph& gg,
                                                                               int self) {
    const Tensor& go = node_grad(gg, self);
    const Tensor& gainv = node_value(gg, gi);
    Tensor& ga = node_grad(gg, ai);
    Tensor& ggain = node_grad(gg, gi);
    Tensor& gbias = node_grad(gg, bi);
    for (int r = 0; r < n; ++r) {
      const double* gy = go.row_ptr(r);
      const double* xh = xh_shared->row_ptr(r);
      double is = is_shared->at(r);
      double sum_h = 0.0, sum_hx = 0.0;
      for (int c = 0; c < m; ++c) {
        double h = gy[c] * gainv.data[static_cast<std::size_t>(c)];
        sum_h += h;
        sum_hx += h * xh[c];
        ggain.data[static_cast<std::size_t>(c)] += gy[c] * xh[c];
        gbias.data[static_cast<std::size_t>(c)] += gy[c];
      }
      double mean_h = sum_h / m, mean_hx = sum_hx / m;
      double* gx = ga.row_ptr(r);
      for (int c = 0; c < m; ++c) {
        double h = gy[c] * gainv.data[static_cast<std::size_t>(c)];
        gx[c] += is * (h - mean_h - xh[c] * mean_hx);
      }
    }
  });
}

// ---------------------------------------------------------------------------
// reductions / losses
// ---------------------------------------------------------------------------

Var sum_all(Var a) {
  Graph& g = *a.g;
  double s = 0.0;
  for (double v : g.value(a).data) s += v;
  int ai = a.i;
  return make_node(g, Tensor::vector({s}), [ai](Graph& gg, int self) {
    double go = node_grad(gg, self).at(0);
    Tensor& ga = node_grad(gg, ai);
    for (auto& v : ga.data) v += go;
  });
}

Var mean_all(Var a) {
  Graph& g = *a.g;
  std::int64_t n = g.value(a).size();
  return scale(sum_all(a), 1.0 / static_cast<double>(n));
}

Var softmax_xent(Var logits, std::span<const std::pair<int, int>> pairs) {
  Graph& g = *logits.g;
  const Tensor& lv = g.value(logits);
  int n = lv.rows(), m = lv.cols();
  if (pairs.empty()) throw std::invalid_argument("softmax_xent: no prediction pairs");
  double total = 0.0;
  std::vector<std::pair<int, int>> pv(pairs.begin(), pairs.end());
  for (auto [row, target] : pv) {
    if (row < 0 || row >= n || target < 0 || target >= m) {
      throw std::out_of_range("softmax_xent: pair out of range");
    }
    const double* x = lv.row_ptr(row);
    double mx = x[0];
    for (int c = 1; c < m; ++c) mx = std::max(mx, x[c]);
    double lse = 0.0;
    for (int c = 0; c < m; ++c) lse += std::exp(x[c] - mx);
    lse = std::log(lse) + mx;
    total += lse - x[target];
  }
  double inv = 1.0 / static_cast<double>(pv.size());
  int li = logits.i;
  return make_node(g, Tensor::vector({total * inv}), [li, pv, m, inv](Graph& gg, int self) {
    double go = node_grad(gg, self).at(0) * inv;
    const Tensor& lvv = node_value(gg, li);
    Tensor& gl = node_grad(gg, li);
    std::vector<double> p(static_cast<std::size_t>(m));
    for (auto [row, target] : pv) {
      const double* x = lvv.row_ptr(row);
      std::copy(x, x + m, p.begin());
      softmax_inplace(p.data(), m);
      double* gr = gl.row_ptr(row);
      for (int c = 0; c < m; ++c) gr[c] += go * p[static_cast<std::size_t>(c)];
      gr[target] -= go;
    }
  });
}

// ---------------------------------------------------------------------------
// distribution math
// ---------------------------------------------------------------------------

Var gaussian_log_density(Var x, Var mean, Var log_var) {
  check_same_graph(x, mean, "gaussian_log_density");
  check_same_graph(x, log_var, "gaussian_log_density");
  Graph& g = *x.g;
  const Tensor& xv = g.value(x);
  const Tensor& mv = g.value(mean);
  const Tensor& lv = g.value(log_var);
  check_same_shape(xv, mv, "gaussian_log_density");
  check_same_shape(xv, lv, "gaussian_log_density");
  require_finite(xv, "gaussian_log_density x");
  double total = 0.0;
  for (std::int64_t i = 0; i < xv.size(); ++i) {
    double d = xv.data[i] - mv.data[i];
    total += -0.5 * kLn2Pi - 0.5 * lv.data[i] - 0.5 * d * d * std::exp(-lv.data[i]);
  }
  int xi = x.i, mi = mean.i, li = log_var.i;
  return make_node(g, Tensor::vector({total}), [xi, mi, li](Graph& gg, int self) {
    double go = node_grad(gg, self).at(0);
    const Tensor& xv = node_value(gg, xi);
    const Tensor& mv = node_value(gg, mi);
    const Tensor& lv = node_value(gg, li);
    Tensor& gx = node_grad(gg, xi);
    Tensor& gm = node_grad(gg, mi);
    Tensor& gl = node_grad(gg, li);
    for (std::int64_t i = 0; i < xv.size(); ++i) {
      double inv_var = std::exp(-lv.data[i]);
      double d = xv.data[i] - mv.data[i];
      gx.data[i] += go * (-d * inv_var);
      gm.data[i] += go * (d * inv_var);
      gl.data[i] += go * (-0.5 + 0.5 * d * d * inv_var);
    }
  });
}

Var gaussian_kl(Var mean_q, Var log_var_q, Var mean_p, Var log_var_p) {
  Graph& g = *mean_q.g;
  const Tensor& mq = g.value(mean_q);
  const Tensor& lq = g.value(log_var_q);
  const Tensor& mp = g.value(mean_p);
  const Tensor& lp = g.value(log_var_p);
  check_same_shape(mq, lq, "gaussian_kl");
  check_same_shape(mq, mp, "gaussian_kl");
  check_same_shape(mq, lp, "gaussian_kl");
  double total = 0.0;
  for (std::int64_t i = 0; i < mq.size(); ++i) {
    double d = mq.data[i] - mp.data[i];
    total += 0.5 * ((std::exp(lq.data[i]) + d * d) * std::exp(-lp.data[i]) - 1.0 + lp.data[i] -
                    lq.data[i]);
  }
  int qi = mean_q.i, qli = log_var_q.i, pi = mean_p.i, pli = log_var_p.i;
  return make_node(g, Tensor::vector({total}), [qi, qli, pi, pli](Graph& gg, int self) {
    double go = node_grad(gg, self).at(0);
    const Tensor& mq = node_value(gg, qi);
    const Tensor& lq = node_value(gg, qli);
    const Tensor& mp = node_value(gg, pi);
    const Tensor& lp = node_value(gg, pli);
    Tensor& gmq = node_grad(gg, qi);
    Tensor& glq = node_grad(gg, qli);
    Tensor& gmp = node_grad(gg, pi);
    Tensor& glp = node_grad(gg, pli);
    for (std::int64_t i = 0; i < mq.size(); ++i) {
      double inv_vp = std::exp(-lp.data[i]);
      double d = mq.data[i] - mp.data[i];
      gmq.data[i] += go * d * inv_vp;
      gmp.data[i] -= go * d * inv_vp;
      glq.data[i] += go * 0.5 * (std::exp(lq.data[i]) * inv_vp - 1.0);
      glp.data[i] += go * 0.5 * (1.0 - (std::exp(lq.data[i]) + d * d) * inv_vp);
    }
  });
}

Var reparam_sample(Var mean, Var log_var, const Tensor& noise) {
  check_same_graph(mean, log_var, "reparam_sample");
  Graph& g = *mean.g;
  const Tensor& mv = g.value(mean);
  const Tensor& lv = g.value(log_var);
  check_same_shape(mv, lv, "reparam_sample");
  check_same_shape(mv, noise, "reparam_sample");
  Tensor out = mv;
  for (std::int64_t i = 0; i < out.size(); ++i) {
    out.data[i] += std::exp(0.5 * lv.data[i]) * noise.data[i];
  }
  int mi = mean.i, li = log_var.i;
  Tensor noise_copy = noise;
  return make_node(g, std::move(out), [mi, li, noise_copy](Graph& gg, int self) {
    const Tensor& go = node_grad(gg, self);
    const Tensor& lv = node_value(gg, li);
    Tensor& gm = node_grad(gg, mi);
    Tensor& gl = node_grad(gg, li);
    for (std::int64_t i = 0; i < go.size(); ++i) {
      gm.data[i] += go.data[i];
      gl.data[i] += go.data[i] * 0.5 * std::exp(0.5 * lv.data[i]) * noise_copy.data[i];
    }
  });
}

}  // namespace loom
