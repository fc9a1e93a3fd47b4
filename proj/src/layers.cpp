// Copyright (c) 2026 the loom authors.
// SPDX-License-Identifier: Apache-2.0

#include "loom/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace loom {

Linear Linear::create(ParameterStore& store, const std::string& name, ParamGroup group,
                      int in_dim, int out_dim, Rng& rng) {
  Linear l;
  l.in_dim = in_dim;
  l.out_dim = out_dim;
  double std = 1.0 / std::sqrt(static_cast<double>(in_dim));
  l.w = store.add(name + ".w", group, rng.gaussian_tensor({in_dim, out_dim}, std));
  l.b = store.add(name + ".b", group, Tensor::zeros({out_dim}));
  return l;
}

Var Linear::apply(Graph& g, Var x) const { return add_bias(matmul(x, g.param(w)), g.param(b)); }

Var Linear::apply_vec(Graph& g, Var x) const {
  int n = static_cast<int>(g.value(x).size());
  if (n != in_dim) {
    throw std::invalid_argument("Linear::apply_vec: got " + std::to_string(n) + ", expected " +
                                std::to_string(in_dim));
  }
  return reshape(apply(g, reshape(x, {1, in_dim})), {out_dim});
}

Tensor Linear::apply_plain(const ParameterStore& store, const Tensor& x) const {
  const Tensor& wv = store.entry(w).value;
  const Tensor& bv = store.entry(b).value;
  int n = x.rows();
  Tensor out = Tensor::zeros({n, out_dim});
  matmul_acc(x.ptr(), wv.ptr(), out.ptr(), n, in_dim, out_dim);
  for (int r = 0; r < n; ++r) {
    double* p = out.row_ptr(r);
    for (int c = 0; c < out_dim; ++c) p[c] += bv.data[static_cast<std::size_t>(c)];
  }
  return out;
}

Tensor Linear::apply_vec_plain(const ParameterStore& store, const Tensor& x) const {
  Tensor row({1, in_dim}, x.data);
  Tensor out = apply_plain(store, row);
  return Tensor({out_dim}, std::move(out.data));
}

GaussianHead GaussianHead::create(ParameterStore& store, const std::string& name,
                                  ParamGroup group, int in_dim, int hidden_dim, int out_dim,
                                  Rng& rng) {
  GaussianHead h;
  h.hidden = Linear::create(store, name + ".hidden", group, in_dim, hidden_dim, rng);
  h.mean = Linear::create(store, name + ".mean", group, hidden_dim, out_dim, rng);
  h.log_var = Linear::create(store, name + ".log_var", group, hidden_dim, out_dim, rng);
  return h;
}

GaussianHead::Out GaussianHead::apply(Graph& g, Var x) const {
  Var h = tanh(hidden.apply_vec(g, x));
  return Out{mean.apply_vec(g, h), log_var.apply_vec(g, h)};
}

DiagonalGaussian GaussianHead::apply_plain(const ParameterStore& store, const Tensor& x) const {
  Tensor h = hidden.apply_vec_plain(store, x);
  for (auto& v : h.data) v = std::tanh(v);
  return DiagonalGaussian(mean.apply_vec_plain(store, h), log_var.apply_vec_plain(store, h));
}

// ---------------------------------------------------------------------------
// LSTM
// ---------------------------------------------------------------------------

LstmStack LstmStack::create(ParameterStore& store, const std::string& name, ParamGroup group,
                            int input_dim, int width, int depth, Rng& rng) {
  if (depth < 1) throw std::invalid_argument("LstmStack: depth must be >= 1");
  LstmStack s;
  s.input_dim = input_dim;
  s.width = width;
  for (int l = 0; l < depth; ++l) {
    int in = (l == 0) ? input_dim : width;
    Layer layer;
    std::string base = name + ".l" + std::to_string(l);
    double std_ih = 1.0 / std::sqrt(static_cast<double>(in));
    double std_hh = 1.0 / std::sqrt(static_cast<double>(width));
    layer.w_ih = store.add(base + ".w_ih", group, rng.gaussian_tensor({in, 4 * width}, std_ih));
    layer.w_hh = store.add(base + ".w_hh", group, rng.gaussian_tensor({width, 4 * width}, std_hh));
    Tensor bias = Tensor::zeros({4 * width});
    for (int i = width; i < 2 * width; ++i) bias.at(i) = 1.0;  // forget gate
    layer.b = store.add(base + ".b", group, std::move(bias));
    s.layers.push_back(layer);
  }
  return s;
}

std::vector<Tensor> LstmStack::forward_plain(const ParameterStore& store,
                                             std::span<const Tensor> inputs) const {
  if (inputs.empty()) throw std::invalid_argument("LstmStack: empty input sequence");
  int depth = static_cast<int>(layers.size());
  std::vector<Tensor> h(static_cast<std::size_t>(depth), Tensor::zeros({width}));
  std::vector<Tensor> c(static_cast<std::size_t>(depth), Tensor::zeros({width}));
  std::vector<Tensor> out;
  out.reserve(inputs.size());
  Tensor z = Tensor::zeros({4 * width});
  for (const Tensor& input : inputs) {
    const Tensor* x = &input;
    for (int l = 0; l < depth; ++l) {
      const auto& lp = layers[static_cast<std::size_t>(l)];
      const Tensor& w_ih = store.entry(lp.w_ih).value;
      const Tensor& w_hh = store.entry(lp.w_hh).value;
      const Tensor& b = store.entry(lp.b).value;
      z = b;
      matmul_acc(x->ptr(), w_ih.ptr(), z.ptr(), 1, w_ih.rows(), 4 * width);
      matmul_acc(h[static_cast<std::size_t>(l)].ptr(), w_hh.ptr(), z.ptr(), 1, width, 4 * width);
      Tensor& hl = h[static_cast<std::size_t>(l)];
      Tensor& cl = c[static_cast<std::size_t>(l)];
      for (int i = 0; i < width; ++i) {
        double ig = 1.0 / (1.0 + std::exp(-z.at(i)));
        double fg = 1.0 / (1.0 + std::exp(-z.at(width + i)));
        double gg = std::tanh(z.at(2 * width + i));
        double og = 1.0 / (1.0 + std::exp(-z.at(3 * width + i)));
        cl.at(i) = fg * cl.at(i) + ig * gg;
        hl.at(i) = og * std::tanh(cl.at(i));
      }
      x = &hl;
    }
    out.push_back(h.back());
  }
  return out;
}

std::vector<Var> LstmStack::forward(Graph& g, std::span<const Var> inputs) const {
  if (inputs.empty()) throw std::invalid_argument("LstmStack: empty input sequence");
  int depth = static_cast<int>(layers.size());
  std::vector<Var> h, c;
  for (int l = 0; l < depth; ++l) {
    h.push_back(g.constant(Tensor::zeros({1, width})));
    c.push_back(g.constant(Tensor::zeros({1, width})));
  }
  std::vector<Var> out;
  out.reserve(inputs.size());
  for (const Var& input : inputs) {
    Var x = reshape(input, {1, static_cast<int>(g.value(input).size())});
    for (int l = 0; l < depth; ++l) {
      const auto& lp = layers[static_cast<std::size_t>(l)];
      Var z = add_bias(add(matmul(x, g.param(lp.w_ih)), matmul(h[l], g.param(lp.w_hh))),
                       g.param(lp.b));
      Var ig = sigmoid(slice_cols(z, 0, width));
      Var fg = sigmoid(slice_cols(z, width, 2 * width));
      Var gg = tanh(slice_cols(z, 2 * width, 3 * width));
      Var og = sigmoid(slice_cols(z, 3 * width, 4 * width));
      c[l] = add(mul(fg, c[l]), mul(ig, gg));
      h[l] = mul(og, tanh(c[l]));
      x = h[l];
    }
    out.push_back(reshape(h.back(), {width}));
  }
  return out;
}

// ---------------------------------------------------------------------------
// attention
// ---------------------------------------------------------------------------

AttentionParams AttentionParams::create(ParameterStore& store, const std::string& name,
                                        ParamGroup group, int hidden, int n_heads, Rng& rng) {
  if (hidden % n_heads != 0) throw std::invalid_argument("hidden size not divisible by heads");
  AttentionParams p;
  p.n_heads = n_heads;
  p.wq = Linear::create(store, name + ".wq", group, hidden, hidden, rng);
  p.wk = Linear::create(store, name + ".wk", group, hidden, hidden, rng);
  p.wv = Linear::create(store, name + ".wv", group, hidden, hidden, rng);
  p.wo = Linear::create(store, name + ".wo", group, hidden, hidden, rng);
  return p;
}

namespace {
// rows of `mem` that are not exactly zero; zero rows act as absent slots
std::vector<int> nonzero_rows(const Tensor& mem) {
  std::vector<int> rows;
  for (int r = 0; r < mem.rows(); ++r) {
    const double* p = mem.row_ptr(r);
    for (int c = 0; c < mem.cols(); ++c) {
      if (p[c] != 0.0) {
        rows.push_back(r);
        break;
      }
    }
  }
  return rows;
}

Tensor causal_mask(int t, int m, int total) {
  // additive mask: 0 where allowed, large negative where not
  Tensor mask = Tensor::zeros({t, total});
  for (int r = 0; r < t; ++r) {
    double* p = mask.row_ptr(r);
    for (int c = m + r + 1; c < total; ++c) p[c] = -1e30;
  }
  return mask;
}
}  // namespace

Var causal_attention_forward(Graph& g, Var seq, std::optional<Var> memory_prefix,
                             const AttentionParams& p, std::vector<Tensor>* attn_probs_out) {
  const Tensor& sv = g.value(seq);
  int t = sv.rows();
  int hidden = sv.cols();
  if (hidden != p.wq.in_dim) {
    throw std::invalid_argument("causal_attention_forward: hidden size mismatch: " +
                                std::to_string(hidden) + " vs " + std::to_string(p.wq.in_dim));
  }
  int n_heads = p.n_heads;
  int dh = hidden / n_heads;

  Var kv_input = seq;
  int m = 0;
  if (memory_prefix) {
    const Tensor& mv = g.value(*memory_prefix);
    if (mv.cols() != hidden) {
      throw std::invalid_argument("causal_attention_forward: memory hidden size mismatch");
    }
    std::vector<int> keep = nonzero_rows(mv);
    if (!keep.empty()) {
      m = static_cast<int>(keep.size());
      Var mem = *memory_prefix;
      if (m != mv.rows()) {
        // contiguous nonzero rows are the only case produced in practice
        std::vector<Var> parts;
        for (int r : keep) parts.push_back(slice_rows(mem, r, r + 1));
        Var packed = parts[0];
        for (std::size_t i = 1; i < parts.size(); ++i) packed = concat_rows(packed, parts[i]);
        mem = packed;
      }
      kv_input = concat_rows(mem, seq);
    }
  }

  Var q = p.wq.apply(g, seq);
  Var k = p.wk.apply(g, kv_input);
  Var v = p.wv.apply(g, kv_input);

  Var mask = g.constant(causal_mask(t, m, m + t));
  double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

  Var heads_out{};
  for (int hidx = 0; hidx < n_heads; ++hidx) {
    Var qh = slice_cols(q, hidx * dh, (hidx + 1) * dh);
    Var kh = slice_cols(k, hidx * dh, (hidx + 1) * dh);
    Var vh = slice_cols(v, hidx * dh, (hidx + 1) * dh);
    Var scores = add(scale(matmul_nt(qh, kh), inv_sqrt), mask);
    Var probs = softmax_rows(scores);
    if (attn_probs_out) attn_probs_out->push_back(g.value(probs));
    Var oh = matmul(probs, vh);
    heads_out = (hidx == 0) ? oh : concat_cols(heads_out, oh);
  }
  return p.wo.apply(g, heads_out);
}

Tensor causal_attention_plain(const ParameterStore& store, const Tensor& seq,
                              const Tensor* memory_prefix, const AttentionParams& p) {
  int t = seq.rows();
  int hidden = seq.cols();
  if (hidden != p.wq.in_dim) {
    throw std::invalid_argument("causal_attention_plain: hidden size mismatch");
  }
  int n_heads = p.n_heads;
  int dh = hidden / n_heads;

  Tensor kv = seq;
  int m = 0;
  if (memory_prefix) {
    std::vector<int> keep = nonzero_rows(*memory_prefix);
    if (!keep.empty()) {
      m = static_cast<int>(keep.size());
      Tensor packed = Tensor::zeros({m + t, hidden});
      for (int i = 0; i < m; ++i) {
        const double* src = memory_prefix->row_ptr(keep[static_cast<std::size_t>(i)]);
        std::copy(src, src + hidden, packed.row_ptr(i));
      }
      std::copy(seq.data.begin(), seq.data.end(), packed.row_ptr(m));
      kv = std::move(packed);
    }
  }

  Tensor q = p.wq.apply_plain(store, seq);
  Tensor k = p.wk.apply_plain(store, kv);
  Tensor v = p.wv.apply_plain(store, kv);

  double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  Tensor heads = Tensor::zeros({t, hidden});
  std::vector<double> scores(static_cast<std::size_t>(m + t));
  for (int hidx = 0; hidx < n_heads; ++hidx) {
    int off = hidx * dh;
    for (int r = 0; r < t; ++r) {
      int n_keys = m + r + 1;
      const double* qr = q.row_ptr(r) + off;
      for (int c = 0; c < n_keys; ++c) {
        scores[static_cast<std::size_t>(c)] = inv_sqrt * dot(qr, k.row_ptr(c) + off, dh);
      }
      softmax_inplace(scores.data(), n_keys);
      double* out = heads.row_ptr(r) + off;
      for (int c = 0; c < n_keys; ++c) {
        const double* vr = v.row_ptr(c) + off;
        double w = scores[static_cast<std::size_t>(c)];
        for (int d = 0; d < dh; ++d) out[d] += w * vr[d];
      }
    }
  }
  return p.wo.apply_plain(store, heads);
}

// ---------------------------------------------------------------------------
// transformer block
// ---------------------------------------------------------------------------

TransformerBlock TransformerBlock::create(ParameterStore& store, const std::string& name,
                                          ParamGroup group, int hidden, int n_heads, Rng& rng) {
  TransformerBlock b;
  b.attn = AttentionParams::create(store, name + ".attn", group, hidden, n_heads, rng);
  b.ln1_g = store.add(name + ".ln1.g", group, Tensor::full({hidden}, 1.0));
  b.ln1_b = store.add(name + ".ln1.b", group, Tensor::zeros({hidden}));
  b.ln2_g = store.add(name + ".ln2.g", group, Tensor::full({hidden}, 1.0));
  b.ln2_b = store.add(name + ".ln2.b", group, Tensor::zeros({hidden}));
  b.fc1 = Linear::create(store, name + ".fc1", group, hidden, 4 * hidden, rng);
  b.fc2 = Linear::create(store, name + ".fc2", group, 4 * hidden, hidden, rng);
  return b;
}

Var TransformerBlock::apply(Graph& g, Var x, std::optional<Var> memory_row) const {
  Var n1 = layer_norm_rows(x, g.param(ln1_g), g.param(ln1_b));
  x = add(x, causal_attention_forward(g, n1, memory_row, attn));
  Var n2 = layer_norm_rows(x, g.param(ln2_g), g.param(ln2_b));
  return add(x, fc2.apply(g, gelu(fc1.apply(g, n2))));
}

double gelu_scalar(double x) {
  constexpr double c = 0.7978845608028654;
  constexpr double k = 0.044715;
  return 0.5 * x * (1.0 + std::tanh(c * (x + k * x * x * x)));
}

Tensor layer_norm_plain(const ParameterStore& store, const Tensor& x, int gain, int bias) {
  const Tensor& gv = store.entry(gain).value;
  const Tensor& bv = store.entry(bias).value;
  constexpr double eps = 1e-5;
  int n = x.rows(), m = x.cols();
  Tensor out = Tensor::zeros({n, m});
  for (int r = 0; r < n; ++r) {
    const double* xr = x.row_ptr(r);
    double mu = 0.0;
    for (int c = 0; c < m; ++c) mu += xr[c];
    mu /= m;
    double var = 0.0;
    for (int c = 0; c < m; ++c) var += (xr[c] - mu) * (xr[c] - mu);
    var /= m;
    double is = 1.0 / std::sqrt(var + eps);
    double* o = out.row_ptr(r);
    for (int c = 0; c < m; ++c) {
      o[c] = (xr[c] - mu) * is * gv.data[static_cast<std::size_t>(c)] +
             bv.data[static_cast<std::size_t>(c)];
    }
  }
  return out;
}

Tensor TransformerBlock::apply_plain(const ParameterStore& store, const Tensor& x,
                                     const Tensor* memory_row) const {
  Tensor n1 = layer_norm_plain(store, x, ln1_g, ln1_b);
  Tensor a = causal_attention_plain(store, n1, memory_row, attn);
  Tensor y = x;
  axpy(1.0, a, y);
  Tensor n2 = layer_norm_plain(store, y, ln2_g, ln2_b);
  Tensor h = fc1.apply_plain(store, n2);
  for (auto& v : h.data) v = gelu_scalar(v);
  Tensor m = fc2.apply_plain(store, h);
  axpy(1.0, m, y);
  return y;
}

}  // namespace loom
