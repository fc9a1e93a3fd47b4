// Copyright (c) 2026 the loom authors.
// SPDX-License-Identifier: Apache-2.0

#include "loom/encoder.hpp"

#include <cmath>
#include <stdexcept>

namespace loom {

void EncoderConfig::validate() const {
  if (depth < 1) throw std::invalid_argument("encoder: depth must be >= 1");
  if (width < 2 || width % n_heads != 0) {
    throw std::invalid_argument("encoder: width must be divisible by heads");
  }
  if (max_tokens < 2) throw std::invalid_argument("encoder: max_tokens must be >= 2");
  if (pair_classes < 2) throw std::invalid_argument("encoder: need >= 2 pair classes");
}

SentenceEncoder::SentenceEncoder(ParameterStore& store, const EncoderConfig& cfg,
                                 const TransformerLm& lm, Rng& rng)
    : cfg_(cfg), store_(&store) {
  cfg.validate();
  lm_wte_ = lm.token_embedding_param();
  lm_hidden_ = lm.config().hidden;
  f_ = make_half(store, "enc.f", rng);
  g_ = make_half(store, "enc.g", rng);
  double std = 1.0 / std::sqrt(3.0 * embedding_dim());
  pair_w_ = store.add("enc.pair.w", ParamGroup::encoder,
                      rng.gaussian_tensor({3 * embedding_dim(), cfg.pair_classes}, std));
}

SentenceEncoder::Half SentenceEncoder::make_half(ParameterStore& store, const std::string& name,
                                                 Rng& rng) const {
  Half h;
  h.input = Linear::create(store, name + ".input", ParamGroup::encoder, lm_hidden_, cfg_.width,
                           rng);
  h.wpe = store.add(name + ".wpe", ParamGroup::encoder,
                    rng.gaussian_tensor({cfg_.max_tokens, cfg_.width}, 0.05));
  for (int l = 0; l < cfg_.depth; ++l) {
    h.blocks.push_back(TransformerBlock::create(store, name + ".block" + std::to_string(l),
                                                ParamGroup::encoder, cfg_.width, cfg_.n_heads,
                                                rng));
  }
  return h;
}

namespace {
std::span<const int> truncate(std::span<const int> tokens, int max_tokens) {
  if (tokens.empty()) throw std::invalid_argument("encode_sentence: empty sentence");
  if (static_cast<int>(tokens.size()) > max_tokens) return tokens.subspan(0, max_tokens);
  return tokens;
}
}  // namespace

Var SentenceEncoder::encode_half_impl(Graph& g, const Half& half,
                                      std::span<const int> tokens) const {
  std::span<const int> toks = truncate(tokens, cfg_.max_tokens);
  int t = static_cast<int>(toks.size());
  std::vector<int> positions(static_cast<std::size_t>(t));
  for (int i = 0; i < t; ++i) positions[static_cast<std::size_t>(i)] = i;
  Var x = half.input.apply(g, gather_rows(g.param(lm_wte_), toks));
  x = add(x, gather_rows(g.param(half.wpe), positions));
  for (const auto& block : half.blocks) x = block.apply(g, x, std::nullopt);
  return reshape(slice_rows(x, t - 1, t), {cfg_.width});  // final-position pooling
}

Tensor SentenceEncoder::encode_half_plain_impl(const Half& half,
                                               std::span<const int> tokens) const {
  std::span<const int> toks = truncate(tokens, cfg_.max_tokens);
  int t = static_cast<int>(toks.size());
  const Tensor& wte = store_->entry(lm_wte_).value;
  Tensor raw = Tensor::zeros({t, lm_hidden_});
  for (int i = 0; i < t; ++i) {
    int id = toks[static_cast<std::size_t>(i)];
    if (id < 0 || id >= wte.rows()) throw std::out_of_range("encode_sentence: token id");
    std::copy(wte.row_ptr(id), wte.row_ptr(id) + lm_hidden_, raw.row_ptr(i));
  }
  Tensor x = half.input.apply_plain(*store_, raw);
  const Tensor& wpe = store_->entry(half.wpe).value;
  for (int i = 0; i < t; ++i) {
    double* row = x.row_ptr(i);
    for (int c = 0; c < cfg_.width; ++c) row[c] += wpe.at(i, c);
  }
  for (const auto& block : half.blocks) x = block.apply_plain(*store_, x, nullptr);
  return Tensor({cfg_.width},
                std::vector<double>(x.row_ptr(t - 1), x.row_ptr(t - 1) + cfg_.width));
}

Var SentenceEncoder::encode_half(Graph& g, std::span<const int> tokens, bool g_side) const {
  return encode_half_impl(g, g_side ? g_ : f_, tokens);
}

Tensor SentenceEncoder::encode_half_plain(std::span<const int> tokens, bool g_side) const {
  return encode_half_plain_impl(g_side ? g_ : f_, tokens);
}

Var SentenceEncoder::encode_graph(Graph& g, std::span<const int> tokens) const {
  Var u = encode_half_impl(g, f_, tokens);
  Var v = encode_half_impl(g, g_, tokens);
  std::vector<Var> parts{u, v};
  return concat_vecs(parts);
}

Tensor SentenceEncoder::encode(std::span<const int> tokens) const {
  Tensor u = encode_half_plain_impl(f_, tokens);
  Tensor v = encode_half_plain_impl(g_, tokens);
  Tensor out = Tensor::zeros({2 * cfg_.width});
  std::copy(u.data.begin(), u.data.end(), out.data.begin());
  std::copy(v.data.begin(), v.data.end(), out.data.begin() + cfg_.width);
  return out;
}

Var SentenceEncoder::quick_thoughts_loss(Graph& g,
                                         std::span<const std::vector<int>> sentences) const {
  int b = static_cast<int>(sentences.size());
  if (b < 3) throw std::invalid_argument("quick_thoughts_loss: block shorter than 3");
  Var fmat{}, gmat{};
  for (int i = 0; i < b; ++i) {
    Var fi = reshape(encode_half_impl(g, f_, sentences[static_cast<std::size_t>(i)]),
                     {1, cfg_.width});
    Var gi = reshape(encode_half_impl(g, g_, sentences[static_cast<std::size_t>(i)]),
                     {1, cfg_.width});
    fmat = (i == 0) ? fi : concat_rows(fmat, fi);
    gmat = (i == 0) ? gi : concat_rows(gmat, gi);
  }
  Var logits = matmul_nt(fmat, gmat);  // [b, b], row i = f(s_i) . g(s_*)
  Tensor self_mask = Tensor::zeros({b, b});
  for (int i = 0; i < b; ++i) self_mask.at(i, i) = -1e30;  // self-pairing excluded
  logits = add(logits, g.constant(self_mask));
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < b; ++i) {
    if (i - 1 >= 0) pairs.emplace_back(i, i - 1);
    if (i + 1 < b) pairs.emplace_back(i, i + 1);
  }
  return softmax_xent(logits, pairs);
}

Var SentenceEncoder::pair_logits(Graph& g, Var e1, Var e2) const {
  Var diff = abs_elem(sub(e1, e2));
  std::vector<Var> parts{e1, e2, diff};
  Var features = reshape(concat_vecs(parts), {1, 3 * embedding_dim()});
  return matmul(features, g.param(pair_w_));
}

Tensor SentenceEncoder::pair_classify(const Tensor& e1, const Tensor& e2) const {
  if (e1.size() != e2.size() || static_cast<int>(e1.size()) != embedding_dim()) {
    throw std::invalid_argument("pair_classify: embedding dimension mismatch");
  }
  int p = embedding_dim();
  Tensor features = Tensor::zeros({1, 3 * p});
  for (int i = 0; i < p; ++i) {
    features.at(0, i) = e1.at(i);
    features.at(0, p + i) = e2.at(i);
    features.at(0, 2 * p + i) = std::fabs(e1.at(i) - e2.at(i));
  }
  const Tensor& w = store_->entry(pair_w_).value;
  Tensor logits = Tensor::zeros({cfg_.pair_classes});
  matmul_acc(features.ptr(), w.ptr(), logits.ptr(), 1, 3 * p, cfg_.pair_classes);
  softmax_inplace(logits.ptr(), cfg_.pair_classes);
  return logits;
}

Var SentenceEncoder::pair_loss(Graph& g,
                               std::span<const std::pair<std::pair<int, int>, int>> labeled_pairs,
                               std::span<const std::vector<int>> sentences) const {
  if (labeled_pairs.empty()) throw std::invalid_argument("pair_loss: no pairs");
  Var logits{};
  std::vector<std::pair<int, int>> xent_pairs;
  int row = 0;
  for (const auto& [indices, label] : labeled_pairs) {
    Var e1 = encode_graph(g, sentences[static_cast<std::size_t>(indices.first)]);
    Var e2 = encode_graph(g, sentences[static_cast<std::size_t>(indices.second)]);
    Var lrow = pair_logits(g, e1, e2);
    logits = (row == 0) ? lrow : concat_rows(logits, lrow);
    if (label < 0 || label >= cfg_.pair_classes) throw std::out_of_range("pair label");
    xent_pairs.emplace_back(row, label);
    ++row;
  }
  return softmax_xent(logits, xent_pairs);
}

}  // namespace loom
