// Copyright (c) 2026 the loom authors.
// SPDX-License-Identifier: Apache-2.0

#include "loom/lm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace loom {

void LmConfig::validate() const {
  if (n_layers < 1) throw std::invalid_argument("lm: need >= 1 layer");
  if (hidden < 1 || hidden % n_heads != 0) {
    throw std::invalid_argument("lm: hidden must be divisible by heads");
  }
  if (context < 16) throw std::invalid_argument("lm: context must be >= 16");
  if (vocab < 5) throw std::invalid_argument("lm: vocabulary too small");
}

Tensor top_p_filter(const Tensor& probs, double p) {
  int n = static_cast<int>(probs.size());
  if (n == 0) throw std::invalid_argument("top_p_filter: empty distribution");
  if (p <= 0.0 || p > 1.0) throw std::invalid_argument("top_p_filter: p must be in (0,1]");
  double sum = 0.0;
  for (double v : probs.data) {
    if (!(v >= 0.0)) throw std::invalid_argument("top_p_filter: negative or NaN probability");
    sum += v;
  }
  if (std::fabs(sum - 1.0) > 1e-6) {
    throw std::invalid_argument("top_p_filter: probabilities must sum to 1");
  }

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (probs.at(a) != probs.at(b)) return probs.at(a) > probs.at(b);
    return a < b;  // deterministic tie-break
  });

  Tensor out = Tensor::zeros(probs.shape);
  double cum = 0.0, kept = 0.0;
  for (int rank = 0; rank < n; ++rank) {
    int id = order[static_cast<std::size_t>(rank)];
    cum += probs.at(id);
    out.at(id) = probs.at(id);
    kept += probs.at(id);
    if (cum >= p) break;  // smallest prefix reaching mass p; top token always kept
  }
  for (auto& v : out.data) v /= kept;
  return out;
}

// ---------------------------------------------------------------------------
// TransformerLm
// ---------------------------------------------------------------------------

TransformerLm::TransformerLm(ParameterStore& store, const LmConfig& cfg, Rng& rng)
    : cfg_(cfg), store_(&store) {
  cfg.validate();
  wte_ = store.add("lm.wte", ParamGroup::lm, rng.gaussian_tensor({cfg.vocab, cfg.hidden}, 0.05));
  wpe_ = store.add("lm.wpe", ParamGroup::lm, rng.gaussian_tensor({cfg.context, cfg.hidden}, 0.05));
  for (int l = 0; l < cfg.n_layers; ++l) {
    blocks_.push_back(TransformerBlock::create(store, "lm.block" + std::to_string(l),
                                               ParamGroup::lm, cfg.hidden, cfg.n_heads, rng));
  }
  lnf_g_ = store.add("lm.lnf.g", ParamGroup::lm, Tensor::full({cfg.hidden}, 1.0));
  lnf_b_ = store.add("lm.lnf.b", ParamGroup::lm, Tensor::zeros({cfg.hidden}));
  head_ = Linear::create(store, "lm.head", ParamGroup::lm, cfg.hidden, cfg.vocab, rng);
}

std::vector<int> TransformerLm::story_tokens(const Story& story, int first_sentence,
                                             int last_sentence, bool at_story_end) {
  if (first_sentence < 0 || last_sentence > story.length() || first_sentence >= last_sentence) {
    throw std::invalid_argument("story_tokens: bad sentence range");
  }
  std::vector<int> out;
  out.push_back(Vocabulary::kBos);
  for (int s = first_sentence; s < last_sentence; ++s) {
    const auto& sent = story.sentences[static_cast<std::size_t>(s)];
    out.insert(out.end(), sent.begin(), sent.end());
    out.push_back(Vocabulary::kSep);
  }
  if (at_story_end && last_sentence == story.length()) out.push_back(Vocabulary::kEos);
  return out;
}

Var TransformerLm::logits(Graph& g, std::span<const int> tokens,
                          std::optional<Var> memory_rows) const {
  int t = static_cast<int>(tokens.size());
  if (t < 1) throw std::invalid_argument("lm: empty token sequence");
  if (t > cfg_.context) {
    throw std::invalid_argument("lm: sequence of " + std::to_string(t) +
                                " exceeds context " + std::to_string(cfg_.context));
  }
  for (int tok : tokens) {
    if (tok < 0 || tok >= cfg_.vocab) {
      throw std::out_of_range("lm: token id " + std::to_string(tok) + " out of vocabulary");
    }
  }
  std::vector<int> positions(static_cast<std::size_t>(t));
  std::iota(positions.begin(), positions.end(), 0);
  Var x = add(gather_rows(g.param(wte_), tokens), gather_rows(g.param(wpe_), positions));
  for (int l = 0; l < cfg_.n_layers; ++l) {
    std::optional<Var> mem;
    if (memory_rows) mem = slice_rows(*memory_rows, l, l + 1);
    x = blocks_[static_cast<std::size_t>(l)].apply(g, x, mem);
  }
  x = layer_norm_rows(x, g.param(lnf_g_), g.param(lnf_b_));
  return head_.apply(g, x);
}

Var TransformerLm::loss(Graph& g, std::span<const int> tokens, std::optional<Var> memory_rows,
                        int scored_from) const {
  if (tokens.size() < 2) throw std::invalid_argument("lm loss: need >= 2 tokens");
  if (scored_from < 1 || scored_from >= static_cast<int>(tokens.size())) {
    throw std::invalid_argument("lm loss: scored_from out of range");
  }
  Var lg = logits(g, tokens, memory_rows);
  std::vector<std::pair<int, int>> pairs;
  for (std::size_t j = static_cast<std::size_t>(scored_from); j < tokens.size(); ++j) {
    pairs.emplace_back(static_cast<int>(j - 1), tokens[j]);
  }
  return softmax_xent(lg, pairs);
}

TransformerLm::State TransformerLm::begin(const MemoryPrefix* memory) const {
  State s;
  s.key_cache.resize(static_cast<std::size_t>(cfg_.n_layers));
  s.value_cache.resize(static_cast<std::size_t>(cfg_.n_layers));
  if (memory) {
    if (memory->rows.rows() != cfg_.n_layers || memory->rows.cols() != cfg_.hidden) {
      throw std::invalid_argument("memory prefix shape does not match the model");
    }
    for (int l = 0; l < cfg_.n_layers; ++l) {
      const double* row = memory->rows.row_ptr(l);
      bool nonzero = false;
      for (int c = 0; c < cfg_.hidden; ++c) {
        if (row[c] != 0.0) {
          nonzero = true;
          break;
        }
      }
      if (!nonzero) continue;  // zero rows act as absent
      Tensor r({1, cfg_.hidden}, std::vector<double>(row, row + cfg_.hidden));
      const auto& attn = blocks_[static_cast<std::size_t>(l)].attn;
      Tensor k = attn.wk.apply_plain(*store_, r);
      Tensor vv = attn.wv.apply_plain(*store_, r);
      auto& kc = s.key_cache[static_cast<std::size_t>(l)];
      auto& vc = s.value_cache[static_cast<std::size_t>(l)];
      kc.data = k.data;
      kc.rows = 1;
      vc.data = vv.data;
      vc.rows = 1;
    }
  }
  return s;
}

Tensor TransformerLm::step(State& state, int token) const {
  if (token < 0 || token >= cfg_.vocab) {
    throw std::out_of_range("lm: token id " + std::to_string(token) + " out of vocabulary");
  }
  if (state.position >= cfg_.context) throw std::invalid_argument("lm: context window exhausted");
  const Tensor& wte = store_->entry(wte_).value;
  const Tensor& wpe = store_->entry(wpe_).value;
  Tensor x = Tensor::zeros({1, cfg_.hidden});
  for (int c = 0; c < cfg_.hidden; ++c) {
    x.at(0, c) = wte.at(token, c) + wpe.at(state.position, c);
  }
  int n_heads = cfg_.n_heads;
  int dh = cfg_.hidden / n_heads;
  std::vector<double> scores;
  for (int l = 0; l < cfg_.n_layers; ++l) {
    const auto& block = blocks_[static_cast<std::size_t>(l)];
    Tensor n1 = layer_norm_plain(*store_, x, block.ln1_g, block.ln1_b);
    Tensor q = block.attn.wq.apply_plain(*store_, n1);
    Tensor k = block.attn.wk.apply_plain(*store_, n1);
    Tensor v = block.attn.wv.apply_plain(*store_, n1);
    auto& kc = state.key_cache[static_cast<std::size_t>(l)];
    auto& vc = state.value_cache[static_cast<std::size_t>(l)];
    kc.data.insert(kc.data.end(), k.data.begin(), k.data.end());
    kc.rows += 1;
    vc.data.insert(vc.data.end(), v.data.begin(), v.data.end());
    vc.rows += 1;

    int n_keys = kc.rows;
    scores.resize(static_cast<std::size_t>(n_keys));
    Tensor attn_out = Tensor::zeros({1, cfg_.hidden});
    double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
    for (int h = 0; h < n_heads; ++h) {
      int off = h * dh;
      for (int c = 0; c < n_keys; ++c) {
        scores[static_cast<std::size_t>(c)] =
            inv_sqrt * dot(q.ptr() + off, kc.row(c, cfg_.hidden) + off, dh);
      }
      softmax_inplace(scores.data(), n_keys);
      double* out = attn_out.ptr() + off;
      for (int c = 0; c < n_keys; ++c) {
        const double* vr = vc.row(c, cfg_.hidden) + off;
        double w = scores[static_cast<std::size_t>(c)];
        for (int d = 0; d < dh; ++d) out[d] += w * vr[d];
      }
    }
    Tensor proj = block.attn.wo.apply_plain(*store_, attn_out);
    axpy(1.0, proj, x);
    Tensor n2 = layer_norm_plain(*store_, x, block.ln2_g, block.ln2_b);
    Tensor h1 = block.fc1.apply_plain(*store_, n2);
    for (auto& vv : h1.data) vv = gelu_scalar(vv);
    Tensor h2 = block.fc2.apply_plain(*store_, h1);
    axpy(1.0, h2, x);
  }
  state.position += 1;
  Tensor xf = layer_norm_plain(*store_, x, lnf_g_, lnf_b_);
  Tensor logits_row = head_.apply_plain(*store_, xf);
  return Tensor({cfg_.vocab}, std::move(logits_row.data));
}

std::vector<int> TransformerLm::sample_sentence(std::span<const int> context,
                                                const MemoryPrefix* memory, double top_p,
                                                int max_len, Rng& noise) const {
  if (max_len < 1) throw std::invalid_argument("sample_sentence: max_len must be >= 1");
  if (max_len >= cfg_.context) throw std::invalid_argument("sample_sentence: max_len too large");
  // truncate the context from the left so the window fits generation
  int budget = cfg_.context - max_len;
  std::span<const int> ctx = context;
  if (static_cast<int>(ctx.size()) > budget) ctx = ctx.subspan(ctx.size() - budget);

  State state = begin(memory);
  Tensor logits;
  if (ctx.empty()) {
    logits = step(state, Vocabulary::kBos);
  } else {
    for (int tok : ctx) logits = step(state, tok);
  }

  std::vector<int> sentence;
  for (int n = 0; n < max_len; ++n) {
    Tensor probs = logits;
    softmax_inplace(probs.ptr(), cfg_.vocab);
    Tensor filtered = top_p_filter(probs, top_p);
    double u = noise.uniform();
    int token = cfg_.vocab - 1;
    double cum = 0.0;
    for (int i = 0; i < cfg_.vocab; ++i) {
      cum += filtered.at(i);
      if (u < cum) {
        token = i;
        break;
      }
    }
    if (token == Vocabulary::kSep || token == Vocabulary::kEos) break;
    sentence.push_back(token);
    if (n + 1 < max_len) logits = step(state, token);
  }
  return sentence;
}

std::vector<double> TransformerLm::perplexity_sliding(const Story& story, int window) const {
  if (story.length() < 1) throw std::invalid_argument("perplexity_sliding: empty story");
  if (window < 1) throw std::invalid_argument("perplexity_sliding: window must be >= 1");
  std::vector<double> scores;
  scores.reserve(static_cast<std::size_t>(story.length()));
  for (int t = 0; t < story.length(); ++t) {
    int first = std::max(0, t - (window - 1));
    // context sentences [first, t), then the scored sentence t
    std::vector<int> tokens = story_tokens(story, first, t + 1, false);
    int target_tokens =
        static_cast<int>(story.sentences[static_cast<std::size_t>(t)].size()) + 1;  // + SEP
    // keep the window: drop oldest tokens but never into the scored region
    int max_tokens = cfg_.context;
    if (static_cast<int>(tokens.size()) > max_tokens) {
      int drop = static_cast<int>(tokens.size()) - max_tokens;
      tokens.erase(tokens.begin() + 1, tokens.begin() + 1 + drop);  // keep BOS
    }
    State state = begin(nullptr);
    int n = static_cast<int>(tokens.size());
    double nll = 0.0;
    Tensor logits;
    for (int j = 0; j < n; ++j) {
      if (j >= n - target_tokens) {
        // logits from the previous step predict tokens[j]
        Tensor probs = logits;
        softmax_inplace(probs.ptr(), cfg_.vocab);
        nll -= std::log(std::max(probs.at(tokens[static_cast<std::size_t>(j)]), 1e-300));
      }
      if (j + 1 < n) logits = step(state, tokens[static_cast<std::size_t>(j)]);
    }
    scores.push_back(std::exp(nll / target_tokens));
  }
  return scores;
}

// ---------------------------------------------------------------------------
// PsaProjector
// ---------------------------------------------------------------------------

PsaProjector::PsaProjector(ParameterStore& store, int embedding_dim, int n_layers, int hidden,
                           Rng& rng)
    : store_(&store), n_layers_(n_layers), hidden_(hidden), p_dim_(embedding_dim) {
  double std = 0.5 / std::sqrt(static_cast<double>(embedding_dim));
  w_m_ = store.add("psa.w_m", ParamGroup::psa,
                   rng.gaussian_tensor({embedding_dim, n_layers * hidden}, std));
}

MemoryPrefix PsaProjector::project_plain(const Tensor& embedding) const {
  if (static_cast<int>(embedding.size()) != p_dim_) {
    throw std::invalid_argument("project_memory: embedding dimension mismatch");
  }
  const Tensor& w = store_->entry(w_m_).value;
  Tensor flat = Tensor::zeros({1, n_layers_ * hidden_});
  matmul_acc(embedding.ptr(), w.ptr(), flat.ptr(), 1, p_dim_, n_layers_ * hidden_);
  return MemoryPrefix{Tensor({n_layers_, hidden_}, std::move(flat.data))};
}

Var PsaProjector::project(Graph& g, Var embedding) const {
  if (static_cast<int>(g.value(embedding).size()) != p_dim_) {
    throw std::invalid_argument("project_memory: embedding dimension mismatch");
  }
  Var flat = matmul(reshape(embedding, {1, p_dim_}), g.param(w_m_));
  return reshape(flat, {n_layers_, hidden_});
}

}  // namespace loom
