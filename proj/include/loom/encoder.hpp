// Copyright (c) 2026 the loom authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>

#include "loom/lm.hpp"

namespace loom {

struct EncoderConfig {
  // full-scale reference: depth 6, width 1024
  int depth = 2;
  int width = 64;  // per encoder; the sentence embedding is [u; v], P = 2*width
  int n_heads = 2;
  int max_tokens = 32;  // sentences are truncated to this many leading tokens
  int pair_classes = 2; // adjacent vs non-adjacent

  void validate() const;
};

// Dual sentence encoder: two independent stacked autoregressive transformers
// f and g over the LM's token embeddings, pooled at the final position. The
// embedding of a sentence is concat(f(s), g(s)).
class SentenceEncoder {
 public:
  SentenceEncoder(ParameterStore& store, const EncoderConfig& cfg, const TransformerLm& lm,
                  Rng& rng);

  int embedding_dim() const { return 2 * cfg_.width; }
  const EncoderConfig& config() const { return cfg_; }

  Tensor encode(std::span<const int> tokens) const;             // [P]
  Var encode_graph(Graph& g, std::span<const int> tokens) const;  // [P]
  // one side of the pair: f (queries) or g (candidates)
  Var encode_half(Graph& g, std::span<const int> tokens, bool g_side) const;  // [width]
  Tensor encode_half_plain(std::span<const int> tokens, bool g_side) const;

  // mean over target/candidate pairs (i, i-1), (i, i+1) of
  // -log softmax_b( f(s_i) . g(s_b) )[p], candidates excluding b = i
  Var quick_thoughts_loss(Graph& g, std::span<const std::vector<int>> sentences) const;

  // softmax(W [e1; e2; |e1-e2|]); W is a single projection without bias
  Var pair_logits(Graph& g, Var e1, Var e2) const;  // [1, classes]
  Tensor pair_classify(const Tensor& e1, const Tensor& e2) const;
  // cross-entropy of pair_logits against integer labels
  Var pair_loss(Graph& g, std::span<const std::pair<std::pair<int, int>, int>> labeled_pairs,
                std::span<const std::vector<int>> sentences) const;

 private:
  struct Half {
    Linear input;  // lm hidden -> width
    int wpe = -1;
    std::vector<TransformerBlock> blocks;
  };
  Half make_half(ParameterStore& store, const std::string& name, Rng& rng) const;
  Var encode_half_impl(Graph& g, const Half& half, std::span<const int> tokens) const;
  Tensor encode_half_plain_impl(const Half& half, std::span<const int> tokens) const;

  EncoderConfig cfg_;
  ParameterStore* store_ = nullptr;
  int lm_wte_ = -1;
  int lm_hidden_ = 0;
  Half f_, g_;
  int pair_w_ = -1;
};

}  // namespace loom
