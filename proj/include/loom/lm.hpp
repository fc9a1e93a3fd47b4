// Copyright (c) 2026 the loom authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <span>

#include "loom/corpus.hpp"
#include "loom/layers.hpp"

namespace loom {

struct LmConfig {
  // full-scale reference: layers=24 hidden=1024 heads=16 context=1024
  int n_layers = 4;
  int hidden = 128;
  int n_heads = 4;
  int context = 256;
  int vocab = 0;

  void validate() const;
};

// One attention key/value prefix row per layer, derived from a projected
// sentence embedding. Rows that are exactly zero act as absent.
struct MemoryPrefix {
  Tensor rows;  // [n_layers, hidden]
};

// keep the smallest probability-sorted prefix with cumulative mass >= p,
// renormalized; the top token is always kept
Tensor top_p_filter(const Tensor& probs, double p);

// Decoder-only transformer over a closed vocabulary. Token streams are
// [BOS] s_1 [SEP] s_2 [SEP] ... with [EOS] after the final story sentence.
class TransformerLm {
 public:
  TransformerLm(ParameterStore& store, const LmConfig& cfg, Rng& rng);

  const LmConfig& config() const { return cfg_; }
  // the token-embedding table is the feature layer shared with the sentence
  // encoders; their losses fine-tune it
  int token_embedding_param() const { return wte_; }

  // --- training path (autodiff graph) ---
  Var logits(Graph& g, std::span<const int> tokens, std::optional<Var> memory_rows) const;
  // mean over positions j >= scored_from of -log P(w_j | w_<j, memory)
  Var loss(Graph& g, std::span<const int> tokens, std::optional<Var> memory_rows,
           int scored_from = 1) const;

  // --- inference path (incremental, key/value cache) ---
  struct KvCache {
    std::vector<double> data;
    int rows = 0;
    const double* row(int r, int width) const { return data.data() + static_cast<std::size_t>(r) * width; }
  };
  struct State {
    std::vector<KvCache> key_cache;    // per layer; memory prefix slots come first
    std::vector<KvCache> value_cache;  // per layer
    int position = 0;
  };
  State begin(const MemoryPrefix* memory) const;
  Tensor step(State& state, int token) const;  // logits [vocab]

  // autoregressive sampling until SEP/EOS or max_len tokens; the terminator is
  // not part of the returned sentence; deterministic given the noise stream
  std::vector<int> sample_sentence(std::span<const int> context, const MemoryPrefix* memory,
                                   double top_p, int max_len, Rng& noise) const;

  // per-sentence perplexity; sentence t >= 1 conditioned on the previous
  // window-1 sentences, sentence 0 scored unconditionally
  std::vector<double> perplexity_sliding(const Story& story, int window = 2) const;

  static std::vector<int> story_tokens(const Story& story, int first_sentence, int last_sentence,
                                       bool at_story_end);

 private:
  Tensor token_embedding(int token, int position) const;

  LmConfig cfg_;
  ParameterStore* store_;
  int wte_ = -1;
  int wpe_ = -1;
  std::vector<TransformerBlock> blocks_;
  int lnf_g_ = -1, lnf_b_ = -1;
  Linear head_;
};

// W_m: sentence embedding -> one hidden row per LM layer (pseudo-self-attention)
class PsaProjector {
 public:
  PsaProjector() = default;
  PsaProjector(ParameterStore& store, int embedding_dim, int n_layers, int hidden, Rng& rng);

  MemoryPrefix project_plain(const Tensor& embedding) const;
  Var project(Graph& g, Var embedding) const;  // [P] -> [n_layers, hidden]

  int embedding_dim() const { return p_dim_; }

 private:
  ParameterStore* store_ = nullptr;
  int w_m_ = -1;
  int n_layers_ = 0, hidden_ = 0, p_dim_ = 0;
};

}  // namespace loom
