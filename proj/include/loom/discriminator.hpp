// Copyright (c) 2026 the loom authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>

#include "loom/layers.hpp"

namespace loom {

struct DiscriminatorConfig {
  enum class Kind { lstm, transformer };
  Kind kind = Kind::lstm;
  int input_dim = 128;  // sentence embedding dimension P
  int width = 128;
  int depth = 2;
  int n_heads = 2;        // transformer only
  int max_positions = 128;  // transformer positional table

  void validate() const;
};

DiscriminatorConfig::Kind discriminator_kind_from_string(const std::string& s);
const char* to_string(DiscriminatorConfig::Kind k);

// Story-level contrastive baseline: a recurrent or causal-transformer context
// over detached sentence embeddings, trained to give the following sentence
// the largest dot product among the block.
class Discriminator {
 public:
  Discriminator(ParameterStore& store, const DiscriminatorConfig& cfg, Rng& rng);

  const DiscriminatorConfig& config() const { return cfg_; }

  // causal context vector per position, projected back to the embedding space
  std::vector<Tensor> context_vectors(std::span<const Tensor> embeddings) const;

  // mean over positions t of -log softmax_b(c_t . e_b)[t+1], b != t
  Var loss(Graph& g, std::span<const Tensor> embeddings) const;

  // softmax over c . e_candidate for the context's final position
  Tensor rank(std::span<const Tensor> context_embeddings,
              std::span<const Tensor> candidates) const;

 private:
  DiscriminatorConfig cfg_;
  ParameterStore* store_ = nullptr;
  // lstm variant
  LstmStack lstm_;
  // transformer variant
  Linear input_;
  int wpe_ = -1;
  std::vector<TransformerBlock> blocks_;
  // shared output projection to the embedding space
  Linear out_;

  std::vector<Var> contexts_graph(Graph& g, std::span<const Var> inputs) const;
};

}  // namespace loom
