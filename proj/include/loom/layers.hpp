// Copyright (c) 2026 the loom authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "loom/gaussian.hpp"
#include "loom/graph.hpp"
#include "loom/params.hpp"
#include "loom/rng.hpp"

namespace loom {

// Affine layer; weights live in a ParameterStore and are referenced by index.
struct Linear {
  int w = -1;
  int b = -1;
  int in_dim = 0;
  int out_dim = 0;

  static Linear create(ParameterStore& store, const std::string& name, ParamGroup group,
                       int in_dim, int out_dim, Rng& rng);

  Var apply(Graph& g, Var x) const;           // [N,in] -> [N,out]
  Var apply_vec(Graph& g, Var x) const;       // [in] -> [out]
  Tensor apply_plain(const ParameterStore& store, const Tensor& x) const;
  Tensor apply_vec_plain(const ParameterStore& store, const Tensor& x) const;
};

// Two-layer tanh MLP emitting a diagonal Gaussian over `out_dim` coordinates.
struct GaussianHead {
  Linear hidden;
  Linear mean;
  Linear log_var;

  static GaussianHead create(ParameterStore& store, const std::string& name, ParamGroup group,
                             int in_dim, int hidden_dim, int out_dim, Rng& rng);

  struct Out {
    Var mean;
    Var log_var;
  };
  Out apply(Graph& g, Var x) const;  // x [in] -> gaussian over [out]
  DiagonalGaussian apply_plain(const ParameterStore& store, const Tensor& x) const;
};

// Stacked unidirectional LSTM. Gate order in the fused [4H] blocks is
// (input, forget, cell, output); forget biases start at 1.
struct LstmStack {
  struct Layer {
    int w_ih = -1;  // [in,4H]
    int w_hh = -1;  // [H,4H]
    int b = -1;     // [4H]
  };
  std::vector<Layer> layers;
  int input_dim = 0;
  int width = 0;

  static LstmStack create(ParameterStore& store, const std::string& name, ParamGroup group,
                          int input_dim, int width, int depth, Rng& rng);

  // top-layer hidden state per step
  std::vector<Tensor> forward_plain(const ParameterStore& store,
                                    std::span<const Tensor> inputs) const;
  std::vector<Var> forward(Graph& g, std::span<const Var> inputs) const;
};

struct AttentionParams {
  Linear wq, wk, wv, wo;
  int n_heads = 1;

  static AttentionParams create(ParameterStore& store, const std::string& name, ParamGroup group,
                                int hidden, int n_heads, Rng& rng);
};

// Multi-head causal self-attention over seq [T,H]. Position t attends to the
// memory rows plus sequence positions <= t. Memory rows that are exactly zero
// are dropped, so a zeroed memory projection is a strict no-op.
// When attn_probs_out is given it receives one [T, M'+T] matrix per head.
Var causal_attention_forward(Graph& g, Var seq, std::optional<Var> memory_prefix,
                             const AttentionParams& p,
                             std::vector<Tensor>* attn_probs_out = nullptr);

Tensor causal_attention_plain(const ParameterStore& store, const Tensor& seq,
                              const Tensor* memory_prefix, const AttentionParams& p);

// Pre-norm transformer block: x += attn(ln1(x)); x += mlp(ln2(x)).
struct TransformerBlock {
  AttentionParams attn;
  int ln1_g = -1, ln1_b = -1;
  int ln2_g = -1, ln2_b = -1;
  Linear fc1, fc2;  // H -> 4H (gelu) -> H

  static TransformerBlock create(ParameterStore& store, const std::string& name, ParamGroup group,
                                 int hidden, int n_heads, Rng& rng);

  Var apply(Graph& g, Var x, std::optional<Var> memory_row) const;
  Tensor apply_plain(const ParameterStore& store, const Tensor& x,
                     const Tensor* memory_row) const;
};

Tensor layer_norm_plain(const ParameterStore& store, const Tensor& x, int gain, int bias);
double gelu_scalar(double x);

}  // namespace loom
