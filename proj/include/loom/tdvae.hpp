// Copyright (c) 2026 the loom authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>

#include "loom/layers.hpp"

namespace loom {

struct TdVaeConfig {
  int input_dim = 128;     // sentence embedding dimension P
  int belief_width = 128;  // stacked unidirectional LSTM width
  int belief_layers = 2;
  int n_layers = 2;    // latent hierarchy depth
  int latent_dim = 16;  // per hierarchy layer
  int head_hidden = 64;
  int max_jump = 5;          // k: t2 - t1 <= k
  int samples_per_block = 200;  // n: time pairs per training block

  void validate() const;
};

struct TimePair {
  int t1 = 0;
  int t2 = 0;  // 0-based sentence indices, t1 < t2
};

// per-term means over the scored pairs; the loss minimizes
//   -(reconstruction + belief_t1 + transition - belief_t2 - smoothing)
struct TdVaeLossBreakdown {
  double reconstruction = 0.0;
  double belief_t1 = 0.0;
  double transition = 0.0;
  double belief_t2 = 0.0;
  double smoothing = 0.0;
};

// Latent story model over detached sentence embeddings. Upper hierarchy
// layers are sampled first; every lower layer's heads take the samples from
// the layers above, and the decoder consumes all layers' samples.
class TdVae {
 public:
  TdVae(ParameterStore& store, const TdVaeConfig& cfg, Rng& rng);

  const TdVaeConfig& config() const { return cfg_; }

  // one belief per position, strictly causal in the embeddings
  std::vector<Tensor> compute_beliefs(std::span<const Tensor> embeddings) const;

  // t1 uniform over positions with a valid successor; the gap is drawn with
  // probability proportional to (k - gap + 1), truncated at the block end
  static std::vector<TimePair> sample_time_pairs(int T, int k, int n, Rng& rng);

  Var loss(Graph& g, std::span<const Tensor> embeddings, std::span<const TimePair> pairs,
           Rng& noise, TdVaeLossBreakdown* breakdown = nullptr) const;

  // From the belief at the final given position: sample the current latent,
  // apply the transition `steps` times, decode the embedding mean at each
  // step. noise == nullptr collapses every sample to the distribution mean.
  std::vector<Tensor> jumpy_rollout(std::span<const Tensor> beliefs, int steps, int samples,
                                    Rng* noise) const;

  struct Surprise {
    std::vector<double> distances;      // per position; position 0 gets the mean
    std::vector<double> probabilities;  // softmax over distances
  };
  // cosine distance between each embedding and the 1-step prediction from the
  // beliefs up to the previous position (deterministic mean path)
  Surprise position_surprise(std::span<const Tensor> embeddings) const;

 private:
  struct SampledLatents {
    std::vector<Var> z;       // per layer, bottom-up indexing
    std::vector<GaussianHead::Out> dist;  // the head outputs used to sample
  };
  Var concat_above(const std::vector<Var>& z, int layer) const;

  TdVaeConfig cfg_;
  ParameterStore* store_ = nullptr;
  LstmStack belief_;
  std::vector<GaussianHead> belief_head_;  // p_B per layer
  std::vector<GaussianHead> smooth_head_;  // q_S per layer
  std::vector<GaussianHead> trans_head_;   // p_T per layer
  GaussianHead decoder_;                   // p_D over all layers' samples
};

}  // namespace loom
