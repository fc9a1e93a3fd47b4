// Copyright (c) 2026 the loom authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>

#include "loom/bundle.hpp"
#include "loom/checkpoint.hpp"

namespace loom {

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double valid_loss = 0.0;
  double learning_rate = 0.0;
  bool improved = false;
};

struct TrainResult {
  std::vector<EpochRecord> epochs;
  std::vector<double> lm_losses;    // per LM batch, in step order
  std::vector<double> hier_losses;  // per hierarchical batch
  double best_valid_loss = 0.0;
  std::int64_t global_step = 0;
};

// Alternating training loop: even steps run a long-block LM batch, odd steps
// run a hierarchical batch (quick-thoughts + pair + story-model losses over
// detached embeddings); every psa_every-th hierarchical batch additionally
// fine-tunes the LM with the projected sentence embedding as memory. Each
// batch kind steps only its own parameter groups; a group audit runs after
// every backward pass. All batch sampling and noise is derived from
// (config seed, global step), so a resumed run replays identically.
class Trainer {
 public:
  Trainer(ModelBundle& bundle, const Corpus& train, const Corpus& valid);

  struct StepOutcome {
    std::string kind;  // "lm" | "hier" | "hier+psa"
    double loss = 0.0;
    double psa_loss = 0.0;
  };
  StepOutcome step(OptimizerState& opt, std::int64_t global_step);

  double validation_loss() const;

  TrainResult train(OptimizerState& opt, std::ostream* log,
                    const std::string& best_checkpoint_path = "", int start_epoch = 0,
                    double best_valid = 0.0, std::int64_t start_step = 0,
                    int non_improving = 0);

 private:
  struct BlockView {
    const Story* story;
    int begin, end;
  };
  std::vector<BlockView> sample_blocks(Rng& rng, const Corpus& corpus) const;
  double lm_batch(std::int64_t global_step, Rng& rng);
  double hier_batch(std::int64_t global_step, Rng& rng);
  double psa_batch(std::int64_t global_step, Rng& rng);
  void audit(const char* kind) const;
  void round_to_single(const std::set<ParamGroup>& groups, const std::set<int>& extra,
                       OptimizerState& opt);

  ModelBundle* bundle_;
  const Corpus* train_;
  const Corpus* valid_;
  std::set<ParamGroup> story_groups_;  // tdvae or discriminator
};

}  // namespace loom
