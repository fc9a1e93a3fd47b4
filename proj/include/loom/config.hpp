// Copyright (c) 2026 the loom authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <string>

#include "loom/corpus.hpp"
#include "loom/discriminator.hpp"
#include "loom/encoder.hpp"
#include "loom/lm.hpp"
#include "loom/tdvae.hpp"

namespace loom {

// Flat key=value run configuration. Every field has a default; unknown keys
// are rejected. The embedding-dimension couplings (encoder width -> tdvae and
// discriminator input sizes) are derived, not configured.
struct RunConfig {
  std::uint64_t seed = 1;
  std::string model = "tdvae";       // tdvae | lstm | transformer
  std::string precision = "double";  // double | single (parameters rounded per step)

  LmConfig lm;
  EncoderConfig encoder;
  TdVaeConfig tdvae;
  DiscriminatorConfig disc;
  StoryWorldConfig world;
  int synth_stories = 200;
  std::array<double, 3> split_ratios{0.8, 0.1, 0.1};

  // schedule
  int batches_per_epoch = 2000;
  int max_epochs = 50;
  int patience = 3;
  bool halve_lr_on_plateau = true;
  double learning_rate = 0.01;
  double momentum = 0.9;
  int block_sentences = 20;
  int blocks_per_batch = 4;
  int psa_every = 3;  // conditioning step cadence, in hierarchical batches
  int valid_blocks = 16;

  // generation
  int gen_beam = 10;
  int gen_candidates = 100;  // 50 is the reduced setting some runs use
  double gen_top_p = 0.925;
  int gen_steps = 5;
  int gen_max_sentence_len = 24;

  // evaluation
  int eval_stories = 400;

  void validate() const;
  bool uses_tdvae() const { return model == "tdvae"; }
};

RunConfig run_config_from_text(const std::string& text, const std::string& origin = "<config>");
RunConfig run_config_from_file(const std::string& path);
std::string run_config_to_text(const RunConfig& cfg);

}  // namespace loom
