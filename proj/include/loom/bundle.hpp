// Copyright (c) 2026 the loom authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>

#include "loom/config.hpp"

namespace loom {

// All parameterized components of one run, built deterministically from a
// RunConfig, a vocabulary and the config seed. The story-level model is
// either a TdVae or a Discriminator depending on cfg.model.
class ModelBundle {
 public:
  ModelBundle(const RunConfig& cfg, const Vocabulary& vocab);

  RunConfig cfg;
  Vocabulary vocab;
  ParameterStore store;
  std::unique_ptr<TransformerLm> lm;
  std::unique_ptr<SentenceEncoder> encoder;
  std::unique_ptr<PsaProjector> psa;
  std::unique_ptr<TdVae> tdvae;       // when cfg.model == "tdvae"
  std::unique_ptr<Discriminator> disc;  // otherwise

  int embedding_dim() const { return encoder->embedding_dim(); }
  std::vector<Tensor> encode_story(const Story& story) const;
  std::vector<Tensor> encode_sentences(std::span<const std::vector<int>> sentences) const;
};

}  // namespace loom
