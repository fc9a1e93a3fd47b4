// Copyright (c) 2026 the loom authors.
// SPDX-License-Identifier: Apache-2.0

#include "loom/bundle.hpp"

namespace loom {

ModelBundle::ModelBundle(const RunConfig& run_cfg, const Vocabulary& v)
    : cfg(run_cfg), vocab(v) {
  cfg.validate();
  cfg.lm.vocab = vocab.size();
  Rng init(seed_mix(cfg.seed, 0x494e4954ULL));
  lm = std::make_unique<TransformerLm>(store, cfg.lm, init);
  encoder = std::make_unique<SentenceEncoder>(store, cfg.encoder, *lm, init);
  const int p = encoder->embedding_dim();
  psa = std::make_unique<PsaProjector>(store, p, cfg.lm.n_layers, cfg.lm.hidden, init);
  if (cfg.uses_tdvae()) {
    cfg.tdvae.input_dim = p;
    tdvae = std::make_unique<TdVae>(store, cfg.tdvae, init);
  } else {
    cfg.disc.input_dim = p;
    cfg.disc.kind = discriminator_kind_from_string(
        cfg.model == "transformer" ? "transformer" : "lstm");
    disc = std::make_unique<Discriminator>(store, cfg.disc, init);
  }
}

std::vector<Tensor> ModelBundle::encode_story(const Story& story) const {
  return encode_sentences(story.sentences);
}

std::vector<Tensor> ModelBundle::encode_sentences(
    std::span<const std::vector<int>> sentences) const {
  std::vector<Tensor> out;
  out.reserve(sentences.size());
  for (const auto& s : sentences) out.push_back(encoder->encode(s));
  return out;
}

}  // namespace loom
