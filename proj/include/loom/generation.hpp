// Copyright (c) 2026 the loom authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "loom/bundle.hpp"

namespace loom {

enum class GenerationMode { sample, rerank, condition_rerank };

GenerationMode generation_mode_from_string(const std::string& s);
const char* to_string(GenerationMode m);

struct GenerationSpec {
  GenerationMode mode = GenerationMode::rerank;
  int beam = 10;
  int candidates = 100;
  double top_p = 0.925;
  int steps = 5;
  int max_sentence_len = 24;
  std::uint64_t noise_seed = 1;

  static GenerationSpec from_config(const RunConfig& cfg, GenerationMode mode);
  void validate() const;
};

// Scoring seam used by the beam search: the expected next-sentence embedding
// and a similarity score per sampled candidate (higher is better).
class SequenceScorer {
 public:
  virtual ~SequenceScorer() = default;
  virtual Tensor expected_next(std::span<const Tensor> embeddings) = 0;
  virtual std::vector<double> score_candidates(std::span<const Tensor> candidate_embeddings,
                                               std::span<const std::vector<int>> candidate_tokens,
                                               const Tensor& expected) = 0;
};

// expected embedding from a 1-step jumpy rollout; candidates scored by cosine
// similarity to it
class TdVaeScorer : public SequenceScorer {
 public:
  explicit TdVaeScorer(const ModelBundle& bundle) : bundle_(&bundle) {}
  Tensor expected_next(std::span<const Tensor> embeddings) override;
  std::vector<double> score_candidates(std::span<const Tensor> candidate_embeddings,
                                       std::span<const std::vector<int>> candidate_tokens,
                                       const Tensor& expected) override;

 private:
  const ModelBundle* bundle_;
};

// expected "embedding" is the context vector; candidates scored by the
// softmax over their dot products
class DiscriminatorScorer : public SequenceScorer {
 public:
  explicit DiscriminatorScorer(const ModelBundle& bundle) : bundle_(&bundle) {}
  Tensor expected_next(std::span<const Tensor> embeddings) override;
  std::vector<double> score_candidates(std::span<const Tensor> candidate_embeddings,
                                       std::span<const std::vector<int>> candidate_tokens,
                                       const Tensor& expected) override;

 private:
  const ModelBundle* bundle_;
};

struct TraceRecord {
  int step = 0;
  int beam = 0;
  int candidate = 0;
  std::vector<int> tokens;
  double similarity = 0.0;
  double cumulative = 0.0;
  bool kept = false;
};

struct GenerationResult {
  Story continuation;
  double score = 0.0;
  std::vector<TraceRecord> trace;
  std::vector<double> final_beam_scores;  // kept entries at the last step
};

// Incremental per-sentence planning: per step each beam entry predicts the
// next embedding, samples `candidates` sentences (conditioning attaches the
// projected expectation as a memory prefix), scores them, and the best `beam`
// expansions survive on cumulative score.
GenerationResult generate_continuation(const ModelBundle& bundle, const Story& prompt,
                                       const GenerationSpec& spec,
                                       SequenceScorer* scorer_override = nullptr);

std::string trace_to_text(const GenerationResult& result, const Vocabulary& vocab);

}  // namespace loom
