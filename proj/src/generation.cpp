// Copyright (c) 2026 the loom authors.
// SPDX-License-Identifier: Apache-2.0

#include "loom/generation.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <stdexcept>

namespace loom {

GenerationMode generation_mode_from_string(const std::string& s) {
  if (s == "sample") return GenerationMode::sample;
  if (s == "rerank") return GenerationMode::rerank;
  if (s == "condition_rerank") return GenerationMode::condition_rerank;
  throw std::invalid_argument("unknown generation mode: " + s);
}

const char* to_string(GenerationMode m) {
  switch (m) {
    case GenerationMode::sample: return "sample";
    case GenerationMode::rerank: return "rerank";
    case GenerationMode::condition_rerank: return "condition_rerank";
  }
  return "?";
}

GenerationSpec GenerationSpec::from_config(const RunConfig& cfg, GenerationMode mode) {
  GenerationSpec spec;
  spec.mode = mode;
  spec.beam = cfg.gen_beam;
  spec.candidates = cfg.gen_candidates;
  spec.top_p = cfg.gen_top_p;
  spec.steps = cfg.gen_steps;
  spec.max_sentence_len = cfg.gen_max_sentence_len;
  spec.noise_seed = cfg.seed;
  return spec;
}

void GenerationSpec::validate() const {
  if (beam < 1 || candidates < 1 || beam > candidates) {
    throw std::invalid_argument("generation: need 1 <= beam <= candidates");
  }
  if (steps < 1) throw std::invalid_argument("generation: steps must be >= 1");
  if (max_sentence_len < 1) throw std::invalid_argument("generation: max_sentence_len >= 1");
  if (top_p <= 0.0 || top_p > 1.0) throw std::invalid_argument("generation: top_p in (0,1]");
}

Tensor TdVaeScorer::expected_next(std::span<const Tensor> embeddings) {
  if (embeddings.empty()) throw std::invalid_argument("expected_next: empty story");
  if (!bundle_->tdvae) throw std::runtime_error("this bundle has no tdvae scorer");
  auto beliefs = bundle_->tdvae->compute_beliefs(embeddings);
  return bundle_->tdvae->jumpy_rollout(beliefs, 1, 1, nullptr)[0];
}

std::vector<double> TdVaeScorer::score_candidates(std::span<const Tensor> candidate_embeddings,
                                                  std::span<const std::vector<int>>,
                                                  const Tensor& expected) {
  std::vector<double> scores;
  scores.reserve(candidate_embeddings.size());
  for (const Tensor& e : candidate_embeddings) {
    scores.push_back(1.0 - cosine_distance(e, expected));
  }
  return scores;
}

Tensor DiscriminatorScorer::expected_next(std::span<const Tensor> embeddings) {
  if (embeddings.empty()) throw std::invalid_argument("expected_next: empty story");
  if (!bundle_->disc) throw std::runtime_error("this bundle has no discriminator scorer");
  return bundle_->disc->context_vectors(embeddings).back();
}

std::vector<double> DiscriminatorScorer::score_candidates(
    std::span<const Tensor> candidate_embeddings, std::span<const std::vector<int>>,
    const Tensor& expected) {
  Tensor scores = Tensor::zeros({static_cast<int>(candidate_embeddings.size())});
  for (std::size_t i = 0; i < candidate_embeddings.size(); ++i) {
    scores.at(static_cast<int>(i)) = dot(expected.ptr(), candidate_embeddings[i].ptr(),
                                         static_cast<int>(expected.size()));
  }
  softmax_inplace(scores.ptr(), static_cast<int>(candidate_embeddings.size()));
  return std::vector<double>(scores.data.begin(), scores.data.end());
}

namespace {

struct BeamEntry {
  std::vector<std::vector<int>> sentences;
  std::vector<Tensor> embeddings;
  double cumulative = 0.0;
};

std::vector<int> context_tokens(const Story& prompt, const BeamEntry& entry) {
  std::vector<int> tokens;
  tokens.push_back(Vocabulary::kBos);
  for (const auto& s : prompt.sentences) {
    tokens.insert(tokens.end(), s.begin(), s.end());
    tokens.push_back(Vocabulary::kSep);
  }
  for (const auto& s : entry.sentences) {
    tokens.insert(tokens.end(), s.begin(), s.end());
    tokens.push_back(Vocabulary::kSep);
  }
  return tokens;
}

}  // namespace

GenerationResult generate_continuation(const ModelBundle& bundle, const Story& prompt,
                                       const GenerationSpec& spec_in,
                                       SequenceScorer* scorer_override) {
  GenerationSpec spec = spec_in;
  if (spec.mode == GenerationMode::sample) {
    spec.beam = 1;
    spec.candidates = 1;
  }
  spec.validate();
  if (prompt.length() < 1) throw std::invalid_argument("generation: prompt needs >= 1 sentence");

  std::unique_ptr<SequenceScorer> owned;
  SequenceScorer* scorer = scorer_override;
  if (!scorer && spec.mode != GenerationMode::sample) {
    if (bundle.tdvae) owned = std::make_unique<TdVaeScorer>(bundle);
    else if (bundle.disc) owned = std::make_unique<DiscriminatorScorer>(bundle);
    else throw std::runtime_error("no scorer available for reranking generation");
    scorer = owned.get();
  }

  std::vector<Tensor> prompt_embeddings = bundle.encode_story(prompt);

  GenerationResult result;
  std::vector<BeamEntry> beams{BeamEntry{}};
  for (int step = 0; step < spec.steps; ++step) {
    struct Expansion {
      int beam_index;
      int candidate_index;
      std::vector<int> tokens;
      Tensor embedding;
      double similarity;
      double cumulative;
    };
    std::vector<Expansion> expansions;
    for (int bi = 0; bi < static_cast<int>(beams.size()); ++bi) {
      BeamEntry& entry = beams[static_cast<std::size_t>(bi)];
      std::vector<Tensor> so_far = prompt_embeddings;
      so_far.insert(so_far.end(), entry.embeddings.begin(), entry.embeddings.end());

      Tensor expected;
      MemoryPrefix memory;
      const MemoryPrefix* memory_ptr = nullptr;
      if (scorer) {
        expected = scorer->expected_next(so_far);
        if (spec.mode == GenerationMode::condition_rerank) {
          memory = bundle.psa->project_plain(expected);
          memory_ptr = &memory;
        }
      }

      std::vector<int> ctx = context_tokens(prompt, entry);
      std::vector<std::vector<int>> cand_tokens;
      std::set<std::vector<int>> seen;  // exact duplicates collapse before ranking
      for (int c = 0; c < spec.candidates; ++c) {
        Rng noise(seed_mix(seed_mix(spec.noise_seed, static_cast<std::uint64_t>(step)),
                           seed_mix(static_cast<std::uint64_t>(bi) + 101,
                                    static_cast<std::uint64_t>(c) + 7)));
        std::vector<int> tokens =
            bundle.lm->sample_sentence(ctx, memory_ptr, spec.top_p, spec.max_sentence_len, noise);
        if (tokens.empty()) continue;
        if (!seen.insert(tokens).second) continue;
        cand_tokens.push_back(std::move(tokens));
      }
      if (cand_tokens.empty()) {
        throw std::runtime_error("generation: the sampler produced no usable candidates");
      }

      std::vector<Tensor> cand_embeddings;
      cand_embeddings.reserve(cand_tokens.size());
      for (const auto& t : cand_tokens) cand_embeddings.push_back(bundle.encoder->encode(t));

      std::vector<double> scores;
      if (scorer) {
        scores = scorer->score_candidates(cand_embeddings, cand_tokens, expected);
      } else {
        scores.assign(cand_tokens.size(), 0.0);
      }
      for (std::size_t c = 0; c < cand_tokens.size(); ++c) {
        expansions.push_back(Expansion{bi, static_cast<int>(c), cand_tokens[c],
                                       cand_embeddings[c], scores[c],
                                       entry.cumulative + scores[c]});
      }
    }

    std::vector<int> order(expansions.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return expansions[static_cast<std::size_t>(a)].cumulative >
             expansions[static_cast<std::size_t>(b)].cumulative;
    });

    int keep = std::min<int>(spec.beam, static_cast<int>(expansions.size()));
    std::vector<BeamEntry> next;
    std::vector<bool> kept(expansions.size(), false);
    for (int i = 0; i < keep; ++i) {
      const Expansion& ex = expansions[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
      kept[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = true;
      BeamEntry e = beams[static_cast<std::size_t>(ex.beam_index)];
      e.sentences.push_back(ex.tokens);
      e.embeddings.push_back(ex.embedding);
      e.cumulative = ex.cumulative;
      next.push_back(std::move(e));
    }
    for (std::size_t i = 0; i < expansions.size(); ++i) {
      const Expansion& ex = expansions[i];
      result.trace.push_back(TraceRecord{step, ex.beam_index, ex.candidate_index, ex.tokens,
                                         ex.similarity, ex.cumulative, kept[i]});
    }
    beams = std::move(next);
  }

  const BeamEntry& best = beams.front();  // sorted descending at the last step
  result.continuation.id = prompt.id + "+continuation";
  result.continuation.source = "generated";
  result.continuation.sentences = best.sentences;
  result.score = best.cumulative;
  for (const auto& b : beams) result.final_beam_scores.push_back(b.cumulative);
  return result;
}

std::string trace_to_text(const GenerationResult& result, const Vocabulary& vocab) {
  std::ostringstream out;
  for (const auto& r : result.trace) {
    out << "step=" << r.step << " beam=" << r.beam << " candidate=" << r.candidate
        << " similarity=" << r.similarity << " cumulative=" << r.cumulative
        << " kept=" << (r.kept ? "yes" : "no") << " text=\""
        << sentence_to_text(vocab, r.tokens) << "\"\n";
  }
  return out.str();
}

}  // namespace loom
