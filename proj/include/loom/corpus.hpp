// Copyright (c) 2026 the loom authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "loom/rng.hpp"
#include "loom/vocab.hpp"

namespace loom {

// A story is an ordered sequence of sentences, each an ordered sequence of
// token ids over the owning corpus vocabulary.
struct Story {
  std::string id;
  std::vector<std::vector<int>> sentences;
  std::string source;

  int length() const { return static_cast<int>(sentences.size()); }
};

struct Corpus {
  std::string name;
  Vocabulary vocab;
  std::vector<Story> stories;

  std::int64_t total_sentences() const;
  void validate() const;  // every token id < vocab size, >= 1 sentence per story
};

// Synthetic story-world configuration. Stories are entity-event chains over a
// small world; with probability `coherence` each event is drawn from those
// whose preconditions hold in the current world state, otherwise uniformly.
struct StoryWorldConfig {
  int n_entities = 5;
  int n_locations = 6;
  int n_event_templates = 10;
  int min_sentences = 12;  // >= 3
  int max_sentences = 30;
  double coherence = 1.0;
  double protagonist_persistence = 0.65;  // chance the next event keeps the actor
  std::uint64_t grammar_seed = 1;         // rotates the name/phrasing pools

  void validate() const;
};

// key=value (de)serialization for StoryWorldConfig; '#' starts a comment
StoryWorldConfig story_world_config_from_file(const std::string& path);
std::string story_world_config_to_text(const StoryWorldConfig& cfg);

// Deterministic in (config, seed).
Corpus generate_story_world(const StoryWorldConfig& config, std::uint64_t seed, int n_stories);

// Fraction of sentences whose event preconditions hold in the world state
// implied by the preceding sentences (lazily bound from first mentions).
double transition_acceptance_rate(const StoryWorldConfig& config, const Corpus& corpus);

// UTF-8 text; blank line separates stories; sentences split on newline or on
// {. ! ?} followed by whitespace and a capital, with an abbreviation guard.
// Tokens split on whitespace and punctuation; ids assigned by first
// appearance after the reserved entries.
Corpus ingest_plain_text(const std::string& path);
Corpus ingest_plain_text(const std::string& path, const Vocabulary& vocab);

// one sentence per line, blank line between stories
void save_corpus(const Corpus& corpus, const std::string& text_path);
std::string sentence_to_text(const Vocabulary& vocab, std::span<const int> tokens);

struct SplitResult {
  Corpus train, valid, test;
};
// Disjoint partition covering all stories; shuffle deterministic in seed.
SplitResult split_corpus(const Corpus& corpus, const std::array<double, 3>& ratios,
                         std::uint64_t seed);

struct StoryBlock {
  int corpus = 0;
  int story = 0;
  int begin = 0;
  int end = 0;  // half-open sentence range
};

// Corpus picked with probability proportional to story count, then a uniform
// story, then a uniform contiguous block of <= block_sentences sentences.
std::vector<StoryBlock> sample_batch(std::span<const Corpus* const> corpora, int block_sentences,
                                     int blocks_per_batch, Rng& rng);

}  // namespace loom
