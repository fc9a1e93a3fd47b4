// Copyright (c) 2026 the loom authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "loom/bundle.hpp"

namespace loom {

struct PerturbedStory {
  enum class Kind { swap2, mut1 };
  Story original;
  Story modified;
  std::vector<int> modified_positions;  // ascending
  Kind kind = Kind::swap2;
};

// exchange two distinct uniformly chosen sentence positions
PerturbedStory make_swap(const Story& story, Rng& rng);

// replace one uniformly chosen position t >= 1 with a sentence sampled from
// the language model conditioned on the story up to t; resamples (up to 10
// times) when the draw reproduces the original sentence
PerturbedStory make_mutation(const Story& story, const TransformerLm& lm, double top_p,
                             int max_len, Rng& rng);

// Story-level scorer surface for the structural tasks: a scalar score per
// story (lower = judged more coherent) and a per-position suspicion value
// (higher = judged more likely modified).
class StoryScorer {
 public:
  virtual ~StoryScorer() = default;
  virtual double story_score(const Story& story) = 0;
  virtual std::vector<double> suspicion(const Story& story) = 0;
};

class TdVaeStoryScorer : public StoryScorer {
 public:
  explicit TdVaeStoryScorer(const ModelBundle& bundle) : bundle_(&bundle) {}
  double story_score(const Story& story) override;
  std::vector<double> suspicion(const Story& story) override;

 private:
  const ModelBundle* bundle_;
};

class DiscriminatorStoryScorer : public StoryScorer {
 public:
  explicit DiscriminatorStoryScorer(const ModelBundle& bundle) : bundle_(&bundle) {}
  double story_score(const Story& story) override;
  std::vector<double> suspicion(const Story& story) override;

 private:
  const ModelBundle* bundle_;
};

// two-sentence sliding-window perplexity; lower total is judged more coherent
class LmStoryScorer : public StoryScorer {
 public:
  explicit LmStoryScorer(const ModelBundle& bundle) : bundle_(&bundle) {}
  double story_score(const Story& story) override;
  std::vector<double> suspicion(const Story& story) override;

 private:
  const ModelBundle* bundle_;
};

class RandomStoryScorer : public StoryScorer {
 public:
  explicit RandomStoryScorer(std::uint64_t seed) : rng_(seed) {}
  double story_score(const Story& story) override;
  std::vector<double> suspicion(const Story& story) override;

 private:
  Rng rng_;
};

struct Accuracy {
  double value = 0.0;
  double ci_half_width = 0.0;  // Wald interval at 0.05
  int n = 0;
};

// fraction of pairs where the original scores strictly better (lower); ties fail
Accuracy easy_task_accuracy(StoryScorer& scorer, std::span<const PerturbedStory> pairs);

// a story counts as a hit when at least one modified position is among the K
// most suspicious positions
Accuracy hard_task_accuracy(StoryScorer& scorer, std::span<const PerturbedStory> stories, int k);
// stricter rule used only to demonstrate which rule matches the reference
// baselines: every modified position must rank in the top K
Accuracy hard_task_accuracy_all_hit(StoryScorer& scorer, std::span<const PerturbedStory> stories,
                                    int k);

// top-K index set given suspicion values (stable: suspicion desc, index asc)
std::vector<int> top_k_positions(std::span<const double> suspicion, int k);

struct DiversityStats {
  double unique_nouns_per_100 = 0.0;
  double unique_verbs_per_100 = 0.0;
};
DiversityStats diversity_stats(std::span<const Story> stories, const Vocabulary& vocab);

// corpus BLEU: clipped n-gram precisions up to max_n, geometric mean, brevity
// penalty; zero counts for n >= 2 smooth to (m+1)/(t+1)
double bleu(std::span<const std::vector<int>> candidates,
            std::span<const std::vector<int>> references, int max_n = 4);

struct TaskRow {
  std::string task;
  std::string model;
  Accuracy easy, k1, k5, k10;
  double avg = 0.0;
  double avg_ci = 0.0;
};
TaskRow make_task_row(const std::string& task, const std::string& model, Accuracy easy,
                      Accuracy k1, Accuracy k5, Accuracy k10);
std::string format_report(std::span<const TaskRow> rows);

}  // namespace loom
