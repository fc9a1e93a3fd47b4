// Copyright (c) 2026 the loom authors.
// SPDX-License-Identifier: Apache-2.0

#include "loom/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace loom {

PerturbedStory make_swap(const Story& story, Rng& rng) {
  int n = story.length();
  if (n < 4) throw std::invalid_argument("make_swap: story shorter than 4 sentences");
  int a = rng.uniform_int(n);
  int b = rng.uniform_int(n - 1);
  if (b >= a) ++b;  // uniform over distinct unordered pairs
  if (a > b) std::swap(a, b);
  PerturbedStory out;
  out.kind = PerturbedStory::Kind::swap2;
  out.original = story;
  out.modified = story;
  std::swap(out.modified.sentences[static_cast<std::size_t>(a)],
            out.modified.sentences[static_cast<std::size_t>(b)]);
  out.modified.id = story.id + "+swap";
  out.modified_positions = {a, b};
  return out;
}

PerturbedStory make_mutation(const Story& story, const TransformerLm& lm, double top_p,
                             int max_len, Rng& rng) {
  int n = story.length();
  if (n < 2) throw std::invalid_argument("make_mutation: story shorter than 2 sentences");
  int t = 1 + rng.uniform_int(n - 1);  // the first sentence is never replaced
  std::vector<int> context = TransformerLm::story_tokens(story, 0, t, false);
  const std::vector<int>& original = story.sentences[static_cast<std::size_t>(t)];
  std::vector<int> replacement;
  bool ok = false;
  for (int attempt = 0; attempt < 10; ++attempt) {
    replacement = lm.sample_sentence(context, nullptr, top_p, max_len, rng);
    if (!replacement.empty() && replacement != original) {
      ok = true;
      break;
    }
  }
  if (!ok) throw std::runtime_error("make_mutation: resample attempts exhausted");
  PerturbedStory out;
  out.kind = PerturbedStory::Kind::mut1;
  out.original = story;
  out.modified = story;
  out.modified.sentences[static_cast<std::size_t>(t)] = replacement;
  out.modified.id = story.id + "+mut";
  out.modified_positions = {t};
  return out;
}

// ---------------------------------------------------------------------------
// scorers
// ---------------------------------------------------------------------------

double TdVaeStoryScorer::story_score(const Story& story) {
  auto s = bundle_->tdvae->position_surprise(bundle_->encode_story(story));
  double total = 0.0;
  for (std::size_t t = 1; t < s.distances.size(); ++t) total += s.distances[t];
  return total;
}

std::vector<double> TdVaeStoryScorer::suspicion(const Story& story) {
  return bundle_->tdvae->position_surprise(bundle_->encode_story(story)).distances;
}

namespace {
std::vector<double> discriminator_distances(const ModelBundle& bundle, const Story& story) {
  if (story.length() < 2) throw std::invalid_argument("scorer: story shorter than 2 sentences");
  std::vector<Tensor> embeddings = bundle.encode_story(story);
  std::vector<Tensor> contexts = bundle.disc->context_vectors(embeddings);
  std::vector<double> d(embeddings.size(), 0.0);
  double sum = 0.0;
  for (std::size_t t = 1; t < embeddings.size(); ++t) {
    d[t] = -dot(contexts[t - 1].ptr(), embeddings[t].ptr(), static_cast<int>(embeddings[t].size()));
    sum += d[t];
  }
  d[0] = sum / static_cast<double>(embeddings.size() - 1);
  return d;
}
}  // namespace

double DiscriminatorStoryScorer::story_score(const Story& story) {
  auto d = discriminator_distances(*bundle_, story);
  double total = 0.0;
  for (std::size_t t = 1; t < d.size(); ++t) total += d[t];
  return total;
}

std::vector<double> DiscriminatorStoryScorer::suspicion(const Story& story) {
  return discriminator_distances(*bundle_, story);
}

double LmStoryScorer::story_score(const Story& story) {
  auto scores = bundle_->lm->perplexity_sliding(story, 2);
  double total = 0.0;
  for (double s : scores) total += s;
  return total / static_cast<double>(scores.size());
}

std::vector<double> LmStoryScorer::suspicion(const Story& story) {
  return bundle_->lm->perplexity_sliding(story, 2);
}

double RandomStoryScorer::story_score(const Story&) { return rng_.uniform(); }

std::vector<double> RandomStoryScorer::suspicion(const Story& story) {
  std::vector<double> s(static_cast<std::size_t>(story.length()));
  for (auto& v : s) v = rng_.uniform();
  return s;
}

// ---------------------------------------------------------------------------
// tasks
// ---------------------------------------------------------------------------

namespace {
Accuracy wald(int hits, int n) {
  Accuracy a;
  a.n = n;
  a.value = n ? static_cast<double>(hits) / n : 0.0;
  a.ci_half_width = n ? 1.96 * std::sqrt(a.value * (1.0 - a.value) / n) : 0.0;
  return a;
}
}  // namespace

Accuracy easy_task_accuracy(StoryScorer& scorer, std::span<const PerturbedStory> pairs) {
  if (pairs.empty()) throw std::invalid_argument("easy_task_accuracy: no pairs");
  int hits = 0;
  for (const auto& p : pairs) {
    double orig = scorer.story_score(p.original);
    double mod = scorer.story_score(p.modified);
    if (orig < mod) ++hits;  // ties count as failure
  }
  return wald(hits, static_cast<int>(pairs.size()));
}

std::vector<int> top_k_positions(std::span<const double> suspicion, int k) {
  std::vector<int> order(suspicion.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (suspicion[static_cast<std::size_t>(a)] != suspicion[static_cast<std::size_t>(b)]) {
      return suspicion[static_cast<std::size_t>(a)] > suspicion[static_cast<std::size_t>(b)];
    }
    return a < b;
  });
  order.resize(std::min<std::size_t>(order.size(), static_cast<std::size_t>(k)));
  return order;
}

namespace {
Accuracy hard_task_impl(StoryScorer& scorer, std::span<const PerturbedStory> stories, int k,
                        bool all_hit) {
  if (k < 1) throw std::invalid_argument("hard_task_accuracy: K must be >= 1");
  if (stories.empty()) throw std::invalid_argument("hard_task_accuracy: no stories");
  int hits = 0;
  for (const auto& p : stories) {
    std::vector<double> s = scorer.suspicion(p.modified);
    std::vector<int> top = top_k_positions(s, k);
    std::set<int> top_set(top.begin(), top.end());
    bool hit;
    if (all_hit) {
      hit = true;
      for (int pos : p.modified_positions) hit &= top_set.count(pos) > 0;
    } else {
      hit = false;
      for (int pos : p.modified_positions) hit |= top_set.count(pos) > 0;
    }
    if (hit) ++hits;
  }
  return wald(hits, static_cast<int>(stories.size()));
}
}  // namespace

Accuracy hard_task_accuracy(StoryScorer& scorer, std::span<const PerturbedStory> stories, int k) {
  return hard_task_impl(scorer, stories, k, false);
}

Accuracy hard_task_accuracy_all_hit(StoryScorer& scorer, std::span<const PerturbedStory> stories,
                                    int k) {
  return hard_task_impl(scorer, stories, k, true);
}

// ---------------------------------------------------------------------------
// table-2 style statistics
// ---------------------------------------------------------------------------

DiversityStats diversity_stats(std::span<const Story> stories, const Vocabulary& vocab) {
  if (stories.empty()) throw std::invalid_argument("diversity_stats: no stories");
  double noun_rate = 0.0, verb_rate = 0.0;
  for (const Story& story : stories) {
    std::set<std::string> nouns, verbs;
    std::int64_t tokens = 0;
    for (const auto& sentence : story.sentences) {
      for (int id : sentence) {
        ++tokens;
        PosTag tag = vocab.tag(id);
        if (tag == PosTag::noun) nouns.insert(stem(vocab.token(id)));
        else if (tag == PosTag::verb) verbs.insert(stem(vocab.token(id)));
      }
    }
    if (tokens == 0) continue;
    noun_rate += 100.0 * static_cast<double>(nouns.size()) / static_cast<double>(tokens);
    verb_rate += 100.0 * static_cast<double>(verbs.size()) / static_cast<double>(tokens);
  }
  DiversityStats out;
  out.unique_nouns_per_100 = noun_rate / static_cast<double>(stories.size());
  out.unique_verbs_per_100 = verb_rate / static_cast<double>(stories.size());
  return out;
}

double bleu(std::span<const std::vector<int>> candidates,
            std::span<const std::vector<int>> references, int max_n) {
  if (candidates.empty() || candidates.size() != references.size()) {
    throw std::invalid_argument("bleu: need matching non-empty candidate/reference lists");
  }
  for (const auto& c : candidates) {
    if (c.empty()) throw std::invalid_argument("bleu: empty candidate");
  }
  for (const auto& r : references) {
    if (r.empty()) throw std::invalid_argument("bleu: empty reference");
  }

  std::int64_t cand_len = 0, ref_len = 0;
  double log_sum = 0.0;
  int used_orders = 0;
  for (int n = 1; n <= max_n; ++n) {
    std::int64_t matches = 0, total = 0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      const auto& cand = candidates[i];
      const auto& ref = references[i];
      if (n == 1) {
        cand_len += static_cast<std::int64_t>(cand.size());
        ref_len += static_cast<std::int64_t>(ref.size());
      }
      if (static_cast<int>(cand.size()) < n) continue;
      std::map<std::vector<int>, int> cand_counts, ref_counts;
      for (std::size_t j = 0; j + n <= cand.size(); ++j) {
        cand_counts[std::vector<int>(cand.begin() + j, cand.begin() + j + n)]++;
      }
      for (std::size_t j = 0; j + n <= ref.size(); ++j) {
        ref_counts[std::vector<int>(ref.begin() + j, ref.begin() + j + n)]++;
      }
      for (const auto& [gram, count] : cand_counts) {
        auto it = ref_counts.find(gram);
        if (it != ref_counts.end()) matches += std::min(count, it->second);
        total += count;
      }
    }
    if (total == 0) continue;  // no n-grams of this order anywhere
    double p;
    if (matches == 0) {
      if (n == 1) return 0.0;  // no unigram overlap at all
      p = 1.0 / (static_cast<double>(total) + 1.0);  // add-one smoothing
    } else {
      p = static_cast<double>(matches) / static_cast<double>(total);
    }
    log_sum += std::log(p);
    ++used_orders;
  }
  if (used_orders == 0) return 0.0;
  double bp = cand_len >= ref_len
                  ? 1.0
                  : std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(cand_len));
  return bp * std::exp(log_sum / used_orders);
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

TaskRow make_task_row(const std::string& task, const std::string& model, Accuracy easy,
                      Accuracy k1, Accuracy k5, Accuracy k10) {
  TaskRow row;
  row.task = task;
  row.model = model;
  row.easy = easy;
  row.k1 = k1;
  row.k5 = k5;
  row.k10 = k10;
  row.avg = (easy.value + k1.value + k5.value + k10.value) / 4.0;
  row.avg_ci = (easy.ci_half_width + k1.ci_half_width + k5.ci_half_width + k10.ci_half_width) / 4.0;
  return row;
}

std::string format_report(std::span<const TaskRow> rows) {
  std::ostringstream out;
  auto cell = [](double v, double ci) {
    std::ostringstream c;
    c << std::fixed << std::setprecision(3) << v << " (" << std::setprecision(3) << ci << ")";
    return c.str();
  };
  out << std::left << std::setw(8) << "Task" << std::setw(14) << "Model" << std::setw(15) << "Easy"
      << std::setw(15) << "K-1" << std::setw(15) << "K-5" << std::setw(15) << "K-10"
      << std::setw(15) << "Avg" << "\n";
  for (const auto& r : rows) {
    out << std::left << std::setw(8) << r.task << std::setw(14) << r.model << std::setw(15)
        << cell(r.easy.value, r.easy.ci_half_width) << std::setw(15)
        << cell(r.k1.value, r.k1.ci_half_width) << std::setw(15)
        << cell(r.k5.value, r.k5.ci_half_width) << std::setw(15)
        << cell(r.k10.value, r.k10.ci_half_width) << std::setw(15) << cell(r.avg, r.avg_ci)
        << "\n";
  }
  out << "\n";
  for (const auto& r : rows) {
    std::string key = r.task + "." + r.model;
    for (auto& ch : key) {
      if (ch == ' ') ch = '_';
    }
    out << key << ".easy=" << r.easy.value << "\n";
    out << key << ".k1=" << r.k1.value << "\n";
    out << key << ".k5=" << r.k5.value << "\n";
    out << key << ".k10=" << r.k10.value << "\n";
    out << key << ".avg=" << r.avg << "\n";
  }
  return out.str();
}

}  // namespace loom
