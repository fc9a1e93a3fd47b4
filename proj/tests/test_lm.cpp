// Copyright (c) 2026 the loom authors.
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "loom/gradcheck.hpp"
#include "loom/lm.hpp"

using namespace loom;

namespace {

LmConfig tiny_config(int vocab = 20) {
  LmConfig cfg;
  cfg.n_layers = 2;
  cfg.hidden = 16;
  cfg.n_heads = 2;
  cfg.context = 32;
  cfg.vocab = vocab;
  return cfg;
}

struct Fixture {
  ParameterStore store;
  Rng rng{123};
  TransformerLm lm;
  Fixture() : lm(store, tiny_config(), rng) {}
};

}  // namespace

TEST_CASE("top_p_filter hand-enumerated case") {
  Tensor probs = Tensor::vector({0.5, 0.3, 0.125, 0.075});
  Tensor out = top_p_filter(probs, 0.925);
  CHECK(out.at(0) == doctest::Approx(0.5405405405).epsilon(1e-9));
  CHECK(out.at(1) == doctest::Approx(0.3243243243).epsilon(1e-9));
  CHECK(out.at(2) == doctest::Approx(0.1351351351).epsilon(1e-9));
  CHECK(out.at(3) == 0.0);
}

TEST_CASE("top_p_filter p=1 is the identity") {
  Tensor probs = Tensor::vector({0.25, 0.5, 0.125, 0.125});
  Tensor out = top_p_filter(probs, 1.0);
  for (int i = 0; i < 4; ++i) CHECK(out.at(i) == doctest::Approx(probs.at(i)).epsilon(1e-12));
}

TEST_CASE("top_p_filter degenerate distribution keeps the single token") {
  Tensor probs = Tensor::vector({1.0, 0.0, 0.0});
  for (double p : {0.01, 0.5, 1.0}) {
    Tensor out = top_p_filter(probs, p);
    CHECK(out.at(0) == 1.0);
    CHECK(out.at(1) == 0.0);
  }
}

TEST_CASE("top_p_filter rejects malformed input") {
  CHECK_THROWS(top_p_filter(Tensor::vector({0.5, 0.3}), 0.9));       // not normalized
  CHECK_THROWS(top_p_filter(Tensor::vector({0.5, 0.5}), 0.0));       // p out of range
  CHECK_THROWS(top_p_filter(Tensor::vector({0.5, 0.5}), 1.5));
  CHECK_THROWS(top_p_filter(Tensor::vector({1.5, -0.5}), 0.9));      // negative mass
}

TEST_CASE("top_p_filter properties: normalized output, minimal prefix mass >= p") {
  Rng rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    int n = 2 + rng.uniform_int(30);
    Tensor probs = Tensor::zeros({n});
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      probs.at(i) = -std::log(1.0 - rng.uniform());
      sum += probs.at(i);
    }
    for (int i = 0; i < n; ++i) probs.at(i) /= sum;
    double p = 0.05 + 0.95 * rng.uniform();
    Tensor out = top_p_filter(probs, p);

    double out_sum = 0.0, kept_mass = 0.0;
    int kept = 0;
    for (int i = 0; i < n; ++i) {
      out_sum += out.at(i);
      if (out.at(i) > 0.0) {
        ++kept;
        kept_mass += probs.at(i);
      }
    }
    CHECK(out_sum == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(kept >= 1);
    CHECK(kept_mass >= p - 1e-12);
    // minimality: removing the smallest kept probability drops below p
    double smallest_kept = 2.0;
    for (int i = 0; i < n; ++i) {
      if (out.at(i) > 0.0) smallest_kept = std::min(smallest_kept, probs.at(i));
    }
    if (kept > 1) CHECK(kept_mass - smallest_kept < p);
  }
}

TEST_CASE("zeroed output layer gives uniform loss ln(V)") {
  Fixture f;
  f.store.entry("lm.head.w").value.fill(0.0);
  f.store.entry("lm.head.b").value.fill(0.0);
  std::vector<int> tokens{1, 5, 7, 9, 11};
  Graph g(&f.store);
  Var loss = f.lm.loss(g, tokens, std::nullopt);
  CHECK(g.value(loss).at(0) == doctest::Approx(std::log(20.0)).epsilon(1e-12));
}

TEST_CASE("length-2 sequence scores exactly one position") {
  Fixture f;
  std::vector<int> tokens{1, 5};
  Graph g(&f.store);
  Var loss = f.lm.loss(g, tokens, std::nullopt);
  // oracle: softmax of the first logits row at the target token
  Graph g2(&f.store);
  Var lg = f.lm.logits(g2, tokens, std::nullopt);
  Tensor row = g2.value(lg);
  std::vector<double> p(row.row_ptr(0), row.row_ptr(0) + row.cols());
  softmax_inplace(p.data(), row.cols());
  CHECK(g.value(loss).at(0) == doctest::Approx(-std::log(p[5])).epsilon(1e-12));

  CHECK_THROWS(f.lm.loss(g, std::vector<int>{1}, std::nullopt));
  std::vector<int> too_long(40, 4);
  CHECK_THROWS(f.lm.loss(g, too_long, std::nullopt));
  std::vector<int> bad{1, 99};
  CHECK_THROWS(f.lm.loss(g, bad, std::nullopt));
}

TEST_CASE("memory prefix changes the loss value but not the contract") {
  Fixture f;
  std::vector<int> tokens{1, 5, 7, 9};
  Graph g(&f.store);
  double plain = g.value(f.lm.loss(g, tokens, std::nullopt)).at(0);
  Var mem = g.constant(f.rng.gaussian_tensor({2, 16}, 1.0));
  double with_mem = g.value(f.lm.loss(g, tokens, mem)).at(0);
  CHECK(plain != with_mem);
  CHECK(std::isfinite(with_mem));
}

TEST_CASE("with memory, gradients reach PSA and LM parameters; without, PSA stays zero") {
  Fixture f;
  PsaProjector psa(f.store, 8, 2, 16, f.rng);
  std::vector<int> tokens{1, 5, 7, 9};

  f.store.zero_grads();
  {
    Graph g(&f.store);
    g.backward(f.lm.loss(g, tokens, std::nullopt));
  }
  CHECK(f.store.grads_are_zero(ParamGroup::psa));
  CHECK(f.store.max_abs_grad(ParamGroup::lm) > 0.0);

  f.store.zero_grads();
  {
    Graph g(&f.store);
    Var e = g.constant(f.rng.gaussian_vector(8));
    Var mem = psa.project(g, e);
    g.backward(f.lm.loss(g, tokens, mem));
  }
  CHECK(f.store.max_abs_grad(ParamGroup::psa) > 0.0);
  CHECK(f.store.max_abs_grad(ParamGroup::lm) > 0.0);
}

TEST_CASE("causality: token edits never change earlier positions") {
  Fixture f;
  std::vector<int> a{1, 5, 7, 9, 11, 13};
  std::vector<int> b{1, 5, 7, 9, 12, 13};  // differs at position 4
  Graph ga(&f.store), gb(&f.store);
  Tensor la = ga.value(f.lm.logits(ga, a, std::nullopt));
  Tensor lb = gb.value(f.lm.logits(gb, b, std::nullopt));
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < la.cols(); ++c) CHECK(la.at(r, c) == lb.at(r, c));
  }
  bool differs = false;
  for (int c = 0; c < la.cols(); ++c) differs |= la.at(4, c) != lb.at(4, c);
  CHECK(differs);
}

TEST_CASE("incremental inference matches the graph forward pass") {
  Fixture f;
  std::vector<int> tokens{1, 5, 7, 9, 11};
  Graph g(&f.store);
  Tensor graph_logits = g.value(f.lm.logits(g, tokens, std::nullopt));

  TransformerLm::State st = f.lm.begin(nullptr);
  for (std::size_t j = 0; j < tokens.size(); ++j) {
    Tensor row = f.lm.step(st, tokens[j]);
    for (int c = 0; c < graph_logits.cols(); ++c) {
      CHECK(row.at(c) ==
            doctest::Approx(graph_logits.at(static_cast<int>(j), c)).epsilon(1e-10));
    }
  }

  // and with a memory prefix
  Tensor mem_rows = f.rng.gaussian_tensor({2, 16}, 1.0);
  Graph g2(&f.store);
  Tensor with_mem = g2.value(f.lm.logits(g2, tokens, g2.constant(mem_rows)));
  MemoryPrefix mp{mem_rows};
  TransformerLm::State st2 = f.lm.begin(&mp);
  for (std::size_t j = 0; j < tokens.size(); ++j) {
    Tensor row = f.lm.step(st2, tokens[j]);
    for (int c = 0; c < with_mem.cols(); ++c) {
      CHECK(row.at(c) == doctest::Approx(with_mem.at(static_cast<int>(j), c)).epsilon(1e-10));
    }
  }
}

TEST_CASE("sampling is deterministic given the noise stream") {
  Fixture f;
  std::vector<int> ctx{1, 5, 7};
  Rng n1(999), n2(999);
  auto s1 = f.lm.sample_sentence(ctx, nullptr, 0.925, 12, n1);
  auto s2 = f.lm.sample_sentence(ctx, nullptr, 0.925, 12, n2);
  CHECK(s1 == s2);
  Rng n3(1000);
  auto s3 = f.lm.sample_sentence(ctx, nullptr, 0.925, 12, n3);
  // a different stream is allowed to coincide, but over several draws it must not
  bool all_same = true;
  for (int k = 0; k < 5; ++k) {
    Rng na(2000 + k), nb(3000 + k);
    all_same &= f.lm.sample_sentence(ctx, nullptr, 0.925, 12, na) ==
                f.lm.sample_sentence(ctx, nullptr, 0.925, 12, nb);
  }
  CHECK(!all_same);
  (void)s3;
}

TEST_CASE("p -> 0 reduces to greedy argmax decoding") {
  Fixture f;
  std::vector<int> ctx{1, 5, 7};
  Rng noise(4);
  auto sampled = f.lm.sample_sentence(ctx, nullptr, 1e-12, 10, noise);

  // oracle: explicit argmax decoder over the incremental path
  std::vector<int> greedy;
  TransformerLm::State st = f.lm.begin(nullptr);
  Tensor logits;
  for (int t : ctx) logits = f.lm.step(st, t);
  for (int n = 0; n < 10; ++n) {
    int best = 0;
    for (int c = 1; c < logits.size(); ++c) {
      if (logits.at(c) > logits.at(best)) best = c;
    }
    if (best == Vocabulary::kSep || best == Vocabulary::kEos) break;
    greedy.push_back(best);
    if (n + 1 < 10) logits = f.lm.step(st, best);
  }
  CHECK(sampled == greedy);
}

TEST_CASE("max_len=1 emits at most one token and errors are rejected") {
  Fixture f;
  std::vector<int> ctx{1, 5};
  Rng noise(8);
  auto s = f.lm.sample_sentence(ctx, nullptr, 0.925, 1, noise);
  CHECK(s.size() <= 1);
  CHECK_THROWS(f.lm.sample_sentence(ctx, nullptr, 0.925, 0, noise));
}

TEST_CASE("long contexts are truncated from the left") {
  Fixture f;
  std::vector<int> ctx(100, 5);  // far beyond context=32
  Rng noise(9);
  auto s = f.lm.sample_sentence(ctx, nullptr, 0.925, 8, noise);
  CHECK(static_cast<int>(s.size()) <= 8);
}

TEST_CASE("perplexity_sliding shapes and uniform-model value") {
  Fixture f;
  Story story;
  story.id = "s";
  for (int i = 0; i < 5; ++i) story.sentences.push_back({5, 6, 7});
  auto scores = f.lm.perplexity_sliding(story, 2);
  CHECK(scores.size() == 5);

  f.store.entry("lm.head.w").value.fill(0.0);
  f.store.entry("lm.head.b").value.fill(0.0);
  scores = f.lm.perplexity_sliding(story, 2);
  for (double s : scores) CHECK(s == doctest::Approx(20.0).epsilon(1e-9));

  Story empty;
  CHECK_THROWS(f.lm.perplexity_sliding(empty, 2));
}

TEST_CASE("perplexity window locality: appending sentences keeps early scores") {
  Fixture f;
  Story story;
  story.id = "s";
  story.sentences = {{5, 6}, {7, 8}, {9, 10}, {11, 12}};
  auto base = f.lm.perplexity_sliding(story, 2);
  Story doubled = story;
  for (const auto& s : story.sentences) doubled.sentences.push_back(s);
  auto more = f.lm.perplexity_sliding(doubled, 2);
  for (std::size_t i = 0; i < base.size(); ++i) CHECK(base[i] == more[i]);
}

TEST_CASE("project_memory: zero matrix, linearity, hand-filled oracle") {
  ParameterStore store;
  Rng rng(12);
  PsaProjector psa(store, 4, 2, 3, rng);  // P=4, L=2, H=3

  store.entry("psa.w_m").value.fill(0.0);
  MemoryPrefix zero = psa.project_plain(Tensor::vector({1, 2, 3, 4}));
  for (double v : zero.rows.data) CHECK(v == 0.0);

  // hand-filled W_m: w[i][j] = i*6 + j, e = [1,0,2,0]
  Tensor& w = store.entry("psa.w_m").value;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 6; ++j) w.at(i, j) = i * 6 + j;
  }
  Tensor e = Tensor::vector({1, 0, 2, 0});
  MemoryPrefix mp = psa.project_plain(e);
  CHECK(mp.rows.rows() == 2);
  CHECK(mp.rows.cols() == 3);
  for (int j = 0; j < 6; ++j) {
    double expect = 1.0 * (0 * 6 + j) + 2.0 * (2 * 6 + j);
    CHECK(mp.rows.data[static_cast<std::size_t>(j)] == doctest::Approx(expect));
  }

  // linearity: project(2e) == 2 * project(e)
  MemoryPrefix mp2 = psa.project_plain(Tensor::vector({2, 0, 4, 0}));
  for (std::int64_t i = 0; i < mp.rows.size(); ++i) {
    CHECK(mp2.rows.data[i] == doctest::Approx(2.0 * mp.rows.data[i]).epsilon(1e-12));
  }

  // graph path agrees with the plain path
  Graph g(&store);
  const Tensor& gv = g.value(psa.project(g, g.constant(e)));
  for (std::int64_t i = 0; i < mp.rows.size(); ++i) {
    CHECK(gv.data[i] == doctest::Approx(mp.rows.data[i]).epsilon(1e-14));
  }

  CHECK_THROWS(psa.project_plain(Tensor::vector({1, 2, 3})));
}

TEST_CASE("lm loss passes finite-difference gradcheck, with and without memory") {
  ParameterStore store;
  Rng rng(77);
  LmConfig cfg = tiny_config(12);
  cfg.n_layers = 1;
  cfg.hidden = 8;
  TransformerLm lm(store, cfg, rng);
  PsaProjector psa(store, 6, 1, 8, rng);
  std::vector<int> tokens{1, 5, 7, 9};
  Tensor e = rng.gaussian_vector(6);

  auto build_plain = [&](Graph& g) { return lm.loss(g, tokens, std::nullopt); };
  auto r1 = finite_diff_gradcheck(build_plain, store, {1e-5, 4, 3});
  INFO(r1.summary());
  CHECK(r1.max_rel_err < 1e-4);

  auto build_mem = [&](Graph& g) {
    Var mem = psa.project(g, g.constant(e));
    return lm.loss(g, tokens, mem);
  };
  auto r2 = finite_diff_gradcheck(build_mem, store, {1e-5, 4, 3});
  INFO(r2.summary());
  CHECK(r2.max_rel_err < 1e-4);
}
