// Copyright (c) 2026 the loom authors.
// SPDX-License-Identifier: Apache-2.0

#include "loom/discriminator.hpp"

#include <stdexcept>

namespace loom {

void DiscriminatorConfig::validate() const {
  if (input_dim < 1) throw std::invalid_argument("discriminator: input_dim must be positive");
  if (width < 1) throw std::invalid_argument("discriminator: width must be positive");
  if (depth < 1) throw std::invalid_argument("discriminator: depth must be >= 1");
  if (kind == Kind::transformer && width % n_heads != 0) {
    throw std::invalid_argument("discriminator: width not divisible by heads");
  }
}

DiscriminatorConfig::Kind discriminator_kind_from_string(const std::string& s) {
  if (s == "lstm") return DiscriminatorConfig::Kind::lstm;
  if (s == "transformer") return DiscriminatorConfig::Kind::transformer;
  throw std::invalid_argument("unknown discriminator kind: " + s);
}

const char* to_string(DiscriminatorConfig::Kind k) {
  return k == DiscriminatorConfig::Kind::lstm ? "lstm" : "transformer";
}

Discriminator::Discriminator(ParameterStore& store, const DiscriminatorConfig& cfg, Rng& rng)
    : cfg_(cfg), store_(&store) {
  cfg.validate();
  if (cfg.kind == DiscriminatorConfig::Kind::lstm) {
    lstm_ = LstmStack::create(store, "disc.lstm", ParamGroup::discriminator, cfg.input_dim,
                              cfg.width, cfg.depth, rng);
  } else {
    input_ = Linear::create(store, "disc.input", ParamGroup::discriminator, cfg.input_dim,
                            cfg.width, rng);
    wpe_ = store.add("disc.wpe", ParamGroup::discriminator,
                     rng.gaussian_tensor({cfg.max_positions, cfg.width}, 0.05));
    for (int l = 0; l < cfg.depth; ++l) {
      blocks_.push_back(TransformerBlock::create(store, "disc.block" + std::to_string(l),
                                                 ParamGroup::discriminator, cfg.width,
                                                 cfg.n_heads, rng));
    }
  }
  out_ = Linear::create(store, "disc.out", ParamGroup::discriminator, cfg.width, cfg.input_dim,
                        rng);
}

std::vector<Tensor> Discriminator::context_vectors(std::span<const Tensor> embeddings) const {
  if (embeddings.empty()) throw std::invalid_argument("discriminator: empty block");
  std::vector<Tensor> states;
  if (cfg_.kind == DiscriminatorConfig::Kind::lstm) {
    states = lstm_.forward_plain(*store_, embeddings);
  } else {
    int t = static_cast<int>(embeddings.size());
    if (t > cfg_.max_positions) throw std::invalid_argument("discriminator: block too long");
    Tensor x = Tensor::zeros({t, cfg_.input_dim});
    for (int i = 0; i < t; ++i) {
      std::copy(embeddings[static_cast<std::size_t>(i)].data.begin(),
                embeddings[static_cast<std::size_t>(i)].data.end(), x.row_ptr(i));
    }
    x = input_.apply_plain(*store_, x);
    const Tensor& wpe = store_->entry(wpe_).value;
    for (int i = 0; i < t; ++i) {
      double* row = x.row_ptr(i);
      for (int c = 0; c < cfg_.width; ++c) row[c] += wpe.at(i, c);
    }
    for (const auto& block : blocks_) x = block.apply_plain(*store_, x, nullptr);
    for (int i = 0; i < t; ++i) {
      states.push_back(Tensor({cfg_.width}, std::vector<double>(
                                                x.row_ptr(i), x.row_ptr(i) + cfg_.width)));
    }
  }
  std::vector<Tensor> out;
  out.reserve(states.size());
  for (const Tensor& s : states) out.push_back(out_.apply_vec_plain(*store_, s));
  return out;
}

std::vector<Var> Discriminator::contexts_graph(Graph& g, std::span<const Var> inputs) const {
  std::vector<Var> states;
  if (cfg_.kind == DiscriminatorConfig::Kind::lstm) {
    states = lstm_.forward(g, inputs);
  } else {
    int t = static_cast<int>(inputs.size());
    if (t > cfg_.max_positions) throw std::invalid_argument("discriminator: block too long");
    Var x{};
    for (int i = 0; i < t; ++i) {
      Var row = reshape(inputs[static_cast<std::size_t>(i)], {1, cfg_.input_dim});
      x = (i == 0) ? row : concat_rows(x, row);
    }
    std::vector<int> positions(static_cast<std::size_t>(t));
    for (int i = 0; i < t; ++i) positions[static_cast<std::size_t>(i)] = i;
    x = add(input_.apply(g, x), gather_rows(g.param(wpe_), positions));
    for (const auto& block : blocks_) x = block.apply(g, x, std::nullopt);
    for (int i = 0; i < t; ++i) {
      states.push_back(reshape(slice_rows(x, i, i + 1), {cfg_.width}));
    }
  }
  std::vector<Var> out;
  out.reserve(states.size());
  for (const Var& s : states) out.push_back(out_.apply_vec(g, s));
  return out;
}

Var Discriminator::loss(Graph& g, std::span<const Tensor> embeddings) const {
  int t = static_cast<int>(embeddings.size());
  if (t < 3) throw std::invalid_argument("discriminator loss: block shorter than 3");
  std::vector<Var> inputs;
  inputs.reserve(embeddings.size());
  for (const Tensor& e : embeddings) {
    if (static_cast<int>(e.size()) != cfg_.input_dim) {
      throw std::invalid_argument("discriminator: embedding dimension mismatch");
    }
    inputs.push_back(g.constant(e));  // detached
  }
  std::vector<Var> contexts = contexts_graph(g, inputs);

  Var cmat{}, emat{};
  for (int i = 0; i < t - 1; ++i) {
    Var row = reshape(contexts[static_cast<std::size_t>(i)], {1, cfg_.input_dim});
    cmat = (i == 0) ? row : concat_rows(cmat, row);
  }
  for (int i = 0; i < t; ++i) {
    Var row = reshape(inputs[static_cast<std::size_t>(i)], {1, cfg_.input_dim});
    emat = (i == 0) ? row : concat_rows(emat, row);
  }
  Var logits = matmul_nt(cmat, emat);  // [t-1, t]
  Tensor self_mask = Tensor::zeros({t - 1, t});
  for (int i = 0; i < t - 1; ++i) self_mask.at(i, i) = -1e30;  // self-candidate excluded
  logits = add(logits, g.constant(self_mask));
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < t - 1; ++i) pairs.emplace_back(i, i + 1);
  return softmax_xent(logits, pairs);
}

Tensor Discriminator::rank(std::span<const Tensor> context_embeddings,
                           std::span<const Tensor> candidates) const {
  if (candidates.empty()) throw std::invalid_argument("discriminator rank: no candidates");
  std::vector<Tensor> contexts = context_vectors(context_embeddings);
  const Tensor& c = contexts.back();
  Tensor scores = Tensor::zeros({static_cast<int>(candidates.size())});
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i].size() != c.size()) {
      throw std::invalid_argument("discriminator rank: candidate dimension mismatch");
    }
    scores.at(static_cast<int>(i)) =
        dot(c.ptr(), candidates[i].ptr(), static_cast<int>(c.size()));
  }
  softmax_inplace(scores.ptr(), static_cast<int>(candidates.size()));
  return scores;
}

}  // namespace loom
