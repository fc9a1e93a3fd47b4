// Copyright (c) 2026 the loom authors.
// SPDX-License-Identifier: Apache-2.0

#include "loom/tdvae.hpp"

#include <cmath>
#include <stdexcept>

namespace loom {

void TdVaeConfig::validate() const {
  if (input_dim < 1) throw std::invalid_argument("tdvae: input_dim must be positive");
  if (belief_width < 1 || belief_layers < 1) throw std::invalid_argument("tdvae: belief sizes");
  if (n_layers < 1) throw std::invalid_argument("tdvae: need >= 1 hierarchy layer");
  if (latent_dim < 1) throw std::invalid_argument("tdvae: latent_dim must be positive");
  if (max_jump < 1) throw std::invalid_argument("tdvae: max_jump must be >= 1");
  if (samples_per_block < 1) throw std::invalid_argument("tdvae: samples_per_block must be >= 1");
}

TdVae::TdVae(ParameterStore& store, const TdVaeConfig& cfg, Rng& rng)
    : cfg_(cfg), store_(&store) {
  cfg.validate();
  belief_ = LstmStack::create(store, "tdvae.belief", ParamGroup::tdvae, cfg.input_dim,
                              cfg.belief_width, cfg.belief_layers, rng);
  int L = cfg.n_layers, d = cfg.latent_dim;
  for (int l = 0; l < L; ++l) {
    int above = (L - 1 - l) * d;
    std::string suffix = ".l" + std::to_string(l);
    belief_head_.push_back(GaussianHead::create(store, "tdvae.p_b" + suffix, ParamGroup::tdvae,
                                                cfg.belief_width + above, cfg.head_hidden, d,
                                                rng));
    smooth_head_.push_back(GaussianHead::create(store, "tdvae.q_s" + suffix, ParamGroup::tdvae,
                                                L * d + 2 * cfg.belief_width + above,
                                                cfg.head_hidden, d, rng));
    trans_head_.push_back(GaussianHead::create(store, "tdvae.p_t" + suffix, ParamGroup::tdvae,
                                               L * d + above, cfg.head_hidden, d, rng));
  }
  decoder_ = GaussianHead::create(store, "tdvae.p_d", ParamGroup::tdvae, L * d, cfg.head_hidden,
                                  cfg.input_dim, rng);
}

std::vector<Tensor> TdVae::compute_beliefs(std::span<const Tensor> embeddings) const {
  if (embeddings.empty()) throw std::invalid_argument("compute_beliefs: empty input");
  for (const Tensor& e : embeddings) {
    if (static_cast<int>(e.size()) != cfg_.input_dim) {
      throw std::invalid_argument("compute_beliefs: embedding dimension mismatch");
    }
  }
  return belief_.forward_plain(*store_, embeddings);
}

std::vector<TimePair> TdVae::sample_time_pairs(int T, int k, int n, Rng& rng) {
  if (T < 2) throw std::invalid_argument("sample_time_pairs: need >= 2 positions");
  if (k < 1 || n < 1) throw std::invalid_argument("sample_time_pairs: bad k or n");
  std::vector<TimePair> pairs;
  pairs.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    int t1 = rng.uniform_int(T - 1);
    int gmax = std::min(k, T - 1 - t1);
    // gap weights k, k-1, ..., down-weighting longer jumps linearly
    int total = 0;
    for (int gap = 1; gap <= gmax; ++gap) total += k - gap + 1;
    int r = rng.uniform_int(total);
    int gap = 1;
    for (; gap <= gmax; ++gap) {
      r -= k - gap + 1;
      if (r < 0) break;
    }
    pairs.push_back(TimePair{t1, t1 + gap});
  }
  return pairs;
}

Var TdVae::concat_above(const std::vector<Var>& z, int layer) const {
  std::vector<Var> parts;
  for (int l = layer + 1; l < cfg_.n_layers; ++l) parts.push_back(z[static_cast<std::size_t>(l)]);
  if (parts.empty()) return Var{};
  return concat_vecs(parts);
}

namespace {
Var concat_opt(std::initializer_list<Var> vars) {
  std::vector<Var> parts;
  for (const Var& v : vars) {
    if (v.valid()) parts.push_back(v);
  }
  return concat_vecs(parts);
}
}  // namespace

Var TdVae::loss(Graph& g, std::span<const Tensor> embeddings, std::span<const TimePair> pairs,
                Rng& noise, TdVaeLossBreakdown* breakdown) const {
  int T = static_cast<int>(embeddings.size());
  if (T < 2) throw std::invalid_argument("tdvae loss: block shorter than 2");
  if (pairs.empty()) throw std::invalid_argument("tdvae loss: no time pairs");
  for (const TimePair& p : pairs) {
    if (p.t1 < 0 || p.t2 <= p.t1 || p.t2 >= T) {
      throw std::invalid_argument("tdvae loss: invalid pair indices");
    }
  }

  // detached inputs: embeddings enter as constants
  std::vector<Var> inputs;
  inputs.reserve(embeddings.size());
  for (const Tensor& e : embeddings) inputs.push_back(g.constant(e));
  std::vector<Var> beliefs = belief_.forward(g, inputs);

  int L = cfg_.n_layers, d = cfg_.latent_dim;
  std::vector<Var> objectives;
  TdVaeLossBreakdown acc;
  for (const TimePair& pair : pairs) {
    Var b1 = beliefs[static_cast<std::size_t>(pair.t1)];
    Var b2 = beliefs[static_cast<std::size_t>(pair.t2)];

    // sample z_t2 ~ p_B(.|b_t2) top-down
    std::vector<Var> z2(static_cast<std::size_t>(L));
    std::vector<GaussianHead::Out> b2_dist(static_cast<std::size_t>(L));
    for (int l = L - 1; l >= 0; --l) {
      Var above = concat_above(z2, l);
      Var in = above.valid() ? concat_opt({b2, above}) : b2;
      b2_dist[static_cast<std::size_t>(l)] = belief_head_[static_cast<std::size_t>(l)].apply(g, in);
      z2[static_cast<std::size_t>(l)] =
          reparam_sample(b2_dist[static_cast<std::size_t>(l)].mean,
                         b2_dist[static_cast<std::size_t>(l)].log_var, noise.gaussian_vector(d));
    }
    Var z2_all = concat_vecs(z2);

    // sample z_t1 ~ q_S(.|z_t2, b_t1, b_t2) top-down
    std::vector<Var> z1(static_cast<std::size_t>(L));
    std::vector<GaussianHead::Out> smooth_dist(static_cast<std::size_t>(L));
    for (int l = L - 1; l >= 0; --l) {
      Var above = concat_above(z1, l);
      Var in = above.valid() ? concat_opt({z2_all, b1, b2, above})
                             : concat_opt({z2_all, b1, b2});
      smooth_dist[static_cast<std::size_t>(l)] =
          smooth_head_[static_cast<std::size_t>(l)].apply(g, in);
      z1[static_cast<std::size_t>(l)] =
          reparam_sample(smooth_dist[static_cast<std::size_t>(l)].mean,
                         smooth_dist[static_cast<std::size_t>(l)].log_var,
                         noise.gaussian_vector(d));
    }
    Var z1_all = concat_vecs(z1);

    // the five terms
    auto dec = decoder_.apply(g, z2_all);
    Var recon = gaussian_log_density(inputs[static_cast<std::size_t>(pair.t2)], dec.mean,
                                     dec.log_var);

    std::vector<Var> belief_t1_terms, trans_terms, belief_t2_terms, smooth_terms;
    for (int l = L - 1; l >= 0; --l) {
      Var above1 = concat_above(z1, l);
      Var in_b1 = above1.valid() ? concat_opt({b1, above1}) : b1;
      auto pb1 = belief_head_[static_cast<std::size_t>(l)].apply(g, in_b1);
      belief_t1_terms.push_back(
          gaussian_log_density(z1[static_cast<std::size_t>(l)], pb1.mean, pb1.log_var));

      Var above2 = concat_above(z2, l);
      Var in_t = above2.valid() ? concat_opt({z1_all, above2}) : z1_all;
      auto pt = trans_head_[static_cast<std::size_t>(l)].apply(g, in_t);
      trans_terms.push_back(
          gaussian_log_density(z2[static_cast<std::size_t>(l)], pt.mean, pt.log_var));

      belief_t2_terms.push_back(gaussian_log_density(
          z2[static_cast<std::size_t>(l)], b2_dist[static_cast<std::size_t>(l)].mean,
          b2_dist[static_cast<std::size_t>(l)].log_var));
      smooth_terms.push_back(gaussian_log_density(
          z1[static_cast<std::size_t>(l)], smooth_dist[static_cast<std::size_t>(l)].mean,
          smooth_dist[static_cast<std::size_t>(l)].log_var));
    }
    Var belief_t1 = add_n(belief_t1_terms);
    Var transition = add_n(trans_terms);
    Var belief_t2 = add_n(belief_t2_terms);
    Var smoothing = add_n(smooth_terms);

    Var objective =
        sub(add(recon, add(belief_t1, transition)), add(belief_t2, smoothing));
    objectives.push_back(objective);

    acc.reconstruction += g.value(recon).at(0);
    acc.belief_t1 += g.value(belief_t1).at(0);
    acc.transition += g.value(transition).at(0);
    acc.belief_t2 += g.value(belief_t2).at(0);
    acc.smoothing += g.value(smoothing).at(0);
  }
  double inv = 1.0 / static_cast<double>(pairs.size());
  if (breakdown) {
    acc.reconstruction *= inv;
    acc.belief_t1 *= inv;
    acc.transition *= inv;
    acc.belief_t2 *= inv;
    acc.smoothing *= inv;
    *breakdown = acc;
  }
  // maximize the expected objective: minimize its negation
  return scale(add_n(objectives), -inv);
}

std::vector<Tensor> TdVae::jumpy_rollout(std::span<const Tensor> beliefs, int steps, int samples,
                                         Rng* noise) const {
  if (beliefs.empty()) throw std::invalid_argument("jumpy_rollout: no beliefs");
  if (steps < 1) throw std::invalid_argument("jumpy_rollout: steps must be >= 1");
  if (samples < 1) throw std::invalid_argument("jumpy_rollout: samples must be >= 1");
  if (!noise) samples = 1;  // the mean path is deterministic

  int L = cfg_.n_layers, d = cfg_.latent_dim;
  const Tensor& b = beliefs.back();
  std::vector<Tensor> accum(static_cast<std::size_t>(steps),
                            Tensor::zeros({cfg_.input_dim}));
  Tensor zero_noise = Tensor::zeros({d});
  for (int s = 0; s < samples; ++s) {
    // z ~ p_B(.|b) top-down
    std::vector<Tensor> z(static_cast<std::size_t>(L));
    for (int l = L - 1; l >= 0; --l) {
      Tensor in = b;
      for (int a = l + 1; a < L; ++a) {
        in.data.insert(in.data.end(), z[static_cast<std::size_t>(a)].data.begin(),
                       z[static_cast<std::size_t>(a)].data.end());
      }
      in.shape = {static_cast<int>(in.data.size())};
      DiagonalGaussian dist = belief_head_[static_cast<std::size_t>(l)].apply_plain(*store_, in);
      z[static_cast<std::size_t>(l)] =
          reparameterized_sample(dist, noise ? noise->gaussian_vector(d) : zero_noise);
    }
    for (int step = 0; step < steps; ++step) {
      // z_next ~ p_T(.|z) top-down
      Tensor z_all = Tensor::zeros({L * d});
      for (int l = 0; l < L; ++l) {
        std::copy(z[static_cast<std::size_t>(l)].data.begin(),
                  z[static_cast<std::size_t>(l)].data.end(), z_all.data.begin() + l * d);
      }
      std::vector<Tensor> z_next(static_cast<std::size_t>(L));
      for (int l = L - 1; l >= 0; --l) {
        Tensor in = z_all;
        for (int a = l + 1; a < L; ++a) {
          in.data.insert(in.data.end(), z_next[static_cast<std::size_t>(a)].data.begin(),
                         z_next[static_cast<std::size_t>(a)].data.end());
        }
        in.shape = {static_cast<int>(in.data.size())};
        DiagonalGaussian dist = trans_head_[static_cast<std::size_t>(l)].apply_plain(*store_, in);
        z_next[static_cast<std::size_t>(l)] =
            reparameterized_sample(dist, noise ? noise->gaussian_vector(d) : zero_noise);
      }
      z = std::move(z_next);
      Tensor z_cat = Tensor::zeros({L * d});
      for (int l = 0; l < L; ++l) {
        std::copy(z[static_cast<std::size_t>(l)].data.begin(),
                  z[static_cast<std::size_t>(l)].data.end(), z_cat.data.begin() + l * d);
      }
      DiagonalGaussian dist = decoder_.apply_plain(*store_, z_cat);
      axpy(1.0, dist.mean, accum[static_cast<std::size_t>(step)]);
    }
  }
  for (auto& t : accum) {
    for (auto& v : t.data) v /= samples;
  }
  return accum;
}

TdVae::Surprise TdVae::position_surprise(std::span<const Tensor> embeddings) const {
  int T = static_cast<int>(embeddings.size());
  if (T < 2) throw std::invalid_argument("position_surprise: story shorter than 2 sentences");
  std::vector<Tensor> beliefs = compute_beliefs(embeddings);
  Surprise out;
  out.distances.assign(static_cast<std::size_t>(T), 0.0);
  double sum = 0.0;
  for (int t = 1; t < T; ++t) {
    std::span<const Tensor> prefix(beliefs.data(), static_cast<std::size_t>(t));
    Tensor pred = jumpy_rollout(prefix, 1, 1, nullptr)[0];
    double dist = cosine_distance(pred, embeddings[static_cast<std::size_t>(t)]);
    out.distances[static_cast<std::size_t>(t)] = dist;
    sum += dist;
  }
  out.distances[0] = sum / (T - 1);  // no prediction exists for the first position
  out.probabilities = out.distances;
  softmax_inplace(out.probabilities.data(), T);
  return out;
}

}  // namespace loom
