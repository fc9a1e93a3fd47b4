// Copyright (c) 2026 the loom authors.
// SPDX-License-Identifier: Apache-2.0

#include "loom/optim.hpp"

#include <stdexcept>

namespace loom {

OptimizerState OptimizerState::create(const ParameterStore& store, double lr, double m) {
  if (lr <= 0.0) throw std::invalid_argument("learning rate must be positive");
  if (m < 0.0 || m >= 1.0) throw std::invalid_argument("momentum must be in [0,1)");
  OptimizerState opt;
  opt.learning_rate = lr;
  opt.momentum = m;
  opt.velocity.reserve(static_cast<std::size_t>(store.count()));
  for (int i = 0; i < store.count(); ++i) {
    opt.velocity.push_back(Tensor::zeros(store.entry(i).value.shape));
  }
  return opt;
}

namespace {
void step_entry(ParameterStore::Entry& e, Tensor& v, double lr, double m) {
  if (!v.same_shape(e.grad)) throw std::invalid_argument("optimizer velocity shape mismatch");
  for (std::int64_t i = 0; i < v.size(); ++i) {
    double g = e.grad.data[i];
    double nv = m * v.data[i] - lr * g;
    v.data[i] = nv;
    e.value.data[i] += m * nv - lr * g;
  }
  e.grad.fill(0.0);
}
}  // namespace

void sgd_nesterov_step(ParameterStore& params, OptimizerState& opt) {
  if (static_cast<int>(opt.velocity.size()) != params.count()) {
    throw std::invalid_argument("optimizer state does not match parameter store");
  }
  for (int i = 0; i < params.count(); ++i) {
    step_entry(params.entry(i), opt.velocity[static_cast<std::size_t>(i)], opt.learning_rate,
               opt.momentum);
  }
}

void sgd_nesterov_step(ParameterStore& params, OptimizerState& opt,
                       const std::set<ParamGroup>& groups, const std::set<int>& extra_entries) {
  if (static_cast<int>(opt.velocity.size()) != params.count()) {
    throw std::invalid_argument("optimizer state does not match parameter store");
  }
  for (int i = 0; i < params.count(); ++i) {
    auto& e = params.entry(i);
    if (!groups.count(e.group) && !extra_entries.count(i)) continue;
    step_entry(e, opt.velocity[static_cast<std::size_t>(i)], opt.learning_rate, opt.momentum);
  }
}

}  // namespace loom
