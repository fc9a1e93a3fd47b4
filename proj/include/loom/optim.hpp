// Copyright (c) 2026 the loom authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <set>
#include <vector>

#include "loom/params.hpp"

namespace loom {

// SGD with Nesterov momentum:
//   v <- m*v - lr*grad
//   theta <- theta + m*v - lr*grad
// Gradients of the stepped entries are zeroed afterwards.
struct OptimizerState {
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::vector<Tensor> velocity;  // parallel to store entries

  static OptimizerState create(const ParameterStore& store, double lr = 0.01, double m = 0.9);
};

// steps every parameter in the store
void sgd_nesterov_step(ParameterStore& params, OptimizerState& opt);

// steps only entries whose group is in `groups` (plus any explicitly listed
// entries); the training schedule uses this so that momentum never moves
// parameters outside the batch's groups
void sgd_nesterov_step(ParameterStore& params, OptimizerState& opt,
                       const std::set<ParamGroup>& groups,
                       const std::set<int>& extra_entries = {});

}  // namespace loom
