// Copyright (c) 2026 the loom authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <string>

#include "loom/bundle.hpp"
#include "loom/optim.hpp"

namespace loom {

// Versioned length-prefixed binary snapshot: config text, vocabulary, every
// parameter tensor, optimizer state, schedule counters. Round-trips are
// bit-exact; version or framing mismatches refuse to load.
struct Checkpoint {
  std::unique_ptr<ModelBundle> bundle;
  OptimizerState optimizer;
  int epoch = 0;
  double best_valid_loss = 0.0;
  std::int64_t global_step = 0;
  int non_improving_epochs = 0;
};

void save_checkpoint(const ModelBundle& bundle, const OptimizerState& optimizer, int epoch,
                     double best_valid_loss, std::int64_t global_step, int non_improving_epochs,
                     const std::string& path);

Checkpoint load_checkpoint(const std::string& path);

}  // namespace loom
