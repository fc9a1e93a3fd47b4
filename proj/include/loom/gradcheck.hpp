// Copyright (c) 2026 the loom authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <map>
#include <string>

#include "loom/graph.hpp"
#include "loom/params.hpp"

namespace loom {

struct GradcheckOptions {
  double epsilon = 1e-5;       // relative step: eps * max(1, |theta|)
  int coords_per_param = 6;    // deterministic subsample per parameter tensor
  std::uint64_t coord_seed = 17;
};

struct GradcheckReport {
  struct Coord {
    std::string param;
    int index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    double rel_err = 0.0;
  };
  std::map<ParamGroup, double> group_max_rel_err;
  Coord worst;
  double max_rel_err = 0.0;
  int coords_checked = 0;

  bool pass(double tol) const { return max_rel_err < tol; }
  std::string summary() const;
};

// Central differences (f(t+e)-f(t-e))/2e against the analytic gradient from a
// backward pass. `build_loss` must rebuild the exact same loss every call
// (same inputs, same injected noise); it is invoked once per perturbed
// coordinate plus once for the analytic pass.
GradcheckReport finite_diff_gradcheck(const std::function<Var(Graph&)>& build_loss,
                                      ParameterStore& params,
                                      const GradcheckOptions& opts = {});

}  // namespace loom
