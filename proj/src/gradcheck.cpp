// Copyright (c) 2026 the loom authors.
// SPDX-License-Identifier: Apache-2.0

#include "loom/gradcheck.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "loom/rng.hpp"

namespace loom {

namespace {
double eval_loss(const std::function<Var(Graph&)>& build_loss, ParameterStore& params) {
  Graph g(&params);
  Var loss = build_loss(g);
  double v = g.value(loss).at(0);
  if (!std::isfinite(v)) throw std::runtime_error("gradcheck: non-finite loss");
  return v;
}
}  // namespace

std::string GradcheckReport::summary() const {
  std::ostringstream out;
  out << "gradcheck: " << coords_checked << " coords, max rel err " << max_rel_err;
  if (!worst.param.empty()) {
    out << " (" << worst.param << "[" << worst.index << "] analytic " << worst.analytic
        << " numeric " << worst.numeric << ")";
  }
  for (const auto& [g, e] : group_max_rel_err) out << "; " << to_string(g) << "=" << e;
  return out.str();
}

GradcheckReport finite_diff_gradcheck(const std::function<Var(Graph&)>& build_loss,
                                      ParameterStore& params, const GradcheckOptions& opts) {
  params.zero_grads();
  {
    Graph g(&params);
    Var loss = build_loss(g);
    g.backward(loss);
  }
  // snapshot the analytic gradients before perturbing
  std::vector<Tensor> analytic;
  analytic.reserve(static_cast<std::size_t>(params.count()));
  for (int i = 0; i < params.count(); ++i) analytic.push_back(params.entry(i).grad);
  params.zero_grads();

  GradcheckReport report;
  Rng coord_rng(opts.coord_seed);
  for (int pi = 0; pi < params.count(); ++pi) {
    auto& entry = params.entry(pi);
    std::int64_t n = entry.value.size();
    int n_coords = static_cast<int>(std::min<std::int64_t>(n, opts.coords_per_param));
    for (int c = 0; c < n_coords; ++c) {
      std::int64_t idx =
          (n <= opts.coords_per_param) ? c : static_cast<std::int64_t>(coord_rng.next_u64() % n);
      double theta = entry.value.data[idx];
      double eps = opts.epsilon * std::max(1.0, std::fabs(theta));

      entry.value.data[idx] = theta + eps;
      double f_plus = eval_loss(build_loss, params);
      entry.value.data[idx] = theta - eps;
      double f_minus = eval_loss(build_loss, params);
      entry.value.data[idx] = theta;

      double numeric = (f_plus - f_minus) / (2.0 * eps);
      double an = analytic[static_cast<std::size_t>(pi)].data[idx];
      double denom = std::max({1.0, std::fabs(numeric), std::fabs(an)});
      double rel = std::fabs(numeric - an) / denom;

      auto [it, inserted] = report.group_max_rel_err.try_emplace(entry.group, rel);
      if (!inserted) it->second = std::max(it->second, rel);
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst = {entry.name, static_cast<int>(idx), an, numeric, rel};
      }
      ++report.coords_checked;
    }
  }
  return report;
}

}  // namespace loom
