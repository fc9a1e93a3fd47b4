// Copyright (c) 2026 the loom authors.
// SPDX-License-Identifier: Apache-2.0

#include "loom/params.hpp"

#include <cmath>
#include <stdexcept>

namespace loom {

const char* to_string(ParamGroup g) {
  switch (g) {
    case ParamGroup::lm: return "lm";
    case ParamGroup::encoder: return "encoder";
    case ParamGroup::tdvae: return "tdvae";
    case ParamGroup::discriminator: return "discriminator";
    case ParamGroup::psa: return "psa";
  }
  return "?";
}

ParamGroup param_group_from_string(const std::string& s) {
  if (s == "lm") return ParamGroup::lm;
  if (s == "encoder") return ParamGroup::encoder;
  if (s == "tdvae") return ParamGroup::tdvae;
  if (s == "discriminator") return ParamGroup::discriminator;
  if (s == "psa") return ParamGroup::psa;
  throw std::invalid_argument("unknown parameter group: " + s);
}

int ParameterStore::add(const std::string& name, ParamGroup group, Tensor init) {
  if (index_.count(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  require_finite(init, "parameter init " + name);
  Entry e;
  e.name = name;
  e.group = group;
  e.grad = Tensor::zeros(init.shape);
  e.value = std::move(init);
  entries_.push_back(std::move(e));
  int idx = static_cast<int>(entries_.size()) - 1;
  index_[name] = idx;
  return idx;
}

int ParameterStore::index_of(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? -1 : it->second;
}

ParameterStore::Entry& ParameterStore::entry(const std::string& name) {
  int i = index_of(name);
  if (i < 0) throw std::invalid_argument("unknown parameter: " + name);
  return entries_[static_cast<std::size_t>(i)];
}

void ParameterStore::zero_grads() {
  for (auto& e : entries_) e.grad.fill(0.0);
}

void ParameterStore::zero_grads(ParamGroup group) {
  for (auto& e : entries_) {
    if (e.group == group) e.grad.fill(0.0);
  }
}

double ParameterStore::max_abs_grad(ParamGroup group) const {
  double mx = 0.0;
  for (const auto& e : entries_) {
    if (e.group != group) continue;
    for (double v : e.grad.data) mx = std::max(mx, std::fabs(v));
  }
  return mx;
}

bool ParameterStore::grads_are_zero(ParamGroup group) const {
  for (const auto& e : entries_) {
    if (e.group != group) continue;
    for (double v : e.grad.data) {
      if (v != 0.0) return false;
    }
  }
  return true;
}

std::int64_t ParameterStore::total_size() const {
  std::int64_t n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

}  // namespace loom
