// Copyright (c) 2026 the loom authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "loom/tensor.hpp"

namespace loom {

// Parameter group tags. Groups partition the store; the training schedule and
// the per-step audit are expressed in terms of them.
enum class ParamGroup : std::uint8_t { lm, encoder, tdvae, discriminator, psa };

const char* to_string(ParamGroup g);
ParamGroup param_group_from_string(const std::string& s);

// Named parameter tensors with same-shape gradient slots. Entry order is the
// registration order and is stable, which keeps optimizer sweeps and
// checkpoint layout deterministic.
class ParameterStore {
 public:
  struct Entry {
    std::string name;
    ParamGroup group;
    Tensor value;
    Tensor grad;
  };

  int add(const std::string& name, ParamGroup group, Tensor init);

  int index_of(const std::string& name) const;  // -1 when absent
  int count() const { return static_cast<int>(entries_.size()); }

  Entry& entry(int i) { return entries_[static_cast<std::size_t>(i)]; }
  const Entry& entry(int i) const { return entries_[static_cast<std::size_t>(i)]; }
  Entry& entry(const std::string& name);

  Tensor& value(int i) { return entries_[static_cast<std::size_t>(i)].value; }
  Tensor& grad(int i) { return entries_[static_cast<std::size_t>(i)].grad; }

  void zero_grads();
  void zero_grads(ParamGroup group);

  // max |grad| over a group; the audit uses exact-zero checks
  double max_abs_grad(ParamGroup group) const;
  bool grads_are_zero(ParamGroup group) const;

  std::int64_t total_size() const;

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace loom
