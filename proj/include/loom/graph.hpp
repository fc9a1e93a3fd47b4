// Copyright (c) 2026 the loom authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <optional>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "loom/params.hpp"
#include "loom/tensor.hpp"

namespace loom {

class Graph;

// Handle to a node in a Graph tape. Cheap to copy; valid for the graph's
// lifetime.
struct Var {
  Graph* g = nullptr;
  int i = -1;
  bool valid() const { return g != nullptr && i >= 0; }
};

// Reverse-mode tape. One Graph per forward/backward pass; node order is
// creation order, so the backward sweep is a single reverse iteration.
// Parameters enter as leaves bound to a ParameterStore; backward() folds
// their gradients back into the store.
class Graph {
 public:
  explicit Graph(ParameterStore* store = nullptr) : store_(store) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor t);
  Var param(int index);
  Var param(const std::string& name);

  const Tensor& value(Var v) const { return nodes_[static_cast<std::size_t>(v.i)].value; }
  const Tensor& grad(Var v) const;

  // loss must be a scalar node; accumulates parameter gradients into the store
  void backward(Var loss);

  int node_count() const { return static_cast<int>(nodes_.size()); }
  ParameterStore* store() { return store_; }

 private:
  friend Var make_node(Graph& g, Tensor value, std::function<void(Graph&, int)> back);
  friend Tensor& node_grad(Graph& g, int i);
  friend const Tensor& node_value(const Graph& g, int i);

  struct Node {
    Tensor value;
    Tensor grad;  // allocated during backward()
    std::function<void(Graph&, int)> back;
    int param_index = -1;
  };

  std::vector<Node> nodes_;
  std::unordered_map<int, int> param_nodes_;  // store index -> node, one leaf per parameter
  ParameterStore* store_;
  bool ran_backward_ = false;
};

// --- elementwise ---
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double c);
Var add_n(std::span<const Var> xs);
Var tanh(Var a);
Var sigmoid(Var a);
Var exp_elem(Var a);
Var abs_elem(Var a);
Var gelu(Var a);
Var detach(Var a);

// --- shape / linear algebra ---
Var matmul(Var a, Var b);     // [n,k]x[k,m]
Var matmul_nt(Var a, Var b);  // [n,k]x[m,k]^T -> [n,m]
Var add_bias(Var m, Var bias);
Var gather_rows(Var table, std::span<const int> ids);
Var concat_rows(Var a, Var b);
Var concat_cols(Var a, Var b);
Var slice_rows(Var a, int r0, int r1);
Var slice_cols(Var a, int c0, int c1);
Var reshape(Var a, std::vector<int> shape);
Var concat_vecs(std::span<const Var> xs);  // 1-D concatenation

// --- rows ---
Var softmax_rows(Var a);
Var layer_norm_rows(Var a, Var gain, Var bias);  // eps 1e-5

// --- reductions / losses ---
Var sum_all(Var a);
Var mean_all(Var a);
// mean over pairs of -log softmax(logits[row])[target]
Var softmax_xent(Var logits, std::span<const std::pair<int, int>> pairs);

// --- distribution math (diagonal Gaussians, elementwise over any shape) ---
Var gaussian_log_density(Var x, Var mean, Var log_var);
Var gaussian_kl(Var mean_q, Var log_var_q, Var mean_p, Var log_var_p);
Var reparam_sample(Var mean, Var log_var, const Tensor& noise);

}  // namespace loom
