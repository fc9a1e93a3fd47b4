// Copyright (c) 2026 the loom authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

namespace loom {

// Dense row-major tensor of doubles. Everything in this codebase is rank-1
// or rank-2; shapes are validated at op boundaries, not per element.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::vector<int> s, std::vector<double> d);

  static Tensor zeros(const std::vector<int>& shape);
  static Tensor full(const std::vector<int>& shape, double v);
  static Tensor vector(std::vector<double> v);
  static Tensor matrix(int rows, int cols, std::vector<double> v);

  std::int64_t size() const { return static_cast<std::int64_t>(data.size()); }
  int rank() const { return static_cast<int>(shape.size()); }
  int rows() const;
  int cols() const;

  double& at(int i) { return data[static_cast<std::size_t>(i)]; }
  double at(int i) const { return data[static_cast<std::size_t>(i)]; }
  double& at(int r, int c);
  double at(int r, int c) const;

  double* ptr() { return data.data(); }
  const double* ptr() const { return data.data(); }
  double* row_ptr(int r);
  const double* row_ptr(int r) const;

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  bool all_finite() const;
  void fill(double v);

  std::string shape_str() const;
};

// in-place elementwise helpers
void axpy(double a, const Tensor& x, Tensor& y);  // y += a*x

// c(n,m) += a(n,k) * b(k,m)
void matmul_acc(const double* a, const double* b, double* c, int n, int k, int m);
// c(n,m) += a(n,k) * b(m,k)^T
void matmul_nt_acc(const double* a, const double* b, double* c, int n, int k, int m);
// c(k,m) += a(n,k)^T * b(n,m)
void matmul_tn_acc(const double* a, const double* b, double* c, int n, int k, int m);

// numerically stable in-place softmax over n entries
void softmax_inplace(double* x, int n);

double dot(const double* a, const double* b, int n);
double cosine_distance(const Tensor& a, const Tensor& b);

// throws std::invalid_argument when t contains NaN/Inf
void require_finite(const Tensor& t, const std::string& what);

}  // namespace loom
