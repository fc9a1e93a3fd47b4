// Copyright (c) 2026 the loom authors.
// SPDX-License-Identifier: Apache-2.0

#include "loom/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace loom {

namespace {
std::int64_t shape_product(const std::vector<int>& shape) {
  std::int64_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor dimension must be positive");
    n *= d;
  }
  return n;
}
}  // namespace

Tensor::Tensor(std::vector<int> s, std::vector<double> d)
    : shape(std::move(s)), data(std::move(d)) {
  if (shape_product(shape) != size()) {
    throw std::invalid_argument("tensor shape/data mismatch: " + shape_str() + " vs " +
                                std::to_string(data.size()) + " values");
  }
}

Tensor Tensor::zeros(const std::vector<int>& shape) {
  return Tensor(shape, std::vector<double>(static_cast<std::size_t>(shape_product(shape)), 0.0));
}

Tensor Tensor::full(const std::vector<int>& shape, double v) {
  return Tensor(shape, std::vector<double>(static_cast<std::size_t>(shape_product(shape)), v));
}

Tensor Tensor::vector(std::vector<double> v) {
  int n = static_cast<int>(v.size());
  return Tensor({n}, std::move(v));
}

Tensor Tensor::matrix(int rows, int cols, std::vector<double> v) {
  return Tensor({rows, cols}, std::move(v));
}

int Tensor::rows() const {
  if (rank() != 2) throw std::invalid_argument("rows(): tensor is not rank-2: " + shape_str());
  return shape[0];
}

int Tensor::cols() const {
  if (rank() != 2) throw std::invalid_argument("cols(): tensor is not rank-2: " + shape_str());
  return shape[1];
}

double& Tensor::at(int r, int c) { return data[static_cast<std::size_t>(r) * shape[1] + c]; }
double Tensor::at(int r, int c) const { return data[static_cast<std::size_t>(r) * shape[1] + c]; }

double* Tensor::row_ptr(int r) { return data.data() + static_cast<std::size_t>(r) * shape[1]; }
const double* Tensor::row_ptr(int r) const {
  return data.data() + static_cast<std::size_t>(r) * shape[1];
}

bool Tensor::all_finite() const {
  for (double v : data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void Tensor::fill(double v) { std::fill(data.begin(), data.end(), v); }

std::string Tensor::shape_str() const {
  std::ostringstream out;
  out << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? "x" : "") << shape[i];
  out << "]";
  return out.str();
}

void axpy(double a, const Tensor& x, Tensor& y) {
  if (!x.same_shape(y)) throw std::invalid_argument("axpy shape mismatch");
  const double* xp = x.ptr();
  double* yp = y.ptr();
  std::int64_t n = x.size();
  for (std::int64_t i = 0; i < n; ++i) yp[i] += a * xp[i];
}

void matmul_acc(const double* a, const double* b, double* c, int n, int k, int m) {
  for (int i = 0; i < n; ++i) {
    const double* ai = a + static_cast<std::size_t>(i) * k;
    double* ci = c + static_cast<std::size_t>(i) * m;
    for (int p = 0; p < k; ++p) {
      const double av = ai[p];
      const double* bp = b + static_cast<std::size_t>(p) * m;
      for (int j = 0; j < m; ++j) ci[j] += av * bp[j];
    }
  }
}

void matmul_nt_acc(const double* a, const double* b, double* c, int n, int k, int m) {
  for (int i = 0; i < n; ++i) {
    const double* ai = a + static_cast<std::size_t>(i) * k;
    double* ci = c + static_cast<std::size_t>(i) * m;
    for (int j = 0; j < m; ++j) ci[j] += dot(ai, b + static_cast<std::size_t>(j) * k, k);
  }
}

void matmul_tn_acc(const double* a, const double* b, double* c, int n, int k, int m) {
  for (int i = 0; i < n; ++i) {
    const double* ai = a + static_cast<std::size_t>(i) * k;
    const double* bi = b + static_cast<std::size_t>(i) * m;
    for (int p = 0; p < k; ++p) {
      const double av = ai[p];
      double* cp = c + static_cast<std::size_t>(p) * m;
      for (int j = 0; j < m; ++j) cp[j] += av * bi[j];
    }
  }
}

void softmax_inplace(double* x, int n) {
  double mx = x[0];
  for (int i = 1; i < n; ++i) mx = std::max(mx, x[i]);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    x[i] = std::exp(x[i] - mx);
    sum += x[i];
  }
  for (int i = 0; i < n; ++i) x[i] /= sum;
}

double dot(const double* a, const double* b, int n) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

double cosine_distance(const Tensor& a, const Tensor& b) {
  if (a.size() != b.size()) throw std::invalid_argument("cosine_distance size mismatch");
  int n = static_cast<int>(a.size());
  double ab = dot(a.ptr(), b.ptr(), n);
  double aa = dot(a.ptr(), a.ptr(), n);
  double bb = dot(b.ptr(), b.ptr(), n);
  const double eps = 1e-12;
  return 1.0 - ab / (std::sqrt(aa * bb) + eps);
}

void require_finite(const Tensor& t, const std::string& what) {
  if (!t.all_finite()) throw std::invalid_argument(what + ": non-finite values");
}

}  // namespace loom
