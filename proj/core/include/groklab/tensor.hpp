// Copyright (c) 2026 the groklab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "groklab/error.hpp"

namespace groklab {

/// Dimension sizes, outermost first. Rank 1 to 3 only.
using Shape = std::vector<int>;

std::string shape_str(const Shape& shape);

/// Validates rank in [1,3] and positive dims; returns the element count.
std::int64_t shape_size(const Shape& shape);

/// Dense row-major tensor of 64-bit floats with an optional gradient buffer
/// of the same length. All math in the project runs in doubles; nothing
/// downcasts.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor full(Shape shape, double value);
  /// Rank-1 tensor of size 1; the scalar convention used for losses.
  static Tensor scalar(double value);
  static Tensor row(std::vector<double> values);
  static Tensor matrix(int rows, int cols, std::vector<double> values);

  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  std::int64_t size() const { return static_cast<std::int64_t>(values_.size()); }
  bool is_scalar() const { return values_.size() == 1; }

  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  double& at(int i) { return values_[static_cast<std::size_t>(i)]; }
  double at(int i) const { return values_[static_cast<std::size_t>(i)]; }
  double& at(int i, int j);
  double at(int i, int j) const;
  double& at(int i, int j, int k);
  double at(int i, int j, int k) const;

  bool has_grad() const { return !grad_.empty(); }
  /// Allocates a zeroed gradient buffer if absent.
  void ensure_grad();
  void clear_grad() { grad_.clear(); }
  std::vector<double>& grad();
  const std::vector<double>& grad() const;

 private:
  Shape shape_;
  std::vector<double> values_;
  std::vector<double> grad_;
};

}  // namespace groklab
