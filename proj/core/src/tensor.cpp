// Copyright (c) 2026 the groklab authors
// SPDX-License-Identifier: Apache-2.0
#include "groklab/tensor.hpp"

#include <numeric>
#include <sstream>

namespace groklab {

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

std::int64_t shape_size(const Shape& shape) {
  if (shape.empty() || shape.size() > 3) {
    throw DimensionError("tensor rank must be 1, 2, or 3, got " +
                         std::to_string(shape.size()));
  }
  std::int64_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw DimensionError("non-positive dimension in " + shape_str(shape));
    n *= d;
  }
  return n;
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
  values_.assign(static_cast<std::size_t>(shape_size(shape_)), 0.0);
}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)) {
  const std::int64_t n = shape_size(shape_);
  if (n != static_cast<std::int64_t>(values.size())) {
    throw DimensionError("value count " + std::to_string(values.size()) +
                         " does not fill shape " + shape_str(shape_));
  }
  values_ = std::move(values);
}

Tensor Tensor::full(Shape shape, double value) {
  Tensor t(std::move(shape));
  for (auto& v : t.values_) v = value;
  return t;
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

Tensor Tensor::row(std::vector<double> values) {
  const int n = static_cast<int>(values.size());
  return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(int rows, int cols, std::vector<double> values) {
  return Tensor({rows, cols}, std::move(values));
}

double& Tensor::at(int i, int j) {
  return values_[static_cast<std::size_t>(i) * shape_[1] + j];
}
double Tensor::at(int i, int j) const {
  return values_[static_cast<std::size_t>(i) * shape_[1] + j];
}
double& Tensor::at(int i, int j, int k) {
  return values_[(static_cast<std::size_t>(i) * shape_[1] + j) * shape_[2] + k];
}
double Tensor::at(int i, int j, int k) const {
  return values_[(static_cast<std::size_t>(i) * shape_[1] + j) * shape_[2] + k];
}

void Tensor::ensure_grad() {
  if (grad_.empty()) grad_.assign(values_.size(), 0.0);
}

std::vector<double>& Tensor::grad() {
  if (grad_.empty()) throw ContractError("gradient buffer not populated");
  return grad_;
}

const std::vector<double>& Tensor::grad() const {
  if (grad_.empty()) throw ContractError("gradient buffer not populated");
  return grad_;
}

}  // namespace groklab
