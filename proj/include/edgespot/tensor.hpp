/* Copyright 2026 The EdgeSpot Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#ifndef EDGESPOT_TENSOR_HPP_
#define EDGESPOT_TENSOR_HPP_

#include <Eigen/Dense>

#include <algorithm>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "edgespot/error.hpp"

namespace edgespot {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

inline Index shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), Index{1},
                         std::multiplies<>());
}

// Formats a shape as "16x20x101".
inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  return os.str();
}

// Dense row-major tensor. 3-D activations are laid out (channel, frequency,
// time); 2-D attention inputs are (time, feature). The last axis is
// contiguous.
template <typename Scalar>
class Tensor {
 public:
  using MatrixMap =
      Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic,
                               Eigen::RowMajor>>;
  using ConstMatrixMap =
      Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic,
                                     Eigen::RowMajor>>;
  using VectorMap = Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>;
  using ConstVectorMap =
      Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>;

  Tensor() = default;

  explicit Tensor(Shape shape, Scalar fill = Scalar(0))
      : shape_(std::move(shape)) {
    check_extents();
    data_.assign(static_cast<std::size_t>(shape_size(shape_)), fill);
  }

  Tensor(Shape shape, std::vector<Scalar> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    check_extents();
    if (static_cast<Index>(data_.size()) != shape_size(shape_)) {
      throw DimensionError("tensor: data length " +
                           std::to_string(data_.size()) +
                           " does not match shape " + shape_string(shape_));
    }
  }

  Tensor(std::initializer_list<Index> shape, std::vector<Scalar> data)
      : Tensor(Shape(shape), std::move(data)) {}

  const Shape& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index extent(Index axis) const { return shape_.at(axis); }
  Index size() const { return static_cast<Index>(data_.size()); }
  bool empty() const { return data_.empty(); }

  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }
  std::span<Scalar> values() { return data_; }
  std::span<const Scalar> values() const { return data_; }

  Scalar& operator[](Index i) { return data_[static_cast<std::size_t>(i)]; }
  Scalar operator[](Index i) const {
    return data_[static_cast<std::size_t>(i)];
  }

  Scalar& operator()(Index i, Index j) { return data_[offset(i, j)]; }
  Scalar operator()(Index i, Index j) const { return data_[offset(i, j)]; }
  Scalar& operator()(Index i, Index j, Index k) {
    return data_[offset(i, j, k)];
  }
  Scalar operator()(Index i, Index j, Index k) const {
    return data_[offset(i, j, k)];
  }
  Scalar& operator()(Index i, Index j, Index k, Index l) {
    return data_[offset(i, j, k, l)];
  }
  Scalar operator()(Index i, Index j, Index k, Index l) const {
    return data_[offset(i, j, k, l)];
  }

  // Row-major matrix view with `rows` rows; columns are inferred.
  MatrixMap matrix(Index rows) {
    return MatrixMap(data(), rows, rows ? size() / rows : 0);
  }
  ConstMatrixMap matrix(Index rows) const {
    return ConstMatrixMap(data(), rows, rows ? size() / rows : 0);
  }
  // 2-D tensors view as their own shape.
  MatrixMap matrix() { return matrix(rank() ? extent(0) : 0); }
  ConstMatrixMap matrix() const { return matrix(rank() ? extent(0) : 0); }

  VectorMap vector() { return VectorMap(data(), size()); }
  ConstVectorMap vector() const { return ConstVectorMap(data(), size()); }

  Tensor reshaped(Shape shape) const& {
    return Tensor(std::move(shape), data_);
  }
  Tensor reshaped(Shape shape) && {
    return Tensor(std::move(shape), std::move(data_));
  }

  template <typename Other>
  Tensor<Other> cast() const {
    std::vector<Other> out(data_.begin(), data_.end());
    return Tensor<Other>(shape_, std::move(out));
  }

  bool operator==(const Tensor&) const = default;

 private:
  void check_extents() const {
    for (std::size_t i = 0; i < shape_.size(); ++i) {
      if (shape_[i] <= 0) {
        throw DimensionError("tensor: extent of axis " + std::to_string(i) +
                             " must be positive, got " +
                             std::to_string(shape_[i]));
      }
    }
  }

  std::size_t offset(Index i, Index j) const {
    return static_cast<std::size_t>(i * shape_[1] + j);
  }
  std::size_t offset(Index i, Index j, Index k) const {
    return static_cast<std::size_t>((i * shape_[1] + j) * shape_[2] + k);
  }
  std::size_t offset(Index i, Index j, Index k, Index l) const {
    return static_cast<std::size_t>(
        ((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l);
  }

  Shape shape_;
  std::vector<Scalar> data_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

// Throws a DimensionError naming `axis` if `actual != expected`.
inline void require_extent(const char* op, const char* axis, Index actual,
                           Index expected) {
  if (actual != expected) {
    throw DimensionError(std::string(op) + ": " + axis + " extent is " +
                         std::to_string(actual) + ", expected " +
                         std::to_string(expected));
  }
}

inline void require_rank(const char* op, Index actual, Index expected) {
  if (actual != expected) {
    throw DimensionError(std::string(op) + ": rank is " +
                         std::to_string(actual) + ", expected " +
                         std::to_string(expected));
  }
}

}  // namespace edgespot

#endif  // EDGESPOT_TENSOR_HPP_
