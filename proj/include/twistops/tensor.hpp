// Copyright 2026 The twistops Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <complex>
#include <cstddef>
#include <initializer_list>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace twistops {

using cplx = std::complex<double>;
using MatrixXc = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic>;
using VectorXc = Eigen::Matrix<cplx, Eigen::Dynamic, 1>;
using RowMajorMatrixXc = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Dense complex tensor.
///
/// Data is stored row-major: the last axis varies fastest. Every reshape in the
/// library relies on this order, so `reshape` never moves data. A tensor of rank
/// zero holds a single scalar.
class Tensor {
 public:
  using Shape = std::vector<std::size_t>;

  Tensor();
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<cplx> data);

  static Tensor scalar(cplx value);
  static Tensor identity(std::size_t n);
  /// Entries drawn from a standard complex normal distribution.
  static Tensor random(Shape shape, std::mt19937_64& rng);
  static Tensor from_matrix(const MatrixXc& m);
  static Tensor from_vector(const VectorXc& v);

  [[nodiscard]] std::size_t rank() const { return shape_.size(); }
  [[nodiscard]] const Shape& shape() const { return shape_; }
  [[nodiscard]] std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  [[nodiscard]] std::size_t size() const { return data_.size(); }

  [[nodiscard]] std::span<const cplx> data() const { return data_; }
  [[nodiscard]] std::span<cplx> data() { return data_; }

  cplx& operator[](std::size_t flat) { return data_[flat]; }
  const cplx& operator[](std::size_t flat) const { return data_[flat]; }

  [[nodiscard]] cplx& at(std::initializer_list<std::size_t> index);
  [[nodiscard]] const cplx& at(std::initializer_list<std::size_t> index) const;
  [[nodiscard]] std::size_t flat_index(std::span<const std::size_t> index) const;

  [[nodiscard]] Tensor reshape(Shape shape) const&;
  [[nodiscard]] Tensor reshape(Shape shape) &&;
  /// Result axis k is input axis `axes[k]`.
  [[nodiscard]] Tensor permute(std::span<const std::size_t> axes) const;
  [[nodiscard]] Tensor permute(std::initializer_list<std::size_t> axes) const;
  [[nodiscard]] Tensor conj() const;
  [[nodiscard]] Tensor scaled(cplx factor) const;
  [[nodiscard]] double norm() const;

  /// Flattens axes [0, split) into rows and [split, rank) into columns.
  [[nodiscard]] MatrixXc matrix(std::size_t split) const;
  [[nodiscard]] VectorXc vector() const;

  Tensor& operator+=(const Tensor& other);
  Tensor& operator-=(const Tensor& other);

 private:
  Shape shape_;
  std::vector<cplx> data_;
};

Tensor operator+(Tensor a, const Tensor& b);
Tensor operator-(Tensor a, const Tensor& b);

std::size_t shape_product(std::span<const std::size_t> shape);

/// Sums over the paired axes. The result carries the free axes of `a` followed
/// by the free axes of `b`, each in original order.
Tensor contract(const Tensor& a, const Tensor& b,
                std::span<const std::pair<std::size_t, std::size_t>> axis_pairs);
Tensor contract(const Tensor& a, const Tensor& b,
                std::initializer_list<std::pair<std::size_t, std::size_t>> axis_pairs);

struct SvdOptions {
  /// Singular values at or below `relative_threshold * s_max` are discarded.
  double relative_threshold = 1e-12;
  /// Upper bound on the retained rank; zero means unbounded.
  std::size_t max_rank = 0;
};

struct SvdFactors {
  Tensor u;     ///< row axes + [rank]
  std::vector<double> s;  ///< descending
  Tensor vdag;  ///< [rank] + column axes
  std::size_t rank = 0;
  /// Sum of squares of the discarded singular values.
  double discarded_weight = 0.0;
};

/// Factorizes `t` viewed as a matrix whose rows are `row_axes` and whose
/// columns are `col_axes` (each list kept in the given order). At least one
/// singular value is always retained, so a zero tensor yields rank one.
SvdFactors svd(const Tensor& t, std::span<const std::size_t> row_axes,
               std::span<const std::size_t> col_axes, const SvdOptions& options = {});
SvdFactors svd(const Tensor& t, std::initializer_list<std::size_t> row_axes,
               std::initializer_list<std::size_t> col_axes, const SvdOptions& options = {});

/// Descending singular values, with the same fallback as svd().
Eigen::VectorXd singular_values(const MatrixXc& m);

/// Kronecker product of two square rank-2 operators.
Tensor kron(const Tensor& a, const Tensor& b);

}  // namespace twistops
