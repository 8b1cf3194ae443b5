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

#include "twistops/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace twistops {

namespace {

void check_shape(const Tensor::Shape& shape) {
  for (std::size_t d : shape) {
    if (d == 0) throw std::invalid_argument("tensor axis length must be >= 1");
  }
}

std::vector<std::size_t> row_major_strides(std::span<const std::size_t> shape) {
  std::vector<std::size_t> strides(shape.size(), 1);
  for (std::size_t k = shape.size(); k-- > 1;) strides[k - 1] = strides[k] * shape[k];
  return strides;
}

using RowMap = Eigen::Map<const RowMajorMatrixXc>;

}  // namespace

std::size_t shape_product(std::span<const std::size_t> shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Tensor::Tensor() : data_(1, cplx{0.0, 0.0}) {}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_.assign(shape_product(shape_), cplx{0.0, 0.0});
}

Tensor::Tensor(Shape shape, std::vector<cplx> data) : shape_(std::move(shape)), data_(std::move(data)) {
  check_shape(shape_);
  if (data_.size() != shape_product(shape_)) {
    throw std::invalid_argument("tensor data length " + std::to_string(data_.size()) +
                                " does not match shape product " +
                                std::to_string(shape_product(shape_)));
  }
}

Tensor Tensor::scalar(cplx value) { return Tensor({}, {value}); }

Tensor Tensor::identity(std::size_t n) {
  Tensor t({n, n});
  for (std::size_t i = 0; i < n; ++i) t.data_[i * n + i] = 1.0;
  return t;
}

Tensor Tensor::random(Shape shape, std::mt19937_64& rng) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& x : t.data_) {
    const double re = normal(rng);
    const double im = normal(rng);
    x = {re, im};
  }
  return t;
}

Tensor Tensor::from_matrix(const MatrixXc& m) {
  Tensor t({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
  Eigen::Map<RowMajorMatrixXc>(t.data_.data(), m.rows(), m.cols()) = m;
  return t;
}

Tensor Tensor::from_vector(const VectorXc& v) {
  return Tensor({static_cast<std::size_t>(v.size())}, std::vector<cplx>(v.data(), v.data() + v.size()));
}

std::size_t Tensor::flat_index(std::span<const std::size_t> index) const {
  if (index.size() != shape_.size()) throw std::invalid_argument("index rank mismatch");
  std::size_t flat = 0;
  for (std::size_t k = 0; k < index.size(); ++k) {
    if (index[k] >= shape_[k]) throw std::out_of_range("tensor index out of range");
    flat = flat * shape_[k] + index[k];
  }
  return flat;
}

cplx& Tensor::at(std::initializer_list<std::size_t> index) {
  return data_[flat_index(std::span<const std::size_t>(index.begin(), index.size()))];
}

const cplx& Tensor::at(std::initializer_list<std::size_t> index) const {
  return data_[flat_index(std::span<const std::size_t>(index.begin(), index.size()))];
}

Tensor Tensor::reshape(Shape shape) const& {
  Tensor copy = *this;
  return std::move(copy).reshape(std::move(shape));
}

Tensor Tensor::reshape(Shape shape) && {
  check_shape(shape);
  if (shape_product(shape) != data_.size()) throw std::invalid_argument("reshape changes element count");
  shape_ = std::move(shape);
  return std::move(*this);
}

Tensor Tensor::permute(std::span<const std::size_t> axes) const {
  const std::size_t r = rank();
  if (axes.size() != r) throw std::invalid_argument("permutation rank mismatch");
  std::vector<bool> seen(r, false);
  for (std::size_t a : axes) {
    if (a >= r || seen[a]) throw std::invalid_argument("invalid axis permutation");
    seen[a] = true;
  }
  bool trivial = true;
  for (std::size_t k = 0; k < r; ++k) trivial = trivial && axes[k] == k;
  if (trivial) return *this;

  Shape out_shape(r);
  for (std::size_t k = 0; k < r; ++k) out_shape[k] = shape_[axes[k]];
  const auto in_strides = row_major_strides(shape_);
  std::vector<std::size_t> stride(r);
  for (std::size_t k = 0; k < r; ++k) stride[k] = in_strides[axes[k]];

  Tensor out(out_shape);
  // Walk the output in order with an odometer over the permuted input strides.
  // The innermost axis is peeled into a tight loop.
  const std::size_t inner_len = out_shape[r - 1];
  const std::size_t inner_stride = stride[r - 1];
  const std::size_t outer = data_.size() / inner_len;
  std::vector<std::size_t> counter(r, 0);
  std::size_t src = 0;
  cplx* dst = out.data_.data();
  for (std::size_t o = 0; o < outer; ++o) {
    const cplx* s = data_.data() + src;
    for (std::size_t i = 0; i < inner_len; ++i) dst[i] = s[i * inner_stride];
    dst += inner_len;
    for (std::size_t k = r - 1; k-- > 0;) {
      if (++counter[k] < out_shape[k]) {
        src += stride[k];
        break;
      }
      src -= stride[k] * (out_shape[k] - 1);
      counter[k] = 0;
    }
  }
  return out;
}

Tensor Tensor::permute(std::initializer_list<std::size_t> axes) const {
  return permute(std::span<const std::size_t>(axes.begin(), axes.size()));
}

Tensor Tensor::conj() const {
  Tensor out = *this;
  for (auto& x : out.data_) x = std::conj(x);
  return out;
}

Tensor Tensor::scaled(cplx factor) const {
  Tensor out = *this;
  for (auto& x : out.data_) x *= factor;
  return out;
}

double Tensor::norm() const {
  double acc = 0.0;
  for (const auto& x : data_) acc += std::norm(x);
  return std::sqrt(acc);
}

MatrixXc Tensor::matrix(std::size_t split) const {
  if (split > rank()) throw std::invalid_argument("matrix split beyond rank");
  const auto rows = static_cast<Eigen::Index>(
      shape_product(std::span<const std::size_t>(shape_.data(), split)));
  const auto cols = static_cast<Eigen::Index>(data_.size()) / rows;
  return RowMap(data_.data(), rows, cols);
}

VectorXc Tensor::vector() const {
  return Eigen::Map<const VectorXc>(data_.data(), static_cast<Eigen::Index>(data_.size()));
}

Tensor& Tensor::operator+=(const Tensor& other) {
  if (other.shape_ != shape_) throw std::invalid_argument("shape mismatch in tensor addition");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Tensor& Tensor::operator-=(const Tensor& other) {
  if (other.shape_ != shape_) throw std::invalid_argument("shape mismatch in tensor subtraction");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

Tensor operator+(Tensor a, const Tensor& b) { return a += b; }
Tensor operator-(Tensor a, const Tensor& b) { return a -= b; }

Tensor contract(const Tensor& a, const Tensor& b,
                std::span<const std::pair<std::size_t, std::size_t>> axis_pairs) {
  std::vector<bool> used_a(a.rank(), false);
  std::vector<bool> used_b(b.rank(), false);
  std::vector<std::size_t> perm_a;
  std::vector<std::size_t> perm_b;
  std::size_t inner = 1;
  for (const auto& [ia, ib] : axis_pairs) {
    if (ia >= a.rank() || ib >= b.rank()) throw std::invalid_argument("contraction axis out of range");
    if (used_a[ia] || used_b[ib]) throw std::invalid_argument("axis repeated in contraction pairs");
    if (a.dim(ia) != b.dim(ib)) {
      throw std::invalid_argument("contraction dimension mismatch: " + std::to_string(a.dim(ia)) +
                                  " vs " + std::to_string(b.dim(ib)));
    }
    used_a[ia] = true;
    used_b[ib] = true;
    inner *= a.dim(ia);
  }

  Tensor::Shape out_shape;
  std::size_t rows = 1;
  for (std::size_t k = 0; k < a.rank(); ++k) {
    if (!used_a[k]) {
      perm_a.push_back(k);
      out_shape.push_back(a.dim(k));
      rows *= a.dim(k);
    }
  }
  for (const auto& p : axis_pairs) perm_a.push_back(p.first);
  for (const auto& p : axis_pairs) perm_b.push_back(p.second);
  std::size_t cols = 1;
  for (std::size_t k = 0; k < b.rank(); ++k) {
    if (!used_b[k]) {
      perm_b.push_back(k);
      out_shape.push_back(b.dim(k));
      cols *= b.dim(k);
    }
  }

  const Tensor pa = a.permute(perm_a);
  const Tensor pb = b.permute(perm_b);
  Tensor out(out_shape);
  const auto r = static_cast<Eigen::Index>(rows);
  const auto c = static_cast<Eigen::Index>(cols);
  const auto k = static_cast<Eigen::Index>(inner);
  Eigen::Map<RowMajorMatrixXc>(out.data().data(), r, c).noalias() =
      RowMap(pa.data().data(), r, k) * RowMap(pb.data().data(), k, c);
  return out;
}

Tensor contract(const Tensor& a, const Tensor& b,
                std::initializer_list<std::pair<std::size_t, std::size_t>> axis_pairs) {
  return contract(a, b, std::span<const std::pair<std::size_t, std::size_t>>(axis_pairs.begin(), axis_pairs.size()));
}

namespace {

template <class Decomposition>
SvdFactors truncate_svd(const Decomposition& decomposition, const Tensor& t, std::span<const std::size_t> row_axes,
                        std::span<const std::size_t> col_axes, const SvdOptions& options) {
  const auto& sv = decomposition.singularValues();
  const double s_max = sv.size() > 0 ? sv(0) : 0.0;
  std::size_t keep = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > options.relative_threshold * s_max) ++keep;
  }
  keep = std::max<std::size_t>(keep, 1);
  if (options.max_rank > 0) keep = std::min(keep, options.max_rank);

  SvdFactors out;
  out.rank = keep;
  out.s.assign(sv.data(), sv.data() + keep);
  for (Eigen::Index i = static_cast<Eigen::Index>(keep); i < sv.size(); ++i) out.discarded_weight += sv(i) * sv(i);

  const auto kk = static_cast<Eigen::Index>(keep);
  Tensor::Shape ushape;
  for (std::size_t a : row_axes) ushape.push_back(t.dim(a));
  ushape.push_back(keep);
  Tensor::Shape vshape{keep};
  for (std::size_t a : col_axes) vshape.push_back(t.dim(a));
  out.u = Tensor::from_matrix(decomposition.matrixU().leftCols(kk)).reshape(ushape);
  out.vdag = Tensor::from_matrix(decomposition.matrixV().leftCols(kk).adjoint()).reshape(vshape);
  return out;
}

}  // namespace

SvdFactors svd(const Tensor& t, std::span<const std::size_t> row_axes, std::span<const std::size_t> col_axes,
               const SvdOptions& options) {
  if (row_axes.empty() || col_axes.empty()) throw std::invalid_argument("svd needs non-empty row and column axis groups");
  if (row_axes.size() + col_axes.size() != t.rank()) throw std::invalid_argument("svd split must cover every axis");
  std::vector<std::size_t> perm(row_axes.begin(), row_axes.end());
  perm.insert(perm.end(), col_axes.begin(), col_axes.end());
  const Tensor p = t.permute(perm);  // validates the partition
  const MatrixXc m = p.matrix(row_axes.size());

  // Eigen 3.4's divide-and-conquer SVD can return NaN factors (and report
  // success) on matrices with clustered tiny singular values, which converged
  // DMRG tensors produce. Jacobi is slower but reliable there.
  Eigen::BDCSVD<MatrixXc> fast(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (fast.info() == Eigen::Success && fast.singularValues().allFinite() && fast.matrixU().allFinite() &&
      fast.matrixV().allFinite()) {
    return truncate_svd(fast, t, row_axes, col_axes, options);
  }
  const Eigen::JacobiSVD<MatrixXc> exact(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return truncate_svd(exact, t, row_axes, col_axes, options);
}

SvdFactors svd(const Tensor& t, std::initializer_list<std::size_t> row_axes,
               std::initializer_list<std::size_t> col_axes, const SvdOptions& options) {
  return svd(t, std::span<const std::size_t>(row_axes.begin(), row_axes.size()),
             std::span<const std::size_t>(col_axes.begin(), col_axes.size()), options);
}

Eigen::VectorXd singular_values(const MatrixXc& m) {
  const Eigen::BDCSVD<MatrixXc> fast(m);
  if (fast.info() == Eigen::Success && fast.singularValues().allFinite()) return fast.singularValues();
  return Eigen::JacobiSVD<MatrixXc>(m).singularValues();
}

Tensor kron(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(0) != a.dim(1) || b.dim(0) != b.dim(1)) {
    throw std::invalid_argument("kron expects square rank-2 operators");
  }
  const std::size_t na = a.dim(0);
  const std::size_t nb = b.dim(0);
  const std::size_t n = na * nb;
  Tensor out({n, n});
  for (std::size_t i = 0; i < na; ++i) {
    for (std::size_t j = 0; j < na; ++j) {
      const cplx aij = a[i * na + j];
      if (aij == cplx{}) continue;
      for (std::size_t k = 0; k < nb; ++k) {
        for (std::size_t l = 0; l < nb; ++l) out[(i * nb + k) * n + (j * nb + l)] = aij * b[k * nb + l];
      }
    }
  }
  return out;
}

}  // namespace twistops
