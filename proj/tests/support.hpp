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

// Shared helpers for the unit tests: small random generators and dense
// reference constructions that do not go through the library code paths.

#pragma once

#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

#include "twistops/tensor.hpp"

namespace twistops::testing {

inline std::vector<std::size_t> random_shape(std::mt19937_64& rng, std::size_t max_rank, std::size_t max_dim) {
  std::uniform_int_distribution<std::size_t> rank_dist(1, max_rank);
  std::uniform_int_distribution<std::size_t> dim_dist(1, max_dim);
  std::vector<std::size_t> shape(rank_dist(rng));
  for (auto& d : shape) d = dim_dist(rng);
  return shape;
}

inline MatrixXc random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> n(0.0, 1.0);
  MatrixXc m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = cplx{n(rng), n(rng)};
  return m;
}

inline MatrixXc pauli(int k) {
  MatrixXc m(2, 2);
  switch (k) {
    case 1: m << 0, 1, 1, 0; break;
    case 2: m << 0, cplx{0, -1}, cplx{0, 1}, 0; break;
    case 3: m << 1, 0, 0, -1; break;
    default: m << 1, 0, 0, 1; break;
  }
  return m;
}

// Kronecker product written out with index arithmetic.
inline MatrixXc kron_ref(const MatrixXc& a, const MatrixXc& b) {
  MatrixXc out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      for (Eigen::Index k = 0; k < b.rows(); ++k)
        for (Eigen::Index l = 0; l < b.cols(); ++l) out(i * b.rows() + k, j * b.cols() + l) = a(i, j) * b(k, l);
  return out;
}

// Operator `op` on site x of an L-site qubit chain, site 0 most significant.
inline MatrixXc site_op(const MatrixXc& op, std::size_t x, std::size_t L) {
  MatrixXc acc = MatrixXc::Identity(1, 1);
  for (std::size_t k = 0; k < L; ++k) acc = kron_ref(acc, k == x ? op : MatrixXc::Identity(2, 2));
  return acc;
}

// Dense TFIM Hamiltonian assembled term by term.
inline MatrixXc tfim_dense(std::size_t L, double g, double hz = 0.0) {
  const auto dim = Eigen::Index{1} << L;
  MatrixXc h = MatrixXc::Zero(dim, dim);
  for (std::size_t x = 0; x + 1 < L; ++x) h -= site_op(pauli(3), x, L) * site_op(pauli(3), x + 1, L);
  for (std::size_t x = 0; x < L; ++x) h -= g * site_op(pauli(1), x, L) + hz * site_op(pauli(3), x, L);
  return h;
}

// Renyi entropy of the left `cut` sites from the singular values of the
// reshaped state vector.
inline double bipartition_renyi(const VectorXc& psi, std::size_t cut, std::size_t L, int n) {
  const auto rows = Eigen::Index{1} << cut;
  const auto cols = Eigen::Index{1} << (L - cut);
  MatrixXc m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = psi(i * cols + j);
  const Eigen::VectorXd s = Eigen::JacobiSVD<MatrixXc>(m).singularValues() / psi.norm();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < s.size(); ++i) acc += std::pow(s(i), 2 * n);
  return std::log(acc) / (1.0 - n);
}

}  // namespace twistops::testing
