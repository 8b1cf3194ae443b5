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

#include <cstddef>
#include <span>
#include <vector>

#include "twistops/tensor.hpp"

namespace twistops {

/// Open transverse-field Ising chain
///   H = -sum_x Z_x Z_{x+1} - g sum_x X_x - h_z sum_x Z_x.
/// `longitudinal` is zero unless a test needs to select a symmetry sector.
struct TfimParams {
  std::size_t length = 2;
  double g = 1.0;
  double longitudinal = 0.0;

  void validate() const;
};

/// Matrix-product operator. Site tensors have axes
/// (left bond, right bond, physical out, physical in).
class Mpo {
 public:
  explicit Mpo(std::vector<Tensor> sites);

  [[nodiscard]] std::size_t length() const { return sites_.size(); }
  [[nodiscard]] const Tensor& site(std::size_t x) const { return sites_.at(x); }
  [[nodiscard]] std::size_t phys_dim(std::size_t x) const { return sites_.at(x).dim(2); }

  /// Full 2^L x 2^L matrix; site 0 is the most significant factor.
  [[nodiscard]] MatrixXc dense() const;

 private:
  std::vector<Tensor> sites_;
};

namespace pauli_matrices {
Tensor identity();
Tensor x();
Tensor y();
Tensor z();
}  // namespace pauli_matrices

Mpo tfim_mpo(const TfimParams& p);

/// Largest chain handled by the exact oracles.
inline constexpr std::size_t kMaxExactLength = 14;

struct ExactGroundState {
  double energy = 0.0;
  VectorXc state;  ///< amplitudes, site 0 most significant
};

/// Applies H to a full state vector without forming the matrix.
void apply_tfim(const TfimParams& p, const VectorXc& in, VectorXc& out);

ExactGroundState exact_ground_state(const TfimParams& p);

/// Tr(rho_A^n) for subsystem `sites` (0-based, any order, any gaps) of a
/// qubit state vector.
double exact_purity(const VectorXc& state, std::span<const std::size_t> sites, int n);

/// S_n = log(Tr rho_A^n) / (1 - n). Empty or complete subsystems give zero.
double exact_renyi(const VectorXc& state, std::span<const std::size_t> sites, int n);

}  // namespace twistops
