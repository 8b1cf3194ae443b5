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
#include <cstdint>
#include <string>
#include <vector>

#include "twistops/mps.hpp"
#include "twistops/tensor.hpp"
#include "twistops/twist.hpp"

namespace twistops {

/// Letters 0..3 = I, X, Y, Z. A string on m qubits is packed base 4 with
/// qubit 0 (replica 0, first site) as the most significant digit.
using PauliString = std::uint32_t;

/// Largest qubit count n * l handled by the dense transform (4^10 strings).
inline constexpr std::size_t kMaxPauliQubits = 10;

std::vector<int> pauli_letters(PauliString s, std::size_t qubits);
PauliString pauli_pack(const std::vector<int>& letters);
/// "XI|ZZ": one group of l letters per replica.
std::string pauli_label(PauliString s, std::size_t l, int n);

/// Dense 2^m x 2^m matrix of a string.
MatrixXc pauli_matrix(PauliString s, std::size_t qubits);

struct SymmetryOrbits {
  std::size_t l = 0;
  /// orbit_of[string] indexes `representatives`.
  std::vector<std::uint32_t> orbit_of;
  std::vector<PauliString> representatives;
  [[nodiscard]] std::size_t count() const { return representatives.size(); }
};

/// K (K + 1) / 2 with K = C(l + 3, 3).
std::uint64_t independent_count(std::size_t l);

/// Orbits of the two-replica strings under independent site permutations in
/// each replica and replica exchange.
SymmetryOrbits symmetry_orbits(std::size_t l);

struct PauliDecomposition {
  std::size_t l = 0;
  int n = 2;
  /// a[s] = Tr(P_s^dagger T) / 2^(n l), one entry per string.
  std::vector<cplx> coefficients;
  /// Present for n = 2 only.
  SymmetryOrbits orbits;

  [[nodiscard]] std::size_t qubits() const { return l * static_cast<std::size_t>(n); }
  [[nodiscard]] bool has_orbits() const { return !orbits.orbit_of.empty(); }
  /// Largest spread |a_s - a_rep| within an orbit; 0 without orbits.
  [[nodiscard]] double orbit_spread() const;
  /// Distinct values after merging orbits and coefficients equal to `tol`.
  [[nodiscard]] std::size_t distinct_values(double tol = 1e-10) const;
};

/// Fast transform of a 2^m x 2^m operator; m = n * l.
PauliDecomposition decompose(const MatrixXc& op, std::size_t l, int n);
PauliDecomposition decompose(const TwistOperator& t);
MatrixXc reconstruct(const PauliDecomposition& dec);

/// Greedy qubit-wise commuting groups, largest |a| first.
std::vector<std::vector<PauliString>> group_commuting(const PauliDecomposition& dec, double drop = 1e-14);

struct ShotEstimate {
  double value = 0.0;
  double stderr_ = 0.0;
  std::uint64_t shots = 0;  ///< per group; 0 in analytic mode
  std::vector<std::vector<PauliString>> grouping;
  /// Strings whose exact expectation on the replicated state is below 1e-10.
  std::vector<PauliString> vanishing;
};

/// Density matrix of sites [x, x + l).
MatrixXc block_density(const Mps& s, std::size_t x, std::size_t l);

/// Infinite-shot limit: sum_s a_s <P_s> with exact replica expectations.
ShotEstimate estimate_exact(const Mps& s, const PauliDecomposition& dec, std::size_t site);

/// Each group is measured `shots` times in its product basis; outcomes are
/// drawn independently per replica from the exact block distribution.
ShotEstimate estimate_sampled(const Mps& s, const PauliDecomposition& dec, std::size_t site, std::uint64_t shots,
                              std::uint64_t seed);

/// Table with columns string_label, real, imag, orbit_id (-1 without orbits).
std::string pauli_table_text(const PauliDecomposition& dec);
std::string pauli_table_json(const PauliDecomposition& dec);

}  // namespace twistops
