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
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "twistops/lanczos.hpp"
#include "twistops/models.hpp"
#include "twistops/tensor.hpp"

namespace twistops {

/// Finite matrix-product state.
///
/// Site tensors have axes (left virtual, physical, right virtual). Bond b sits
/// between sites b-1 and b, so bonds 0 and L are the trivial boundaries. When
/// `center()` is set, sites left of it are left-canonical and sites right of it
/// right-canonical.
class Mps {
 public:
  Mps() = default;
  Mps(std::vector<Tensor> sites, std::optional<std::size_t> center);

  [[nodiscard]] std::size_t length() const { return sites_.size(); }
  [[nodiscard]] const Tensor& site(std::size_t x) const { return sites_.at(x); }
  [[nodiscard]] const std::vector<Tensor>& sites() const { return sites_; }
  [[nodiscard]] std::optional<std::size_t> center() const { return center_; }
  [[nodiscard]] std::size_t phys_dim(std::size_t x) const { return sites_.at(x).dim(1); }
  [[nodiscard]] std::size_t bond_dim(std::size_t bond) const;
  [[nodiscard]] std::size_t max_bond_dim() const;

  /// Replaces one site tensor; the caller restates the center.
  void set_site(std::size_t x, Tensor t, std::optional<std::size_t> center);

 private:
  std::vector<Tensor> sites_;
  std::optional<std::size_t> center_;
};

/// Random normalized MPS in canonical form with center at site 0.
Mps random_mps(std::size_t length, std::size_t phys_dim, std::size_t bond_dim, std::uint64_t seed);
/// Product state from one local vector per site (normalized per site).
Mps product_mps(const std::vector<VectorXc>& local_states);
/// Exact MPS of a qubit state vector (site 0 most significant), center at 0.
Mps mps_from_state(const VectorXc& state, std::size_t length, std::size_t phys_dim = 2);
/// All amplitudes; only for short chains.
VectorXc mps_to_state(const Mps& s);

cplx overlap(const Mps& bra, const Mps& ket);
double norm(const Mps& s);

/// Brings an uncentered state into canonical form with the given center and
/// unit norm.
Mps canonicalize(const Mps& s, std::size_t center);
/// Moves the orthogonality center with QR sweeps. Uncentered inputs are
/// canonicalized first.
Mps move_center(const Mps& s, std::size_t to);
/// Left-to-right SVD sweep dropping singular values below cutoff * s_max at
/// every bond; the result is normalized with its center on the last site.
Mps compress(const Mps& s, double cutoff);

/// Normalized Schmidt coefficients across bond `cut` (1 <= cut <= L-1).
std::vector<double> schmidt_values(const Mps& s, std::size_t cut);
/// S_n = log(sum_i lambda_i^{2n}) / (1 - n).
double schmidt_renyi(const Mps& s, std::size_t cut, int n);
double renyi_from_schmidt(std::span<const double> lambdas, int n);

/// Contracts sites [start, start + l) into one tensor (chi_left, d^l, chi_right);
/// site `start` is the most significant physical factor.
Tensor block(const Mps& s, std::size_t start, std::size_t l);

/// <O_x1 O_x2> for single-site operators at distinct sites x1 < x2.
cplx two_point(const Mps& s, const Tensor& op1, std::size_t x1, const Tensor& op2, std::size_t x2);
cplx local_expectation(const Mps& s, const Tensor& op, std::size_t x);
/// <s|H|s> for an MPO.
cplx mpo_expectation(const Mps& s, const Mpo& h);

struct TransferSpectrum {
  double t1 = 0.0;
  double t2 = 0.0;
  double xi = 0.0;
  bool infinite = false;
};

/// Relative gap below which t1 and t2 count as degenerate.
inline constexpr double kTransferDegeneracyTolerance = 1e-12;

/// Two leading eigenvalue magnitudes of E = sum_i A_i (x) conj(A_i) for a
/// uniform site tensor.
TransferSpectrum transfer_spectrum(const Tensor& site);

struct CorrelationLengthOptions {
  /// Longest transfer window; clipped to the chain.
  std::size_t max_window = 40;
  /// Relative singular-value cutoff applied before the estimate; 0 disables.
  double compress_cutoff = 1e-6;
  /// Windows whose subleading ratio falls under this floor are not used.
  double ratio_floor = 1e-11;
};

/// Correlation length of a finite chain from gauge-invariant singular values
/// of central transfer-matrix products (see README for the estimator).
TransferSpectrum correlation_length(const Mps& s, const CorrelationLengthOptions& options = {});

struct Interval {
  std::size_t first = 0;  ///< inclusive
  std::size_t last = 0;   ///< inclusive
};

/// Tr(rho_A^n) of a union of disjoint intervals by sweeping n replicas of the
/// bra-ket network with cyclic virtual swaps at each interval endpoint.
double replica_swap_purity(const Mps& s, std::span<const Interval> intervals, int n);
double replica_swap_entropy(const Mps& s, std::span<const Interval> intervals, int n);

// ---------------------------------------------------------------------------
// DMRG

class ConvergenceError : public std::runtime_error {
 public:
  explicit ConvergenceError(const std::string& what) : std::runtime_error(what) {}
};

struct DmrgOptions {
  std::size_t chi_max = 32;
  int max_sweeps = 30;
  int min_sweeps = 2;
  /// Converged when |dE| <= energy_tol * max(1, |E|) between sweeps ...
  double energy_tol = 1e-12;
  /// ... and the middle-bond Schmidt values moved by at most this much.
  double schmidt_tol = 1e-10;
  /// Relative singular-value cutoff applied at every two-site split.
  double svd_cutoff = 1e-14;
  std::size_t initial_bond_dim = 4;
  std::uint64_t seed = 1;
  LanczosOptions lanczos{.krylov_dim = 32, .max_restarts = 40, .tolerance = 1e-12};
};

struct DmrgResult {
  Mps state;
  double energy = 0.0;
  std::vector<double> sweep_energies;
  double max_discarded_weight = 0.0;
  int sweeps = 0;
  bool converged = false;
};

DmrgResult dmrg(const Mpo& h, const DmrgOptions& options = {});

}  // namespace twistops
