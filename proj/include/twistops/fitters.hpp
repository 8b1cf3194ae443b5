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
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "twistops/io.hpp"
#include "twistops/mps.hpp"
#include "twistops/tensor.hpp"
#include "twistops/twist.hpp"

namespace twistops {

// ---- volume transfer ----

struct TransferRecord {
  double g = 0.0;
  std::size_t L_ref = 0;
  std::size_t L_tar = 0;
  double S2_exact = 0.0;
  double S2_twist = 0.0;  ///< -log <T_ref>_tar
  double rel_error = 0.0;
  bool underestimate_ok = false;
};

/// Slack allowed in S2_exact >= S2_twist.
inline constexpr double kUnderestimateSlack = 1e-12;

/// Orthocenter twist of `reference` at its mid-chain site L/2 - 1 (forward),
/// evaluated at the mid-chain site of `target`.
TransferRecord transfer_record(double g, const Mps& reference, const Mps& target);

struct TransferOptions {
  DmrgOptions dmrg;
  /// Allows L_ref == L_tar (self transfer).
  bool diagnostic = false;
};

/// Ground states are computed here; DMRG non-convergence throws ConvergenceError.
std::vector<TransferRecord> transfer_experiment(double g, std::span<const std::size_t> refs, std::size_t L_tar,
                                                const TransferOptions& options = {});

// ---- L_c extraction ----

class FitError : public std::runtime_error {
 public:
  explicit FitError(const std::string& what) : std::runtime_error(what) {}
};

struct LcOptions {
  /// Records at or below this relative error are treated as numerical floor;
  /// DMRG and roundoff noise sit near 1e-12.
  double floor = 1e-11;
  /// Consecutive local log-slopes must agree within this fraction.
  double slope_window = 0.1;
};

struct LcFit {
  double Lc = 0.0;
  double slope = 0.0;      ///< d log(rel_error) / d L_ref, negative
  double intercept = 0.0;
  std::size_t first = 0;   ///< index of the first record used
  std::size_t used = 0;
};

/// Fits log(rel_error) against L_ref over the exponential regime and returns
/// the crossing with log(tol). Throws FitError on non-decaying data.
LcFit extract_Lc(std::span<const TransferRecord> records, double tol, const LcOptions& options = {});

// ---- power law ----

struct PowerLawPoint {
  double xi = 0.0;
  double Lc = 0.0;
};

struct PowerLawFit {
  double A = 0.0;
  double omega = 0.0;
  double k = 0.0;
  double A_err = 0.0;
  double omega_err = 0.0;
  double k_err = 0.0;
  double cost = 0.0;  ///< half sum of squared residuals at the point estimate
  int n_boot = 0;
  std::uint64_t seed = 0;
};

struct PowerLawParams {
  double A = 0.0;
  double omega = 0.0;
  double k = 0.0;
};

/// Damped Gauss-Newton on A xi^omega + k; every accepted step lowers the cost.
PowerLawParams fit_power_law_point(std::span<const PowerLawPoint> points);

/// Point estimate plus bootstrap standard deviations over resampled points.
PowerLawFit fit_power_law(std::span<const PowerLawPoint> points, int n_boot = 1000, std::uint64_t seed = 1);

// ---- least-squares operator fit ----

/// Target pair: the replicated block map L (D^n x V) and W = L (I (x) S),
/// where S cycles the virtual legs. O L = W is solved for O.
struct LstsqTarget {
  MatrixXc L;
  MatrixXc W;
  Tensor block;  ///< single-replica block, (chi_l, D, chi_r)
  int n = 2;
  Direction direction = Direction::kForward;
};

LstsqTarget swap_target(const Tensor& block, int n, Direction direction);

/// Same block in a gauge X (x) Y on the virtual legs where both partial traces
/// of the Gram matrix of its map are the identity. The exact solution O is
/// gauge invariant; the Tikhonov one is not, and canonical blocks carry
/// Schmidt weights that fall below any useful lambda. Left and right
/// whitening alternate until the left marginal is within `tol` of identity.
Tensor balance_block(const Tensor& block, double tol = 1e-13, int max_sweeps = 500);

struct LstsqOptions {
  double lambda = 0.0;
  /// Restricts to real coefficients; with Hermitian basis elements O = O^dagger.
  bool hermitian = false;
  /// Relative eigenvalue cutoff for the pseudo-inverse when lambda = 0.
  double pinv_threshold = 1e-12;
};

struct LstsqFit {
  std::vector<cplx> coefficients;
  MatrixXc op;
  double residual = 0.0;  ///< ||O L - W|| / ||W||, 0 when W = 0
};

/// Normal equations G a = b (plus lambda a) over an explicit basis.
LstsqFit lstsq_operator_fit(const LstsqTarget& target, std::span<const MatrixXc> basis,
                            const LstsqOptions& options = {});

/// Unrestricted operator: the same problem over a complete operator basis,
/// solved as O = W L^+ (lambda = 0) or O = W L^dagger (L L^dagger + mu)^-1 with
/// mu = lambda / dim; coefficients are the Pauli components of O.
LstsqFit lstsq_full_basis_fit(const LstsqTarget& target, std::size_t l, double lambda = 0.0);

// ---- tables ----

std::string transfer_csv(std::span<const TransferRecord> records, const Provenance& p);
struct LcRow {
  double g = 0.0;
  double xi = 0.0;
  double Lc = 0.0;
};
std::string lc_csv(std::span<const LcRow> rows, const Provenance& p);
std::string power_law_json(const PowerLawFit& fit, const Provenance& p);

}  // namespace twistops
