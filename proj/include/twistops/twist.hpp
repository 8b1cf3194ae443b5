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
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "twistops/mps.hpp"
#include "twistops/tensor.hpp"

namespace twistops {

enum class Direction { kForward, kBackward };

const char* to_string(Direction d);
Direction direction_from_string(const std::string& s);

struct InjectivityReport {
  std::size_t l = 0;
  std::size_t rank = 0;
  std::size_t virtual_dim = 0;  ///< chi_left * chi_right
  double smallest_retained = 0.0;
  bool injective = false;
};

struct InverseBlock {
  /// Same shape as the block; sum_i inverse[m,i,n] block[m',i,n'] = delta delta
  /// on the retained subspace.
  Tensor inverse;
  InjectivityReport report;
};

/// Singular values below this fraction of the largest are dropped from S^-1.
inline constexpr double kPseudoInverseThreshold = 1e-10;

/// Pseudo-inverse of a (chi_l, D, chi_r) block seen as a map from the virtual
/// pair space into the physical space.
InverseBlock invert_block(const Tensor& block, double threshold = kPseudoInverseThreshold);

/// Physical twist on n replicas of a block:
/// T = (M (x) ... (x) M) P (Minv (x) ... (x) Minv), with P cycling the right
/// (forward) or left (backward) virtual legs by one replica.
///
/// Forward at a block starting at x acts like a virtual swap on the bond right
/// of the block; backward acts on the bond left of it.
struct TwistOperator {
  Tensor twist_block;  ///< M, (chi_l, D, chi_r)
  Tensor inverse;      ///< Minv, same shape
  int n = 2;
  std::size_t l = 1;
  std::size_t phys_dim = 2;  ///< per site
  Direction direction = Direction::kForward;
  std::size_t site = 0;  ///< first site of the block it was built from
  std::string source;    ///< free-form provenance (gauge, chain, coupling)
  InjectivityReport report;

  /// D^n, with replica 0 the most significant factor.
  [[nodiscard]] std::size_t dimension() const;
  /// Dense matrix; refuses dimensions above kMaxDenseTwist.
  [[nodiscard]] MatrixXc dense() const;
  /// (M Minv)^(x)n, the projector T acts within.
  [[nodiscard]] MatrixXc projector() const;
};

inline constexpr std::size_t kMaxDenseTwist = 4096;
inline constexpr int kMaxSweepReplicas = 4;
/// Twists with D^n up to this size are applied densely during sweeps.
inline constexpr std::size_t kDenseSweepDimension = 64;

TwistOperator build_twist(const Tensor& block, const InverseBlock& inv, int n, Direction direction);

/// Twist built from the center tensor after moving the orthogonality center
/// to x; exact for the cut right of x (forward) or left of x (backward).
TwistOperator orthocenter_twist(const Mps& s, std::size_t x, int n, Direction direction = Direction::kForward);

/// Twist from the block [x, x + l) of s in its current gauge.
TwistOperator block_twist(const Mps& s, std::size_t x, std::size_t l, int n, Direction direction);

/// An insertion applies either a factored twist or a dense block operator.
struct Insertion {
  std::size_t site = 0;  ///< first site of the block
  const TwistOperator* twist = nullptr;
  /// Alternative to `twist`: dense operator on n replicas of `l` sites.
  const MatrixXc* dense = nullptr;
  std::size_t l = 0;
  int n = 0;
};

Insertion at(const TwistOperator& t, std::size_t site);

/// <psi^(x)n| prod insertions |psi^(x)n> contracted as a replica sweep.
cplx expectation(const Mps& s, std::span<const Insertion> insertions);

/// Twists realizing Tr rho_A^n for A = union of the given intervals: a
/// forward block ending at each interval start and a backward block starting
/// after each interval end, all of length l.
std::vector<TwistOperator> interval_twists(const Mps& s, std::span<const Interval> intervals, std::size_t l,
                                           int n);
cplx interval_expectation(const Mps& s, std::span<const Interval> intervals, std::size_t l, int n);

struct FourPoint {
  double eta = 0.0;
  cplx value;
};

/// eta = x12 x34 / (x13 x24); value of the four insertions bounding
/// A = [x1, x2] U [x3, x4]. x2 = x1 - 1 denotes an empty first interval.
FourPoint four_point(const Mps& s, std::size_t x1, std::size_t x2, std::size_t x3, std::size_t x4, std::size_t l,
                     int n);
double cross_ratio(double x1, double x2, double x3, double x4);

/// Versioned JSON document with metadata and the dense matrix.
std::string twist_to_json(const TwistOperator& t, double g, std::size_t chain_length);

}  // namespace twistops
