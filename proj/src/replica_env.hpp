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
#include <vector>

#include "twistops/tensor.hpp"

namespace twistops::detail {

/// Tensor whose axes carry integer labels; `contract` sums over all labels the
/// two operands share.
struct Labeled {
  Tensor t;
  std::vector<int> labels;

  [[nodiscard]] std::size_t axis_of(int label) const;
  [[nodiscard]] Labeled ordered(const std::vector<int>& order) const;
  void relabel(int from, int to);
};

Labeled contract(const Labeled& a, const Labeled& b);

/// Left environment of n ket and n bra copies of a chain, swept site by site.
///
/// Axes are the open right bonds: ket replicas 0..n-1 then bra replicas 0..n-1.
/// Bra copies carry the complex conjugate.
class ReplicaEnvironment {
 public:
  /// prod_r delta(ket_r, bra_r) on a bond of dimension chi.
  ReplicaEnvironment(int n, std::size_t chi);

  [[nodiscard]] int replicas() const { return n_; }
  [[nodiscard]] std::size_t size() const { return env_.t.size(); }

  /// One site tensor (chi_l, d, chi_r) on every replica, bra r against ket r.
  void absorb_site(const Tensor& a);

  /// Virtual-level cyclic permutation: afterwards bra r pairs with the ket
  /// chain that bra r - shift paired with before.
  void cycle_kets(int shift);

  /// Block tensor (chi_l, D, chi_r) on every replica with a dense n-replica
  /// operator of dimension D^n in between (rows act on the bra side).
  void absorb_block_operator(const Tensor& block, const MatrixXc& op);

  /// Block with the factored twist (M^n) P (Minv^n), where P cycles the right
  /// (`forward`) or left virtual legs by one replica.
  void absorb_factored_twist(const Tensor& block, const Tensor& twist_block, const Tensor& twist_inverse,
                             bool forward);

  /// Closes with prod_r delta(ket_r, bra_r).
  [[nodiscard]] cplx close() const;

  /// Upper bound on environment entries before a request is refused.
  static constexpr std::size_t kMaxEntries = std::size_t{1} << 24;

 private:
  static int ket(int r) { return 1000 + r; }
  static int bra(int r) { return 2000 + r; }
  [[nodiscard]] std::vector<int> canonical_order() const;
  void check_budget(std::size_t entries) const;

  int n_;
  Labeled env_;
};

}  // namespace twistops::detail
