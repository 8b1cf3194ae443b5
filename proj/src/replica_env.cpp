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

#include "replica_env.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>
#include <utility>

namespace twistops::detail {

std::size_t Labeled::axis_of(int label) const {
  const auto it = std::find(labels.begin(), labels.end(), label);
  if (it == labels.end()) throw std::logic_error("label " + std::to_string(label) + " not present");
  return static_cast<std::size_t>(it - labels.begin());
}

Labeled Labeled::ordered(const std::vector<int>& order) const {
  if (order.size() != labels.size()) throw std::logic_error("relabel order has wrong length");
  std::vector<std::size_t> perm;
  perm.reserve(order.size());
  for (int l : order) perm.push_back(axis_of(l));
  return {t.permute(perm), order};
}

void Labeled::relabel(int from, int to) { labels[axis_of(from)] = to; }

Labeled contract(const Labeled& a, const Labeled& b) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<int> out;
  for (std::size_t i = 0; i < a.labels.size(); ++i) {
    const auto it = std::find(b.labels.begin(), b.labels.end(), a.labels[i]);
    if (it != b.labels.end()) {
      pairs.emplace_back(i, static_cast<std::size_t>(it - b.labels.begin()));
    } else {
      out.push_back(a.labels[i]);
    }
  }
  for (int l : b.labels) {
    if (std::find(a.labels.begin(), a.labels.end(), l) == a.labels.end()) out.push_back(l);
  }
  return {twistops::contract(a.t, b.t, pairs), std::move(out)};
}

namespace {

constexpr int kPhysKet = 3000;
constexpr int kPhysBra = 4000;
constexpr int kNewKet = 5000;
constexpr int kNewBra = 6000;
constexpr int kAlpha = 7000;
constexpr int kBeta = 8000;

}  // namespace

ReplicaEnvironment::ReplicaEnvironment(int n, std::size_t chi) : n_(n) {
  if (n < 1) throw std::invalid_argument("replica count must be positive");
  std::size_t entries = 1;
  for (int r = 0; r < 2 * n; ++r) entries *= chi;
  check_budget(entries);
  // prod_r delta(k_r, b_r): start from a scalar and tensor in one identity per replica.
  Labeled acc{Tensor::scalar(1.0), {}};
  for (int r = 0; r < n; ++r) {
    acc = contract(acc, Labeled{Tensor::identity(chi), {ket(r), bra(r)}});
  }
  env_ = acc.ordered(canonical_order());
}

std::vector<int> ReplicaEnvironment::canonical_order() const {
  std::vector<int> order;
  for (int r = 0; r < n_; ++r) order.push_back(ket(r));
  for (int r = 0; r < n_; ++r) order.push_back(bra(r));
  return order;
}

void ReplicaEnvironment::check_budget(std::size_t entries) const {
  if (entries > kMaxEntries) {
    throw std::length_error("replica environment would need " + std::to_string(entries) +
                            " entries; reduce the bond dimension or the replica count");
  }
}

void ReplicaEnvironment::absorb_site(const Tensor& a) {
  if (a.rank() != 3) throw std::invalid_argument("site tensor must have rank 3");
  const Tensor abar = a.conj();
  for (int r = 0; r < n_; ++r) {
    // Peak is the intermediate with the physical leg still open.
    const std::size_t grown = env_.t.size() / a.dim(0) * a.dim(2);
    check_budget(grown * a.dim(1));
    check_budget(grown / a.dim(0) * a.dim(2));
    env_ = contract(env_, Labeled{a, {ket(r), kPhysKet, kNewKet}});
    env_ = contract(env_, Labeled{abar, {bra(r), kPhysKet, kNewBra}});
    env_.relabel(kNewKet, ket(r));
    env_.relabel(kNewBra, bra(r));
  }
  env_ = env_.ordered(canonical_order());
}

void ReplicaEnvironment::cycle_kets(int shift) {
  // The ket chain at axis r moves to axis r + shift.
  for (int r = 0; r < n_; ++r) env_.relabel(ket(r), kNewKet + ((r + shift) % n_ + n_) % n_);
  for (int r = 0; r < n_; ++r) env_.relabel(kNewKet + r, ket(r));
  env_ = env_.ordered(canonical_order());
}

void ReplicaEnvironment::absorb_block_operator(const Tensor& block, const MatrixXc& op) {
  if (block.rank() != 3) throw std::invalid_argument("block tensor must have rank 3");
  const std::size_t D = block.dim(1);
  std::size_t full = 1;
  for (int r = 0; r < n_; ++r) full *= D;
  if (static_cast<std::size_t>(op.rows()) != full || static_cast<std::size_t>(op.cols()) != full) {
    throw std::invalid_argument("operator dimension does not match block and replica count");
  }
  Tensor::Shape op_shape(2 * static_cast<std::size_t>(n_), D);
  Labeled t{Tensor::from_matrix(op).reshape(op_shape), {}};
  for (int r = 0; r < n_; ++r) t.labels.push_back(kPhysBra + r);
  for (int r = 0; r < n_; ++r) t.labels.push_back(kPhysKet + r);

  for (int r = 0; r < n_; ++r) {
    check_budget(env_.t.size() / block.dim(0) * D * block.dim(2));
    env_ = contract(env_, Labeled{block, {ket(r), kPhysKet + r, kNewKet + r}});
  }
  env_ = contract(env_, t);
  const Tensor bbar = block.conj();
  for (int r = 0; r < n_; ++r) {
    env_ = contract(env_, Labeled{bbar, {bra(r), kPhysBra + r, kNewBra + r}});
  }
  for (int r = 0; r < n_; ++r) {
    env_.relabel(kNewKet + r, ket(r));
    env_.relabel(kNewBra + r, bra(r));
  }
  env_ = env_.ordered(canonical_order());
}

void ReplicaEnvironment::absorb_factored_twist(const Tensor& block, const Tensor& twist_block,
                                               const Tensor& twist_inverse, bool forward) {
  if (block.dim(1) != twist_block.dim(1) || twist_inverse.shape() != twist_block.shape()) {
    throw std::invalid_argument("twist factors do not match the block");
  }
  // Ket side of replica r: block contracted with the inverse gives (alpha_r, beta_r).
  const Labeled ket_map = contract(Labeled{block, {0, kPhysKet, 1}}, Labeled{twist_inverse, {2, kPhysKet, 3}});
  // Bra side: twist block against the conjugate state block.
  const Labeled bra_map = contract(Labeled{twist_block, {2, kPhysBra, 3}}, Labeled{block.conj(), {0, kPhysBra, 1}});
  // ket_map axes (k, k', alpha, beta); bra_map axes (alpha, beta, b, b').
  auto next = [this](int r) { return (r + 1) % n_; };
  auto absorb_ket = [&](int r) {
    Labeled m = ket_map;
    m.labels = {ket(r), kNewKet + r, kAlpha + r, kBeta + r};
    check_budget(env_.t.size() / block.dim(0) * block.dim(2) * twist_block.dim(0) * twist_block.dim(2));
    env_ = contract(env_, m);
  };
  auto absorb_bra = [&](int r) {
    Labeled m = bra_map;
    if (forward) {
      m.labels = {kAlpha + r, kBeta + next(r), bra(r), kNewBra + r};
    } else {
      m.labels = {kAlpha + next(r), kBeta + r, bra(r), kNewBra + r};
    }
    check_budget(env_.t.size() / (twist_block.dim(0) * twist_block.dim(2)) * block.dim(0) * block.dim(2));
    env_ = contract(env_, m);
  };
  // Bra r needs replica next(r): interleave so at most two replicas are open.
  absorb_ket(0);
  for (int r = 0; r < n_; ++r) {
    if (r + 1 < n_) absorb_ket(r + 1);
    absorb_bra(r);
  }
  for (int r = 0; r < n_; ++r) {
    env_.relabel(kNewKet + r, ket(r));
    env_.relabel(kNewBra + r, bra(r));
  }
  env_ = env_.ordered(canonical_order());
}

cplx ReplicaEnvironment::close() const {
  // Sum of entries with k_r == b_r for every r.
  const Tensor& t = env_.t;
  std::size_t chi_total = 1;
  for (int r = 0; r < n_; ++r) chi_total *= t.dim(static_cast<std::size_t>(r));
  for (int r = 0; r < n_; ++r) {
    if (t.dim(static_cast<std::size_t>(r)) != t.dim(static_cast<std::size_t>(n_ + r))) {
      throw std::logic_error("ket and bra bond dimensions differ at closure");
    }
  }
  cplx acc = 0.0;
  for (std::size_t k = 0; k < chi_total; ++k) acc += t[k * chi_total + k];
  return acc;
}

}  // namespace twistops::detail
