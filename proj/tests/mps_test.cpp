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

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "support.hpp"
#include "twistops/models.hpp"
#include "twistops/mps.hpp"

namespace twistops {
namespace {

// Sum_i A_i^dag A_i (left) or Sum_i A_i A_i^dag (right) minus identity.
double left_defect(const Tensor& a) {
  const MatrixXc m = a.matrix(2);
  return (m.adjoint() * m - MatrixXc::Identity(m.cols(), m.cols())).norm();
}
double right_defect(const Tensor& a) {
  const MatrixXc m = a.matrix(1);
  return (m * m.adjoint() - MatrixXc::Identity(m.rows(), m.rows())).norm();
}

void expect_canonical(const Mps& s, double tol) {
  ASSERT_TRUE(s.center().has_value());
  for (std::size_t x = 0; x < s.length(); ++x) {
    if (x < *s.center()) EXPECT_LT(left_defect(s.site(x)), tol) << "site " << x;
    if (x > *s.center()) EXPECT_LT(right_defect(s.site(x)), tol) << "site " << x;
  }
}

Mps bell_pair() {
  VectorXc v = VectorXc::Zero(4);
  v(0) = v(3) = 1.0 / std::sqrt(2.0);
  return mps_from_state(v, 2);
}

Mps plus_product(std::size_t L) {
  return product_mps(std::vector<VectorXc>(L, VectorXc::Ones(2)));
}

Mps ghz(std::size_t L) {
  std::vector<Tensor> sites;
  for (std::size_t x = 0; x < L; ++x) {
    const std::size_t cl = x == 0 ? 1 : 2;
    const std::size_t cr = x + 1 == L ? 1 : 2;
    Tensor a({cl, 2, cr});
    for (std::size_t i = 0; i < 2; ++i) a.at({cl == 1 ? 0 : i, i, cr == 1 ? 0 : i}) = 1.0;
    sites.push_back(a);
  }
  return canonicalize(Mps(std::move(sites), std::nullopt), 0);
}

// Ground states are cached per (L, g). The looser cutoff keeps bond
// dimensions small enough for three-replica environments.
const DmrgResult& tfim_state(std::size_t L, double g) {
  static std::map<std::pair<std::size_t, double>, DmrgResult> cache;
  auto it = cache.find({L, g});
  if (it == cache.end()) {
    it = cache.emplace(std::make_pair(L, g), dmrg(tfim_mpo({.length = L, .g = g}), {.svd_cutoff = 1e-8})).first;
  }
  return it->second;
}

TEST(Dmrg, ProductLimit) {
  const auto r = dmrg(tfim_mpo({.length = 8, .g = 1e6}), {.chi_max = 2});
  EXPECT_NEAR(r.energy / (-1e6 * 8), 1.0, 1e-6);
  EXPECT_LE(r.state.max_bond_dim(), 2u);
}

TEST(Dmrg, ClassicalChain) {
  const auto r = dmrg(tfim_mpo({.length = 10, .g = 0.0}), {.chi_max = 2});
  EXPECT_NEAR(r.energy, -9.0, 1e-10);
  EXPECT_TRUE(r.converged);
}

TEST(Dmrg, MatchesExactDiagonalization) {
  const auto& r = tfim_state(10, 1.0);
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.energy, exact_ground_state({.length = 10, .g = 1.0}).energy, 1e-8);
  EXPECT_NEAR(norm(r.state), 1.0, 1e-12);
  EXPECT_NEAR(mpo_expectation(r.state, tfim_mpo({.length = 10, .g = 1.0})).real(), r.energy, 1e-9);
  expect_canonical(r.state, 1e-10);
}

TEST(Dmrg, SweepEnergiesDecrease) {
  for (double g : {0.5, 1.0, 2.0}) {
    const auto r = dmrg(tfim_mpo({.length = 12, .g = g}), {.chi_max = 64, .seed = 5});
    for (std::size_t k = 1; k < r.sweep_energies.size(); ++k) {
      EXPECT_LE(r.sweep_energies[k], r.sweep_energies[k - 1] + 1e-12) << "g=" << g << " sweep " << k;
    }
  }
}

// Open chain maps to free fermions: single-particle energies are the singular
// values of the bidiagonal matrix with 2g on the diagonal and 2 above it.
double free_fermion_energy(std::size_t L, double g) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(L), static_cast<Eigen::Index>(L));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    m(i, i) = 2.0 * g;
    if (i + 1 < m.rows()) m(i, i + 1) = 2.0;
  }
  return -0.5 * Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues().sum();
}

TEST(Dmrg, FreeFermionOracleMatchesDense) {
  for (double g : {0.3, 1.0, 2.5}) {
    EXPECT_NEAR(free_fermion_energy(8, g), exact_ground_state({.length = 8, .g = g}).energy, 1e-10) << g;
  }
}

// Regression: tensors here once drove the divide-and-conquer SVD to NaN.
TEST(Dmrg, ClusteredSpectrumStaysFinite) {
  const auto r = dmrg(tfim_mpo({.length = 30, .g = 2.5}), {.svd_cutoff = 1e-8});
  ASSERT_TRUE(r.converged);
  EXPECT_TRUE(std::isfinite(r.energy));
  EXPECT_NEAR(r.energy, free_fermion_energy(30, 2.5), 1e-8);
}

TEST(Dmrg, BondDimensionCap) {
  const auto r = dmrg(tfim_mpo({.length = 16, .g = 1.0}), {.chi_max = 5});
  EXPECT_LE(r.state.max_bond_dim(), 5u);
  EXPECT_GT(r.max_discarded_weight, 0.0);
}

TEST(MoveCenter, NoOpKeepsTensors) {
  const Mps s = random_mps(6, 2, 3, 1);
  const Mps t = move_center(s, 0);
  for (std::size_t x = 0; x < 6; ++x) {
    Tensor d = t.site(x);
    d -= s.site(x);
    EXPECT_LT(d.norm(), 1e-15);
  }
}

TEST(MoveCenter, RoundTripPreservesState) {
  const Mps s = random_mps(7, 2, 4, 2);
  const Mps t = move_center(move_center(s, 6), 0);
  EXPECT_NEAR(std::abs(overlap(s, t)), 1.0, 1e-12);
  expect_canonical(t, 1e-10);
}

TEST(MoveCenter, GaugeConditionsAtEveryCenter) {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t L = 2 + rng() % 7;
    const Mps s = random_mps(L, 2 + rng() % 2, 1 + rng() % 4, rng());
    const std::size_t c = rng() % L;
    const Mps t = move_center(s, c);
    expect_canonical(t, 1e-10);
    EXPECT_NEAR(std::abs(overlap(s, t)), 1.0, 1e-12);
    EXPECT_NEAR(norm(t), 1.0, 1e-12);
  }
  EXPECT_THROW(move_center(random_mps(4, 2, 2, 1), 4), std::out_of_range);
}

TEST(MoveCenter, CanonicalizesUncenteredState) {
  std::mt19937_64 rng(31);
  std::vector<Tensor> sites{Tensor::random({1, 2, 3}, rng), Tensor::random({3, 2, 3}, rng), Tensor::random({3, 2, 1}, rng)};
  const Mps raw(sites, std::nullopt);
  const Mps c = move_center(raw, 1);
  expect_canonical(c, 1e-10);
  EXPECT_NEAR(std::abs(overlap(raw, c)) / norm(raw), 1.0, 1e-12);
}

TEST(StateConversion, RoundTrip) {
  std::mt19937_64 rng(37);
  VectorXc psi = testing::random_matrix(rng, 64, 1);
  psi.normalize();
  const Mps s = mps_from_state(psi, 6);
  EXPECT_LT((mps_to_state(s) - psi).norm(), 1e-12);
  expect_canonical(s, 1e-10);
}

TEST(Block, SingleSiteIsTheTensor) {
  const Mps s = random_mps(5, 2, 3, 4);
  Tensor d = block(s, 2, 1);
  d -= s.site(2);
  EXPECT_EQ(d.norm(), 0.0);
}

TEST(Block, ProductStateFactorizes) {
  const Mps s = product_mps({VectorXc::Ones(2), VectorXc::Unit(2, 1), VectorXc::Unit(2, 0)});
  const Tensor b = block(s, 0, 2);
  ASSERT_EQ(b.shape(), (Tensor::Shape{1, 4, 1}));
  const double r = 1.0 / std::sqrt(2.0);
  const double expected[] = {0, r, 0, r};  // |+> (x) |1>, first site most significant
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(std::abs(b[i] - cplx(expected[i])), 0.0, 1e-15);
}

TEST(Block, ReproducesAmplitudes) {
  const Mps s = random_mps(6, 2, 3, 8);
  std::vector<Tensor> sites{s.site(0), block(s, 1, 3), s.site(4), s.site(5)};
  const Mps blocked(sites, std::nullopt);
  // Site 1 is most significant inside the block, so the flat ordering is unchanged.
  EXPECT_LT((mps_to_state(blocked) - mps_to_state(s)).norm(), 1e-13);
  EXPECT_THROW(block(s, 4, 3), std::out_of_range);
}

TEST(SchmidtRenyi, ProductStateIsZero) {
  const Mps s = plus_product(6);
  for (std::size_t cut = 1; cut < 6; ++cut) EXPECT_NEAR(schmidt_renyi(s, cut, 2), 0.0, 1e-14);
}

TEST(SchmidtRenyi, BellPair) { EXPECT_NEAR(schmidt_renyi(bell_pair(), 1, 2), std::log(2.0), 1e-14); }

TEST(SchmidtRenyi, MatchesDenseStateAtEveryCut) {
  const auto& r = tfim_state(10, 1.5);
  const VectorXc psi = mps_to_state(r.state);
  for (std::size_t cut = 1; cut < 10; ++cut) {
    std::vector<std::size_t> a(cut);
    std::iota(a.begin(), a.end(), 0);
    const auto gs = exact_ground_state({.length = 10, .g = 1.5});
    EXPECT_NEAR(schmidt_renyi(r.state, cut, 2), exact_renyi(gs.state, a, 2), 1e-8);
    EXPECT_NEAR(schmidt_renyi(r.state, cut, 3), testing::bipartition_renyi(psi, cut, 10, 3), 1e-10);
  }
  EXPECT_THROW(schmidt_renyi(r.state, 0, 2), std::out_of_range);
  EXPECT_THROW(schmidt_renyi(r.state, 10, 2), std::out_of_range);
}

TEST(ReplicaSwap, WholeChainIsPure) {
  const auto& r = tfim_state(10, 1.2);
  const Interval all{0, 9};
  EXPECT_NEAR(replica_swap_entropy(r.state, std::span(&all, 1), 2), 0.0, 1e-12);
}

TEST(ReplicaSwap, LeftHalfMatchesSchmidt) {
  const auto& r = tfim_state(10, 1.2);
  const Interval half{0, 4};
  EXPECT_NEAR(replica_swap_entropy(r.state, std::span(&half, 1), 2), schmidt_renyi(r.state, 5, 2), 1e-12);
}

TEST(ReplicaSwap, TwoIntervalsMatchDenseOracle) {
  const auto& r = tfim_state(10, 1.2);
  const auto gs = exact_ground_state({.length = 10, .g = 1.2});
  const std::vector<Interval> iv{{1, 2}, {5, 6}};
  const std::vector<std::size_t> sites{1, 2, 5, 6};
  for (int n : {2, 3}) EXPECT_NEAR(replica_swap_entropy(r.state, iv, n), exact_renyi(gs.state, sites, n), 1e-8);
}

TEST(ReplicaSwap, EdgeAnchoredIntervalsMatchSchmidtProperty) {
  for (std::uint64_t seed : {3u, 4u}) {
    const Mps s = random_mps(8, 2, 3, seed);
    for (std::size_t cut = 1; cut < 8; ++cut) {
      for (int n : {2, 3}) {
        const Interval left{0, cut - 1};
        const Interval right{cut, 7};
        const double ref = schmidt_renyi(s, cut, n);
        EXPECT_NEAR(replica_swap_entropy(s, std::span(&left, 1), n), ref, 1e-10);
        EXPECT_NEAR(replica_swap_entropy(s, std::span(&right, 1), n), ref, 1e-10);
      }
    }
  }
}

TEST(ReplicaSwap, RandomIntervalsMatchDenseState) {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 12; ++trial) {
    const std::size_t L = 6 + trial % 3;
    const Mps s = random_mps(L, 2, 3, rng());
    const VectorXc psi = mps_to_state(s);
    std::vector<Interval> iv;
    std::vector<std::size_t> sites;
    std::size_t x = rng() % 2;
    while (x < L) {
      const std::size_t len = 1 + rng() % 2;
      const std::size_t last = std::min(L - 1, x + len - 1);
      iv.push_back({x, last});
      for (std::size_t y = x; y <= last; ++y) sites.push_back(y);
      x = last + 2 + rng() % 2;
    }
    const int n = 2 + trial % 2;
    EXPECT_NEAR(replica_swap_entropy(s, iv, n), exact_renyi(psi, sites, n), 1e-10);
  }
}

TEST(ReplicaSwap, GaugeInvariance) {
  const Mps s = random_mps(7, 2, 3, 43);
  const std::vector<Interval> iv{{1, 2}, {4, 5}};
  const double ref = replica_swap_entropy(s, iv, 2);
  for (std::size_t c = 0; c < 7; ++c) {
    const Mps t = move_center(s, c);
    EXPECT_NEAR(replica_swap_entropy(t, iv, 2), ref, 1e-10);
    EXPECT_NEAR(schmidt_renyi(t, 3, 2), schmidt_renyi(s, 3, 2), 1e-10);
  }
}

TEST(ReplicaSwap, RejectsOverlap) {
  const Mps s = random_mps(6, 2, 2, 1);
  const std::vector<Interval> iv{{0, 2}, {2, 3}};
  EXPECT_THROW(replica_swap_entropy(s, iv, 2), std::invalid_argument);
}

TEST(CorrelationLength, ProductStateHasNoScale) {
  const auto t = correlation_length(plus_product(12));
  EXPECT_EQ(t.xi, 0.0);
  EXPECT_EQ(t.t2, 0.0);
}

TEST(CorrelationLength, GhzIsInfinite) {
  EXPECT_TRUE(correlation_length(ghz(12)).infinite);
  Tensor a({2, 2, 2});
  a.at({0, 0, 0}) = a.at({1, 1, 1}) = 1.0;
  const auto t = transfer_spectrum(a);
  EXPECT_TRUE(t.infinite);
  EXPECT_NEAR(t.t1, 1.0, 1e-14);
}

TEST(CorrelationLength, UniformTensorEigenvalues) {
  // A_0 = diag(1, q), A_1 = 0 gives E eigenvalues {1, q, q, q^2}.
  Tensor a({2, 2, 2});
  a.at({0, 0, 0}) = 1.0;
  a.at({1, 0, 1}) = 0.5;
  const auto t = transfer_spectrum(a);
  EXPECT_NEAR(t.t1, 1.0, 1e-14);
  EXPECT_NEAR(t.t2, 0.5, 1e-14);
  EXPECT_NEAR(t.xi, 1.0 / std::log(2.0), 1e-12);
}

TEST(Compress, KeepsStateAndDropsWeakDirections) {
  const auto& r = tfim_state(10, 1.5);
  const Mps c = compress(r.state, 1e-4);
  expect_canonical(c, 1e-10);
  EXPECT_LT(c.max_bond_dim(), r.state.max_bond_dim());
  EXPECT_GT(std::abs(overlap(r.state, c)), 1.0 - 1e-6);
  const Mps same = compress(r.state, 0.0);
  EXPECT_NEAR(std::abs(overlap(r.state, same)), 1.0, 1e-12);
}

TEST(CorrelationLength, MatchesConnectedCorrelatorDecay) {
  const std::size_t L = 64;
  const auto& r = tfim_state(L, 4.0);
  const auto spec = correlation_length(r.state);
  const Tensor z = pauli_matrices::z();
  const std::size_t x0 = 26;
  std::vector<double> rs, logc;
  for (std::size_t d = 4; d <= 10; ++d) {
    const double c = (two_point(r.state, z, x0, z, x0 + d) -
                      local_expectation(r.state, z, x0) * local_expectation(r.state, z, x0 + d)).real();
    rs.push_back(static_cast<double>(d));
    logc.push_back(std::log(std::abs(c)));
  }
  const double n = static_cast<double>(rs.size());
  const double mx = std::accumulate(rs.begin(), rs.end(), 0.0) / n;
  const double my = std::accumulate(logc.begin(), logc.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < rs.size(); ++i) {
    sxy += (rs[i] - mx) * (logc[i] - my);
    sxx += (rs[i] - mx) * (rs[i] - mx);
  }
  const double xi_corr = -1.0 / (sxy / sxx);
  EXPECT_NEAR(spec.xi / xi_corr, 1.0, 0.1) << "transfer " << spec.xi << " correlator " << xi_corr;
}

TEST(Observables, LocalAndTwoPointOnDenseState) {
  const Mps s = random_mps(5, 2, 3, 47);
  const VectorXc psi = mps_to_state(s);
  const MatrixXc zx = testing::site_op(testing::pauli(3), 1, 5) * testing::site_op(testing::pauli(1), 3, 5);
  EXPECT_LT(std::abs(two_point(s, pauli_matrices::z(), 1, pauli_matrices::x(), 3) - psi.dot(zx * psi)), 1e-12);
  const MatrixXc y = testing::site_op(testing::pauli(2), 4, 5);
  EXPECT_LT(std::abs(local_expectation(s, pauli_matrices::y(), 4) - psi.dot(y * psi)), 1e-12);
}

}  // namespace
}  // namespace twistops
