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

#include <random>
#include <stdexcept>

#include "support.hpp"
#include "twistops/tensor.hpp"

namespace twistops {
namespace {

using testing::random_matrix;

// Triple loop over every index of the result and of the contracted axes.
Tensor contract_loops(const Tensor& a, const Tensor& b, const std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
  std::vector<bool> a_used(a.rank()), b_used(b.rank());
  for (auto [i, j] : pairs) a_used[i] = b_used[j] = true;
  Tensor::Shape out_shape;
  for (std::size_t k = 0; k < a.rank(); ++k)
    if (!a_used[k]) out_shape.push_back(a.dim(k));
  for (std::size_t k = 0; k < b.rank(); ++k)
    if (!b_used[k]) out_shape.push_back(b.dim(k));
  Tensor out(out_shape);
  std::vector<std::size_t> ia(a.rank()), ib(b.rank());
  for (std::size_t fa = 0; fa < a.size(); ++fa) {
    std::size_t rest = fa;
    for (std::size_t k = a.rank(); k-- > 0;) { ia[k] = rest % a.dim(k); rest /= a.dim(k); }
    for (std::size_t fb = 0; fb < b.size(); ++fb) {
      rest = fb;
      for (std::size_t k = b.rank(); k-- > 0;) { ib[k] = rest % b.dim(k); rest /= b.dim(k); }
      bool match = true;
      for (auto [i, j] : pairs) match = match && ia[i] == ib[j];
      if (!match) continue;
      std::vector<std::size_t> io;
      for (std::size_t k = 0; k < a.rank(); ++k) if (!a_used[k]) io.push_back(ia[k]);
      for (std::size_t k = 0; k < b.rank(); ++k) if (!b_used[k]) io.push_back(ib[k]);
      out[out.flat_index(io)] += a[fa] * b[fb];
    }
  }
  return out;
}

double max_diff(const Tensor& a, const Tensor& b) {
  EXPECT_EQ(a.shape(), b.shape());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

TEST(Contract, IdentityTimesIdentity) {
  const Tensor r = contract(Tensor::identity(2), Tensor::identity(2), {{1, 0}});
  EXPECT_LT(max_diff(r, Tensor::identity(2)), 1e-15);
}

TEST(Contract, DotProduct) {
  const Tensor r = contract(Tensor({2}, {1.0, 2.0}), Tensor({2}, {3.0, 4.0}), {{0, 0}});
  EXPECT_EQ(r.rank(), 0u);
  EXPECT_NEAR(std::abs(r[0] - cplx{11.0}), 0.0, 1e-15);
}

TEST(Contract, MatchesLoopsOnTwoAxisPairs) {
  std::mt19937_64 rng(7);
  const Tensor a = Tensor::random({3, 4, 5}, rng);
  const Tensor b = Tensor::random({5, 4}, rng);
  EXPECT_LT(max_diff(contract(a, b, {{2, 0}, {1, 1}}), contract_loops(a, b, {{2, 0}, {1, 1}})), 1e-13);
}

TEST(Contract, MatchesLoopsOnRandomShapes) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 60; ++trial) {
    Tensor::Shape sa = testing::random_shape(rng, 4, 4);
    Tensor::Shape sb = testing::random_shape(rng, 4, 4);
    std::uniform_int_distribution<std::size_t> npairs(0, std::min(sa.size(), sb.size()));
    const std::size_t k = npairs(rng);
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t p = 0; p < k; ++p) { sb[p] = sa[sa.size() - 1 - p]; pairs.emplace_back(sa.size() - 1 - p, p); }
    if (shape_product(sa) * shape_product(sb) > 10000) continue;
    const Tensor a = Tensor::random(sa, rng);
    const Tensor b = Tensor::random(sb, rng);
    EXPECT_LT(max_diff(contract(a, b, pairs), contract_loops(a, b, pairs)), 1e-12);
  }
}

TEST(Contract, Bilinear) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor a = Tensor::random({3, 2, 4}, rng);
    const Tensor b = Tensor::random({4, 3}, rng);
    const cplx alpha{n(rng), n(rng)};
    const Tensor lhs = contract(a.scaled(alpha), b, {{2, 0}});
    const Tensor rhs = contract(a, b, {{2, 0}}).scaled(alpha);
    EXPECT_LT(max_diff(lhs, rhs), 1e-12 * (1.0 + rhs.norm()));
  }
}

TEST(Contract, Errors) {
  const Tensor a({2, 3});
  const Tensor b({3, 2});
  EXPECT_THROW(contract(a, b, {{0, 0}}), std::invalid_argument);
  EXPECT_THROW(contract(a, b, {{1, 0}, {1, 1}}), std::invalid_argument);
  EXPECT_THROW(contract(a, b, {{2, 0}}), std::invalid_argument);
}

TEST(Svd, IdentityHasUnitValues) {
  const auto f = svd(Tensor::identity(4), {0}, {1});
  ASSERT_EQ(f.rank, 4u);
  for (double s : f.s) EXPECT_NEAR(s, 1.0, 1e-14);
}

TEST(Svd, RankOneOuterProduct) {
  std::mt19937_64 rng(5);
  VectorXc u = random_matrix(rng, 6, 1).col(0).normalized();
  VectorXc v = random_matrix(rng, 4, 1).col(0).normalized();
  const auto f = svd(Tensor::from_matrix(u * v.adjoint()), {0}, {1});
  EXPECT_EQ(f.rank, 1u);
  EXPECT_NEAR(f.s[0], 1.0, 1e-13);
}

TEST(Svd, ValuesMatchEigenvaluesOfGram) {
  std::mt19937_64 rng(9);
  const MatrixXc m = random_matrix(rng, 8, 5);
  const auto f = svd(Tensor::from_matrix(m), {0}, {1});
  Eigen::SelfAdjointEigenSolver<MatrixXc> eig(m.adjoint() * m);
  ASSERT_EQ(f.rank, 5u);
  for (std::size_t k = 0; k < 5; ++k) EXPECT_NEAR(f.s[k], std::sqrt(eig.eigenvalues()(4 - static_cast<Eigen::Index>(k))), 1e-10);
}

Tensor reconstruct(const SvdFactors& f) {
  Tensor us = f.u;
  const std::size_t rows = us.size() / f.rank;
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t k = 0; k < f.rank; ++k) us[i * f.rank + k] *= f.s[k];
  return contract(us, f.vdag, {{us.rank() - 1, 0}});
}

TEST(Svd, ReconstructsRandomTensorsWithIsometries) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 40; ++trial) {
    const Tensor::Shape shape = testing::random_shape(rng, 4, 8);
    if (shape.size() < 2 || shape_product(shape) > 4096) continue;
    const Tensor t = Tensor::random(shape, rng);
    std::vector<std::size_t> rows, cols;
    for (std::size_t k = 0; k < shape.size(); ++k) (k % 2 == 0 ? rows : cols).push_back(k);
    const auto f = svd(t, rows, cols);
    for (std::size_t k = 1; k < f.s.size(); ++k) EXPECT_LE(f.s[k], f.s[k - 1]);
    std::vector<std::size_t> order = rows;
    order.insert(order.end(), cols.begin(), cols.end());
    const Tensor target = t.permute(order);
    Tensor diff = reconstruct(f);
    diff -= target;
    EXPECT_LT(diff.norm() / t.norm(), 1e-12);
    const MatrixXc u = f.u.matrix(f.u.rank() - 1);
    const MatrixXc vd = f.vdag.matrix(1);
    EXPECT_LT((u.adjoint() * u - MatrixXc::Identity(f.rank, f.rank)).norm(), 1e-12 * f.rank);
    EXPECT_LT((vd * vd.adjoint() - MatrixXc::Identity(f.rank, f.rank)).norm(), 1e-12 * f.rank);
  }
}

TEST(Svd, MaxRankTruncatesAndReportsWeight) {
  const Tensor t = Tensor::from_matrix(Eigen::Vector3cd(3.0, 2.0, 1.0).asDiagonal().toDenseMatrix());
  const auto f = svd(t, {0}, {1}, {.relative_threshold = 1e-12, .max_rank = 2});
  EXPECT_EQ(f.rank, 2u);
  EXPECT_NEAR(f.discarded_weight, 1.0, 1e-14);
}

TEST(Svd, RejectsEmptyGroup) {
  EXPECT_THROW(svd(Tensor::identity(2), std::initializer_list<std::size_t>{}, {0, 1}), std::invalid_argument);
  EXPECT_THROW(svd(Tensor::identity(2), {0}, std::initializer_list<std::size_t>{}), std::invalid_argument);
}

TEST(Kron, IdentityAndPauliZ) {
  EXPECT_LT(max_diff(kron(Tensor::identity(2), Tensor::identity(2)), Tensor::identity(4)), 1e-15);
  const Tensor z = Tensor::from_matrix(testing::pauli(3));
  const Tensor zz = kron(z, z);
  const double expected[] = {1, -1, -1, 1};
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(zz.at({i, j}), cplx(i == j ? expected[i] : 0.0));
}

TEST(Kron, ActsOnProductVectors) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    const MatrixXc a = random_matrix(rng, 2, 2), b = random_matrix(rng, 2, 2);
    const VectorXc v = random_matrix(rng, 2, 1), w = random_matrix(rng, 2, 1);
    const MatrixXc k = kron(Tensor::from_matrix(a), Tensor::from_matrix(b)).matrix(1);
    const VectorXc vw = testing::kron_ref(v, w);
    EXPECT_LT((k * vw - testing::kron_ref(a * v, b * w)).norm(), 1e-13);
  }
}

TEST(Kron, RejectsNonSquare) {
  EXPECT_THROW(kron(Tensor({2, 3}), Tensor::identity(2)), std::invalid_argument);
}

TEST(TensorBasics, ReshapePermuteRoundTrip) {
  std::mt19937_64 rng(19);
  const Tensor t = Tensor::random({2, 3, 4}, rng);
  EXPECT_EQ(t.size(), shape_product(t.shape()));
  const Tensor p = t.permute({2, 0, 1});
  EXPECT_EQ(p.at({3, 1, 2}), t.at({1, 2, 3}));
  EXPECT_EQ(max_diff(p.permute({1, 2, 0}), t), 0.0);
  EXPECT_EQ(t.reshape({6, 4}).at({5, 3}), t.at({1, 2, 3}));
  EXPECT_THROW(Tensor({2, 0}), std::invalid_argument);
  EXPECT_THROW(t.reshape({5}), std::invalid_argument);
}

}  // namespace
}  // namespace twistops
