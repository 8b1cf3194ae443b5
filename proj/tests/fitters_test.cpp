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
#include <random>

#include <nlohmann/json.hpp>

#include "support.hpp"
#include "twistops/fitters.hpp"
#include "twistops/models.hpp"
#include "twistops/pauli.hpp"

namespace twistops {
namespace {

const Mps& tfim(std::size_t L, double g, std::size_t chi = 32) {
  static std::map<std::tuple<std::size_t, double, std::size_t>, Mps> cache;
  auto key = std::make_tuple(L, g, chi);
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(key, dmrg(tfim_mpo({.length = L, .g = g}), {.chi_max = chi}).state).first;
  return it->second;
}

std::vector<TransferRecord> synthetic(const std::vector<std::pair<std::size_t, double>>& pts) {
  std::vector<TransferRecord> out;
  for (auto [L, e] : pts) out.push_back({.g = 1.0, .L_ref = L, .L_tar = 100, .rel_error = e});
  return out;
}

// ---- transfer ----

TEST(Transfer, SelfTransferIsExact) {
  const Mps& s = tfim(16, 1.5);
  const auto rec = transfer_record(1.5, s, s);
  EXPECT_LT(rec.rel_error, 1e-10);
  const std::size_t refs[] = {16};
  EXPECT_THROW(transfer_experiment(1.5, refs, 16), std::invalid_argument);
  const auto recs = transfer_experiment(1.5, refs, 16, {.diagnostic = true});
  EXPECT_LT(recs[0].rel_error, 1e-10);
}

// S2 is ~1e-13 here, so only the absolute difference is meaningful in
// double precision.
TEST(Transfer, NearProductLimitReachesRoundoff) {
  const auto rec = transfer_record(1e6, tfim(8, 1e6), tfim(32, 1e6));
  EXPECT_LT(rec.S2_exact, 1e-11);
  EXPECT_LT(std::abs(rec.S2_exact - rec.S2_twist), 1e-14);
}

TEST(Transfer, DecayRateIndependentOfTarget) {
  const std::vector<std::size_t> refs = {6, 8, 10, 12, 14};
  std::vector<double> slopes;
  for (std::size_t L_tar : {32, 48}) {
    std::vector<TransferRecord> recs;
    for (std::size_t L : refs) recs.push_back(transfer_record(4.0, tfim(L, 4.0), tfim(L_tar, 4.0)));
    slopes.push_back(extract_Lc(recs, 1e-10).slope);
  }
  EXPECT_LT(slopes[0], 0.0);
  EXPECT_LT(std::abs(slopes[0] - slopes[1]), 0.2 * std::abs(slopes[1]));
}

TEST(Transfer, UnderestimatesNearCriticality) {
  for (std::size_t L : {8, 10, 12, 14, 16}) {
    const auto rec = transfer_record(1.5, tfim(L, 1.5), tfim(40, 1.5));
    EXPECT_TRUE(rec.underestimate_ok) << "L_ref=" << L;
    EXPECT_GE(rec.rel_error, 0.0);
  }
}

TEST(Transfer, ErrorDecreasesWithReference) {
  double prev = 1.0;
  for (std::size_t L : {6, 8, 10, 12}) {
    const double e = transfer_record(2.0, tfim(L, 2.0), tfim(40, 2.0)).rel_error;
    EXPECT_LT(e, prev + 1e-12);
    prev = e;
  }
}

// ---- L_c ----

TEST(ExtractLc, PureExponential) {
  std::vector<std::pair<std::size_t, double>> pts;
  for (std::size_t L = 2; L <= 16; L += 2) pts.push_back({L, std::exp(-static_cast<double>(L))});
  EXPECT_NEAR(extract_Lc(synthetic(pts), std::exp(-10.0)).Lc, 10.0, 1e-6);
}

TEST(ExtractLc, ClosedForm) {
  std::vector<std::pair<std::size_t, double>> pts;
  for (std::size_t L = 4; L <= 30; L += 2) pts.push_back({L, 5.0 * std::exp(-static_cast<double>(L) / 2.0)});
  EXPECT_NEAR(extract_Lc(synthetic(pts), 1e-10).Lc, 2.0 * std::log(5e10), 1e-6);
}

TEST(ExtractLc, SkipsTransientAndFloor) {
  std::vector<std::pair<std::size_t, double>> pts = {{2, 0.5}, {4, 0.4}};
  for (std::size_t L = 6; L <= 20; L += 2) pts.push_back({L, std::exp(-static_cast<double>(L))});
  pts.push_back({22, 3e-12});
  pts.push_back({24, 5e-12});
  const auto f = extract_Lc(synthetic(pts), std::exp(-30.0));
  EXPECT_NEAR(f.slope, -1.0, 1e-9);
  EXPECT_NEAR(f.Lc, 30.0, 1e-6);
  EXPECT_EQ(f.first, 2u);
}

TEST(ExtractLc, RejectsNonDecayingData) {
  EXPECT_THROW(extract_Lc(synthetic({{2, 1e-3}, {4, 2e-3}, {6, 3e-3}}), 1e-10), FitError);
  EXPECT_THROW(extract_Lc(synthetic({{2, 1e-3}, {4, 1e-4}}), 1e-10), FitError);
}

// ---- power law ----

std::vector<PowerLawPoint> generated(double A, double omega, double k, double noise = 0.0, std::uint64_t seed = 0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<PowerLawPoint> out;
  for (double xi : {0.5, 0.8, 1.2, 1.7, 2.5, 3.5, 5.0, 7.0}) {
    const double v = A * std::pow(xi, omega) + k;
    out.push_back({xi, v * (1.0 + noise * nd(rng))});
  }
  return out;
}

TEST(PowerLaw, NoiselessRecovery) {
  const auto p = fit_power_law_point(generated(37.0, 0.68, 8.0));
  EXPECT_NEAR(p.A, 37.0, 1e-6);
  EXPECT_NEAR(p.omega, 0.68, 1e-6);
  EXPECT_NEAR(p.k, 8.0, 1e-6);
}

TEST(PowerLaw, StraightLine) {
  const auto p = fit_power_law_point(generated(3.0, 1.0, -2.0));
  EXPECT_NEAR(p.omega, 1.0, 1e-6);
}

TEST(PowerLaw, ScaleConsistency) {
  const auto base = fit_power_law_point(generated(37.0, 0.68, 8.0));
  auto pts = generated(37.0, 0.68, 8.0);
  const double c = 2.5;
  for (auto& q : pts) q.xi *= c;
  const auto scaled = fit_power_law_point(pts);
  EXPECT_NEAR(scaled.A, base.A * std::pow(c, -base.omega), 1e-6);
  EXPECT_NEAR(scaled.omega, base.omega, 1e-6);
  EXPECT_NEAR(scaled.k, base.k, 1e-6);
}

TEST(PowerLaw, BootstrapOnNoisyData) {
  const auto pts = generated(37.0, 0.68, 8.0, 0.05, 3);
  const auto fit = fit_power_law(pts, 1000, 7);
  EXPECT_GT(fit.A_err, 0.0);
  EXPECT_GT(fit.omega_err, 0.0);
  EXPECT_GT(fit.k_err, 0.0);
  EXPECT_LT(std::abs(fit.A - 37.0), 3 * fit.A_err);
  EXPECT_LT(std::abs(fit.omega - 0.68), 3 * fit.omega_err);
  EXPECT_LT(std::abs(fit.k - 8.0), 3 * fit.k_err);
  const auto again = fit_power_law(pts, 1000, 7);
  EXPECT_EQ(fit.A_err, again.A_err);
  EXPECT_EQ(fit.omega_err, again.omega_err);
}

TEST(PowerLaw, Errors) {
  std::vector<PowerLawPoint> same(5, {1.0, 3.0});
  EXPECT_THROW(fit_power_law_point(same), std::invalid_argument);
  EXPECT_THROW(fit_power_law_point(std::vector<PowerLawPoint>{{1, 1}, {2, 2}, {3, 3}}), std::invalid_argument);
  EXPECT_THROW(fit_power_law_point(std::vector<PowerLawPoint>{{-1, 1}, {2, 2}, {3, 3}, {4, 4}}), std::invalid_argument);
}

// ---- least squares ----

std::vector<MatrixXc> pauli_basis(std::size_t qubits, std::size_t count) {
  std::vector<MatrixXc> out;
  for (PauliString s = 0; s < count; ++s) out.push_back(pauli_matrix(s, qubits));
  return out;
}

TEST(SwapTarget, TwistMapsLOntoW) {
  const Mps c = move_center(tfim(24, 4.0, 2), 0);
  const Tensor b = block(c, 10, 2);
  for (auto dir : {Direction::kForward, Direction::kBackward}) {
    for (int n : {2, 3}) {
      const auto target = swap_target(b, n, dir);
      const auto t = build_twist(b, invert_block(b), n, dir);
      EXPECT_LT((t.dense() * target.L - target.W).norm(), 1e-10 * target.W.norm());
    }
  }
}

TEST(Lstsq, ZeroTargetGivesZero) {
  LstsqTarget t;
  t.L = MatrixXc::Identity(4, 4);
  t.W = MatrixXc::Zero(4, 4);
  const auto fit = lstsq_operator_fit(t, pauli_basis(2, 16));
  for (cplx a : fit.coefficients) EXPECT_EQ(std::abs(a), 0.0);
  EXPECT_EQ(fit.residual, 0.0);
  EXPECT_THROW(lstsq_operator_fit(t, {}), std::invalid_argument);
}

TEST(Lstsq, OrthonormalBasisGivesOverlaps) {
  std::mt19937_64 rng(4);
  LstsqTarget t;
  t.L = MatrixXc::Identity(4, 4);
  t.W = testing::random_matrix(rng, 4, 4);
  // P / 2 on two qubits has unit Frobenius norm, so G = I.
  auto basis = pauli_basis(2, 16);
  for (auto& b : basis) b /= 2.0;
  const auto fit = lstsq_operator_fit(t, basis);
  for (std::size_t a = 0; a < basis.size(); ++a) {
    const cplx overlap = (basis[a].adjoint() * t.W).trace();
    EXPECT_LT(std::abs(fit.coefficients[a] - overlap), 1e-14);
  }
  EXPECT_LT(fit.residual, 1e-14);
}

TEST(Lstsq, ResidualShrinksWithNestedBases) {
  const Mps c = move_center(tfim(24, 4.0, 2), 0);
  const auto target = swap_target(block(c, 10, 2), 2, Direction::kForward);
  double prev = 1.0 + 1e-12;
  for (std::size_t count : {1, 4, 16, 64, 256}) {
    const auto fit = lstsq_operator_fit(target, pauli_basis(4, count));
    EXPECT_LE(fit.residual, prev + 1e-12) << count;
    prev = fit.residual;
  }
  EXPECT_LT(prev, 1e-10);
}

TEST(Lstsq, CompleteBasisMatchesClosedForm) {
  const Mps c = move_center(tfim(24, 4.0, 2), 0);
  const auto target = swap_target(block(c, 10, 2), 2, Direction::kForward);
  const auto generic = lstsq_operator_fit(target, pauli_basis(4, 256));
  const auto full = lstsq_full_basis_fit(target, 2);
  EXPECT_LT((generic.op - full.op).norm(), 1e-8);
  ASSERT_EQ(full.coefficients.size(), 256u);
  for (std::size_t a = 0; a < 256; ++a) EXPECT_LT(std::abs(generic.coefficients[a] - full.coefficients[a]), 1e-8);
}

TEST(Lstsq, HermitianRestriction) {
  const Mps c = move_center(tfim(24, 4.0, 2), 0);
  const auto target = swap_target(block(c, 10, 2), 2, Direction::kForward);
  const auto free_fit = lstsq_operator_fit(target, pauli_basis(4, 256));
  const auto herm = lstsq_operator_fit(target, pauli_basis(4, 256), {.hermitian = true});
  EXPECT_LT((herm.op - herm.op.adjoint()).norm(), 1e-12);
  EXPECT_GE(herm.residual, free_fit.residual - 1e-12);
  for (cplx a : herm.coefficients) EXPECT_EQ(a.imag(), 0.0);
}

TEST(Lstsq, FullBasisRecoversTwistOnInjectiveBlock) {
  const Mps& s = tfim(24, 4.0, 4);
  const std::size_t x = 8;
  const std::size_t l = 4;
  const Mps c = move_center(s, 0);
  const Tensor b = block(c, x, l);
  const auto target = swap_target(b, 2, Direction::kForward);
  const auto fit = lstsq_full_basis_fit(target, l);
  EXPECT_LT(fit.residual, 1e-10);
  const Insertion ins[] = {{.site = x, .twist = nullptr, .dense = &fit.op, .l = l, .n = 2}};
  const double exact = std::exp(-schmidt_renyi(s, x + l, 2));
  EXPECT_NEAR(expectation(s, ins).real(), exact, 1e-8);
  const auto tik = lstsq_full_basis_fit(target, l, 1e-12);
  const Insertion tins[] = {{.site = x, .twist = nullptr, .dense = &tik.op, .l = l, .n = 2}};
  EXPECT_NEAR(expectation(s, tins).real(), exact, 1e-8);
}

TEST(Lstsq, BalancedGaugeHasIdentityMarginals) {
  const Mps c = move_center(tfim(24, 4.0, 4), 0);
  const Tensor b = balance_block(block(c, 8, 4));
  const std::size_t cl = b.dim(0), d = b.dim(1), cr = b.dim(2);
  // Partial traces of the Gram matrix, computed by hand.
  MatrixXc gl = MatrixXc::Zero(cl, cl), gr = MatrixXc::Zero(cr, cr);
  for (std::size_t a = 0; a < cl; ++a)
    for (std::size_t a2 = 0; a2 < cl; ++a2)
      for (std::size_t s = 0; s < d; ++s)
        for (std::size_t r = 0; r < cr; ++r) gl(a, a2) += std::conj(b.at({a, s, r})) * b.at({a2, s, r});
  for (std::size_t r = 0; r < cr; ++r)
    for (std::size_t r2 = 0; r2 < cr; ++r2)
      for (std::size_t s = 0; s < d; ++s)
        for (std::size_t a = 0; a < cl; ++a) gr(r, r2) += std::conj(b.at({a, s, r})) * b.at({a, s, r2});
  EXPECT_LT((gl / static_cast<double>(cr) - MatrixXc::Identity(cl, cl)).norm(), 1e-10);
  EXPECT_LT((gr / static_cast<double>(cl) - MatrixXc::Identity(cr, cr)).norm(), 1e-10);
}

TEST(Lstsq, GaugeLeavesOperatorAndAlignsTikhonov) {
  const Mps c = move_center(tfim(24, 4.0, 4), 0);
  const Tensor raw = block(c, 8, 4);
  const auto plain = lstsq_full_basis_fit(swap_target(raw, 2, Direction::kForward), 4);
  const auto target = swap_target(balance_block(raw), 2, Direction::kForward);
  const auto pinv = lstsq_full_basis_fit(target, 4);
  const auto tik = lstsq_full_basis_fit(target, 4, 1e-12);
  EXPECT_LT((pinv.op - plain.op).cwiseAbs().maxCoeff(), 1e-8);
  double diff = 0.0;
  for (std::size_t k = 0; k < pinv.coefficients.size(); ++k) {
    diff = std::max(diff, std::abs(pinv.coefficients[k] - tik.coefficients[k]));
  }
  EXPECT_LT(diff, 1e-8);
  EXPECT_LT(tik.residual, 1e-10);
}

TEST(Tables, HeadersAndProvenance) {
  const Provenance p{.config_hash = "abc", .seed = 9};
  const TransferRecord r{.g = 4.0, .L_ref = 8, .L_tar = 64, .S2_exact = 0.1, .S2_twist = 0.1, .rel_error = 1e-3};
  const std::string csv = transfer_csv(std::span(&r, 1), p);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "# twistops version=" + std::string(kArtifactVersion) + " config_hash=abc seed=9");
  EXPECT_NE(csv.find("g,L_ref,L_tar,S2_exact,S2_twist,rel_error\n4,8,64,"), std::string::npos);
  const LcRow row{4.0, 0.7, 15.0};
  EXPECT_NE(lc_csv(std::span(&row, 1), p).find("g,xi,Lc\n"), std::string::npos);
  const auto j = nlohmann::json::parse(power_law_json({.A = 1, .omega = 2, .k = 3, .n_boot = 10, .seed = 9}, p));
  for (const char* key : {"A", "A_err", "omega", "omega_err", "k", "k_err", "n_boot", "seed"}) EXPECT_TRUE(j.contains(key)) << key;
  EXPECT_EQ(j["provenance"]["config_hash"], "abc");
}

}  // namespace
}  // namespace twistops
