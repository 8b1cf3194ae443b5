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

#include "twistops/mps.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "replica_env.hpp"

namespace twistops {

using detail::Labeled;

// ---------------------------------------------------------------------------
// Mps

Mps::Mps(std::vector<Tensor> sites, std::optional<std::size_t> center)
    : sites_(std::move(sites)), center_(center) {
  if (sites_.empty()) throw std::invalid_argument("MPS needs at least one site");
  for (std::size_t x = 0; x < sites_.size(); ++x) {
    if (sites_[x].rank() != 3) throw std::invalid_argument("MPS site tensors must have rank 3");
    if (x > 0 && sites_[x - 1].dim(2) != sites_[x].dim(0)) {
      throw std::invalid_argument("MPS virtual dimension mismatch at bond " + std::to_string(x));
    }
  }
  if (sites_.front().dim(0) != 1 || sites_.back().dim(2) != 1) {
    throw std::invalid_argument("MPS boundary bonds must have dimension 1");
  }
  if (center_ && *center_ >= sites_.size()) throw std::out_of_range("orthogonality center outside chain");
}

std::size_t Mps::bond_dim(std::size_t bond) const {
  if (bond > sites_.size()) throw std::out_of_range("bond index outside chain");
  return bond == 0 ? sites_.front().dim(0) : sites_[bond - 1].dim(2);
}

std::size_t Mps::max_bond_dim() const {
  std::size_t m = 1;
  for (const auto& t : sites_) m = std::max(m, t.dim(2));
  return m;
}

void Mps::set_site(std::size_t x, Tensor t, std::optional<std::size_t> center) {
  sites_.at(x) = std::move(t);
  center_ = center;
}

// ---------------------------------------------------------------------------
// Construction

namespace {

// A = Q R on the (left, phys | right) grouping; Q keeps min(rows, cols) columns.
std::pair<Tensor, Tensor> qr_right(const Tensor& a) {
  const std::size_t cl = a.dim(0);
  const std::size_t d = a.dim(1);
  const std::size_t cr = a.dim(2);
  const MatrixXc m = a.matrix(2);
  const Eigen::Index k = std::min(m.rows(), m.cols());
  Eigen::HouseholderQR<MatrixXc> qr(m);
  const MatrixXc q = qr.householderQ() * MatrixXc::Identity(m.rows(), k);
  const MatrixXc r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  return {Tensor::from_matrix(q).reshape({cl, d, static_cast<std::size_t>(k)}), Tensor::from_matrix(r)};
  (void)cr;
}

// A = L Q on the (left | phys, right) grouping; Q has orthonormal rows.
std::pair<Tensor, Tensor> lq_left(const Tensor& a) {
  const std::size_t d = a.dim(1);
  const std::size_t cr = a.dim(2);
  const MatrixXc m = a.matrix(1).adjoint();
  const Eigen::Index k = std::min(m.rows(), m.cols());
  Eigen::HouseholderQR<MatrixXc> qr(m);
  const MatrixXc q = qr.householderQ() * MatrixXc::Identity(m.rows(), k);
  const MatrixXc r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  return {Tensor::from_matrix(r.adjoint()),
          Tensor::from_matrix(q.adjoint()).reshape({static_cast<std::size_t>(k), d, cr})};
}

// Multiplies a matrix into the left bond of a site tensor.
Tensor absorb_left(const Tensor& m, const Tensor& a) { return contract(m, a, {{1, 0}}); }
// Multiplies a matrix into the right bond of a site tensor.
Tensor absorb_right(const Tensor& a, const Tensor& m) { return contract(a, m, {{2, 0}}); }

}  // namespace

Mps random_mps(std::size_t length, std::size_t phys_dim, std::size_t bond_dim, std::uint64_t seed) {
  if (length == 0 || phys_dim == 0 || bond_dim == 0) throw std::invalid_argument("random_mps needs positive sizes");
  std::mt19937_64 rng(seed);
  auto cap = [&](std::size_t bond) {
    // min(bond_dim, d^bond, d^(L-bond)) without overflow
    std::size_t left = 1;
    std::size_t right = 1;
    for (std::size_t k = 0; k < bond && left < bond_dim; ++k) left *= phys_dim;
    for (std::size_t k = bond; k < length && right < bond_dim; ++k) right *= phys_dim;
    return std::min({bond_dim, left, right});
  };
  std::vector<Tensor> sites;
  for (std::size_t x = 0; x < length; ++x) sites.push_back(Tensor::random({cap(x), phys_dim, cap(x + 1)}, rng));
  return canonicalize(Mps(std::move(sites), std::nullopt), 0);
}

Mps product_mps(const std::vector<VectorXc>& local_states) {
  std::vector<Tensor> sites;
  for (const auto& v : local_states) {
    const double n = v.norm();
    if (n == 0.0) throw std::invalid_argument("product state needs non-zero local vectors");
    sites.push_back(Tensor::from_vector(v / n).reshape({1, static_cast<std::size_t>(v.size()), 1}));
  }
  return Mps(std::move(sites), 0);
}

Mps mps_from_state(const VectorXc& state, std::size_t length, std::size_t phys_dim) {
  std::size_t total = 1;
  for (std::size_t k = 0; k < length; ++k) total *= phys_dim;
  if (static_cast<std::size_t>(state.size()) != total) throw std::invalid_argument("state length does not match chain");
  std::vector<Tensor> rev;
  Tensor rest = Tensor::from_vector(state / state.norm()).reshape({total, 1});
  // Peel sites from the right: rest is (d^x, chi_right) -> (d^(x-1), d * chi_right).
  for (std::size_t x = length; x-- > 1;) {
    const std::size_t chi_r = rest.dim(1);
    const Tensor r = rest.reshape({rest.dim(0) / phys_dim, phys_dim, chi_r});
    const auto f = svd(r, {0}, {1, 2}, {.relative_threshold = 1e-14});
    rev.push_back(f.vdag);
    Tensor us = f.u;
    for (std::size_t i = 0; i < us.dim(0); ++i)
      for (std::size_t k = 0; k < f.rank; ++k) us.at({i, k}) *= f.s[k];
    rest = us;
  }
  rev.push_back(rest.reshape({1, phys_dim, rest.dim(1)}));
  std::reverse(rev.begin(), rev.end());
  return Mps(std::move(rev), 0);
}

VectorXc mps_to_state(const Mps& s) {
  Tensor acc = s.site(0);
  for (std::size_t x = 1; x < s.length(); ++x) {
    acc = contract(acc, s.site(x), {{2, 0}});
    acc = std::move(acc).reshape({1, acc.dim(1) * acc.dim(2), acc.dim(3)});
  }
  return acc.vector();
}

cplx overlap(const Mps& bra, const Mps& ket) {
  if (bra.length() != ket.length()) throw std::invalid_argument("overlap of chains with different lengths");
  Tensor env = Tensor::identity(1);  // (bra, ket)
  for (std::size_t x = 0; x < ket.length(); ++x) {
    env = contract(env, bra.site(x).conj(), {{0, 0}});  // (ket, p, bra')
    env = contract(env, ket.site(x), {{0, 0}, {1, 1}});  // (bra', ket')
  }
  return env[0];
}

double norm(const Mps& s) { return std::sqrt(std::abs(overlap(s, s))); }

Mps canonicalize(const Mps& s, std::size_t center) {
  if (center >= s.length()) throw std::out_of_range("center outside chain");
  std::vector<Tensor> sites = s.sites();
  for (std::size_t x = sites.size(); x-- > 1;) {
    auto [l, q] = lq_left(sites[x]);
    sites[x] = std::move(q);
    sites[x - 1] = absorb_right(sites[x - 1], l);
  }
  const double n = sites[0].norm();
  if (n == 0.0) throw std::invalid_argument("cannot canonicalize a zero state");
  sites[0] = sites[0].scaled(1.0 / n);
  return move_center(Mps(std::move(sites), 0), center);
}

Mps move_center(const Mps& s, std::size_t to) {
  if (to >= s.length()) throw std::out_of_range("center target outside chain");
  if (!s.center()) return canonicalize(s, to);
  std::vector<Tensor> sites = s.sites();
  std::size_t c = *s.center();
  while (c < to) {
    auto [q, r] = qr_right(sites[c]);
    sites[c] = std::move(q);
    sites[c + 1] = absorb_left(r, sites[c + 1]);
    ++c;
  }
  while (c > to) {
    auto [l, q] = lq_left(sites[c]);
    sites[c] = std::move(q);
    sites[c - 1] = absorb_right(sites[c - 1], l);
    --c;
  }
  return Mps(std::move(sites), to);
}

Mps compress(const Mps& s, double cutoff) {
  std::vector<Tensor> sites = move_center(s, 0).sites();
  for (std::size_t x = 0; x + 1 < sites.size(); ++x) {
    SvdFactors f = svd(sites[x], {0, 1}, {2}, {.relative_threshold = cutoff});
    Tensor sv = f.vdag;
    for (std::size_t k = 0; k < f.rank; ++k)
      for (std::size_t c = 0; c < sv.dim(1); ++c) sv.at({k, c}) *= f.s[k];
    sites[x] = std::move(f.u);
    sites[x + 1] = absorb_left(sv, sites[x + 1]);
  }
  const double n = sites.back().norm();
  sites.back() = sites.back().scaled(1.0 / n);
  return Mps(std::move(sites), s.length() - 1);
}

// ---------------------------------------------------------------------------
// Entropies

std::vector<double> schmidt_values(const Mps& s, std::size_t cut) {
  if (cut == 0 || cut >= s.length()) throw std::out_of_range("cut must lie in [1, L-1]");
  const Mps c = move_center(s, cut - 1);
  const MatrixXc m = c.site(cut - 1).matrix(2);
  const Eigen::VectorXd sv = singular_values(m);
  const double total = sv.norm();
  std::vector<double> out;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > 0.0) out.push_back(sv(i) / total);
  }
  return out;
}

double renyi_from_schmidt(std::span<const double> lambdas, int n) {
  if (n < 2) throw std::invalid_argument("Renyi index must be >= 2");
  double acc = 0.0;
  for (double l : lambdas) acc += std::pow(l * l, n);
  return std::log(acc) / (1.0 - n);
}

double schmidt_renyi(const Mps& s, std::size_t cut, int n) { return renyi_from_schmidt(schmidt_values(s, cut), n); }

Tensor block(const Mps& s, std::size_t start, std::size_t l) {
  if (l == 0 || start + l > s.length()) throw std::out_of_range("block exceeds chain");
  Tensor acc = s.site(start);
  for (std::size_t k = 1; k < l; ++k) {
    acc = contract(acc, s.site(start + k), {{2, 0}});
    acc = std::move(acc).reshape({acc.dim(0), acc.dim(1) * acc.dim(2), acc.dim(3)});
  }
  return acc;
}

// ---------------------------------------------------------------------------
// Observables

namespace {

// env (ket, bra) through site with an optional single-site operator.
Tensor transfer_with(const Tensor& env, const Tensor& a, const Tensor* op) {
  Tensor t = contract(env, a, {{0, 0}});  // (bra, p, ket')
  if (op != nullptr) {
    t = contract(t, *op, {{1, 1}});  // (bra, ket', q)
    t = t.permute({0, 2, 1});
  }
  t = contract(t, a.conj(), {{0, 0}, {1, 1}});  // (ket', bra')
  return t;
}

cplx chain_expectation(const Mps& s, const std::vector<std::pair<std::size_t, const Tensor*>>& ops) {
  Tensor env = Tensor::identity(1);
  for (std::size_t x = 0; x < s.length(); ++x) {
    const Tensor* op = nullptr;
    for (const auto& [site, o] : ops) {
      if (site == x) op = o;
    }
    env = transfer_with(env, s.site(x), op);
  }
  return env[0];
}

}  // namespace

cplx local_expectation(const Mps& s, const Tensor& op, std::size_t x) {
  if (x >= s.length()) throw std::out_of_range("site outside chain");
  return chain_expectation(s, {{x, &op}});
}

cplx two_point(const Mps& s, const Tensor& op1, std::size_t x1, const Tensor& op2, std::size_t x2) {
  if (x1 >= x2 || x2 >= s.length()) throw std::out_of_range("two_point needs x1 < x2 < L");
  return chain_expectation(s, {{x1, &op1}, {x2, &op2}});
}

cplx mpo_expectation(const Mps& s, const Mpo& h) {
  if (h.length() != s.length()) throw std::invalid_argument("MPO and MPS lengths differ");
  Labeled env{Tensor({1, 1, 1}, {1.0}), {0, 1, 2}};  // (ket, w, bra)
  for (std::size_t x = 0; x < s.length(); ++x) {
    env = detail::contract(env, Labeled{s.site(x), {0, 10, 3}});
    env = detail::contract(env, Labeled{h.site(x), {1, 4, 11, 10}});
    env = detail::contract(env, Labeled{s.site(x).conj(), {2, 11, 5}});
    env.relabel(3, 0);
    env.relabel(4, 1);
    env.relabel(5, 2);
    env = env.ordered({0, 1, 2});
  }
  return env.t[0];
}

// ---------------------------------------------------------------------------
// Transfer matrices

namespace {

// E[(a a'), (b b')] = sum_i A[a,i,b] conj(A[a',i,b']).
MatrixXc transfer_matrix(const Tensor& a) {
  const Tensor e = contract(a, a.conj(), {{1, 1}});  // (a, b, a', b')
  return e.permute({0, 2, 1, 3}).matrix(2);
}

TransferSpectrum spectrum_from(double t1, double t2) {
  TransferSpectrum out;
  out.t1 = t1;
  out.t2 = t2;
  if (t1 <= 0.0 || t2 <= 0.0) {
    out.xi = 0.0;
  } else if ((t1 - t2) / t1 < kTransferDegeneracyTolerance) {
    out.infinite = true;
    out.xi = std::numeric_limits<double>::infinity();
  } else {
    out.xi = 1.0 / std::log(t1 / t2);
  }
  return out;
}

}  // namespace

TransferSpectrum transfer_spectrum(const Tensor& site) {
  if (site.rank() != 3 || site.dim(0) != site.dim(2)) throw std::invalid_argument("uniform site tensor must be (chi, d, chi)");
  const MatrixXc e = transfer_matrix(site);
  if (e.rows() == 1) return spectrum_from(std::abs(e(0, 0)), 0.0);
  Eigen::ComplexEigenSolver<MatrixXc> solver(e, false);
  std::vector<double> mags;
  for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i) mags.push_back(std::abs(solver.eigenvalues()(i)));
  std::sort(mags.begin(), mags.end(), std::greater<>());
  return spectrum_from(mags[0], mags[1]);
}

TransferSpectrum correlation_length(const Mps& s, const CorrelationLengthOptions& options) {
  if (s.max_bond_dim() == 1) return spectrum_from(1.0, 0.0);
  // Directions with negligible Schmidt weight carry arbitrary tensors that
  // masquerade as slow transfer modes; drop them first.
  const Mps c = options.compress_cutoff > 0.0 ? compress(s, options.compress_cutoff) : s;
  if (c.max_bond_dim() == 1) return spectrum_from(1.0, 0.0);
  const std::size_t L = s.length();
  const std::size_t window = std::min(options.max_window, L - 2);
  if (window == 0) throw std::invalid_argument("chain too short for a correlation-length estimate");
  const std::size_t first = (L - window) / 2;
  // Left-canonical tensors on the window make every bond gauge a unitary, so
  // the singular values of the window product are gauge invariant.
  const Mps lc = move_center(c, std::min(L - 1, first + window));

  std::vector<double> ks;
  std::vector<double> log_ratio;
  std::vector<double> log_lead;
  for (std::size_t k = 1; k <= window; ++k) {
    const std::size_t x0 = first + (window - k) / 2;
    MatrixXc prod = transfer_matrix(lc.site(x0));
    for (std::size_t x = x0 + 1; x < x0 + k; ++x) prod = prod * transfer_matrix(lc.site(x));
    const Eigen::VectorXd sv = singular_values(prod);
    if (sv.size() < 2 || sv(0) <= 0.0) continue;
    const double ratio = sv(1) / sv(0);
    if (ratio < options.ratio_floor) break;
    ks.push_back(static_cast<double>(k));
    log_ratio.push_back(std::log(ratio));
    log_lead.push_back(std::log(sv(0)));
  }
  if (ks.empty()) return spectrum_from(1.0, 0.0);
  if (ks.size() == 1) return spectrum_from(1.0, std::exp(log_ratio[0]));

  // Least-squares slopes over the longer half of the windows, where the
  // subleading prefactor has settled.
  const std::size_t from = ks.size() / 2 == ks.size() - 1 ? 0 : ks.size() / 2;
  auto slope = [&](const std::vector<double>& y) {
    double mx = 0.0;
    double my = 0.0;
    const auto n = static_cast<double>(ks.size() - from);
    for (std::size_t i = from; i < ks.size(); ++i) {
      mx += ks[i];
      my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = from; i < ks.size(); ++i) {
      sxy += (ks[i] - mx) * (y[i] - my);
      sxx += (ks[i] - mx) * (ks[i] - mx);
    }
    return sxy / sxx;
  };
  const double t1 = std::exp(slope(log_lead));
  const double rate = std::min(0.0, slope(log_ratio));
  return spectrum_from(t1, t1 * std::exp(rate));
}

// ---------------------------------------------------------------------------
// Virtual-swap replica oracle

namespace {

std::vector<Interval> sorted_intervals(std::span<const Interval> intervals, std::size_t L) {
  std::vector<Interval> iv(intervals.begin(), intervals.end());
  std::sort(iv.begin(), iv.end(), [](const Interval& a, const Interval& b) { return a.first < b.first; });
  for (std::size_t i = 0; i < iv.size(); ++i) {
    if (iv[i].first > iv[i].last) throw std::invalid_argument("interval with first > last");
    if (iv[i].last >= L) throw std::out_of_range("interval outside chain");
    if (i > 0 && iv[i].first <= iv[i - 1].last) throw std::invalid_argument("intervals overlap");
  }
  return iv;
}

}  // namespace

double replica_swap_purity(const Mps& s, std::span<const Interval> intervals, int n) {
  if (n < 2) throw std::invalid_argument("Renyi index must be >= 2");
  const auto iv = sorted_intervals(intervals, s.length());
  if (iv.empty()) return 1.0;
  const std::size_t first = iv.front().first;
  const std::size_t last = iv.back().last;
  // Center at the first touched site: the left environment is the identity and
  // everything right of the sweep is right-canonical.
  const Mps c = move_center(s, first);
  detail::ReplicaEnvironment env(n, c.bond_dim(first));
  for (std::size_t x = first; x <= last; ++x) {
    for (const auto& i : iv) {
      if (i.first == x) env.cycle_kets(+1);
      if (i.last + 1 == x) env.cycle_kets(-1);
    }
    env.absorb_site(c.site(x));
  }
  env.cycle_kets(-1);
  return env.close().real();
}

double replica_swap_entropy(const Mps& s, std::span<const Interval> intervals, int n) {
  return std::log(replica_swap_purity(s, intervals, n)) / (1.0 - n);
}

// ---------------------------------------------------------------------------
// DMRG

namespace {

struct DmrgEnvironments {
  std::vector<Tensor> left;   // bond b: (ket, w, bra)
  std::vector<Tensor> right;  // bond b: (ket, w, bra) for sites >= b
};

Tensor grow_left(const Tensor& env, const Tensor& a, const Tensor& w) {
  Labeled e{env, {0, 1, 2}};
  e = detail::contract(e, Labeled{a, {0, 10, 3}});
  e = detail::contract(e, Labeled{w, {1, 4, 11, 10}});
  e = detail::contract(e, Labeled{a.conj(), {2, 11, 5}});
  return e.ordered({3, 4, 5}).t;
}

Tensor grow_right(const Tensor& env, const Tensor& a, const Tensor& w) {
  Labeled e{env, {3, 4, 5}};
  e = detail::contract(e, Labeled{a, {0, 10, 3}});
  e = detail::contract(e, Labeled{w, {1, 4, 11, 10}});
  e = detail::contract(e, Labeled{a.conj(), {2, 11, 5}});
  return e.ordered({0, 1, 2}).t;
}

Tensor apply_two_site(const Tensor& theta, const Tensor& left, const Tensor& w1, const Tensor& w2,
                      const Tensor& right) {
  Labeled t{theta, {0, 1, 2, 3}};  // (a, s1, s2, b)
  t = detail::contract(Labeled{left, {0, 10, 20}}, t);
  t = detail::contract(t, Labeled{w1, {10, 11, 21, 1}});
  t = detail::contract(t, Labeled{w2, {11, 12, 22, 2}});
  t = detail::contract(t, Labeled{right, {3, 12, 23}});
  return t.ordered({20, 21, 22, 23}).t;
}

}  // namespace

DmrgResult dmrg(const Mpo& h, const DmrgOptions& options) {
  if (options.chi_max < 1) throw std::invalid_argument("chi_max must be >= 1");
  if (options.max_sweeps < 1) throw std::invalid_argument("sweeps must be >= 1");
  const std::size_t L = h.length();
  if (L < 2) throw std::invalid_argument("DMRG needs at least two sites");
  const std::size_t d = h.phys_dim(0);

  std::vector<Tensor> sites =
      random_mps(L, d, std::min(options.initial_bond_dim, options.chi_max), options.seed).sites();
  DmrgEnvironments env;
  env.left.assign(L + 1, Tensor());
  env.right.assign(L + 1, Tensor());
  env.left[0] = Tensor({1, 1, 1}, {1.0});
  env.right[L] = Tensor({1, 1, 1}, {1.0});
  for (std::size_t x = L; x-- > 1;) env.right[x] = grow_right(env.right[x + 1], sites[x], h.site(x));

  DmrgResult result;
  std::vector<double> previous_schmidt;
  double previous_energy = std::numeric_limits<double>::infinity();
  const SvdOptions split{.relative_threshold = options.svd_cutoff, .max_rank = options.chi_max};

  auto solve = [&](std::size_t x) {
    const Tensor theta = contract(sites[x], sites[x + 1], {{2, 0}});
    const Tensor& le = env.left[x];
    const Tensor& re = env.right[x + 2];
    const Tensor& w1 = h.site(x);
    const Tensor& w2 = h.site(x + 1);
    const auto shape = theta.shape();
    LanczosResult r;
    try {
      r = lanczos_lowest(
          [&](const VectorXc& in, VectorXc& out) {
            const Tensor t(shape, std::vector<cplx>(in.data(), in.data() + in.size()));
            out = apply_two_site(t, le, w1, w2, re).vector();
          },
          theta.vector(), options.lanczos);
    } catch (const NonHermitianError& e) {
      throw NonHermitianError("DMRG effective Hamiltonian at sites " + std::to_string(x) + "," +
                              std::to_string(x + 1) + " is not Hermitian: " + e.what());
    }
    auto f = svd(Tensor::from_vector(r.eigenvector).reshape(shape), {0, 1}, {2, 3}, split);
    result.max_discarded_weight = std::max(result.max_discarded_weight, f.discarded_weight);
    double total = 0.0;
    for (double v : f.s) total += v * v;
    total = std::sqrt(total);
    for (double& v : f.s) v /= total;
    return std::make_pair(r.eigenvalue, std::move(f));
  };

  auto scale_rows = [](const SvdFactors& f) {  // diag(s) * vdag
    Tensor out = f.vdag;
    const std::size_t per = out.size() / f.rank;
    for (std::size_t k = 0; k < f.rank; ++k)
      for (std::size_t i = 0; i < per; ++i) out[k * per + i] *= f.s[k];
    return out;
  };
  auto scale_cols = [](const SvdFactors& f) {  // u * diag(s)
    Tensor out = f.u;
    const std::size_t rows = out.size() / f.rank;
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t k = 0; k < f.rank; ++k) out[i * f.rank + k] *= f.s[k];
    return out;
  };

  for (int sweep = 1; sweep <= options.max_sweeps; ++sweep) {
    double energy = 0.0;
    for (std::size_t x = 0; x + 1 < L; ++x) {
      auto [e, f] = solve(x);
      energy = e;
      sites[x] = f.u;
      sites[x + 1] = scale_rows(f);
      env.left[x + 1] = grow_left(env.left[x], sites[x], h.site(x));
    }
    std::vector<double> schmidt;
    for (std::size_t x = L - 1; x-- > 0;) {
      auto [e, f] = solve(x);
      energy = e;
      if (x + 1 == L / 2) schmidt = f.s;
      sites[x + 1] = f.vdag;
      sites[x] = scale_cols(f);
      env.right[x + 1] = grow_right(env.right[x + 2], sites[x + 1], h.site(x + 1));
    }
    result.sweep_energies.push_back(energy);
    result.sweeps = sweep;

    double schmidt_change = 0.0;
    for (std::size_t i = 0; i < std::max(schmidt.size(), previous_schmidt.size()); ++i) {
      const double a = i < schmidt.size() ? schmidt[i] : 0.0;
      const double b = i < previous_schmidt.size() ? previous_schmidt[i] : 0.0;
      schmidt_change = std::max(schmidt_change, std::abs(a - b));
    }
    const bool energy_ok = std::abs(energy - previous_energy) <= options.energy_tol * std::max(1.0, std::abs(energy));
    previous_energy = energy;
    previous_schmidt = std::move(schmidt);
    if (sweep >= options.min_sweeps && energy_ok && schmidt_change <= options.schmidt_tol) {
      result.converged = true;
      break;
    }
  }
  result.energy = previous_energy;
  result.state = Mps(std::move(sites), 0);
  return result;
}

}  // namespace twistops
