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

#include "twistops/models.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "twistops/lanczos.hpp"

namespace twistops {

void TfimParams::validate() const {
  if (length < 2) throw std::invalid_argument("TFIM chain needs at least two sites");
  if (!(g >= 0.0)) throw std::invalid_argument("TFIM transverse field must be non-negative");
}

Mpo::Mpo(std::vector<Tensor> sites) : sites_(std::move(sites)) {
  if (sites_.empty()) throw std::invalid_argument("empty MPO");
  for (std::size_t x = 0; x < sites_.size(); ++x) {
    const Tensor& w = sites_[x];
    if (w.rank() != 4 || w.dim(2) != w.dim(3)) throw std::invalid_argument("MPO site tensors must be (wl, wr, d, d)");
    if (x > 0 && sites_[x - 1].dim(1) != w.dim(0)) throw std::invalid_argument("MPO bond dimension mismatch");
  }
  if (sites_.front().dim(0) != 1 || sites_.back().dim(1) != 1) {
    throw std::invalid_argument("MPO boundary bonds must have dimension 1");
  }
}

MatrixXc Mpo::dense() const {
  // acc[b] holds the partial operator on sites [0, x] ending in bond state b.
  std::vector<MatrixXc> acc(1, MatrixXc::Ones(1, 1));
  for (const Tensor& w : sites_) {
    const std::size_t wl = w.dim(0);
    const std::size_t wr = w.dim(1);
    const std::size_t d = w.dim(2);
    const auto prev_dim = acc[0].rows();
    std::vector<MatrixXc> next(wr, MatrixXc::Zero(prev_dim * static_cast<Eigen::Index>(d), prev_dim * static_cast<Eigen::Index>(d)));
    for (std::size_t a = 0; a < wl; ++a) {
      for (std::size_t b = 0; b < wr; ++b) {
        MatrixXc op(d, d);
        bool nonzero = false;
        for (std::size_t o = 0; o < d; ++o) {
          for (std::size_t i = 0; i < d; ++i) {
            op(o, i) = w.at({a, b, o, i});
            nonzero = nonzero || op(o, i) != cplx{};
          }
        }
        if (!nonzero) continue;
        next[b] += kron(Tensor::from_matrix(acc[a]), Tensor::from_matrix(op)).matrix(1);
      }
    }
    acc = std::move(next);
  }
  return acc[0];
}

namespace pauli_matrices {
Tensor identity() { return Tensor::identity(2); }
Tensor x() { return Tensor({2, 2}, {0.0, 1.0, 1.0, 0.0}); }
Tensor y() { return Tensor({2, 2}, {0.0, cplx{0.0, -1.0}, cplx{0.0, 1.0}, 0.0}); }
Tensor z() { return Tensor({2, 2}, {1.0, 0.0, 0.0, -1.0}); }
}  // namespace pauli_matrices

Mpo tfim_mpo(const TfimParams& p) {
  p.validate();
  const Tensor id = pauli_matrices::identity();
  const Tensor sz = pauli_matrices::z();
  const Tensor onsite = pauli_matrices::x().scaled(-p.g) + sz.scaled(-p.longitudinal);

  // Bulk W[a][b]: row 2 is the "not yet placed" state, column 0 "done".
  auto put = [](Tensor& w, std::size_t a, std::size_t b, const Tensor& op) {
    for (std::size_t o = 0; o < 2; ++o)
      for (std::size_t i = 0; i < 2; ++i) w.at({a, b, o, i}) = op.at({o, i});
  };
  Tensor bulk({3, 3, 2, 2});
  put(bulk, 0, 0, id);
  put(bulk, 1, 0, sz);
  put(bulk, 2, 0, onsite);
  put(bulk, 2, 1, sz.scaled(-1.0));
  put(bulk, 2, 2, id);

  std::vector<Tensor> sites;
  sites.reserve(p.length);
  for (std::size_t x = 0; x < p.length; ++x) {
    const std::size_t row_lo = x == 0 ? 2 : 0;
    const std::size_t col_hi = x + 1 == p.length ? 1 : 3;
    Tensor w({x == 0 ? std::size_t{1} : std::size_t{3}, col_hi, 2, 2});
    for (std::size_t a = row_lo; a < 3; ++a)
      for (std::size_t b = 0; b < col_hi; ++b)
        for (std::size_t o = 0; o < 2; ++o)
          for (std::size_t i = 0; i < 2; ++i) w.at({a - row_lo, b, o, i}) = bulk.at({a, b, o, i});
    sites.push_back(std::move(w));
  }
  return Mpo(std::move(sites));
}

void apply_tfim(const TfimParams& p, const VectorXc& in, VectorXc& out) {
  const std::size_t L = p.length;
  const auto dim = static_cast<std::size_t>(in.size());
  out.resize(in.size());
  for (std::size_t s = 0; s < dim; ++s) {
    double diag = 0.0;
    for (std::size_t x = 0; x < L; ++x) {
      const double zx = ((s >> (L - 1 - x)) & 1U) ? -1.0 : 1.0;
      diag -= p.longitudinal * zx;
      if (x + 1 < L) {
        const double zn = ((s >> (L - 2 - x)) & 1U) ? -1.0 : 1.0;
        diag -= zx * zn;
      }
    }
    cplx acc = diag * in[static_cast<Eigen::Index>(s)];
    for (std::size_t x = 0; x < L; ++x) acc -= p.g * in[static_cast<Eigen::Index>(s ^ (std::size_t{1} << (L - 1 - x)))];
    out[static_cast<Eigen::Index>(s)] = acc;
  }
}

ExactGroundState exact_ground_state(const TfimParams& p) {
  p.validate();
  if (p.length > kMaxExactLength) {
    throw std::invalid_argument("exact diagonalization limited to L <= " + std::to_string(kMaxExactLength));
  }
  const auto dim = Eigen::Index{1} << p.length;
  // Deterministic, generic start vector.
  VectorXc start(dim);
  for (Eigen::Index i = 0; i < dim; ++i) start[i] = cplx{1.0 + 0.1 * std::sin(0.7 * static_cast<double>(i)), 0.0};
  LanczosOptions opts;
  opts.krylov_dim = 120;
  opts.max_restarts = 400;
  opts.tolerance = 1e-12;
  const auto res = lanczos_lowest([&](const VectorXc& v, VectorXc& w) { apply_tfim(p, v, w); }, start, opts);
  // Gauge the global phase so the largest amplitude is real positive.
  Eigen::Index arg = 0;
  res.eigenvector.cwiseAbs().maxCoeff(&arg);
  const cplx phase = std::conj(res.eigenvector[arg]) / std::abs(res.eigenvector[arg]);
  return {res.eigenvalue, res.eigenvector * phase};
}

namespace {

std::size_t qubit_count(const VectorXc& state) {
  const auto dim = static_cast<std::size_t>(state.size());
  std::size_t L = 0;
  while ((std::size_t{1} << L) < dim) ++L;
  if ((std::size_t{1} << L) != dim) throw std::invalid_argument("state length is not a power of two");
  return L;
}

// Reduced density matrix on `a_sites` by axis permutation and reshape.
MatrixXc reduced_density(const VectorXc& state, const std::vector<std::size_t>& a_sites, std::size_t L) {
  std::vector<std::size_t> perm = a_sites;
  for (std::size_t x = 0; x < L; ++x) {
    if (!std::binary_search(a_sites.begin(), a_sites.end(), x)) perm.push_back(x);
  }
  const Tensor psi = Tensor::from_vector(state).reshape(Tensor::Shape(L, 2));
  const MatrixXc m = psi.permute(perm).matrix(a_sites.size());
  return m * m.adjoint();
}

}  // namespace

double exact_purity(const VectorXc& state, std::span<const std::size_t> sites, int n) {
  if (n < 2) throw std::invalid_argument("Renyi index must be >= 2");
  const std::size_t L = qubit_count(state);
  std::vector<std::size_t> a(sites.begin(), sites.end());
  std::sort(a.begin(), a.end());
  if (std::adjacent_find(a.begin(), a.end()) != a.end()) throw std::invalid_argument("repeated site in subsystem");
  if (!a.empty() && a.back() >= L) throw std::out_of_range("subsystem site outside chain");
  if (a.empty() || a.size() == L) return 1.0;

  // For a pure state both sides share the spectrum; trace out the larger one.
  std::vector<std::size_t> keep = a;
  if (a.size() > L / 2 + 1) {
    keep.clear();
    for (std::size_t x = 0; x < L; ++x)
      if (!std::binary_search(a.begin(), a.end(), x)) keep.push_back(x);
  }
  const MatrixXc rho = reduced_density(state, keep, L) / state.squaredNorm();
  MatrixXc power = rho;
  for (int k = 2; k < n; ++k) power = power * rho;
  return (power.cwiseProduct(rho.transpose())).sum().real();
}

double exact_renyi(const VectorXc& state, std::span<const std::size_t> sites, int n) {
  return std::log(exact_purity(state, sites, n)) / (1.0 - n);
}

}  // namespace twistops
