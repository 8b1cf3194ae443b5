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

#include "twistops/lanczos.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace twistops {

LanczosResult lanczos_lowest(const LinearOperator& apply, VectorXc start, const LanczosOptions& options) {
  const Eigen::Index dim = start.size();
  if (dim == 0) throw std::invalid_argument("lanczos on an empty space");
  LanczosResult result;
  double nrm = start.norm();
  if (nrm == 0.0) {
    start = VectorXc::Ones(dim);
    nrm = start.norm();
  }
  VectorXc v = start / nrm;
  VectorXc w(dim);

  const int m_max = static_cast<int>(std::min<Eigen::Index>(options.krylov_dim, dim));
  for (int restart = 0; restart <= options.max_restarts; ++restart) {
    std::vector<VectorXc> basis;
    basis.reserve(m_max);
    std::vector<double> alpha;
    std::vector<double> beta;
    basis.push_back(v);
    for (int j = 0; j < m_max; ++j) {
      apply(basis[j], w);
      ++result.matvecs;
      const cplx a = basis[j].dot(w);
      if (std::abs(a.imag()) > options.hermiticity_tolerance * (1.0 + std::abs(a.real()))) {
        throw NonHermitianError("Rayleigh quotient has imaginary part " + std::to_string(a.imag()));
      }
      alpha.push_back(a.real());
      // Full reorthogonalization, applied twice for stability.
      for (int pass = 0; pass < 2; ++pass) {
        for (const auto& q : basis) w -= q * q.dot(w);
      }
      const double b = w.norm();
      if (j + 1 == m_max || b < 1e-14 * (1.0 + std::abs(a.real()))) break;
      beta.push_back(b);
      basis.push_back(w / b);
    }

    const auto m = static_cast<Eigen::Index>(alpha.size());
    Eigen::MatrixXd tri = Eigen::MatrixXd::Zero(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
      tri(i, i) = alpha[i];
      if (i + 1 < m) tri(i, i + 1) = tri(i + 1, i) = beta[i];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(tri);
    const double theta = eig.eigenvalues()(0);
    const Eigen::VectorXd y = eig.eigenvectors().col(0);
    VectorXc ritz = VectorXc::Zero(dim);
    for (Eigen::Index i = 0; i < m; ++i) ritz += basis[i] * y(i);
    ritz.normalize();

    apply(ritz, w);
    ++result.matvecs;
    const double residual = (w - theta * ritz).norm();
    result.eigenvalue = theta;
    result.eigenvector = ritz;
    result.residual = residual;
    if (residual <= options.tolerance * std::max(1.0, std::abs(theta))) {
      result.converged = true;
      return result;
    }
    v = ritz;
  }
  return result;
}

}  // namespace twistops
