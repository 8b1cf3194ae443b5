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

#include "twistops/fitters.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "twistops/models.hpp"
#include "twistops/pauli.hpp"

namespace twistops {
namespace {

MatrixXc kron_power(const MatrixXc& m, int n) {
  MatrixXc acc = MatrixXc::Identity(1, 1);
  for (int r = 0; r < n; ++r) acc = kron(Tensor::from_matrix(acc), Tensor::from_matrix(m)).matrix(1);
  return acc;
}

// (D, chi_l chi_r) view of a block.
MatrixXc block_map(const Tensor& block) { return block.permute({1, 0, 2}).matrix(1); }

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

struct LinearFit {
  double intercept = 0.0;
  double slope = 0.0;
};

LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double det = n * sxx - sx * sx;
  if (det == 0.0) throw FitError("linear fit needs two distinct abscissae");
  return {(sxx * sy - sx * sxy) / det, (n * sxy - sx * sy) / det};
}

double power_law_cost(std::span<const PowerLawPoint> pts, const Eigen::Vector3d& p) {
  double c = 0.0;
  for (const auto& q : pts) {
    const double r = p(0) * std::pow(q.xi, p(1)) + p(2) - q.Lc;
    c += r * r;
  }
  return 0.5 * c;
}

// A and k by linear least squares at fixed omega.
Eigen::Vector3d linear_at(std::span<const PowerLawPoint> pts, double omega) {
  Eigen::MatrixXd a(static_cast<Eigen::Index>(pts.size()), 2);
  Eigen::VectorXd y(static_cast<Eigen::Index>(pts.size()));
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    a(r, 0) = std::pow(pts[i].xi, omega);
    a(r, 1) = 1.0;
    y(r) = pts[i].Lc;
  }
  const Eigen::Vector2d sol = a.colPivHouseholderQr().solve(y);
  return {sol(0), omega, sol(1)};
}

void check_points(std::span<const PowerLawPoint> pts) {
  if (pts.size() < 4) throw std::invalid_argument("power-law fit needs at least four points");
  for (const auto& q : pts) {
    if (!(q.xi > 0.0) || !std::isfinite(q.Lc)) throw std::invalid_argument("power-law fit needs xi > 0 and finite L_c");
  }
  const bool same = std::all_of(pts.begin(), pts.end(), [&](const PowerLawPoint& q) { return q.xi == pts[0].xi; });
  if (same) throw std::invalid_argument("degenerate power-law data: all xi equal");
}

}  // namespace

TransferRecord transfer_record(double g, const Mps& reference, const Mps& target) {
  if (reference.length() < 2 || target.length() < 2) throw std::invalid_argument("transfer needs chains of length >= 2");
  const std::size_t xr = reference.length() / 2 - 1;
  const std::size_t xt = target.length() / 2 - 1;
  const TwistOperator t = orthocenter_twist(reference, xr, 2, Direction::kForward);
  const Insertion ins[] = {at(t, xt)};
  const double value = expectation(target, ins).real();
  TransferRecord rec;
  rec.g = g;
  rec.L_ref = reference.length();
  rec.L_tar = target.length();
  rec.S2_exact = schmidt_renyi(target, target.length() / 2, 2);
  rec.S2_twist = value > 0.0 ? -std::log(value) : std::numeric_limits<double>::infinity();
  rec.rel_error = std::abs(rec.S2_exact - rec.S2_twist) / rec.S2_exact;
  rec.underestimate_ok = rec.S2_exact >= rec.S2_twist - kUnderestimateSlack;
  return rec;
}

std::vector<TransferRecord> transfer_experiment(double g, std::span<const std::size_t> refs, std::size_t L_tar,
                                                const TransferOptions& options) {
  auto ground = [&](std::size_t L) {
    DmrgResult r = dmrg(tfim_mpo({.length = L, .g = g}), options.dmrg);
    if (!r.converged) {
      throw ConvergenceError("DMRG did not converge for g=" + std::to_string(g) + ", L=" + std::to_string(L));
    }
    return std::move(r.state);
  };
  for (std::size_t L : refs) {
    if (L > L_tar || (L == L_tar && !options.diagnostic)) {
      throw std::invalid_argument("reference length " + std::to_string(L) + " must be below the target length");
    }
  }
  const Mps target = ground(L_tar);
  std::vector<TransferRecord> out;
  for (std::size_t L : refs) out.push_back(transfer_record(g, L == L_tar ? target : ground(L), target));
  return out;
}

LcFit extract_Lc(std::span<const TransferRecord> records, double tol, const LcOptions& options) {
  if (!(tol > 0.0)) throw std::invalid_argument("tolerance must be positive");
  std::vector<TransferRecord> sorted(records.begin(), records.end());
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.L_ref < b.L_ref; });
  std::vector<double> x;
  std::vector<double> y;
  // The exponential regime ends at the noise floor or where the error stops
  // decreasing, whichever comes first.
  for (const auto& r : sorted) {
    if (!std::isfinite(r.rel_error) || r.rel_error <= options.floor) break;
    if (!y.empty() && std::log(r.rel_error) >= y.back()) break;
    x.push_back(static_cast<double>(r.L_ref));
    y.push_back(std::log(r.rel_error));
  }
  if (x.size() < 3) throw FitError("fewer than three records above the noise floor");
  std::vector<double> slopes;
  for (std::size_t i = 0; i + 1 < x.size(); ++i) slopes.push_back((y[i + 1] - y[i]) / (x[i + 1] - x[i]));
  std::size_t first = 0;
  for (std::size_t i = 0; i + 1 < slopes.size(); ++i) {
    if (slopes[i] < 0.0 && std::abs(slopes[i] - slopes[i + 1]) <= options.slope_window * std::abs(slopes[i + 1])) {
      first = i;
      break;
    }
  }
  const std::span<const double> xs(x.begin() + static_cast<std::ptrdiff_t>(first), x.end());
  const std::span<const double> ys(y.begin() + static_cast<std::ptrdiff_t>(first), y.end());
  const LinearFit f = linear_fit(xs, ys);
  if (!(f.slope < 0.0)) throw FitError("relative error does not decay with the reference length");
  LcFit out;
  out.slope = f.slope;
  out.intercept = f.intercept;
  out.first = first;
  out.used = xs.size();
  out.Lc = (std::log(tol) - f.intercept) / f.slope;
  return out;
}

PowerLawParams fit_power_law_point(std::span<const PowerLawPoint> pts) {
  check_points(pts);
  // Start: log-log slope of L_c - min/2, then linear A, k at that omega.
  double lo = pts[0].Lc;
  for (const auto& q : pts) lo = std::min(lo, q.Lc);
  std::vector<double> lx;
  std::vector<double> ly;
  for (const auto& q : pts) {
    const double shifted = q.Lc - 0.5 * lo;
    if (shifted > 0.0) {
      lx.push_back(std::log(q.xi));
      ly.push_back(std::log(shifted));
    }
  }
  double omega0 = 1.0;
  if (lx.size() >= 2) {
    try {
      omega0 = linear_fit(lx, ly).slope;
    } catch (const FitError&) {
    }
  }
  Eigen::Vector3d p = linear_at(pts, omega0);
  double cost = power_law_cost(pts, p);
  double damping = 1e-3;
  const auto n = static_cast<Eigen::Index>(pts.size());
  for (int iter = 0; iter < 2000 && cost > 0.0; ++iter) {
    Eigen::MatrixXd jac(n, 3);
    Eigen::VectorXd res(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& q = pts[static_cast<std::size_t>(i)];
      const double xw = std::pow(q.xi, p(1));
      jac(i, 0) = xw;
      jac(i, 1) = p(0) * xw * std::log(q.xi);
      jac(i, 2) = 1.0;
      res(i) = p(0) * xw + p(2) - q.Lc;
    }
    const Eigen::Matrix3d jtj = jac.transpose() * jac;
    const Eigen::Vector3d grad = jac.transpose() * res;
    bool accepted = false;
    while (damping < 1e20) {
      Eigen::Matrix3d lhs = jtj;
      for (int d = 0; d < 3; ++d) lhs(d, d) += damping * std::max(jtj(d, d), 1e-300);
      const Eigen::Vector3d step = lhs.ldlt().solve(-grad);
      const Eigen::Vector3d trial = p + step;
      const double c = power_law_cost(pts, trial);
      if (std::isfinite(c) && c < cost) {
        const bool tiny = step.norm() <= 1e-15 * (p.norm() + 1e-15);
        p = trial;
        cost = c;
        damping = std::max(damping / 3.0, 1e-12);
        accepted = !tiny;
        break;
      }
      damping *= 4.0;
    }
    if (!accepted) break;
  }
  return {p(0), p(1), p(2)};
}

PowerLawFit fit_power_law(std::span<const PowerLawPoint> points, int n_boot, std::uint64_t seed) {
  if (n_boot < 0) throw std::invalid_argument("bootstrap count must be non-negative");
  const PowerLawParams best = fit_power_law_point(points);
  PowerLawFit out;
  out.A = best.A;
  out.omega = best.omega;
  out.k = best.k;
  out.cost = power_law_cost(points, {best.A, best.omega, best.k});
  out.n_boot = n_boot;
  out.seed = seed;
  if (n_boot < 2) return out;
  std::mt19937_64 rng(seed);
  const std::size_t np = points.size();
  Eigen::MatrixXd draws(n_boot, 3);
  std::vector<PowerLawPoint> sample(np);
  std::ptrdiff_t distinct = 0;
  {
    std::vector<double> xi;
    for (const auto& q : points) xi.push_back(q.xi);
    std::sort(xi.begin(), xi.end());
    distinct = std::unique(xi.begin(), xi.end()) - xi.begin();
  }
  for (int b = 0; b < n_boot; ++b) {
    // Redraw resamples with fewer distinct xi than free parameters plus one;
    // those leave A and k degenerate.
    for (;;) {
      for (auto& q : sample) q = points[std::min(np - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(np)))];
      std::vector<double> xi;
      for (const auto& q : sample) xi.push_back(q.xi);
      std::sort(xi.begin(), xi.end());
      if (std::unique(xi.begin(), xi.end()) - xi.begin() >= std::min<std::ptrdiff_t>(4, distinct)) break;
    }
    const PowerLawParams p = fit_power_law_point(sample);
    draws.row(b) << p.A, p.omega, p.k;
  }
  const Eigen::RowVector3d mean = draws.colwise().mean();
  const Eigen::RowVector3d sd =
      ((draws.rowwise() - mean).array().square().colwise().sum() / static_cast<double>(n_boot - 1)).sqrt();
  out.A_err = sd(0);
  out.omega_err = sd(1);
  out.k_err = sd(2);
  return out;
}

LstsqTarget swap_target(const Tensor& block, int n, Direction direction) {
  if (block.rank() != 3) throw std::invalid_argument("block tensor must be (chi_l, D, chi_r)");
  if (n < 2) throw std::invalid_argument("swap target needs at least two replicas");
  const std::size_t cl = block.dim(0);
  const std::size_t cr = block.dim(2);
  LstsqTarget t;
  t.block = block;
  t.n = n;
  t.direction = direction;
  t.L = kron_power(block_map(block), n);
  t.W = MatrixXc(t.L.rows(), t.L.cols());
  // Column (mu_r, nu_r)_r of W is column (mu_r, nu_(r+1))_r of L for the
  // forward twist and (mu_(r+1), nu_r)_r for the backward one.
  const std::size_t pair = cl * cr;
  const auto cols = static_cast<std::size_t>(t.L.cols());
  const auto un = static_cast<std::size_t>(n);
  std::vector<std::size_t> mu(un);
  std::vector<std::size_t> nu(un);
  for (std::size_t c = 0; c < cols; ++c) {
    std::size_t rest = c;
    for (std::size_t r = un; r-- > 0;) {
      const std::size_t v = rest % pair;
      rest /= pair;
      mu[r] = v / cr;
      nu[r] = v % cr;
    }
    std::size_t src = 0;
    for (std::size_t r = 0; r < un; ++r) {
      const std::size_t m = direction == Direction::kForward ? mu[r] : mu[(r + 1) % un];
      const std::size_t v = direction == Direction::kForward ? nu[(r + 1) % un] : nu[r];
      src = src * pair + m * cr + v;
    }
    t.W.col(static_cast<Eigen::Index>(c)) = t.L.col(static_cast<Eigen::Index>(src));
  }
  return t;
}

namespace {

// H^(-1/2) of a Hermitian positive matrix; eigenvalues are floored relative
// to the largest so rank-deficient blocks stay finite.
MatrixXc inverse_sqrt(const MatrixXc& h) {
  Eigen::SelfAdjointEigenSolver<MatrixXc> es(h);
  Eigen::VectorXd ev = es.eigenvalues();
  const double floor = std::max(ev.maxCoeff(), 0.0) * 1e-300 + std::numeric_limits<double>::min();
  for (Eigen::Index i = 0; i < ev.size(); ++i) ev(i) = 1.0 / std::sqrt(std::max(ev(i), floor));
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
}

}  // namespace

Tensor balance_block(const Tensor& block, double tol, int max_sweeps) {
  if (block.rank() != 3) throw std::invalid_argument("block tensor must be (chi_l, D, chi_r)");
  const auto cl = static_cast<Eigen::Index>(block.dim(0));
  const auto d = static_cast<Eigen::Index>(block.dim(1));
  const auto cr = static_cast<Eigen::Index>(block.dim(2));
  MatrixXc m = block_map(block);
  auto transform = [&](const MatrixXc& x, const MatrixXc& y) {
    MatrixXc k(cl * cr, cl * cr);
    for (Eigen::Index a = 0; a < cl; ++a)
      for (Eigen::Index al = 0; al < cl; ++al) k.block(a * cr, al * cr, cr, cr) = x(a, al) * y;
    m = m * k;
  };
  for (int s = 0; s < max_sweeps; ++s) {
    const MatrixXc g = m.adjoint() * m;
    MatrixXc gl = MatrixXc::Zero(cl, cl);
    for (Eigen::Index a = 0; a < cl; ++a)
      for (Eigen::Index b = 0; b < cl; ++b)
        for (Eigen::Index r = 0; r < cr; ++r) gl(a, b) += g(a * cr + r, b * cr + r);
    gl /= static_cast<double>(cr);
    // The right step leaves its marginal exact, so the left one measures progress.
    if (s > 0 && (gl - MatrixXc::Identity(cl, cl)).norm() < tol) break;
    transform(inverse_sqrt(gl), MatrixXc::Identity(cr, cr));
    const MatrixXc h = m.adjoint() * m;
    MatrixXc gr = MatrixXc::Zero(cr, cr);
    for (Eigen::Index a = 0; a < cr; ++a)
      for (Eigen::Index b = 0; b < cr; ++b)
        for (Eigen::Index r = 0; r < cl; ++r) gr(a, b) += h(r * cr + a, r * cr + b);
    transform(MatrixXc::Identity(cl, cl), inverse_sqrt(gr / static_cast<double>(cl)));
  }
  std::vector<cplx> data(block.size());
  for (Eigen::Index a = 0; a < cl; ++a)
    for (Eigen::Index s = 0; s < d; ++s)
      for (Eigen::Index b = 0; b < cr; ++b) data[static_cast<std::size_t>((a * d + s) * cr + b)] = m(s, a * cr + b);
  return Tensor({block.dim(0), block.dim(1), block.dim(2)}, std::move(data));
}

LstsqFit lstsq_operator_fit(const LstsqTarget& target, std::span<const MatrixXc> basis, const LstsqOptions& options) {
  if (basis.empty()) throw std::invalid_argument("least-squares fit needs a non-empty basis");
  if (options.lambda < 0.0) throw std::invalid_argument("Tikhonov parameter must be non-negative");
  const Eigen::Index rows = target.L.rows();
  const Eigen::Index entries = rows * target.L.cols();
  const auto nb = static_cast<Eigen::Index>(basis.size());
  MatrixXc v(entries, nb);
  for (Eigen::Index a = 0; a < nb; ++a) {
    const MatrixXc& op = basis[static_cast<std::size_t>(a)];
    if (op.rows() != rows || op.cols() != rows) throw std::invalid_argument("basis operator does not match the target legs");
    const MatrixXc pa = op * target.L;
    v.col(a) = Eigen::Map<const VectorXc>(pa.data(), entries);
  }
  const Eigen::Map<const VectorXc> w(target.W.data(), entries);
  const MatrixXc gram = v.adjoint() * v;
  const VectorXc rhs = v.adjoint() * w;

  VectorXc coef;
  if (options.hermitian) {
    const Eigen::MatrixXd gr = gram.real();
    const Eigen::VectorXd br = rhs.real();
    Eigen::VectorXd a;
    if (options.lambda > 0.0) {
      a = (gr + options.lambda * Eigen::MatrixXd::Identity(nb, nb)).ldlt().solve(br);
    } else {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gr);
      const double cut = options.pinv_threshold * es.eigenvalues().cwiseAbs().maxCoeff();
      Eigen::VectorXd inv = es.eigenvalues().unaryExpr([cut](double e) { return e > cut ? 1.0 / e : 0.0; });
      a = es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose() * br;
    }
    coef = a.cast<cplx>();
  } else if (options.lambda > 0.0) {
    coef = (gram + options.lambda * MatrixXc::Identity(nb, nb)).ldlt().solve(rhs);
  } else {
    Eigen::SelfAdjointEigenSolver<MatrixXc> es(gram);
    const double cut = options.pinv_threshold * es.eigenvalues().cwiseAbs().maxCoeff();
    Eigen::VectorXd inv = es.eigenvalues().unaryExpr([cut](double e) { return e > cut ? 1.0 / e : 0.0; });
    coef = es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().adjoint() * rhs;
  }

  LstsqFit out;
  out.coefficients.assign(coef.data(), coef.data() + coef.size());
  out.op = MatrixXc::Zero(rows, rows);
  for (Eigen::Index a = 0; a < nb; ++a) out.op += coef(a) * basis[static_cast<std::size_t>(a)];
  const double wn = target.W.norm();
  out.residual = wn == 0.0 ? 0.0 : (out.op * target.L - target.W).norm() / wn;
  return out;
}

LstsqFit lstsq_full_basis_fit(const LstsqTarget& target, std::size_t l, double lambda) {
  if (lambda < 0.0) throw std::invalid_argument("Tikhonov parameter must be non-negative");
  const MatrixXc m = block_map(target.block);
  const auto dim = static_cast<double>(target.L.rows());
  LstsqFit out;
  if (lambda == 0.0) {
    // L^+ = (M^+)^(x)n, with M^+ from the refined block inverse.
    const MatrixXc mplus = invert_block(target.block).inverse.permute({0, 2, 1}).matrix(2);
    out.op = target.W * kron_power(mplus, target.n);
  } else {
    Eigen::SelfAdjointEigenSolver<MatrixXc> es(m * m.adjoint());
    const MatrixXc q = kron_power(es.eigenvectors(), target.n);
    Eigen::VectorXd lam = Eigen::VectorXd::Ones(1);
    for (int r = 0; r < target.n; ++r) {
      Eigen::VectorXd next(lam.size() * es.eigenvalues().size());
      for (Eigen::Index i = 0; i < lam.size(); ++i)
        for (Eigen::Index j = 0; j < es.eigenvalues().size(); ++j)
          next(i * es.eigenvalues().size() + j) = lam(i) * std::max(0.0, es.eigenvalues()(j));
      lam = next;
    }
    const double mu = lambda / dim;
    const Eigen::VectorXd inv = lam.unaryExpr([mu](double e) { return 1.0 / (e + mu); });
    out.op = target.W * target.L.adjoint() * q * inv.asDiagonal() * q.adjoint();
  }
  const double wn = target.W.norm();
  out.residual = wn == 0.0 ? 0.0 : (out.op * target.L - target.W).norm() / wn;
  if (target.block.dim(1) == (std::size_t{1} << l) && l * static_cast<std::size_t>(target.n) <= kMaxPauliQubits) {
    out.coefficients = decompose(out.op, l, target.n).coefficients;
  }
  return out;
}

std::string transfer_csv(std::span<const TransferRecord> records, const Provenance& p) {
  std::ostringstream os;
  os << p.csv_comment() << '\n' << "g,L_ref,L_tar,S2_exact,S2_twist,rel_error\n";
  for (const auto& r : records) {
    os << format_double(r.g) << ',' << r.L_ref << ',' << r.L_tar << ',' << format_double(r.S2_exact) << ','
       << format_double(r.S2_twist) << ',' << format_double(r.rel_error) << '\n';
  }
  return os.str();
}

std::string lc_csv(std::span<const LcRow> rows, const Provenance& p) {
  std::ostringstream os;
  os << p.csv_comment() << '\n' << "g,xi,Lc\n";
  for (const auto& r : rows) os << format_double(r.g) << ',' << format_double(r.xi) << ',' << format_double(r.Lc) << '\n';
  return os.str();
}

std::string power_law_json(const PowerLawFit& fit, const Provenance& p) {
  nlohmann::ordered_json j;
  j["A"] = fit.A;
  j["A_err"] = fit.A_err;
  j["omega"] = fit.omega;
  j["omega_err"] = fit.omega_err;
  j["k"] = fit.k;
  j["k_err"] = fit.k_err;
  j["n_boot"] = fit.n_boot;
  j["seed"] = fit.seed;
  j["provenance"] = nlohmann::ordered_json::parse(p.json());
  return j.dump();
}

}  // namespace twistops
