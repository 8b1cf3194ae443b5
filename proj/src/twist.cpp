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

#include "twistops/twist.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "replica_env.hpp"
#include "twistops/io.hpp"

namespace twistops {

using detail::Labeled;

const char* to_string(Direction d) { return d == Direction::kForward ? "forward" : "backward"; }

Direction direction_from_string(const std::string& s) {
  if (s == "forward") return Direction::kForward;
  if (s == "backward") return Direction::kBackward;
  throw std::invalid_argument("direction must be 'forward' or 'backward', got '" + s + "'");
}

InverseBlock invert_block(const Tensor& block, double threshold) {
  if (block.rank() != 3) throw std::invalid_argument("block tensor must be (chi_l, D, chi_r)");
  const std::size_t cl = block.dim(0);
  const std::size_t D = block.dim(1);
  const std::size_t cr = block.dim(2);
  // m[i, (mu nu)] = A[mu, i, nu]
  const MatrixXc m = block.permute({1, 0, 2}).matrix(1);
  Eigen::JacobiSVD<MatrixXc> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();
  InverseBlock out;
  out.report.l = 0;
  out.report.virtual_dim = cl * cr;
  const double cutoff = s.size() > 0 ? threshold * s(0) : 0.0;
  MatrixXc pinv = MatrixXc::Zero(static_cast<Eigen::Index>(cl * cr), static_cast<Eigen::Index>(D));
  for (Eigen::Index k = 0; k < s.size(); ++k) {
    if (s(k) <= cutoff || s(k) == 0.0) break;
    pinv += svd.matrixV().col(k) * (1.0 / s(k)) * svd.matrixU().col(k).adjoint();
    out.report.rank += 1;
    out.report.smallest_retained = s(k);
  }
  out.report.injective = out.report.rank == cl * cr;
  // One Newton-Schulz step recovers digits lost to the condition number.
  if (out.report.injective) pinv = 2.0 * pinv - pinv * (m * pinv);
  out.inverse = Tensor::from_matrix(pinv).reshape({cl, cr, D}).permute({0, 2, 1});
  return out;
}

std::size_t TwistOperator::dimension() const {
  std::size_t dim = 1;
  for (int r = 0; r < n; ++r) dim *= twist_block.dim(1);
  return dim;
}

MatrixXc TwistOperator::dense() const {
  const std::size_t dim = dimension();
  if (dim > kMaxDenseTwist) {
    throw std::length_error("dense twist of dimension " + std::to_string(dim) + " exceeds the cap " +
                            std::to_string(kMaxDenseTwist));
  }
  // Per replica X_r[q, p, out-leg, in-leg]: the block and its inverse share the
  // virtual leg that P leaves in place.
  const bool forward = direction == Direction::kForward;
  const Labeled m{twist_block, forward ? std::vector<int>{0, 1, 2} : std::vector<int>{2, 1, 0}};
  const Labeled minv{inverse, forward ? std::vector<int>{0, 3, 4} : std::vector<int>{4, 3, 0}};
  const Labeled x = detail::contract(m, minv).ordered({1, 2, 3, 4});  // (q, out, p, in)
  auto leg = [this](int r) { return 100 + (r % n); };
  Labeled acc{Tensor::scalar(1.0), {}};
  for (int r = 0; r < n; ++r) {
    Labeled xr = x;
    // out-leg of replica r is the in-leg of replica r + 1.
    xr.labels = {200 + r, leg(r + 1), 300 + r, leg(r)};
    acc = detail::contract(acc, xr);
  }
  std::vector<int> order;
  for (int r = 0; r < n; ++r) order.push_back(200 + r);
  for (int r = 0; r < n; ++r) order.push_back(300 + r);
  return acc.ordered(order).t.matrix(static_cast<std::size_t>(n));
}

MatrixXc TwistOperator::projector() const {
  if (dimension() > kMaxDenseTwist) throw std::length_error("dense projector exceeds the cap");
  const MatrixXc m = twist_block.permute({1, 0, 2}).matrix(1);
  const MatrixXc minv = inverse.permute({0, 2, 1}).matrix(2);
  const MatrixXc one = m * minv;
  MatrixXc acc = MatrixXc::Identity(1, 1);
  for (int r = 0; r < n; ++r) acc = kron(Tensor::from_matrix(acc), Tensor::from_matrix(one)).matrix(1);
  return acc;
}

TwistOperator build_twist(const Tensor& block, const InverseBlock& inv, int n, Direction direction) {
  if (n < 2) throw std::invalid_argument("twist needs at least two replicas");
  if (inv.inverse.shape() != block.shape()) throw std::invalid_argument("inverse does not match block");
  TwistOperator t;
  t.twist_block = block;
  t.inverse = inv.inverse;
  t.n = n;
  t.direction = direction;
  t.report = inv.report;
  t.l = inv.report.l == 0 ? 1 : inv.report.l;
  t.phys_dim = block.dim(1);
  return t;
}

TwistOperator orthocenter_twist(const Mps& s, std::size_t x, int n, Direction direction) {
  const Mps c = move_center(s, x);
  const Tensor& center = c.site(x);
  InverseBlock inv = invert_block(center);
  inv.report.l = 1;
  TwistOperator t = build_twist(center, inv, n, direction);
  t.site = x;
  t.phys_dim = c.phys_dim(x);
  t.source = "orthocenter";
  return t;
}

TwistOperator block_twist(const Mps& s, std::size_t x, std::size_t l, int n, Direction direction) {
  const Tensor b = block(s, x, l);
  InverseBlock inv = invert_block(b);
  inv.report.l = l;
  TwistOperator t = build_twist(b, inv, n, direction);
  t.site = x;
  t.l = l;
  t.phys_dim = s.phys_dim(x);
  t.source = "block";
  return t;
}

Insertion at(const TwistOperator& t, std::size_t site) {
  return {.site = site, .twist = &t, .dense = nullptr, .l = t.l, .n = t.n};
}

cplx expectation(const Mps& s, std::span<const Insertion> insertions) {
  if (insertions.empty()) return overlap(s, s);
  std::vector<Insertion> ins(insertions.begin(), insertions.end());
  std::sort(ins.begin(), ins.end(), [](const Insertion& a, const Insertion& b) { return a.site < b.site; });
  const int n = ins.front().n;
  if (n < 2 || n > kMaxSweepReplicas) throw std::invalid_argument("replica count must be in [2, 4]");
  for (std::size_t i = 0; i < ins.size(); ++i) {
    const Insertion& a = ins[i];
    if ((a.twist == nullptr) == (a.dense == nullptr)) throw std::invalid_argument("insertion needs exactly one operator");
    if (a.n != n) throw std::invalid_argument("insertions disagree on the replica count");
    if (a.l == 0 || a.site + a.l > s.length()) throw std::out_of_range("insertion block outside chain");
    if (i > 0 && ins[i - 1].site + ins[i - 1].l > a.site) throw std::invalid_argument("insertion supports overlap");
  }
  const std::size_t first = ins.front().site;
  const Mps c = move_center(s, first);
  detail::ReplicaEnvironment env(n, c.bond_dim(first));
  std::size_t x = first;
  for (const Insertion& a : ins) {
    for (; x < a.site; ++x) env.absorb_site(c.site(x));
    const Tensor b = block(c, a.site, a.l);
    if (a.twist != nullptr) {
      if (a.twist->twist_block.dim(1) != b.dim(1)) throw std::invalid_argument("twist block dimension does not match the chain");
      // Small physical spaces are cheaper through the dense operator: the
      // factored form opens two virtual legs of the twist block per replica.
      if (a.twist->dimension() <= kDenseSweepDimension) {
        env.absorb_block_operator(b, a.twist->dense());
      } else {
        env.absorb_factored_twist(b, a.twist->twist_block, a.twist->inverse, a.twist->direction == Direction::kForward);
      }
    } else {
      env.absorb_block_operator(b, *a.dense);
    }
    x = a.site + a.l;
  }
  return env.close();
}

std::vector<TwistOperator> interval_twists(const Mps& s, std::span<const Interval> intervals, std::size_t l, int n) {
  std::vector<TwistOperator> out;
  for (const Interval& iv : intervals) {
    if (iv.first > iv.last + 1 || iv.last >= s.length()) throw std::out_of_range("interval outside chain");
    if (iv.first > 0) {
      if (iv.first < l) throw std::out_of_range("no room for the opening block left of the interval");
      out.push_back(block_twist(s, iv.first - l, l, n, Direction::kForward));
    }
    if (iv.last + 1 < s.length()) {
      if (iv.last + l >= s.length()) throw std::out_of_range("no room for the closing block right of the interval");
      out.push_back(block_twist(s, iv.last + 1, l, n, Direction::kBackward));
    }
  }
  return out;
}

cplx interval_expectation(const Mps& s, std::span<const Interval> intervals, std::size_t l, int n) {
  const auto twists = interval_twists(s, intervals, l, n);
  std::vector<Insertion> ins;
  for (const auto& t : twists) ins.push_back(at(t, t.site));
  if (ins.empty()) return std::pow(overlap(s, s), n);
  return expectation(s, ins);
}

double cross_ratio(double x1, double x2, double x3, double x4) {
  return std::abs(x1 - x2) * std::abs(x3 - x4) / (std::abs(x1 - x3) * std::abs(x2 - x4));
}

FourPoint four_point(const Mps& s, std::size_t x1, std::size_t x2, std::size_t x3, std::size_t x4, std::size_t l,
                     int n) {
  if (x2 + 1 < x1 || x2 >= x3 || x3 > x4) throw std::invalid_argument("four_point needs x1 <= x2 + 1, x2 < x3 <= x4");
  const Interval iv[] = {{x1, x2}, {x3, x4}};
  return {cross_ratio(static_cast<double>(x1), static_cast<double>(x2), static_cast<double>(x3),
                      static_cast<double>(x4)),
          interval_expectation(s, iv, l, n)};
}

std::string twist_to_json(const TwistOperator& t, double g, std::size_t chain_length) {
  nlohmann::ordered_json j;
  j["format"] = "twistops-twist";
  j["version"] = kFormatVersion;
  j["n"] = t.n;
  j["l"] = t.l;
  j["direction"] = to_string(t.direction);
  j["site"] = t.site;
  j["source"] = t.source;
  j["source_hash"] = hash_hex(tensor_hash(t.twist_block));
  j["g"] = g;
  j["L"] = chain_length;
  j["injective"] = t.report.injective;
  j["rank"] = t.report.rank;
  const MatrixXc m = t.dense();
  j["dimension"] = m.rows();
  std::vector<double> re;
  std::vector<double> im;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      re.push_back(m(r, c).real());
      im.push_back(m(r, c).imag());
    }
  }
  j["matrix"] = {{"re", re}, {"im", im}};
  return j.dump();
}

}  // namespace twistops
