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

#include "twistops/pauli.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "twistops/io.hpp"

namespace twistops {
namespace {

constexpr cplx kI{0.0, 1.0};

std::size_t pow4(std::size_t m) { return std::size_t{1} << (2 * m); }

void check_qubits(std::size_t m) {
  if (m == 0 || m > kMaxPauliQubits) {
    throw std::invalid_argument("pauli transform supports 1.." + std::to_string(kMaxPauliQubits) + " qubits, got " +
                                std::to_string(m));
  }
}

// Interleaves (row bit, column bit) of every qubit into one base-4 digit
// 2 r + c, qubit 0 most significant.
std::vector<cplx> interleave(const MatrixXc& op, std::size_t m) {
  const std::size_t dim = std::size_t{1} << m;
  std::vector<cplx> out(pow4(m));
  for (std::size_t r = 0; r < dim; ++r) {
    for (std::size_t c = 0; c < dim; ++c) {
      std::size_t idx = 0;
      for (std::size_t q = 0; q < m; ++q) {
        const std::size_t shift = m - 1 - q;
        idx = idx * 4 + 2 * ((r >> shift) & 1) + ((c >> shift) & 1);
      }
      out[idx] = op(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    }
  }
  return out;
}

template <typename Butterfly>
void transform(std::vector<cplx>& v, std::size_t m, Butterfly f) {
  for (std::size_t q = 0; q < m; ++q) {
    const std::size_t stride = pow4(m - 1 - q);
    for (std::size_t base = 0; base < v.size(); base += 4 * stride) {
      for (std::size_t off = 0; off < stride; ++off) {
        cplx* p = &v[base + off];
        f(p[0], p[stride], p[2 * stride], p[3 * stride]);
      }
    }
  }
}

// (T00, T01, T10, T11) -> (cI, cX, cY, cZ), each Tr(sigma T) / 2.
void forward_butterfly(cplx& a, cplx& b, cplx& c, cplx& d) {
  const cplx t00 = a, t01 = b, t10 = c, t11 = d;
  a = 0.5 * (t00 + t11);
  b = 0.5 * (t01 + t10);
  c = 0.5 * kI * (t01 - t10);
  d = 0.5 * (t00 - t11);
}

void inverse_butterfly(cplx& a, cplx& b, cplx& c, cplx& d) {
  const cplx ci = a, cx = b, cy = c, cz = d;
  a = ci + cz;
  b = cx - kI * cy;
  c = cx + kI * cy;
  d = ci - cz;
}

std::vector<cplx> coefficients_of(const MatrixXc& op, std::size_t m) {
  std::vector<cplx> v = interleave(op, m);
  transform(v, m, forward_butterfly);
  return v;
}

// Qubit q sits at bit (m - 1 - q) of a basis index.
std::uint32_t support_mask(PauliString s, std::size_t m) {
  std::uint32_t mask = 0;
  for (std::size_t q = 0; q < m; ++q) {
    if (((s >> (2 * (m - 1 - q))) & 3U) != 0) mask |= 1U << (m - 1 - q);
  }
  return mask;
}

PauliString replica_part(PauliString s, std::size_t l, int n, int r) {
  return static_cast<PauliString>((s >> (2 * l * static_cast<std::size_t>(n - 1 - r))) & (pow4(l) - 1));
}

// Rows are bras of the measurement basis; outcome 0 is the +1 eigenvalue.
Eigen::Matrix2cd basis_change(int letter) {
  const double h = 1.0 / std::sqrt(2.0);
  Eigen::Matrix2cd u;
  switch (letter) {
    case 1: u << h, h, h, -h; break;
    case 2: u << h, -kI * h, h, kI * h; break;
    default: u << 1.0, 0.0, 0.0, 1.0; break;
  }
  return u;
}

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

std::vector<int> pauli_letters(PauliString s, std::size_t qubits) {
  std::vector<int> out(qubits);
  for (std::size_t q = 0; q < qubits; ++q) out[q] = static_cast<int>((s >> (2 * (qubits - 1 - q))) & 3U);
  return out;
}

PauliString pauli_pack(const std::vector<int>& letters) {
  PauliString s = 0;
  for (int a : letters) {
    if (a < 0 || a > 3) throw std::invalid_argument("pauli letter outside 0..3");
    s = s * 4 + static_cast<PauliString>(a);
  }
  return s;
}

std::string pauli_label(PauliString s, std::size_t l, int n) {
  static constexpr char kLetters[] = "IXYZ";
  const auto letters = pauli_letters(s, l * static_cast<std::size_t>(n));
  std::string out;
  for (std::size_t q = 0; q < letters.size(); ++q) {
    if (q > 0 && q % l == 0) out += '|';
    out += kLetters[letters[q]];
  }
  return out;
}

MatrixXc pauli_matrix(PauliString s, std::size_t qubits) {
  static const Tensor kSingle[4] = {
      Tensor({2, 2}, {1.0, 0.0, 0.0, 1.0}),
      Tensor({2, 2}, {0.0, 1.0, 1.0, 0.0}),
      Tensor({2, 2}, {0.0, -kI, kI, 0.0}),
      Tensor({2, 2}, {1.0, 0.0, 0.0, -1.0}),
  };
  Tensor acc = Tensor::scalar(1.0).reshape({1, 1});
  for (int a : pauli_letters(s, qubits)) acc = kron(acc, kSingle[a]);
  return acc.matrix(1);
}

std::uint64_t independent_count(std::size_t l) {
  if (l == 0) throw std::invalid_argument("block length must be positive");
  const std::uint64_t k = (l + 3) * (l + 2) * (l + 1) / 6;
  return k * (k + 1) / 2;
}

SymmetryOrbits symmetry_orbits(std::size_t l) {
  check_qubits(2 * l);
  SymmetryOrbits out;
  out.l = l;
  const std::size_t total = pow4(2 * l);
  out.orbit_of.resize(total);
  std::map<PauliString, std::uint32_t> ids;
  for (PauliString s = 0; s < total; ++s) {
    auto letters = pauli_letters(s, 2 * l);
    std::sort(letters.begin(), letters.begin() + static_cast<std::ptrdiff_t>(l));
    std::sort(letters.begin() + static_cast<std::ptrdiff_t>(l), letters.end());
    std::vector<int> swapped(letters.begin() + static_cast<std::ptrdiff_t>(l), letters.end());
    swapped.insert(swapped.end(), letters.begin(), letters.begin() + static_cast<std::ptrdiff_t>(l));
    const PauliString canon = std::min(pauli_pack(letters), pauli_pack(swapped));
    auto [it, inserted] = ids.try_emplace(canon, static_cast<std::uint32_t>(out.representatives.size()));
    if (inserted) out.representatives.push_back(canon);
    out.orbit_of[s] = it->second;
  }
  return out;
}

double PauliDecomposition::orbit_spread() const {
  if (!has_orbits()) return 0.0;
  double spread = 0.0;
  for (std::size_t s = 0; s < coefficients.size(); ++s) {
    spread = std::max(spread, std::abs(coefficients[s] - coefficients[orbits.representatives[orbits.orbit_of[s]]]));
  }
  return spread;
}

std::size_t PauliDecomposition::distinct_values(double tol) const {
  std::vector<cplx> values;
  if (has_orbits()) {
    for (PauliString r : orbits.representatives) values.push_back(coefficients[r]);
  } else {
    values = coefficients;
  }
  std::sort(values.begin(), values.end(), [](cplx a, cplx b) {
    return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
  });
  std::vector<cplx> kept;
  for (cplx v : values) {
    const bool seen = std::any_of(kept.rbegin(), kept.rend(), [&](cplx k) { return std::abs(k - v) <= tol; });
    if (!seen) kept.push_back(v);
  }
  return kept.size();
}

PauliDecomposition decompose(const MatrixXc& op, std::size_t l, int n) {
  if (n < 1 || l == 0) throw std::invalid_argument("decompose needs l >= 1 and n >= 1");
  const std::size_t m = l * static_cast<std::size_t>(n);
  check_qubits(m);
  const auto dim = static_cast<Eigen::Index>(std::size_t{1} << m);
  if (op.rows() != dim || op.cols() != dim) {
    throw std::invalid_argument("operator is not 2^(n l) square; pauli strings need qubit sites");
  }
  PauliDecomposition dec;
  dec.l = l;
  dec.n = n;
  dec.coefficients = coefficients_of(op, m);
  if (n == 2) dec.orbits = symmetry_orbits(l);
  return dec;
}

PauliDecomposition decompose(const TwistOperator& t) {
  if (t.phys_dim != 2 || t.twist_block.dim(1) != (std::size_t{1} << t.l)) {
    throw std::invalid_argument("pauli decomposition needs qubit sites (d = 2)");
  }
  return decompose(t.dense(), t.l, t.n);
}

MatrixXc reconstruct(const PauliDecomposition& dec) {
  const std::size_t m = dec.qubits();
  std::vector<cplx> v = dec.coefficients;
  transform(v, m, inverse_butterfly);
  const std::size_t dim = std::size_t{1} << m;
  MatrixXc out(dim, dim);
  for (std::size_t idx = 0; idx < v.size(); ++idx) {
    std::size_t r = 0;
    std::size_t c = 0;
    for (std::size_t q = 0; q < m; ++q) {
      const std::size_t digit = (idx >> (2 * (m - 1 - q))) & 3U;
      r = 2 * r + (digit >> 1);
      c = 2 * c + (digit & 1U);
    }
    out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v[idx];
  }
  return out;
}

std::vector<std::vector<PauliString>> group_commuting(const PauliDecomposition& dec, double drop) {
  const std::size_t m = dec.qubits();
  std::vector<PauliString> order;
  for (PauliString s = 1; s < dec.coefficients.size(); ++s) {
    if (std::abs(dec.coefficients[s]) > drop) order.push_back(s);
  }
  std::stable_sort(order.begin(), order.end(), [&](PauliString a, PauliString b) {
    return std::abs(dec.coefficients[a]) > std::abs(dec.coefficients[b]);
  });
  std::vector<std::vector<PauliString>> groups;
  std::vector<std::vector<int>> bases;
  for (PauliString s : order) {
    const auto letters = pauli_letters(s, m);
    bool placed = false;
    for (std::size_t g = 0; g < groups.size() && !placed; ++g) {
      bool ok = true;
      for (std::size_t q = 0; q < m && ok; ++q) ok = letters[q] == 0 || bases[g][q] == 0 || letters[q] == bases[g][q];
      if (!ok) continue;
      for (std::size_t q = 0; q < m; ++q) {
        if (letters[q] != 0) bases[g][q] = letters[q];
      }
      groups[g].push_back(s);
      placed = true;
    }
    if (!placed) {
      groups.push_back({s});
      bases.push_back(letters);
    }
  }
  return groups;
}

MatrixXc block_density(const Mps& s, std::size_t x, std::size_t l) {
  const Mps c = move_center(s, x);
  const MatrixXc m = block(c, x, l).permute({1, 0, 2}).matrix(1);
  return m * m.adjoint();
}

ShotEstimate estimate_exact(const Mps& s, const PauliDecomposition& dec, std::size_t site) {
  const MatrixXc rho = block_density(s, site, dec.l);
  // <p> = Tr(rho p) = 2^l c_p(rho) on one replica.
  const std::vector<cplx> c = coefficients_of(rho, dec.l);
  const double scale = static_cast<double>(std::size_t{1} << dec.l);
  ShotEstimate out;
  cplx value = 0.0;
  for (PauliString a = 0; a < dec.coefficients.size(); ++a) {
    double expect = 1.0;
    for (int r = 0; r < dec.n; ++r) expect *= scale * c[replica_part(a, dec.l, dec.n, r)].real();
    if (std::abs(expect) < 1e-10) out.vanishing.push_back(a);
    value += dec.coefficients[a] * expect;
  }
  out.value = value.real();
  return out;
}

ShotEstimate estimate_sampled(const Mps& s, const PauliDecomposition& dec, std::size_t site, std::uint64_t shots,
                              std::uint64_t seed) {
  if (shots == 0) throw std::invalid_argument("shots must be positive");
  const std::size_t l = dec.l;
  const std::size_t m = dec.qubits();
  const std::size_t dim = std::size_t{1} << l;
  const MatrixXc rho = block_density(s, site, l);

  ShotEstimate out;
  out.shots = shots;
  out.grouping = group_commuting(dec);
  std::mt19937_64 rng(seed);
  double value = dec.coefficients[0].real();
  double variance = 0.0;
  std::vector<std::vector<double>> cdf(static_cast<std::size_t>(dec.n));
  for (const auto& group : out.grouping) {
    // Measurement letter per qubit: the group's non-identity letter, Z if unused.
    std::vector<int> basis(m, 3);
    for (PauliString p : group) {
      const auto letters = pauli_letters(p, m);
      for (std::size_t q = 0; q < m; ++q) {
        if (letters[q] != 0) basis[q] = letters[q];
      }
    }
    for (int r = 0; r < dec.n; ++r) {
      MatrixXc u = MatrixXc::Identity(1, 1);
      for (std::size_t k = 0; k < l; ++k) {
        const MatrixXc single = basis_change(basis[static_cast<std::size_t>(r) * l + k]);
        u = kron(Tensor::from_matrix(u), Tensor::from_matrix(single)).matrix(1);
      }
      const MatrixXc rotated = u * rho * u.adjoint();
      auto& acc = cdf[static_cast<std::size_t>(r)];
      acc.assign(dim, 0.0);
      double run = 0.0;
      for (std::size_t b = 0; b < dim; ++b) {
        run += std::max(0.0, rotated(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(b)).real());
        acc[b] = run;
      }
      for (double& v : acc) v /= run;
    }
    std::vector<std::uint32_t> masks;
    std::vector<double> weights;
    for (PauliString p : group) {
      masks.push_back(support_mask(p, m));
      weights.push_back(dec.coefficients[p].real());
    }
    double sum = 0.0;
    double sum_sq = 0.0;
    for (std::uint64_t shot = 0; shot < shots; ++shot) {
      std::uint32_t bits = 0;
      for (int r = 0; r < dec.n; ++r) {
        const auto& acc = cdf[static_cast<std::size_t>(r)];
        const auto it = std::upper_bound(acc.begin(), acc.end(), uniform01(rng));
        const auto b = static_cast<std::uint32_t>(std::min<std::ptrdiff_t>(it - acc.begin(), static_cast<std::ptrdiff_t>(dim) - 1));
        bits = (bits << l) | b;
      }
      double f = 0.0;
      for (std::size_t k = 0; k < masks.size(); ++k) f += (std::popcount(bits & masks[k]) % 2 == 0 ? 1.0 : -1.0) * weights[k];
      sum += f;
      sum_sq += f * f;
    }
    const double n_shots = static_cast<double>(shots);
    const double mean = sum / n_shots;
    value += mean;
    if (shots > 1) variance += std::max(0.0, (sum_sq - n_shots * mean * mean) / (n_shots - 1.0)) / n_shots;
  }
  out.value = value;
  out.stderr_ = std::sqrt(variance);
  return out;
}

std::string pauli_table_text(const PauliDecomposition& dec) {
  std::ostringstream os;
  os << "string_label,real,imag,orbit_id\n";
  for (PauliString s = 0; s < dec.coefficients.size(); ++s) {
    const long orbit = dec.has_orbits() ? static_cast<long>(dec.orbits.orbit_of[s]) : -1L;
    os << pauli_label(s, dec.l, dec.n) << ',' << format_double(dec.coefficients[s].real()) << ','
       << format_double(dec.coefficients[s].imag()) << ',' << orbit << '\n';
  }
  return os.str();
}

std::string pauli_table_json(const PauliDecomposition& dec) {
  nlohmann::ordered_json j;
  j["format"] = "twistops-pauli";
  j["version"] = kFormatVersion;
  j["l"] = dec.l;
  j["n"] = dec.n;
  j["columns"] = {"string_label", "real", "imag", "orbit_id"};
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (PauliString s = 0; s < dec.coefficients.size(); ++s) {
    const long orbit = dec.has_orbits() ? static_cast<long>(dec.orbits.orbit_of[s]) : -1L;
    rows.push_back({pauli_label(s, dec.l, dec.n), dec.coefficients[s].real(), dec.coefficients[s].imag(), orbit});
  }
  j["rows"] = std::move(rows);
  return j.dump();
}

}  // namespace twistops
