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

#include "twistops/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <utility>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "twistops/fitters.hpp"
#include "twistops/io.hpp"
#include "twistops/models.hpp"
#include "twistops/pauli.hpp"
#include "twistops/twist.hpp"

namespace twistops::cli {
namespace {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

// ---- worker pool ----

// Runs f(0..count-1) on up to `threads` workers; the first failure by index
// is rethrown after all workers finish.
void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& f) {
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(count);
  auto work = [&] {
    for (std::size_t i; (i = next++) < count;) {
      try {
        f(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 1; t < std::min(threads, count); ++t) pool.emplace_back(work);
    work();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

class Log {
 public:
  explicit Log(std::ostream& os) : os_(os) {}
  void line(const std::string& s) {
    std::lock_guard lock(mu_);
    os_ << s << '\n' << std::flush;
  }

 private:
  std::ostream& os_;
  std::mutex mu_;
};

// ---- config json ----

[[noreturn]] void bad(const std::string& key, const std::string& what) {
  throw ConfigError("'" + key + "': " + what);
}

std::size_t as_size(const std::string& key, const nlohmann::json& v) {
  if (v.is_number_unsigned()) return v.get<std::size_t>();
  if (v.is_number_integer() && v.get<long long>() >= 0) return static_cast<std::size_t>(v.get<long long>());
  bad(key, "expected a non-negative integer");
}

int as_int(const std::string& key, const nlohmann::json& v) {
  if (!v.is_number_integer()) bad(key, "expected an integer");
  return v.get<int>();
}

double as_double(const std::string& key, const nlohmann::json& v) {
  if (!v.is_number()) bad(key, "expected a number");
  return v.get<double>();
}

bool as_bool(const std::string& key, const nlohmann::json& v) {
  if (!v.is_boolean()) bad(key, "expected true or false");
  return v.get<bool>();
}

std::string as_string(const std::string& key, const nlohmann::json& v) {
  if (!v.is_string()) bad(key, "expected a string");
  return v.get<std::string>();
}

template <class T, class F>
std::vector<T> as_list(const std::string& key, const nlohmann::json& v, F item) {
  if (!v.is_array()) bad(key, "expected a list");
  std::vector<T> out;
  for (const auto& e : v) out.push_back(item(key, e));
  return out;
}

ojson config_object(const ExperimentConfig& c, bool hashed_only) {
  ojson j;
  j["command"] = c.command;
  j["g"] = c.g;
  j["L"] = c.L;
  j["chi_max"] = c.chi_max;
  j["chi_per_g"] = c.chi_per_g;
  j["max_sweeps"] = c.max_sweeps;
  j["energy_tol"] = c.energy_tol;
  j["l_min"] = c.l_min;
  j["l_max"] = c.l_max;
  j["l"] = c.l;
  j["direction"] = c.direction;
  j["n"] = c.n;
  j["r"] = c.r;
  j["four_point"] = c.four_point;
  j["refs"] = c.refs;
  j["L_tar"] = c.L_tar;
  j["tol"] = c.tol;
  j["n_boot"] = c.n_boot;
  j["synthetic"] = c.synthetic;
  j["shots"] = c.shots;
  j["lambda"] = c.lambda;
  j["seed"] = c.seed;
  j["paper_scale"] = c.paper_scale;
  if (!hashed_only) {
    j["output_dir"] = c.output_dir;
    j["cache_dir"] = c.cache_dir;
    j["threads"] = c.threads;
  }
  return j;
}

std::vector<std::size_t> range(std::size_t first, std::size_t last, std::size_t step) {
  std::vector<std::size_t> out;
  for (std::size_t v = first; v <= last; v += step) out.push_back(v);
  return out;
}

// ---- shared pieces of the commands ----

Provenance provenance(const ExperimentConfig& c) { return {.config_hash = c.hash(), .seed = c.seed}; }

Direction direction(const ExperimentConfig& c) { return direction_from_string(c.direction); }

// First site of an l-site block whose twist acts at `cut`.
std::size_t block_site(std::size_t cut, std::size_t l, Direction d) { return d == Direction::kForward ? cut - l : cut; }

double replica_purity(const Mps& s, std::size_t cut, int n) {
  return std::exp(-(n - 1) * schmidt_renyi(s, cut, n));
}

void emit(const fs::path& path, const std::string& content, Log& log) {
  write_file_atomic(path, content);
  log.line("wrote " + path.string());
}

std::string json_doc(ojson body, const Provenance& p) {
  ojson j;
  j["provenance"] = ojson::parse(p.json());
  for (auto& [k, v] : body.items()) j[k] = std::move(v);
  return j.dump(2) + "\n";
}

struct Point {
  std::size_t gi = 0;
  std::size_t L = 0;
};

// Ground states for every point, computed on the worker pool.
std::vector<CachedState> ground_states(const ExperimentConfig& c, const std::vector<Point>& points, Log& log) {
  std::vector<CachedState> out(points.size());
  parallel_for(points.size(), c.threads, [&](std::size_t i) {
    const auto& p = points[i];
    out[i] = ground_state(c, c.g[p.gi], p.L, c.chi_for(p.gi));
    log.line("ground g=" + format_double(c.g[p.gi]) + " L=" + std::to_string(p.L) + " chi=" +
             std::to_string(c.chi_for(p.gi)) + ": " + (out[i].hit ? "cache hit " : "computed ") + out[i].file);
  });
  return out;
}

std::vector<Point> grid(const ExperimentConfig& c) {
  std::vector<Point> out;
  for (std::size_t gi = 0; gi < c.g.size(); ++gi) {
    for (std::size_t L : c.L) out.push_back({gi, L});
  }
  return out;
}

// ---- commands ----

void cmd_ground(const ExperimentConfig& c, Log& log) {
  const auto points = grid(c);
  const auto states = ground_states(c, points, log);
  std::ostringstream os;
  os << provenance(c).csv_comment() << "\ng,L,chi_max,energy,max_bond_dim,cache_file\n";
  for (std::size_t i = 0; i < points.size(); ++i) {
    os << format_double(c.g[points[i].gi]) << ',' << points[i].L << ',' << c.chi_for(points[i].gi) << ','
       << format_double(states[i].energy) << ',' << states[i].state.max_bond_dim() << ',' << states[i].file << '\n';
  }
  emit(fs::path(c.output_dir) / "ground.csv", os.str(), log);
}

void cmd_injectivity_scan(const ExperimentConfig& c, Log& log) {
  const auto points = grid(c);
  const auto states = ground_states(c, points, log);
  const Direction d = direction(c);
  std::vector<std::string> rows(points.size());
  parallel_for(points.size(), c.threads, [&](std::size_t i) {
    const Mps& s = states[i].state;
    const std::size_t cut = points[i].L / 2;
    const double exact = replica_purity(s, cut, c.n);
    std::ostringstream os;
    for (std::size_t l = c.l_min; l <= c.l_max; ++l) {
      const std::size_t site = block_site(cut, l, d);
      const TwistOperator t = block_twist(s, site, l, c.n, d);
      const Insertion ins[] = {at(t, site)};
      const double value = expectation(s, ins).real();
      os << format_double(c.g[points[i].gi]) << ',' << points[i].L << ',' << c.chi_for(points[i].gi) << ',' << l
         << ',' << format_double(std::abs(value - exact) / exact) << ',' << (t.report.injective ? 1 : 0) << ','
         << t.report.rank << '\n';
    }
    rows[i] = os.str();
  });
  std::string csv = provenance(c).csv_comment() + "\ng,L,chi,l,rel_error,injective,rank\n";
  for (const auto& r : rows) csv += r;
  emit(fs::path(c.output_dir) / "injectivity.csv", csv, log);
}

// Oracle mode: chains short enough for the replica contraction.
constexpr std::size_t kOracleMaxLength = 32;

Interval centered(std::size_t L, std::size_t r) {
  if (r == L) return {0, L - 1};
  const std::size_t a = (L - r) / 2;
  return {a, a + r - 1};
}

void cmd_correlators(const ExperimentConfig& c, Log& log) {
  const auto points = grid(c);
  const auto states = ground_states(c, points, log);
  std::vector<std::string> two(points.size());
  std::vector<std::string> four(points.size());
  parallel_for(points.size(), c.threads, [&](std::size_t i) {
    const Mps& s = states[i].state;
    const std::size_t L = points[i].L;
    const bool oracle = L <= kOracleMaxLength;
    const std::string prefix = format_double(c.g[points[i].gi]) + ',' + std::to_string(L) + ',';
    auto tail = [&](double value, std::span<const Interval> iv) {
      std::string out = format_double(value) + ',';
      if (oracle) {
        const double o = replica_swap_purity(s, iv, c.n);
        out += format_double(o) + ',' + format_double(std::abs(value - o));
      } else {
        out += ',';
      }
      return out + '\n';
    };
    for (std::size_t r : c.r) {
      const Interval iv[] = {centered(L, r)};
      const double value = interval_expectation(s, iv, c.l, c.n).real();
      two[i] += prefix + std::to_string(r) + ',' + std::to_string(iv[0].first) + ',' + std::to_string(iv[0].last) +
                ',' + tail(value, iv);
    }
    for (const auto& x : c.four_point) {
      const FourPoint fp = four_point(s, x[0], x[1], x[2], x[3], c.l, c.n);
      const Interval iv[] = {{x[0], x[1]}, {x[2], x[3]}};
      four[i] += prefix + std::to_string(x[0]) + ',' + std::to_string(x[1]) + ',' + std::to_string(x[2]) + ',' +
                 std::to_string(x[3]) + ',' + format_double(fp.eta) + ',' + tail(fp.value.real(), iv);
    }
  });
  const std::string head = provenance(c).csv_comment() + '\n';
  std::string a = head + "g,L,r,first,last,value,oracle,abs_error\n";
  std::string b = head + "g,L,x1,x2,x3,x4,eta,value,oracle,abs_error\n";
  for (std::size_t i = 0; i < points.size(); ++i) {
    a += two[i];
    b += four[i];
  }
  emit(fs::path(c.output_dir) / "two_point.csv", a, log);
  emit(fs::path(c.output_dir) / "four_point.csv", b, log);
}

std::vector<TransferRecord> synthetic_records(const ExperimentConfig& c, std::size_t gi, std::size_t L_tar) {
  // Known exponential: rel_error = exp(-L_ref log g), so L_c = log(1/tol) / log g.
  const double g = c.g[gi];
  std::vector<TransferRecord> out;
  for (std::size_t ref : c.refs) {
    const double rel = std::exp(-static_cast<double>(ref) * std::log(g));
    out.push_back({.g = g, .L_ref = ref, .L_tar = L_tar, .S2_exact = 1.0, .S2_twist = 1.0 - rel, .rel_error = rel,
                   .underestimate_ok = true});
  }
  return out;
}

void cmd_transfer(const ExperimentConfig& c, Log& log) {
  std::vector<std::vector<TransferRecord>> records(c.g.size() * c.L_tar.size());
  std::vector<double> xi(c.g.size());
  if (c.synthetic) {
    for (std::size_t gi = 0; gi < c.g.size(); ++gi) {
      xi[gi] = 1.0 / std::log(c.g[gi]);
      for (std::size_t ti = 0; ti < c.L_tar.size(); ++ti) records[gi * c.L_tar.size() + ti] = synthetic_records(c, gi, c.L_tar[ti]);
    }
  } else {
    std::vector<Point> points;
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> index;
    for (std::size_t gi = 0; gi < c.g.size(); ++gi) {
      std::set<std::size_t> lengths(c.refs.begin(), c.refs.end());
      lengths.insert(c.L_tar.begin(), c.L_tar.end());
      for (std::size_t L : lengths) {
        index[{gi, L}] = points.size();
        points.push_back({gi, L});
      }
    }
    const auto states = ground_states(c, points, log);
    parallel_for(c.g.size(), c.threads, [&](std::size_t gi) {
      for (std::size_t ti = 0; ti < c.L_tar.size(); ++ti) {
        const Mps& target = states[index.at({gi, c.L_tar[ti]})].state;
        auto& out = records[gi * c.L_tar.size() + ti];
        for (std::size_t ref : c.refs) out.push_back(transfer_record(c.g[gi], states[index.at({gi, ref})].state, target));
      }
      xi[gi] = correlation_length(states[index.at({gi, c.L_tar.front()})].state).xi;
    });
  }

  const Provenance p = provenance(c);
  std::vector<TransferRecord> all;
  for (const auto& r : records) all.insert(all.end(), r.begin(), r.end());
  emit(fs::path(c.output_dir) / "transfer.csv", transfer_csv(all, p), log);

  std::vector<LcRow> rows;
  std::vector<PowerLawPoint> fit_points;
  for (std::size_t gi = 0; gi < c.g.size(); ++gi) {
    const LcFit fit = extract_Lc(records[gi * c.L_tar.size()], c.tol);
    rows.push_back({c.g[gi], xi[gi], fit.Lc});
    fit_points.push_back({xi[gi], fit.Lc});
    log.line("g=" + format_double(c.g[gi]) + " xi=" + format_double(xi[gi]) + " Lc=" + format_double(fit.Lc));
  }
  emit(fs::path(c.output_dir) / "lc.csv", lc_csv(rows, p), log);

  // Three parameters need at least four points.
  if (fit_points.size() < 4) {
    log.line("fewer than 4 g values; power-law fit skipped");
    return;
  }
  const PowerLawFit fit = fit_power_law(fit_points, c.n_boot, c.seed);
  emit(fs::path(c.output_dir) / "fit.json", power_law_json(fit, p) + "\n", log);
}

void cmd_pauli_export(const ExperimentConfig& c, Log& log) {
  const auto states = ground_states(c, grid(c), log);
  const Mps& s = states.front().state;
  const std::size_t L = c.L.front();
  const std::size_t cut = L / 2;
  const Direction d = direction(c);
  const std::size_t site = block_site(cut, c.l, d);
  const TwistOperator t = c.l == 1 ? orthocenter_twist(s, site, c.n, d) : block_twist(s, site, c.l, c.n, d);
  const PauliDecomposition dec = decompose(t);
  const MatrixXc dense = t.dense();

  double sum_sq = 0.0;
  for (const cplx& a : dec.coefficients) sum_sq += std::norm(a);
  const double dim = std::ldexp(1.0, static_cast<int>(dec.qubits()));
  const Insertion ins[] = {at(t, site)};
  const double twist_value = expectation(s, ins).real();
  const ShotEstimate analytic = estimate_exact(s, dec, site);

  const Provenance p = provenance(c);
  ojson report;
  report["g"] = c.g.front();
  report["L"] = L;
  report["chi_max"] = c.chi_for(0);
  report["l"] = c.l;
  report["n"] = c.n;
  report["direction"] = c.direction;
  report["site"] = site;
  report["qubits"] = dec.qubits();
  report["strings"] = dec.coefficients.size();
  report["reconstruction_error"] = (reconstruct(dec) - dense).cwiseAbs().maxCoeff();
  report["parseval_error"] = std::abs(dim * sum_sq - dense.squaredNorm()) / dense.squaredNorm();
  report["distinct_values"] = dec.distinct_values(1e-12);
  if (dec.has_orbits()) {
    report["independent_count"] = independent_count(c.l);
    report["orbits"] = dec.orbits.count();
    report["orbit_spread"] = dec.orbit_spread();
  }
  report["groups"] = group_commuting(dec).size();
  report["vanishing"] = analytic.vanishing.size();
  report["twist_expectation"] = twist_value;
  report["analytic_estimate"] = analytic.value;
  report["purity"] = replica_purity(s, cut, c.n);

  std::ostringstream os;
  os << p.csv_comment() << "\nshots,value,stderr,exact\n";
  for (std::size_t i = 0; i < c.shots.size(); ++i) {
    const ShotEstimate e = estimate_sampled(s, dec, site, c.shots[i], c.seed + i);
    os << c.shots[i] << ',' << format_double(e.value) << ',' << format_double(e.stderr_) << ','
       << format_double(analytic.value) << '\n';
    log.line("shots=" + std::to_string(c.shots[i]) + " value=" + format_double(e.value) + " stderr=" +
             format_double(e.stderr_));
  }

  const fs::path dir(c.output_dir);
  emit(dir / "pauli.csv", p.csv_comment() + "\n" + pauli_table_text(dec), log);
  emit(dir / "pauli.json", json_doc({{"table", ojson::parse(pauli_table_json(dec))}}, p), log);
  emit(dir / "pauli_report.json", json_doc(report, p), log);
  if (!c.shots.empty()) emit(dir / "shots.csv", os.str(), log);
}

void cmd_lstsq_fit(const ExperimentConfig& c, Log& log) {
  const auto states = ground_states(c, grid(c), log);
  const Mps& s = states.front().state;
  const std::size_t cut = c.L.front() / 2;
  const Direction d = direction(c);
  const std::size_t site = block_site(cut, c.l, d);
  // Balanced gauge: the fitted operator does not depend on it, the
  // conditioning of the target does.
  const Tensor b = balance_block(block(move_center(s, 0), site, c.l));
  const LstsqTarget target = swap_target(b, c.n, d);
  const double exact = replica_purity(s, cut, c.n);

  const Provenance p = provenance(c);
  std::string summary = p.csv_comment() + "\nlambda,residual,expectation,exact,abs_error,max_coef_diff\n";
  std::string coefs = p.csv_comment() + "\nlambda,string_label,real,imag\n";
  std::vector<cplx> first;
  for (double lambda : c.lambda) {
    const LstsqFit fit = lstsq_full_basis_fit(target, c.l, lambda);
    const Insertion ins[] = {{.site = site, .twist = nullptr, .dense = &fit.op, .l = c.l, .n = c.n}};
    const double value = expectation(s, ins).real();
    if (first.empty()) first = fit.coefficients;
    double diff = 0.0;
    for (std::size_t k = 0; k < first.size(); ++k) diff = std::max(diff, std::abs(fit.coefficients[k] - first[k]));
    summary += format_double(lambda) + ',' + format_double(fit.residual) + ',' + format_double(value) + ',' +
               format_double(exact) + ',' + format_double(std::abs(value - exact)) + ',' + format_double(diff) + '\n';
    for (std::size_t k = 0; k < fit.coefficients.size(); ++k) {
      coefs += format_double(lambda) + ',' + pauli_label(static_cast<PauliString>(k), c.l, c.n) + ',' +
               format_double(fit.coefficients[k].real()) + ',' + format_double(fit.coefficients[k].imag()) + '\n';
    }
    log.line("lambda=" + format_double(lambda) + " residual=" + format_double(fit.residual) +
             " abs_error=" + format_double(std::abs(value - exact)));
  }
  emit(fs::path(c.output_dir) / "lstsq.csv", summary, log);
  emit(fs::path(c.output_dir) / "lstsq_coefficients.csv", coefs, log);
}

const std::map<std::string, std::string>& descriptions() {
  static const std::map<std::string, std::string> d = {
      {"ground", "Compute and cache TFIM ground states for every (g, L)"},
      {"injectivity-scan", "Relative error of the block twist against exp(-S_n) for l = l_min..l_max"},
      {"correlators", "Two-point and four-point twist correlators, checked against the replica oracle on short chains"},
      {"transfer", "Transfer reference twists to larger chains, extract L_c and fit A xi^omega + k"},
      {"pauli-export", "Pauli coefficients of a twist operator plus a sampled-estimate shots ladder"},
      {"lstsq-fit", "Least-squares twist over the full Pauli basis for each lambda"},
  };
  return d;
}

}  // namespace

const std::vector<std::string>& commands() {
  static const std::vector<std::string> c = {"ground", "injectivity-scan", "correlators", "transfer", "pauli-export",
                                             "lstsq-fit"};
  return c;
}

std::size_t ExperimentConfig::chi_for(std::size_t g_index) const {
  return chi_per_g.empty() ? chi_max : chi_per_g.at(g_index);
}

std::string ExperimentConfig::to_json(int indent) const { return config_object(*this, false).dump(indent); }

std::string ExperimentConfig::hash() const { return hash_hex(fnv1a64(config_object(*this, true).dump())); }

ExperimentConfig default_config(const std::string& command, bool paper_scale) {
  ExperimentConfig c;
  c.command = command;
  c.paper_scale = paper_scale;
  if (command == "ground") {
    c.g = {1.0};
    c.L = {10};
  } else if (command == "injectivity-scan") {
    c.g = {4.0, 2.0, 1.5};
    c.L = {48};
    c.chi_per_g = {4, 5, 8};
  } else if (command == "correlators") {
    c.g = {1.5};
    if (paper_scale) {
      c.L = {120};
      c.chi_max = 8;
      c.l = 6;
      c.r = range(2, 100, 2);
      c.r.push_back(120);
      c.four_point = {{20, 40, 60, 80}, {20, 30, 70, 80}, {20, 25, 75, 80},
                      {10, 40, 60, 90}, {10, 20, 40, 100}, {30, 50, 64, 100}};
    } else {
      // chi = 4 is injective from l = 4 at g = 1.5, which leaves room for
      // two separated intervals on 24 sites.
      c.L = {24};
      c.chi_max = 4;
      c.l = 4;
      c.r = range(2, 12, 1);
      c.r.push_back(24);
      c.four_point = {{4, 5, 15, 19}, {4, 6, 16, 19}, {5, 7, 17, 18}, {4, 7, 16, 19}, {4, 8, 17, 19}, {4, 9, 18, 19}};
    }
  } else if (command == "transfer") {
    c.g = {4.0, 3.0, 2.5, 2.0, 1.75, 1.5};
    c.refs = range(8, paper_scale ? 48 : 32, 2);
    c.L_tar = {paper_scale ? std::size_t{128} : std::size_t{64}};
  } else if (command == "pauli-export") {
    c.g = {4.0};
    c.L = {16};
    c.chi_max = 4;
    c.l = 1;
    c.shots = {1000, 4000, 16000, 64000, 256000, 1000000};
  } else if (command == "lstsq-fit") {
    c.g = {4.0};
    c.L = {24};
    c.chi_max = 4;
    c.l = 4;
    c.lambda = {0.0, 1e-12};
  } else {
    throw ConfigError("unknown command '" + command + "'");
  }
  return c;
}

void apply_config_json(ExperimentConfig& c, const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  using Setter = std::function<void(const std::string&, const nlohmann::json&)>;
  const std::map<std::string, Setter> setters = {
      {"command", [&](auto& k, auto& v) { c.command = as_string(k, v); }},
      {"g", [&](auto& k, auto& v) { c.g = as_list<double>(k, v, as_double); }},
      {"L", [&](auto& k, auto& v) { c.L = as_list<std::size_t>(k, v, as_size); }},
      {"chi_max", [&](auto& k, auto& v) { c.chi_max = as_size(k, v); }},
      {"chi_per_g", [&](auto& k, auto& v) { c.chi_per_g = as_list<std::size_t>(k, v, as_size); }},
      {"max_sweeps", [&](auto& k, auto& v) { c.max_sweeps = as_int(k, v); }},
      {"energy_tol", [&](auto& k, auto& v) { c.energy_tol = as_double(k, v); }},
      {"l_min", [&](auto& k, auto& v) { c.l_min = as_size(k, v); }},
      {"l_max", [&](auto& k, auto& v) { c.l_max = as_size(k, v); }},
      {"l", [&](auto& k, auto& v) { c.l = as_size(k, v); }},
      {"direction", [&](auto& k, auto& v) { c.direction = as_string(k, v); }},
      {"n", [&](auto& k, auto& v) { c.n = as_int(k, v); }},
      {"r", [&](auto& k, auto& v) { c.r = as_list<std::size_t>(k, v, as_size); }},
      {"four_point",
       [&](auto& k, auto& v) {
         c.four_point = as_list<std::array<std::size_t, 4>>(k, v, [](const std::string& key, const nlohmann::json& e) {
           const auto xs = as_list<std::size_t>(key, e, as_size);
           if (xs.size() != 4) bad(key, "each entry needs four sites");
           return std::array<std::size_t, 4>{xs[0], xs[1], xs[2], xs[3]};
         });
       }},
      {"refs", [&](auto& k, auto& v) { c.refs = as_list<std::size_t>(k, v, as_size); }},
      {"L_tar", [&](auto& k, auto& v) { c.L_tar = as_list<std::size_t>(k, v, as_size); }},
      {"tol", [&](auto& k, auto& v) { c.tol = as_double(k, v); }},
      {"n_boot", [&](auto& k, auto& v) { c.n_boot = as_int(k, v); }},
      {"synthetic", [&](auto& k, auto& v) { c.synthetic = as_bool(k, v); }},
      {"shots", [&](auto& k, auto& v) { c.shots = as_list<std::uint64_t>(k, v, as_size); }},
      {"lambda", [&](auto& k, auto& v) { c.lambda = as_list<double>(k, v, as_double); }},
      {"seed", [&](auto& k, auto& v) { c.seed = as_size(k, v); }},
      {"paper_scale", [&](auto& k, auto& v) { c.paper_scale = as_bool(k, v); }},
      {"output_dir", [&](auto& k, auto& v) { c.output_dir = as_string(k, v); }},
      {"cache_dir", [&](auto& k, auto& v) { c.cache_dir = as_string(k, v); }},
      {"threads", [&](auto& k, auto& v) { c.threads = as_size(k, v); }},
  };
  for (const auto& [key, value] : j.items()) {
    const auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second(key, value);
  }
}

void validate(const ExperimentConfig& c) {
  const auto& cmds = commands();
  if (std::find(cmds.begin(), cmds.end(), c.command) == cmds.end()) throw ConfigError("unknown command '" + c.command + "'");
  const std::string& cmd = c.command;
  if (c.g.empty()) throw ConfigError("g list is empty");
  for (double g : c.g) {
    if (!std::isfinite(g) || g < 0.0) throw ConfigError("g must be finite and non-negative");
  }
  if (!c.chi_per_g.empty() && c.chi_per_g.size() != c.g.size()) throw ConfigError("chi_per_g needs one entry per g");
  if (c.chi_max == 0 || std::find(c.chi_per_g.begin(), c.chi_per_g.end(), 0) != c.chi_per_g.end()) {
    throw ConfigError("bond dimensions must be positive");
  }
  if (c.max_sweeps < 1) throw ConfigError("max_sweeps must be positive");
  if (!(c.energy_tol > 0.0)) throw ConfigError("energy_tol must be positive");
  if (c.n < 2 || c.n > kMaxSweepReplicas) throw ConfigError("n must lie in 2.." + std::to_string(kMaxSweepReplicas));
  if (c.direction != "forward" && c.direction != "backward") throw ConfigError("direction must be forward or backward");
  if (c.threads == 0) throw ConfigError("threads must be positive");
  if (cmd != "transfer") {
    if (c.L.empty()) throw ConfigError("L list is empty");
    for (std::size_t L : c.L) {
      if (L < 2) throw ConfigError("chains need at least 2 sites");
    }
  }
  if (cmd == "injectivity-scan") {
    if (c.l_min == 0 || c.l_min > c.l_max) throw ConfigError("need 1 <= l_min <= l_max");
    for (std::size_t L : c.L) {
      if (c.l_max > L / 2) throw ConfigError("l_max exceeds half of L=" + std::to_string(L));
    }
  }
  if (cmd == "correlators" || cmd == "pauli-export" || cmd == "lstsq-fit") {
    if (c.l == 0) throw ConfigError("l must be positive");
  }
  if (cmd == "correlators") {
    if (c.r.empty()) throw ConfigError("r list is empty");
    if (c.four_point.empty()) throw ConfigError("four_point list is empty");
    for (std::size_t L : c.L) {
      const std::string at = " on L=" + std::to_string(L);
      for (std::size_t r : c.r) {
        if (r == L) continue;
        const Interval iv = centered(L, std::min(r, L));
        if (r == 0 || r > L || iv.first < c.l || iv.last + c.l >= L) {
          throw ConfigError("r=" + std::to_string(r) + " leaves no room for l=" + std::to_string(c.l) + at);
        }
      }
      for (const auto& x : c.four_point) {
        const bool ordered = x[1] + 1 >= x[0] && x[1] < x[2] && x[2] <= x[3];
        const bool room = x[0] >= c.l && x[3] + c.l < L && x[2] >= x[1] + 2 * c.l + 1;
        if (!ordered || !room) throw ConfigError("four_point entry has overlapping or out-of-chain blocks" + at);
      }
    }
  }
  if (cmd == "transfer") {
    if (c.refs.empty()) throw ConfigError("refs list is empty");
    if (c.L_tar.empty()) throw ConfigError("L_tar list is empty");
    if (!(c.tol > 0.0 && c.tol < 1.0)) throw ConfigError("tol must lie in (0, 1)");
    if (c.n_boot < 0) throw ConfigError("n_boot must be non-negative");
    for (std::size_t L : c.refs) {
      if (L < 4) throw ConfigError("reference chains need at least 4 sites");
    }
    for (std::size_t L : c.L_tar) {
      if (L < 4) throw ConfigError("target chains need at least 4 sites");
    }
    if (c.synthetic) {
      for (double g : c.g) {
        if (!(g > 1.0)) throw ConfigError("synthetic mode needs g > 1");
      }
    }
  }
  if (cmd == "pauli-export" || cmd == "lstsq-fit") {
    if (c.g.size() != 1 || c.L.size() != 1) throw ConfigError(cmd + " takes a single g and a single L");
    if (c.l * static_cast<std::size_t>(c.n) > kMaxPauliQubits) {
      throw ConfigError("l * n exceeds " + std::to_string(kMaxPauliQubits) + " qubits");
    }
    if (c.l > c.L.front() / 2) throw ConfigError("l exceeds half of L");
  }
  if (cmd == "pauli-export") {
    if (std::find(c.shots.begin(), c.shots.end(), 0) != c.shots.end()) throw ConfigError("shots must be positive");
  }
  if (cmd == "lstsq-fit") {
    if (c.lambda.empty()) throw ConfigError("lambda list is empty");
    for (double v : c.lambda) {
      if (!(v >= 0.0)) throw ConfigError("lambda must be non-negative");
    }
  }
}

CachedState ground_state(const ExperimentConfig& c, double g, std::size_t L, std::size_t chi) {
  ojson key;
  key["model"] = "tfim";
  key["format"] = kFormatVersion;
  key["g"] = g;
  key["L"] = L;
  key["chi_max"] = chi;
  key["max_sweeps"] = c.max_sweeps;
  key["energy_tol"] = c.energy_tol;
  key["seed"] = c.seed;
  const std::string param_hash = hash_hex(fnv1a64(key.dump()));

  const fs::path dir = c.cache_dir.empty() ? fs::path(c.output_dir) / "cache" : fs::path(c.cache_dir);
  CachedState out;
  out.file = "tfim-" + param_hash + ".json";
  const fs::path path = dir / out.file;
  if (fs::exists(path)) {
    const std::string text = read_file(path);
    out.state = mps_from_json(text);
    out.energy = nlohmann::json::parse(mps_metadata(text)).at("energy").get<double>();
    out.hit = true;
    return out;
  }

  DmrgOptions opts;
  opts.chi_max = chi;
  opts.max_sweeps = c.max_sweeps;
  opts.energy_tol = c.energy_tol;
  opts.seed = c.seed;
  DmrgResult r = dmrg(tfim_mpo({.length = L, .g = g}), opts);
  if (!r.converged) {
    std::string last;
    if (r.sweep_energies.size() >= 2) {
      last = ", last energy change " + format_double(r.sweep_energies.back() - r.sweep_energies[r.sweep_energies.size() - 2]);
    }
    throw ConvergenceError("DMRG did not converge for g=" + format_double(g) + " L=" + std::to_string(L) +
                           " chi=" + std::to_string(chi) + " after " + std::to_string(r.sweeps) + " sweeps" + last);
  }
  ojson meta = key;
  meta["param_hash"] = param_hash;
  meta["energy"] = r.energy;
  meta["sweeps"] = r.sweeps;
  meta["max_discarded_weight"] = r.max_discarded_weight;
  meta["converged"] = true;
  meta["artifact_version"] = kArtifactVersion;
  fs::create_directories(dir);
  write_file_atomic(path, mps_to_json(r.state, meta.dump()));
  out.state = std::move(r.state);
  out.energy = r.energy;
  return out;
}

int run(const ExperimentConfig& c, std::ostream& log_stream) {
  try {
    validate(c);
    fs::create_directories(c.output_dir);
    Log log(log_stream);
    log.line("twistops " + std::string(kArtifactVersion) + " " + c.command + " config_hash=" + c.hash() +
             " seed=" + std::to_string(c.seed));
    if (c.command == "ground") cmd_ground(c, log);
    if (c.command == "injectivity-scan") cmd_injectivity_scan(c, log);
    if (c.command == "correlators") cmd_correlators(c, log);
    if (c.command == "transfer") cmd_transfer(c, log);
    if (c.command == "pauli-export") cmd_pauli_export(c, log);
    if (c.command == "lstsq-fit") cmd_lstsq_fit(c, log);
    return kExitOk;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ConvergenceError& e) {
    std::cerr << "convergence failure: " << e.what() << '\n';
    return kExitConvergence;
  } catch (const FitError& e) {
    std::cerr << "fit failure: " << e.what() << '\n';
    return kExitConvergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

namespace {

// Flag storage shared by all subcommands; only flags given on the command
// line are copied over the config.
struct Flags {
  std::string config;
  std::vector<double> g;
  std::vector<std::size_t> L;
  std::size_t chi_max = 0;
  std::vector<std::size_t> chi_per_g;
  int max_sweeps = 0;
  double energy_tol = 0.0;
  std::size_t l_min = 0;
  std::size_t l_max = 0;
  std::size_t l = 0;
  std::string direction;
  int n = 0;
  std::vector<std::size_t> r;
  std::vector<std::size_t> four_point;
  std::vector<std::size_t> refs;
  std::vector<std::size_t> L_tar;
  double tol = 0.0;
  int n_boot = 0;
  bool synthetic = false;
  std::vector<std::uint64_t> shots;
  std::vector<double> lambda;
  std::uint64_t seed = 0;
  bool paper_scale = false;
  std::string output_dir;
  std::string cache_dir;
  std::size_t threads = 0;
  bool quiet = false;
};

void add_flags(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "JSON config file; flags override its keys");
  sub->add_option("--g", f.g, "Transverse fields");
  sub->add_option("--L", f.L, "Chain lengths");
  sub->add_option("--chi-max", f.chi_max, "DMRG bond dimension");
  sub->add_option("--chi-per-g", f.chi_per_g, "Bond dimension per g, overrides --chi-max");
  sub->add_option("--max-sweeps", f.max_sweeps, "DMRG sweep limit");
  sub->add_option("--energy-tol", f.energy_tol, "DMRG relative energy tolerance");
  sub->add_option("--l-min", f.l_min, "Smallest block length of the scan");
  sub->add_option("--l-max", f.l_max, "Largest block length of the scan");
  sub->add_option("--l", f.l, "Block length");
  sub->add_option("--direction", f.direction, "forward or backward");
  sub->add_option("--n", f.n, "Replica count");
  sub->add_option("--r", f.r, "Interval lengths of the two-point function (r = L: whole chain)");
  sub->add_option("--four-point", f.four_point, "Site quadruples x1 x2 x3 x4, flattened");
  sub->add_option("--refs", f.refs, "Reference chain lengths");
  sub->add_option("--L-tar", f.L_tar, "Target chain lengths; L_c uses the first");
  sub->add_option("--tol", f.tol, "Error tolerance defining L_c");
  sub->add_option("--n-boot", f.n_boot, "Bootstrap resamples of the power-law fit");
  sub->add_flag("--synthetic", f.synthetic, "Feed rel_error = exp(-L_ref log g) instead of ground states");
  sub->add_option("--shots", f.shots, "Shots per measurement group, one estimate each");
  sub->add_option("--lambda", f.lambda, "Tikhonov strengths; 0 selects the pseudo-inverse");
  sub->add_option("--seed", f.seed, "Seed for DMRG start states and sampling");
  sub->add_flag("--paper-scale", f.paper_scale, "Use the full-size defaults");
  sub->add_option("-o,--output-dir", f.output_dir, "Output directory");
  sub->add_option("--cache-dir", f.cache_dir, "Ground-state cache (default <output-dir>/cache)");
  sub->add_option("--threads", f.threads, "Worker threads");
  sub->add_flag("-q,--quiet", f.quiet, "Suppress progress lines");
}

void apply_flags(const CLI::App* sub, const Flags& f, ExperimentConfig& c) {
  auto given = [&](const char* name) { return sub->count(name) > 0; };
  if (given("--g")) c.g = f.g;
  if (given("--L")) c.L = f.L;
  if (given("--chi-max")) c.chi_max = f.chi_max;
  if (given("--chi-per-g")) c.chi_per_g = f.chi_per_g;
  // An explicit --chi-max replaces per-g values that came from the defaults.
  if (given("--chi-max") && !given("--chi-per-g")) c.chi_per_g.clear();
  if (given("--max-sweeps")) c.max_sweeps = f.max_sweeps;
  if (given("--energy-tol")) c.energy_tol = f.energy_tol;
  if (given("--l-min")) c.l_min = f.l_min;
  if (given("--l-max")) c.l_max = f.l_max;
  if (given("--l")) c.l = f.l;
  if (given("--direction")) c.direction = f.direction;
  if (given("--n")) c.n = f.n;
  if (given("--r")) c.r = f.r;
  if (given("--four-point")) {
    if (f.four_point.size() % 4 != 0) throw ConfigError("--four-point needs groups of four sites");
    c.four_point.clear();
    for (std::size_t i = 0; i < f.four_point.size(); i += 4) {
      c.four_point.push_back({f.four_point[i], f.four_point[i + 1], f.four_point[i + 2], f.four_point[i + 3]});
    }
  }
  if (given("--refs")) c.refs = f.refs;
  if (given("--L-tar")) c.L_tar = f.L_tar;
  if (given("--tol")) c.tol = f.tol;
  if (given("--n-boot")) c.n_boot = f.n_boot;
  if (given("--synthetic")) c.synthetic = f.synthetic;
  if (given("--shots")) c.shots = f.shots;
  if (given("--lambda")) c.lambda = f.lambda;
  if (given("--seed")) c.seed = f.seed;
  if (given("-o")) c.output_dir = f.output_dir;
  if (given("--cache-dir")) c.cache_dir = f.cache_dir;
  if (given("--threads")) c.threads = f.threads;
}

}  // namespace

int main(int argc, const char* const* argv) {
  CLI::App app{"twistops: twist-operator experiments on transverse-field Ising chains.\n"
               "Exit codes: 0 success, 2 convergence failure, 3 config error."};
  app.require_subcommand(1);
  Flags f;
  for (const auto& name : commands()) {
    CLI::App* sub = app.add_subcommand(name, descriptions().at(name));
    add_flags(sub, f);
    sub->footer("\nDefaults:\n" + default_config(name).to_json(2));
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  const CLI::App* sub = app.get_subcommands().front();
  try {
    std::string text;
    bool full_size = f.paper_scale;
    if (sub->count("--config") > 0) {
      try {
        text = read_file(f.config);
      } catch (const std::exception& e) {
        throw ConfigError("cannot read config '" + f.config + "': " + e.what());
      }
      // paper_scale selects the defaults, so it is read before the overlay.
      ExperimentConfig probe = default_config(sub->get_name());
      apply_config_json(probe, text);
      if (sub->count("--paper-scale") == 0) full_size = probe.paper_scale;
    }
    ExperimentConfig c = default_config(sub->get_name(), full_size);
    if (!text.empty()) apply_config_json(c, text);
    apply_flags(sub, f, c);
    c.paper_scale = full_size;
    if (c.command != sub->get_name()) throw ConfigError("config command '" + c.command + "' does not match subcommand");
    std::ostream silent(nullptr);
    return run(c, f.quiet ? silent : std::cout);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
}

}  // namespace twistops::cli
