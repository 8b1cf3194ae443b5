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

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "twistops/mps.hpp"

namespace twistops::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConvergence = 2;
inline constexpr int kExitConfig = 3;

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Subcommand names in help order.
const std::vector<std::string>& commands();

struct ExperimentConfig {
  std::string command;

  std::vector<double> g;
  std::vector<std::size_t> L;

  std::size_t chi_max = 32;
  /// Empty, or one bond dimension per entry of g.
  std::vector<std::size_t> chi_per_g;
  int max_sweeps = 30;
  double energy_tol = 1e-12;

  std::size_t l_min = 1;
  std::size_t l_max = 6;
  /// Block length for single-block commands.
  std::size_t l = 1;
  std::string direction = "forward";
  int n = 2;

  std::vector<std::size_t> r;
  std::vector<std::array<std::size_t, 4>> four_point;

  std::vector<std::size_t> refs;
  std::vector<std::size_t> L_tar;
  double tol = 1e-10;
  int n_boot = 1000;
  /// Replaces the physics with rel_error = exp(-L_ref log g).
  bool synthetic = false;

  std::vector<std::uint64_t> shots;
  std::vector<double> lambda;

  std::uint64_t seed = 1;
  bool paper_scale = false;

  // Not part of the hash: they do not change any emitted value.
  std::string output_dir = "out";
  std::string cache_dir;  ///< empty: <output_dir>/cache
  std::size_t threads = 1;

  [[nodiscard]] std::size_t chi_for(std::size_t g_index) const;
  /// Every field, keys in declaration order.
  [[nodiscard]] std::string to_json(int indent = -1) const;
  /// FNV-1a over the hashed fields, hex.
  [[nodiscard]] std::string hash() const;
};

ExperimentConfig default_config(const std::string& command, bool paper_scale = false);

/// Overlays keys of a JSON object. Unknown keys and bad types throw ConfigError.
void apply_config_json(ExperimentConfig& c, const std::string& text);

/// Throws ConfigError.
void validate(const ExperimentConfig& c);

struct CachedState {
  Mps state;
  double energy = 0.0;
  std::string file;  ///< name inside the cache directory
  bool hit = false;
};

/// Ground state of the TFIM chain, content-addressed by its DMRG parameters.
/// Throws ConvergenceError without writing anything when DMRG does not converge.
CachedState ground_state(const ExperimentConfig& c, double g, std::size_t L, std::size_t chi);

/// Runs the configured subcommand; progress lines go to `log`.
int run(const ExperimentConfig& c, std::ostream& log);

/// Argument parsing plus run; returns the process exit code.
int main(int argc, const char* const* argv);

}  // namespace twistops::cli
