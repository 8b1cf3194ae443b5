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

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "twistops/mps.hpp"
#include "twistops/tensor.hpp"

namespace twistops {

inline constexpr int kFormatVersion = 1;
inline constexpr const char* kArtifactVersion = "0.1.0";

/// 64-bit FNV-1a; stable across platforms, used for cache keys and provenance.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 14695981039346656037ULL);
std::uint64_t tensor_hash(const Tensor& t);
std::string hash_hex(std::uint64_t h);

/// 17 significant digits, round-trip exact.
std::string format_double(double v);

/// JSON container:
///   {"format": "twistops-mps", "version": 1, "length": L, "center": c|null,
///    "metadata": {...}, "sites": [{"shape": [..], "re": [..], "im": [..]}, ...]}
/// Data are row-major. Metadata is an arbitrary JSON object passed as text.
std::string mps_to_json(const Mps& s, const std::string& metadata_json = "{}");
Mps mps_from_json(const std::string& text);
/// Metadata object of a serialized state, as JSON text.
std::string mps_metadata(const std::string& text);

std::string read_file(const std::filesystem::path& path);
/// Writes to a sibling temporary and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

/// Stamped into every emitted table and document.
struct Provenance {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string version = kArtifactVersion;

  /// "# twistops version=... config_hash=... seed=..." without newline.
  [[nodiscard]] std::string csv_comment() const;
  /// JSON object text.
  [[nodiscard]] std::string json() const;
};

}  // namespace twistops
