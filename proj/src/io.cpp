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

#include "twistops/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace twistops {

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t tensor_hash(const Tensor& t) {
  std::uint64_t h = fnv1a64("tensor");
  for (std::size_t d : t.shape()) h = fnv1a64(std::to_string(d) + ",", h);
  for (const cplx& v : t.data()) h = fnv1a64(format_double(v.real()) + format_double(v.imag()), h);
  return h;
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string mps_to_json(const Mps& s, const std::string& metadata_json) {
  nlohmann::ordered_json j;
  j["format"] = "twistops-mps";
  j["version"] = kFormatVersion;
  j["length"] = s.length();
  j["center"] = s.center() ? nlohmann::ordered_json(*s.center()) : nlohmann::ordered_json(nullptr);
  j["metadata"] = nlohmann::ordered_json::parse(metadata_json);
  auto& sites = j["sites"] = nlohmann::ordered_json::array();
  for (const Tensor& t : s.sites()) {
    std::vector<double> re;
    std::vector<double> im;
    for (const cplx& v : t.data()) {
      re.push_back(v.real());
      im.push_back(v.imag());
    }
    sites.push_back({{"shape", t.shape()}, {"re", re}, {"im", im}});
  }
  return j.dump();
}

namespace {

nlohmann::json parse_mps(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  if (j.value("format", "") != "twistops-mps") throw std::runtime_error("not a serialized MPS");
  if (j.value("version", 0) != kFormatVersion) {
    throw std::runtime_error("unsupported MPS format version " + std::to_string(j.value("version", 0)));
  }
  return j;
}

}  // namespace

Mps mps_from_json(const std::string& text) {
  const auto j = parse_mps(text);
  std::vector<Tensor> sites;
  for (const auto& site : j.at("sites")) {
    const auto shape = site.at("shape").get<std::vector<std::size_t>>();
    const auto re = site.at("re").get<std::vector<double>>();
    const auto im = site.at("im").get<std::vector<double>>();
    if (re.size() != im.size()) throw std::runtime_error("corrupt MPS site data");
    std::vector<cplx> data(re.size());
    for (std::size_t i = 0; i < re.size(); ++i) data[i] = {re[i], im[i]};
    sites.emplace_back(shape, std::move(data));
  }
  std::optional<std::size_t> center;
  if (!j.at("center").is_null()) center = j.at("center").get<std::size_t>();
  return Mps(std::move(sites), center);
}

std::string mps_metadata(const std::string& text) { return parse_mps(text).at("metadata").dump(); }

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string Provenance::csv_comment() const {
  return "# twistops version=" + version + " config_hash=" + config_hash + " seed=" + std::to_string(seed);
}

std::string Provenance::json() const {
  nlohmann::ordered_json j;
  j["version"] = version;
  j["config_hash"] = config_hash;
  j["seed"] = seed;
  return j.dump();
}

}  // namespace twistops
