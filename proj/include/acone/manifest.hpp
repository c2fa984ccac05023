#pragma once

// Run manifests: what was run, with which resolved settings, on which inputs
// (by git blob hash), producing which files. Written next to the outputs.

#include <openssl/evp.h>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace acone {

/// SHA-1 of "blob <size>\0<content>", as `git hash-object` prints it.
inline std::string git_blob_hash(std::string_view content) {
  const std::string header = "blob " + std::to_string(content.size()) + '\0';
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha1(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), header.data(), header.size()) != 1 ||
      EVP_DigestUpdate(ctx.get(), content.data(), content.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), md, &len) != 1) {
    throw std::runtime_error("SHA-1 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[md[i] >> 4];
    out += kHex[md[i] & 15];
  }
  return out;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), {}};
}

inline std::string file_hash(const std::filesystem::path& path) { return git_blob_hash(read_file(path)); }

/// UTC time as ISO 8601 with seconds.
inline std::string utc_timestamp(std::chrono::system_clock::time_point t = std::chrono::system_clock::now()) {
  const std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Writes `content` to a sibling temporary file and renames it into place.
inline void write_atomically(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + tmp.string());
    os.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!os) throw std::runtime_error("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> inputs;  // path, blob hash
  std::vector<std::string> outputs;
  std::string started;
  std::string finished;

  void add_input(const std::filesystem::path& p) { inputs.emplace_back(p.string(), file_hash(p)); }
};

inline nlohmann::ordered_json to_json(const RunManifest& m) {
  nlohmann::ordered_json j;
  j["command"] = m.command;
  j["argv"] = m.argv;
  j["config"] = m.config;
  j["seed"] = m.seed;
  j["inputs"] = nlohmann::ordered_json::array();
  for (const auto& [path, hash] : m.inputs) j["inputs"].push_back({{"path", path}, {"sha1", hash}});
  j["outputs"] = m.outputs;
  j["started"] = m.started;
  j["finished"] = m.finished;
  return j;
}

inline void write_manifest(const std::filesystem::path& path, const RunManifest& m) {
  write_atomically(path, to_json(m).dump(2) + "\n");
}

}  // namespace acone
