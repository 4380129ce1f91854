#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace pmlab {

inline constexpr const char* kToolVersion = "1.0.0";

std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

// Files produced by one run, in emission order. Written by a single collector.
class OutputSet {
 public:
  void add(std::string name, std::string content);
  const std::vector<std::pair<std::string, std::string>>& files() const { return files_; }
  // Writes every file under dir (creating it); temp-file + rename per file.
  void write_all(const std::filesystem::path& dir) const;

 private:
  std::vector<std::pair<std::string, std::string>> files_;
};

struct RunManifest {
  std::string scenario;
  std::string config_sha256;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> checksums;  // file -> sha256
  std::map<std::string, double> timings_ms;
  std::map<std::string, std::uint64_t> warnings;

  std::string to_json() const;
};

// Writes manifest.json last and atomically, then re-hashes every listed
// output against the directory contents. Throws std::runtime_error on a
// mismatch.
void write_manifest(const std::filesystem::path& dir, const RunManifest& manifest);
void verify_manifest(const std::filesystem::path& dir, const RunManifest& manifest);

}  // namespace pmlab
