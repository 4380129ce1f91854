#include "manifest.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace pmlab {
namespace {

void write_atomically(const std::filesystem::path& path, std::string_view content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

std::string sha256_hex(std::string_view data) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(),
                                                              &EVP_MD_CTX_free);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1) {
    throw std::runtime_error("sha256: digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return sha256_hex(buf.str());
}

void OutputSet::add(std::string name, std::string content) {
  for (const auto& [existing, unused] : files_) {
    (void)unused;
    if (existing == name) throw std::logic_error("duplicate output " + name);
  }
  files_.emplace_back(std::move(name), std::move(content));
}

void OutputSet::write_all(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  for (const auto& [name, content] : files_) {
    const auto path = dir / name;
    std::filesystem::create_directories(path.parent_path());
    write_atomically(path, content);
  }
}

std::string RunManifest::to_json() const {
  nlohmann::ordered_json doc;
  doc["tool"] = "pmlab";
  doc["tool_version"] = kToolVersion;
  doc["scenario"] = scenario;
  doc["config_sha256"] = config_sha256;
  doc["seed"] = seed;
  doc["outputs"] = nlohmann::ordered_json::object();
  for (const auto& [file, sum] : checksums) doc["outputs"][file] = sum;
  doc["timings_ms"] = nlohmann::ordered_json::object();
  for (const auto& [stage, ms] : timings_ms) doc["timings_ms"][stage] = ms;
  doc["warnings"] = nlohmann::ordered_json::object();
  for (const auto& [kind, n] : warnings) doc["warnings"][kind] = n;
  return doc.dump(2) + "\n";
}

void write_manifest(const std::filesystem::path& dir, const RunManifest& manifest) {
  write_atomically(dir / "manifest.json", manifest.to_json());
  verify_manifest(dir, manifest);
}

void verify_manifest(const std::filesystem::path& dir, const RunManifest& manifest) {
  for (const auto& [file, sum] : manifest.checksums) {
    const std::string actual = sha256_file(dir / file);
    if (actual != sum) {
      throw std::runtime_error("manifest check failed for " + file + ": expected " + sum +
                               ", found " + actual);
    }
  }
}

}  // namespace pmlab
