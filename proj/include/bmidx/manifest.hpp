#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

namespace bmidx {

inline constexpr const char* kToolVersion = "0.1.0";

// FNV-1a 64 over the file bytes, as a hex string.
std::string file_digest_hex(const std::filesystem::path& path);

// Record of one CLI run: re-running with an identical manifest reproduces
// identical outputs (identical digests).
struct RunManifest {
  std::string subcommand;
  std::map<std::string, std::string> flags;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> input_digests;   // filename -> digest
  std::map<std::string, std::string> output_digests;  // filename -> digest
  std::string tool_version = kToolVersion;

  void add_input(const std::filesystem::path& path);
  void add_output(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
};

}  // namespace bmidx
