#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace keyshap {

inline constexpr std::string_view kToolVersion = "0.3.0";

// "fnv1a64:<16 hex digits>" of the bytes.
std::string digest_bytes(std::string_view bytes);
std::string digest_file(const std::filesystem::path& path);

// Everything needed to re-run an artifact-producing command and check that
// its outputs come back byte-identical. Contains no timestamps or host data.
struct RunManifest {
  std::string tool = "keyshap";
  std::string version{kToolVersion};
  std::string command;
  std::vector<std::string> argv;  // full argument vector after the program name
  std::map<std::string, std::string> config;
  std::map<std::string, std::uint64_t> seeds;
  std::string schema_hash;
  std::string oracle;
  std::map<std::string, std::string> inputs;   // path -> digest
  std::map<std::string, std::string> outputs;  // path -> digest

  std::string to_json() const;
  static RunManifest from_json(std::string_view text);
};

}  // namespace keyshap
