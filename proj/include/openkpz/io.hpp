#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace openkpz {

inline constexpr const char* kVersion = "0.1.0";

/// FNV-1a over the compact dump (object keys are sorted by nlohmann::json), as 16 hex digits.
std::string config_hash(const nlohmann::json& config);

/// Writes to `path.tmp` and renames over `path`.
void write_atomic(const std::filesystem::path& path, const std::string& content);

/// Prepends "# config_hash=... seed=..." so every artifact carries its provenance.
std::string with_header(const std::string& body, const std::string& hash, std::uint64_t seed);

struct Manifest {
  std::string command;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string version = kVersion;
  std::string eigen_version;
  double wall_seconds = 0.0;
  std::string started_at;  // UTC, ISO 8601
  int exit_code = 0;
  std::vector<std::string> artifacts;
};

void to_json(nlohmann::json& j, const Manifest& m);
void from_json(const nlohmann::json& j, Manifest& m);

/// Current UTC time, second resolution.
std::string utc_timestamp();

}  // namespace openkpz
