#include "openkpz/io.hpp"

#include <Eigen/Core>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace openkpz {

std::string config_hash(const nlohmann::json& config) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : config.dump()) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void write_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open " + tmp.string());
    os << content;
    os.flush();
    if (!os) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string with_header(const std::string& body, const std::string& hash, std::uint64_t seed) {
  std::ostringstream os;
  os << "# config_hash=" << hash << " seed=" << seed << '\n' << body;
  return os.str();
}

void to_json(nlohmann::json& j, const Manifest& m) {
  j = nlohmann::json{{"command", m.command},         {"config_hash", m.config_hash},
                     {"seed", m.seed},               {"version", m.version},
                     {"eigen_version", m.eigen_version}, {"wall_seconds", m.wall_seconds},
                     {"started_at", m.started_at},   {"exit_code", m.exit_code},
                     {"artifacts", m.artifacts}};
}

void from_json(const nlohmann::json& j, Manifest& m) {
  j.at("command").get_to(m.command);
  j.at("config_hash").get_to(m.config_hash);
  j.at("seed").get_to(m.seed);
  j.at("version").get_to(m.version);
  j.at("eigen_version").get_to(m.eigen_version);
  j.at("wall_seconds").get_to(m.wall_seconds);
  j.at("started_at").get_to(m.started_at);
  j.at("exit_code").get_to(m.exit_code);
  j.at("artifacts").get_to(m.artifacts);
}

std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace openkpz
