#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "openkpz/io.hpp"

using namespace openkpz;

TEST_CASE("config hash ignores key order and sees values") {
  const auto a = nlohmann::json::parse(R"({"seed": 1, "model": {"N": 8, "m": 1}})");
  const auto b = nlohmann::json::parse(R"({"model": {"m": 1, "N": 8}, "seed": 1})");
  const auto c = nlohmann::json::parse(R"({"model": {"m": 1, "N": 9}, "seed": 1})");
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a) != config_hash(c));
  CHECK(config_hash(a).size() == 16);
}

TEST_CASE("atomic write leaves no temporary behind") {
  const auto dir = std::filesystem::temp_directory_path() / "openkpz_io_test";
  std::filesystem::remove_all(dir);
  const auto path = dir / "sub" / "a.csv";
  write_atomic(path, "x\n1\n");
  write_atomic(path, "x\n2\n");
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  CHECK(ss.str() == "x\n2\n");
  CHECK_FALSE(std::filesystem::exists(dir / "sub" / "a.csv.tmp"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("manifest round-trips") {
  Manifest m;
  m.command = "bounds";
  m.config_hash = "0123456789abcdef";
  m.seed = 18446744073709551615ull;
  m.eigen_version = "3.4.0";
  m.wall_seconds = 1.25;
  m.started_at = utc_timestamp();
  m.exit_code = 1;
  m.artifacts = {"bounds.csv", "bounds.json"};
  const nlohmann::json j = m;
  const auto back = nlohmann::json::parse(j.dump()).get<Manifest>();
  CHECK(back.command == m.command);
  CHECK(back.config_hash == m.config_hash);
  CHECK(back.seed == m.seed);
  CHECK(back.wall_seconds == m.wall_seconds);
  CHECK(back.started_at == m.started_at);
  CHECK(back.exit_code == 1);
  CHECK(back.artifacts == m.artifacts);
  CHECK(with_header("a\n", "ff", 3) == "# config_hash=ff seed=3\na\n");
}
