#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

namespace testsupport {

inline std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(MINDCHECK_TEST_DATA_DIR) / name;
}

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline nlohmann::json read_json(const std::string& name) { return nlohmann::json::parse(read_text(fixture(name))); }

}  // namespace testsupport
