#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "vpmu/grid.hpp"
#include "vpmu/pmu.hpp"

namespace test {

inline std::filesystem::path data_path(const std::string& name) {
  return std::filesystem::path(VPMU_DATA_DIR) / name;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline const vpmu::GridModel& ieee14() {
  static const auto g = vpmu::load_cdf(data_path("ieee14cdf.txt"));
  return g;
}

inline const vpmu::Scenario& scenario14() {
  static const auto s = vpmu::load_scenario(data_path("ieee14_scenario.csv"));
  return s;
}

}  // namespace test
