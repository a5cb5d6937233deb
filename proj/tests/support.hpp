#pragma once

#include <memory>
#include <string>

#include "pathfinder/env.hpp"

namespace pathfinder::testing {

inline std::string data_path(const std::string& name) { return std::string(PATHFINDER_TEST_DATA) + "/" + name; }
inline std::string scenario_path(const std::string& name) {
  return std::string(PATHFINDER_SCENARIO_DIR) + "/" + name;
}

inline AttackEnvironment load_env(const std::string& path, std::uint64_t limit = 10000) {
  return AttackEnvironment(std::make_shared<const CyberspaceModel>(load_scenario_file(path)), EnvConfig{limit});
}

inline AttackEnvironment benchmark_env(std::uint64_t limit = 10000) {
  return load_env(scenario_path("benchmark.scn"), limit);
}

}  // namespace pathfinder::testing
