#include <doctest.h>

#include <fstream>
#include <set>
#include <sstream>

#include "pathfinder/model.hpp"
#include "support.hpp"

using namespace pathfinder;
using pathfinder::testing::data_path;
using pathfinder::testing::scenario_path;

TEST_CASE("benchmark scenario matches the published environment") {
  const auto m = load_scenario_file(scenario_path("benchmark.scn"));
  const auto report = validate_benchmark(m);
  for (const auto& p : report.problems) MESSAGE(p);
  CHECK(report.ok());
  CHECK(m.atom_count() == 106);
}

TEST_CASE("rule variants still load") {
  for (const char* name : {"benchmark_r4.scn", "benchmark_r5.scn", "benchmark_r6.scn"}) {
    const auto m = load_scenario_file(scenario_path(name));
    CHECK(m.atom_count() == 106);
  }
}

TEST_CASE("serialization round-trips") {
  for (const auto& path : {scenario_path("benchmark.scn"), data_path("short.scn"), data_path("chain.scn")}) {
    const auto m = load_scenario_file(path);
    const auto again = load_scenario(serialize_scenario(m));
    CHECK(again == m);
  }
}

TEST_CASE("permission kinds by entity class") {
  std::set<PermissionKind> all;
  for (auto c : {EntityClass::Space, EntityClass::Device, EntityClass::Port, EntityClass::Service,
                 EntityClass::File, EntityClass::InfoItem})
    for (auto k : legal_kinds(c)) {
      CHECK(is_legal(c, k));
      all.insert(k);
    }
  CHECK(all.size() == 9);
  CHECK_FALSE(is_legal(EntityClass::Space, PermissionKind::ObjectDominate));
  CHECK(parse_permission_kind(to_string(PermissionKind::InformationKnow)) == PermissionKind::InformationKnow);
  CHECK_FALSE(parse_permission_kind("bogus").has_value());
}

TEST_CASE("malformed scenarios are rejected") {
  CHECK_THROWS_AS(load_scenario("{ not json"), ScenarioParseError);
  CHECK_THROWS_AS(load_scenario("[]"), ScenarioError);
  CHECK_THROWS_AS(load_scenario_file("/nonexistent/file.scn"), ScenarioParseError);

}

namespace {
std::string short_text() {
  std::ifstream in(data_path("short.scn"));
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}
std::string replace_once(std::string s, const std::string& from, const std::string& to) {
  const auto at = s.find(from);
  REQUIRE(at != std::string::npos);
  return s.replace(at, from.size(), to);
}
}  // namespace

TEST_CASE("validation names the offending entity") {
  const auto bad = replace_once(short_text(), "\"location\": \"Lobby\"", "\"location\": \"Nowhere\"");
  try {
    load_scenario(bad);
    FAIL("expected a validation error");
  } catch (const ScenarioValidationError& e) {
    CHECK(e.offending_id() == "Nowhere");
  }
  CHECK_THROWS_AS(load_scenario(replace_once(short_text(), "\"goal\": \"secret\"", "\"goal\": \"Street\"")),
                  ScenarioError);
}
