#include <doctest.h>

#include <algorithm>
#include <random>

#include "pathfinder/env.hpp"
#include "pathfinder/oracle.hpp"
#include "support.hpp"

using namespace pathfinder;
using pathfinder::testing::benchmark_env;
using pathfinder::testing::data_path;
using pathfinder::testing::load_env;

namespace {

EnvState random_state(const AttackEnvironment& env, std::mt19937_64& rng) {
  EnvState s = env.reset();
  std::bernoulli_distribution bit(0.3);
  for (std::size_t i = 0; i < s.permissions.size(); ++i)
    if (bit(rng)) s.permissions.set(i);
  std::bernoulli_distribution acl_bit(0.5);
  for (std::size_t i = 0; i < s.acl.size(); ++i) {
    if (acl_bit(rng)) s.acl.set(i);
    else s.acl.reset(i);
  }
  std::vector<EntityIndex> spaces;
  for (EntityIndex e = 0; e < env.model().entities.size(); ++e)
    if (env.model().entity(e).cls == EntityClass::Space) spaces.push_back(e);
  s.attacker_space = spaces[std::uniform_int_distribution<std::size_t>(0, spaces.size() - 1)(rng)];
  return s;
}

std::size_t action_named(const AttackEnvironment& env, const std::string& name) {
  for (std::size_t a = 0; a < env.action_count(); ++a)
    if (env.describe(a) == name) return a;
  FAIL("no action " << name);
  return 0;
}

}  // namespace

TEST_CASE("benchmark dimensions") {
  const auto env = benchmark_env();
  CHECK(env.state_size() == 106);
  CHECK(env.action_count() == 133);
  CHECK(env.acl_universe().size() == 16);
  const auto s = env.reset();
  CHECK(s.permissions.count() == 0);
  CHECK(s.steps_this_attack == 0);
  CHECK(env.state_vector(s).size() == 106);
}

TEST_CASE("mask bit equals the step feasibility flag") {
  const auto env = benchmark_env();
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<std::size_t> pick(0, env.action_count() - 1);
  std::size_t feasible = 0;
  for (int probe = 0; probe < 20000; ++probe) {
    const auto s = random_state(env, rng);
    const auto a = pick(rng);
    const bool bit = env.action_mask(s).test(a);
    REQUIRE(bit == env.step(s, a).feasible);
    feasible += bit ? 1 : 0;
  }
  CHECK(feasible > 0);
  CHECK(feasible < 20000);
}

TEST_CASE("stay is always feasible and changes nothing but the counters") {
  const auto env = benchmark_env();
  std::mt19937_64 rng(3);
  const auto stay = *env.find_action(Verb::Stay, "");
  for (int i = 0; i < 200; ++i) {
    const auto s = random_state(env, rng);
    const auto out = env.step(s, stay);
    CHECK(out.feasible);
    CHECK(out.next.permissions == s.permissions);
    CHECK(out.next.acl == s.acl);
    CHECK(out.reward == doctest::Approx(kStepPenalty));
  }
}

TEST_CASE("infeasible steps cost the step penalty and keep the state") {
  const auto env = load_env(data_path("short.scn"));
  const auto s = env.reset();
  const auto use = action_named(env, "UseDevice(Terminal)");
  REQUIRE_FALSE(env.feasible(s, use));
  const auto out = env.step(s, use);
  CHECK_FALSE(out.feasible);
  CHECK(out.reward == kStepPenalty);
  CHECK(out.next.permissions == s.permissions);
  CHECK(out.next.steps_this_attack == 1);
}

TEST_CASE("success pays 500000 / t and restarts the attempt") {
  const auto env = load_env(data_path("short.scn"));
  auto s = env.reset();
  const auto enter = action_named(env, "EnterSpace(Lobby)");
  const auto use = action_named(env, "UseDevice(Terminal)");
  const auto stay = *env.find_action(Verb::Stay, "");

  s = env.step(s, stay).next;
  auto out = env.step(s, enter);
  REQUIRE(out.feasible);
  CHECK_FALSE(out.attack_succeeded);
  out = env.step(out.next, use);
  REQUIRE(out.feasible);
  CHECK(out.attack_succeeded);
  CHECK(out.attack_steps == 3);
  CHECK(out.reward == doctest::Approx(500000.0 / 3));
  CHECK(out.next == [&] {
    auto r = env.reset();
    r.steps_this_episode = 3;
    return r;
  }());
}

TEST_CASE("episode ends at the step limit") {
  const auto env = load_env(data_path("short.scn"), 5);
  auto s = env.reset();
  const auto stay = *env.find_action(Verb::Stay, "");
  for (int i = 0; i < 4; ++i) {
    const auto out = env.step(s, stay);
    CHECK_FALSE(out.episode_done);
    s = out.next;
  }
  CHECK(env.step(s, stay).episode_done);
}

TEST_CASE("out-of-range actions throw") {
  const auto env = load_env(data_path("short.scn"));
  CHECK_THROWS_AS(env.step(env.reset(), env.action_count()), ActionIndexError);
}

TEST_CASE("redundant actions stay feasible") {
  const auto env = load_env(data_path("chain.scn"));
  auto out = env.step(env.reset(), action_named(env, "EnterSpace(Hall)"));
  REQUIRE(out.feasible);
  const auto use = action_named(env, "UseDevice(Kiosk)");
  out = env.step(out.next, use);
  REQUIRE(out.feasible);
  CHECK_FALSE(out.newly_granted.empty());
  const auto again = env.step(out.next, use);
  CHECK(again.feasible);
  CHECK(again.newly_granted.empty());
  CHECK(again.reward == kStepPenalty);
}

TEST_CASE("trace line is tab separated") {
  const auto env = load_env(data_path("short.scn"));
  const auto out = env.step(env.reset(), 0);
  const auto line = env.trace_line(0, 0, 0, out);
  CHECK(std::count(line.begin(), line.end(), '\t') == 7);
}

TEST_CASE("a success also restores the initial firewall rules") {
  const auto env = pathfinder::testing::benchmark_env();
  OracleOptions o;
  const auto path = shortest_attack_path(env, o);
  REQUIRE(path);
  auto s = env.reset();
  StepOutcome out;
  for (auto a : path->actions) {
    out = env.step(s, a);
    s = out.next;
  }
  REQUIRE(out.attack_succeeded);
  CHECK(s.acl == env.reset().acl);
  CHECK(s.steps_this_episode == path->length());
}
