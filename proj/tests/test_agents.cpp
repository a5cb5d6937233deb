#include <doctest.h>

#include <cmath>
#include <random>

#include "pathfinder/agents.hpp"
#include "pathfinder/oracle.hpp"
#include "support.hpp"

using namespace pathfinder;
using pathfinder::nn::Matrix;
using pathfinder::nn::Vector;
using pathfinder::testing::benchmark_env;
using pathfinder::testing::data_path;
using pathfinder::testing::load_env;

namespace {

// Pearson statistic against a uniform expectation.
double chi_square(const std::vector<double>& counts) {
  double total = 0.0;
  for (double c : counts) total += c;
  const double expect = total / static_cast<double>(counts.size());
  double stat = 0.0;
  for (double c : counts) stat += (c - expect) * (c - expect) / expect;
  return stat;
}

BitSet bits(std::initializer_list<int> on, std::size_t width) {
  BitSet b(width);
  for (int i : on) b.set(static_cast<std::size_t>(i));
  return b;
}

Transition dummy(std::size_t action) {
  Transition t;
  t.state = BitSet(4);
  t.next_state = BitSet(4);
  t.action = action;
  return t;
}

AgentConfig small_config(std::uint64_t seed, std::size_t episodes) {
  AgentConfig c;
  c.seed = seed;
  c.episodes = episodes;
  c.batch_size = 16;
  c.memory_capacity = 2000;
  c.target_sync = 100;
  return c;
}

}  // namespace

TEST_CASE("replay memory overwrites the oldest slot") {
  ReplayMemory mem(3);
  for (std::size_t a = 0; a < 5; ++a) mem.push(dummy(a));
  CHECK(mem.size() == 3);
  CHECK(mem.cursor() == 2);
  CHECK(mem[0].action == 3);
  CHECK(mem[1].action == 4);
  CHECK(mem[2].action == 2);
  CHECK_THROWS_AS(ReplayMemory(0), std::invalid_argument);
}

TEST_CASE("replay sampling is distinct and uniform") {
  ReplayMemory mem(50);
  for (std::size_t a = 0; a < 50; ++a) mem.push(dummy(a));
  std::mt19937_64 rng(11);
  std::vector<double> counts(50, 0.0);
  for (int draw = 0; draw < 20000; ++draw) {
    auto idx = mem.sample(10, rng);
    std::sort(idx.begin(), idx.end());
    REQUIRE(std::adjacent_find(idx.begin(), idx.end()) == idx.end());
    for (auto i : idx) counts[i] += 1.0;
  }
  // 49 degrees of freedom, p = 0.001
  CHECK(chi_square(counts) < 85.35);
  CHECK_THROWS(mem.sample(51, rng));
}

TEST_CASE("restricted argmax only executes feasible actions") {
  const Vector scores = (Vector(5) << 0.9, 0.1, 0.5, 0.7, 0.2).finished();
  const auto choice = select_action_iddpg(scores, bits({1, 2, 4}, 5));
  CHECK(choice.theory == 0);
  CHECK(choice.executed == 2);

  std::mt19937_64 rng(2);
  std::normal_distribution<double> gauss(0.0, 0.3);
  const auto mask = bits({1, 4}, 5);
  for (int i = 0; i < 1000; ++i) {
    Vector noise(5);
    for (auto& v : noise) v = gauss(rng);
    const auto c = select_action_iddpg(scores, mask, noise);
    CHECK(mask.test(c.executed));
  }
  CHECK_THROWS(select_action_iddpg(scores, bits({}, 4)));
}

TEST_CASE("epsilon one samples feasible actions uniformly") {
  const auto mask = bits({0, 2, 3, 6, 7}, 8);
  const Vector values = Vector::LinSpaced(8, 0.0, 1.0);
  std::mt19937_64 rng(5);
  std::vector<double> counts(8, 0.0);
  for (int i = 0; i < 50000; ++i) counts[epsilon_greedy(values, mask, 1.0, rng)] += 1.0;
  CHECK(counts[1] == 0.0);
  CHECK(counts[4] == 0.0);
  CHECK(counts[5] == 0.0);
  const std::vector<double> feasible{counts[0], counts[2], counts[3], counts[6], counts[7]};
  // 4 degrees of freedom, p = 0.001
  CHECK(chi_square(feasible) < 18.47);
  CHECK(epsilon_greedy(values, mask, 0.0, rng) == 7);
}

TEST_CASE("greedy logit gradient matches cross-entropy") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  Matrix logits(6, 3), mask(6, 3), values(6, 3);
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    logits(i) = u(rng);
    mask(i) = (i % 3 == 0) ? 0.0 : 1.0;
    values(i) = u(rng);
  }
  values(0, 0) = 10.0;  // infeasible, must not be the target
  const auto sigmoid = [](const Matrix& x) { return Matrix((1.0 + (-x.array()).exp()).inverse()); };
  const Matrix grad = greedy_logit_gradient(sigmoid(logits), mask, values);

  Matrix target = Matrix::Zero(6, 3);
  for (Eigen::Index j = 0; j < 3; ++j) {
    Eigen::Index best = -1;
    for (Eigen::Index i = 0; i < 6; ++i)
      if (mask(i, j) > 0.0 && (best < 0 || values(i, j) > values(best, j))) best = i;
    target(best, j) = 1.0;
  }
  CHECK(target(0, 0) == 0.0);
  const auto loss = [&](const Matrix& x) {
    const Matrix p = sigmoid(x);
    return -(target.array() * p.array().log() + (1.0 - target.array()) * (1.0 - p.array()).log()).sum() / 3.0;
  };
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    Matrix up = logits, down = logits;
    up(i) += 1e-6;
    down(i) -= 1e-6;
    CHECK(grad(i) == doctest::Approx((loss(up) - loss(down)) / 2e-6).epsilon(1e-5));
  }
  CHECK_THROWS_AS(greedy_logit_gradient(Matrix(2, 2), Matrix(3, 2), Matrix(2, 2)), std::invalid_argument);
}

TEST_CASE("masked softmax and the a2c logit gradient") {
  const Vector logits = (Vector(4) << 0.3, -1.0, 2.0, 0.5).finished();
  const auto mask = bits({0, 2, 3}, 4);
  const Vector p = masked_softmax(logits, mask);
  CHECK(p[1] == 0.0);
  CHECK(p.sum() == doctest::Approx(1.0));

  const Vector full = masked_softmax(logits, bits({0, 1, 2, 3}, 4));
  auto objective = [&](const Vector& z) {
    const Vector q = masked_softmax(z, bits({0, 1, 2, 3}, 4));
    double entropy = 0.0;
    for (auto v : q) entropy -= v * std::log(v);
    return -std::log(q[2]) * 1.5 - 0.1 * entropy;
  };
  const Vector analytic = a2c_logit_gradient(full, 2, 1.5, 0.1);
  for (Eigen::Index i = 0; i < 4; ++i) {
    Vector up = logits, down = logits;
    up[i] += 1e-6;
    down[i] -= 1e-6;
    CHECK(analytic[i] == doctest::Approx((objective(up) - objective(down)) / 2e-6).epsilon(1e-5));
  }
}

TEST_CASE("penalty records keep the state") {
  const auto env = load_env(data_path("short.scn"));
  const auto s = env.reset();
  ReplayMemory mem(4);
  const auto use = *env.find_action(Verb::UseDevice, "Terminal");
  record_infeasible(mem, env, s, use, Vector::Zero(3));
  REQUIRE(mem.size() == 1);
  CHECK(mem[0].reward == kInfeasibleReward);
  CHECK(mem[0].next_state == mem[0].state);
  CHECK(mem[0].feasible_penalty);
  const auto stay = *env.find_action(Verb::Stay, "");
  CHECK_THROWS_AS(record_infeasible(mem, env, s, stay, Vector::Zero(3)), std::invalid_argument);
}

TEST_CASE("linear schedule") {
  CHECK(linear_schedule(1.0, 0.0, 0, 11) == 1.0);
  CHECK(linear_schedule(1.0, 0.0, 5, 11) == doctest::Approx(0.5));
  CHECK(linear_schedule(1.0, 0.0, 10, 11) == 0.0);
  CHECK(linear_schedule(1.0, 0.0, 50, 11) == 0.0);
}

TEST_CASE("config validation") {
  AgentConfig c;
  CHECK_NOTHROW(c.validate());
  c.gamma = 1.5;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = AgentConfig{};
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = AgentConfig{};
  c.target_floor = 1.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  CHECK(parse_agent_kind("iddpg") == AgentKind::Iddpg);
  CHECK(to_string(AgentKind::A2c) == "a2c");
  CHECK_FALSE(parse_agent_kind("ppo").has_value());
}

TEST_CASE("every agent trains deterministically and respects the oracle bound") {
  const auto env = load_env(data_path("chain.scn"), 300);
  const auto oracle = shortest_attack_path(env)->length();
  for (auto kind : {AgentKind::Iddpg, AgentKind::Ddpg, AgentKind::Dqn, AgentKind::A2c}) {
    CAPTURE(to_string(kind));
    const auto cfg = small_config(4, 4);
    const auto a = train(kind, env, cfg);
    const auto b = train(kind, env, cfg);
    CHECK(a.episode_rewards == b.episode_rewards);
    CHECK(a.episode_successes == b.episode_successes);
    CHECK(a.final_parameters == b.final_parameters);
    CHECK(a.episode_rewards.size() == 4);
    CHECK(a.total_steps == 4 * 300);
    if (auto m = a.minimum_steps()) CHECK(*m >= oracle);
    if (kind != AgentKind::Ddpg) CHECK(a.infeasible_executions == 0);
    if (kind == AgentKind::Iddpg) CHECK(a.augmented_records > 0);
    if (kind != AgentKind::Iddpg) CHECK(a.augmented_records == 0);
  }
}

TEST_CASE("different seeds give different runs") {
  const auto env = load_env(data_path("chain.scn"), 200);
  const auto a = train_iddpg(env, small_config(1, 2));
  const auto b = train_iddpg(env, small_config(2, 2));
  CHECK(a.final_parameters != b.final_parameters);
}

TEST_CASE("observer sees every step") {
  const auto env = load_env(data_path("short.scn"), 50);
  std::uint64_t steps = 0, successes = 0;
  const auto r = train_dqn(env, small_config(1, 3), [&](std::uint64_t, std::uint64_t, std::size_t, const StepOutcome& o) {
    ++steps;
    successes += o.attack_succeeded ? 1 : 0;
  });
  CHECK(steps == 150);
  CHECK(successes == r.success_count());
}

TEST_CASE("iddpg never executes an infeasible action on the benchmark") {
  const auto env = benchmark_env(500);
  auto cfg = small_config(1, 2);
  cfg.train_interval = 4;
  std::uint64_t infeasible = 0;
  const auto r = train_iddpg(env, cfg, [&](std::uint64_t, std::uint64_t, std::size_t, const StepOutcome& o) {
    infeasible += o.feasible ? 0 : 1;
  });
  CHECK(infeasible == 0);
  CHECK(r.infeasible_executions == 0);
}
