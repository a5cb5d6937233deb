// Acceptance gate: one PASS/FAIL line per criterion, non-zero exit on any FAIL.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "pathfinder/harness.hpp"
#include "pathfinder/oracle.hpp"

using namespace pathfinder;
using nn::Matrix;
using nn::Vector;
namespace fs = std::filesystem;

namespace {

const std::string kScenarios = PATHFINDER_SCENARIO_DIR;
const std::string kBenchmark = kScenarios + "/benchmark.scn";

constexpr std::size_t kScaledEpisodes = 100;
constexpr std::uint64_t kScaledLimit = 2000;
constexpr std::size_t kTrainInterval = 4;
const std::vector<std::uint64_t> kSeeds = {1, 2, 3, 4, 5};

int failures = 0;

void report(int id, bool ok, const std::string& detail) {
  std::cout << (ok ? "PASS" : "FAIL") << " criterion " << id << ": " << detail << std::endl;
  if (!ok) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fixed(double v, int digits = 1) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << v;
  return os.str();
}

AttackEnvironment load_env(const std::string& path, std::uint64_t limit = 10000) {
  return AttackEnvironment(std::make_shared<const CyberspaceModel>(load_scenario_file(path)), EnvConfig{limit});
}

// Every training run made by this binary, for the oracle lower bound.
std::vector<SeedMetrics> all_runs;

RunSpec training_spec(const std::string& agent, std::size_t episodes, std::uint64_t limit,
                      std::vector<std::uint64_t> seeds) {
  RunSpec s;
  s.scenario = kBenchmark;
  s.agent = agent;
  s.episodes = episodes;
  s.episode_limit = limit;
  s.seeds = std::move(seeds);
  s.agent_config.train_interval = kTrainInterval;
  return s;
}

std::vector<SeedMetrics> train_runs(const RunSpec& spec) {
  auto rows = run(spec).rows;
  all_runs.insert(all_runs.end(), rows.begin(), rows.end());
  return rows;
}

// --- 1 ---
std::size_t benchmark_oracle_length = 0;

void oracle_ground_truth() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto env = load_env(kBenchmark);
  const auto path = shortest_attack_path(env);
  bool ok = path.has_value() && replay_attack(env, path->actions);
  std::size_t acl_adds = 0;
  if (path) {
    benchmark_oracle_length = path->length();
    for (auto a : path->actions) acl_adds += env.actions()[a].verb == Verb::AclAdd ? 1 : 0;
  }
  OracleOptions no_acl;
  no_acl.excluded_verbs = {Verb::AclAdd};
  const bool unreachable = !shortest_attack_path(env, no_acl).has_value();
  const double dt = seconds_since(t0);
  ok = ok && acl_adds == 3 && unreachable && dt < 60.0;
  report(1, ok,
         "length " + std::to_string(benchmark_oracle_length) + ", replay verified, " + std::to_string(acl_adds) +
             " ACL additions, without AclAdd " + (unreachable ? "unreachable" : "REACHABLE") + ", " + fixed(dt) +
             " s");
}

// --- 2 ---
void rule_monotonicity() {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<std::size_t> lengths;
  bool reachable = true;
  for (const auto& p : rule_variants(kBenchmark)) {
    const auto path = shortest_attack_path(load_env(p.string()));
    reachable = reachable && path.has_value();
    lengths.push_back(path ? path->length() : 0);
  }
  bool non_decreasing = true, strict_once = false;
  for (std::size_t i = 1; i < lengths.size(); ++i) {
    non_decreasing = non_decreasing && lengths[i] >= lengths[i - 1];
    strict_once = strict_once || lengths[i] > lengths[i - 1];
  }
  const double dt = seconds_since(t0);
  std::string detail = "oracle lengths r3..r6 =";
  for (auto l : lengths) detail += " " + std::to_string(l);
  report(2, reachable && non_decreasing && strict_once && dt < 300.0, detail + ", " + fixed(dt) + " s");
}

// --- 3 ---
void mask_soundness() {
  const auto env = load_env(kBenchmark);
  std::mt19937_64 rng(2024);
  std::vector<EntityIndex> spaces;
  for (EntityIndex e = 0; e < env.model().entities.size(); ++e)
    if (env.model().entity(e).cls == EntityClass::Space) spaces.push_back(e);
  std::uniform_int_distribution<std::size_t> pick_action(0, env.action_count() - 1);
  std::uniform_int_distribution<std::size_t> pick_space(0, spaces.size() - 1);
  std::uniform_real_distribution<double> density(0.0, 1.0);

  std::size_t mismatches = 0, feasible = 0;
  constexpr int kProbes = 100000;
  for (int probe = 0; probe < kProbes; ++probe) {
    EnvState s = env.reset();
    std::bernoulli_distribution perm_bit(density(rng));
    for (std::size_t i = 0; i < s.permissions.size(); ++i)
      if (perm_bit(rng)) s.permissions.set(i);
    std::bernoulli_distribution acl_bit(density(rng));
    for (std::size_t i = 0; i < s.acl.size(); ++i) {
      if (acl_bit(rng)) s.acl.set(i);
      else s.acl.reset(i);
    }
    s.attacker_space = spaces[pick_space(rng)];
    const auto a = pick_action(rng);
    const bool bit = env.action_mask(s).test(a);
    if (bit != env.step(s, a).feasible) ++mismatches;
    feasible += bit ? 1 : 0;
  }
  report(3, mismatches == 0,
         std::to_string(kProbes) + " probes, " + std::to_string(mismatches) + " mismatches (" +
             std::to_string(feasible) + " feasible)");
}

// --- 4 ---
Matrix uniform(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = u(rng);
  return m;
}

double relu_margin(const nn::Mlp& net, const Matrix& x) {
  const auto& p = net.params();
  const Matrix a1 = (p[0] * x).colwise() + p[1].col(0);
  const Matrix a2 = (p[2] * a1.cwiseMax(0.0)).colwise() + p[3].col(0);
  return std::min(a1.cwiseAbs().minCoeff(), a2.cwiseAbs().minCoeff());
}

template <class Loss>
double check_tensor(Matrix& x, const Matrix& analytic, Loss&& loss) {
  constexpr double eps = 1e-4;
  Matrix numeric(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double keep = x(i);
    x(i) = keep + eps;
    const double up = loss();
    x(i) = keep - eps;
    const double down = loss();
    x(i) = keep;
    numeric(i) = (up - down) / (2 * eps);
  }
  const double denom = analytic.norm() + numeric.norm();
  return denom < 1e-12 ? 0.0 : (analytic - numeric).norm() / denom;
}

void gradient_correctness() {
  const auto env = load_env(kBenchmark);
  const auto ns = static_cast<Eigen::Index>(env.state_size());
  const auto na = static_cast<Eigen::Index>(env.action_count());
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    std::mt19937_64 rng(seed);
    nn::PolicyNet actor(ns, na, rng);
    Matrix s, h;
    do {
      s = uniform(ns, 2, rng, 0.0, 1.0).array().round();
      h = uniform(nn::kRecurrentUnits, 2, rng, -0.5, 0.5);
    } while (relu_margin(actor.head(), actor.forward(s, h).hidden) < 1e-3);
    const Matrix gs = uniform(na, 2, rng, -1.0, 1.0);
    auto actor_loss = [&] { return actor.forward(s, h).scores.cwiseProduct(gs).sum(); };
    actor_loss();
    const Matrix dh = actor.backward(gs);
    const auto grads = nn::snapshot(actor.grad_tensors());
    const auto params = actor.tensors();
    for (std::size_t k = 0; k < params.size(); ++k)
      worst = std::max(worst, check_tensor(*params[k], grads[k], actor_loss));
    worst = std::max(worst, check_tensor(h, dh, actor_loss));

    nn::CriticNet critic(ns, na, rng);
    Matrix a;
    do {
      s = uniform(ns, 2, rng, 0.0, 1.0).array().round();
      a = uniform(na, 2, rng, 0.0, 1.0);
    } while (relu_margin(critic.network(), (Matrix(ns + na, 2) << s, a).finished()) < 1e-3);
    const Matrix gq = uniform(1, 2, rng, -1.0, 1.0);
    auto critic_loss = [&] { return critic.forward(s, a).cwiseProduct(gq).sum(); };
    critic_loss();
    const Matrix da = critic.backward(gq);
    const auto cgrads = nn::snapshot(critic.grad_tensors());
    const auto cparams = critic.tensors();
    for (std::size_t k = 0; k < cparams.size(); ++k)
      worst = std::max(worst, check_tensor(*cparams[k], cgrads[k], critic_loss));
    worst = std::max(worst, check_tensor(a, da, critic_loss));
  }
  std::ostringstream os;
  os << "10 seeds, worst relative error " << worst;
  report(4, worst <= 1e-3, os.str());
}

// --- 5 ---
void unit_truths() {
  std::mt19937_64 rng(55);
  const nn::ParamList online{uniform(48, 106, rng, -1, 1), uniform(48, 1, rng, -1, 1)};
  const nn::ParamList start{uniform(48, 106, rng, -1, 1), uniform(48, 1, rng, -1, 1)};
  double soft_err = 0.0;
  for (double tau : {0.0, 1.0, 0.01}) {
    auto target = start;
    nn::soft_update(target, online, tau);
    for (std::size_t k = 0; k < target.size(); ++k)
      for (Eigen::Index i = 0; i < target[k].size(); ++i)
        soft_err = std::max(soft_err, std::abs(target[k](i) - (tau * online[k](i) + (1 - tau) * start[k](i))));
  }
  nn::CriticNet critic(106, 133, rng);
  const Matrix s = uniform(106, 64, rng, 0.0, 1.0).array().round();
  Matrix a = Matrix::Zero(133, 64);
  for (Eigen::Index j = 0; j < 64; ++j) a(j * 2 % 133, j) = 1.0;
  const Vector y = uniform(64, 1, rng, -5.0, 5.0);
  const Matrix q = critic.forward(s, a);
  long double sum = 0.0L;
  for (Eigen::Index j = 0; j < 64; ++j) sum += static_cast<long double>(y[j] - q(0, j)) * (y[j] - q(0, j));
  const double loss_err = std::abs(nn::critic_loss(critic, s, a, y) - static_cast<double>(sum / 64));
  std::ostringstream os;
  os << "soft_update max error " << soft_err << ", critic_loss error " << loss_err;
  report(5, soft_err <= 1e-12 && loss_err <= 1e-9, os.str());
}

// --- 6 ---
void feasibility_guarantee() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto rows = train_runs(training_spec("iddpg", 500, kScaledLimit, {1}));
  const auto& m = rows.front();
  report(6, m.infeasible_executions == 0 && m.episode_rewards.size() == 500,
         "500 episodes x " + std::to_string(kScaledLimit) + " steps, " + std::to_string(m.total_steps) +
             " executed actions, " + std::to_string(m.infeasible_executions) + " infeasible, " +
             std::to_string(m.attack_success_count()) + " successes, " + fixed(seconds_since(t0), 0) + " s");
}

// --- 7 and 8 ---
double window_mean(const std::vector<double>& v, std::size_t from, std::size_t to) {
  double s = 0.0;
  for (std::size_t i = from; i < to; ++i) s += v[i];
  return s / static_cast<double>(to - from);
}

template <class T>
double median(std::vector<T> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? static_cast<double>(v[n / 2]) : (static_cast<double>(v[n / 2 - 1]) + static_cast<double>(v[n / 2])) / 2;
}

void learning_and_ordering() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto iddpg = train_runs(training_spec("iddpg", kScaledEpisodes, kScaledLimit, kSeeds));
  int learning = 0;
  std::string detail;
  for (const auto& m : iddpg) {
    const auto n = m.episode_rewards.size();
    const auto tenth = std::max<std::size_t>(1, n / 10);
    const double first = window_mean(m.episode_rewards, 0, tenth);
    const double last = window_mean(m.episode_rewards, n - tenth, n);
    const bool ok = last > first && m.attack_success_count() >= 1;
    learning += ok ? 1 : 0;
    detail += " seed" + std::to_string(m.seed) + "[" + fixed(first) + " -> " + fixed(last) + ", " +
              std::to_string(m.attack_success_count()) + " successes]";
  }
  report(7, learning >= 4,
         std::to_string(learning) + "/5 seeds learning, " + fixed(seconds_since(t0), 0) + " s:" + detail);

  const auto t1 = std::chrono::steady_clock::now();
  const auto ddpg = train_runs(training_spec("ddpg", kScaledEpisodes, kScaledLimit, kSeeds));
  // A run without any success has no minimum; it ranks as the episode limit.
  auto successes = [](const std::vector<SeedMetrics>& rows) {
    std::vector<std::uint64_t> v;
    for (const auto& m : rows) v.push_back(m.attack_success_count());
    return v;
  };
  auto min_steps = [](const std::vector<SeedMetrics>& rows) {
    std::vector<std::uint64_t> v;
    for (const auto& m : rows) v.push_back(m.minimum_steps().value_or(kScaledLimit));
    return v;
  };
  const double is = median(successes(iddpg)), ds = median(successes(ddpg));
  const double im = median(min_steps(iddpg)), dm = median(min_steps(ddpg));
  report(8, is > ds && im <= dm,
         "median successes IDDPG " + fixed(is, 0) + " vs DDPG " + fixed(ds, 0) + ", median minimum steps IDDPG " +
             fixed(im, 0) + " vs DDPG " + fixed(dm, 0) + ", DDPG " + fixed(seconds_since(t1), 0) + " s");
}

// --- 9 ---
void determinism() {
  const auto root = fs::temp_directory_path() / "pathfinder_acceptance";
  fs::remove_all(root);
  std::size_t compared = 0, differing = 0;
  for (const std::string agent : {"iddpg", "ddpg", "dqn", "a2c"}) {
    for (const char* rep : {"a", "b"}) {
      auto spec = training_spec(agent, 3, 500, {7});
      spec.out_dir = root / rep;
      train_runs(spec);
    }
    for (const auto& ext : {".json", ".csv", ".ckpt"}) {
      const auto name = agent + "_seed7" + ext;
      ++compared;
      if (read_text(root / "a" / name) != read_text(root / "b" / name)) ++differing;
    }
  }
  fs::remove_all(root);
  report(9, differing == 0,
         std::to_string(compared) + " files from repeated runs of four agents, " + std::to_string(differing) +
             " differ");
}

// --- 10 ---
void oracle_lower_bound() {
  std::size_t with_success = 0, below = 0;
  std::uint64_t lowest = 0;
  for (const auto& m : all_runs) {
    const auto min = m.minimum_steps();
    if (!min) continue;
    ++with_success;
    if (*min < benchmark_oracle_length) ++below;
    lowest = lowest == 0 ? *min : std::min(lowest, *min);
  }
  report(10, benchmark_oracle_length > 0 && below == 0,
         std::to_string(all_runs.size()) + " runs, " + std::to_string(with_success) +
             " with successes, lowest minimum steps " + std::to_string(lowest) + " vs oracle " +
             std::to_string(benchmark_oracle_length));
}

}  // namespace

int main() {
  try {
    oracle_ground_truth();
    rule_monotonicity();
    mask_soundness();
    gradient_correctness();
    unit_truths();
    feasibility_guarantee();
    learning_and_ordering();
    determinism();
    oracle_lower_bound();
  } catch (const std::exception& e) {
    std::cout << "FAIL acceptance aborted: " << e.what() << std::endl;
    return 1;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
