#include "pathfinder/agents.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_set>

namespace pathfinder {

using nn::Matrix;
using nn::Vector;

std::vector<double> Transition::one_hot(std::size_t action_count) const {
  std::vector<double> v(action_count, 0.0);
  v.at(action) = 1.0;
  return v;
}

ReplayMemory::ReplayMemory(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("replay capacity must be positive");
  items_.reserve(std::min<std::size_t>(capacity, 1 << 16));
}

void ReplayMemory::push(Transition t) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(t));
  } else {
    items_[cursor_] = std::move(t);
  }
  cursor_ = (cursor_ + 1) % capacity_;
}

std::vector<std::size_t> ReplayMemory::sample(std::size_t count, std::mt19937_64& rng) const {
  if (count > items_.size()) throw std::invalid_argument("sample larger than replay memory");
  // Floyd's algorithm: each subset of size `count` is equally likely.
  std::vector<std::size_t> out;
  out.reserve(count);
  std::unordered_set<std::size_t> seen;
  const auto n = items_.size();
  for (std::size_t j = n - count; j < n; ++j) {
    std::uniform_int_distribution<std::size_t> dist(0, j);
    auto k = dist(rng);
    if (!seen.insert(k).second) {
      seen.insert(j);
      k = j;
    }
    out.push_back(k);
  }
  return out;
}

std::string_view to_string(AgentKind k) {
  switch (k) {
    case AgentKind::Iddpg:
      return "iddpg";
    case AgentKind::Ddpg:
      return "ddpg";
    case AgentKind::Dqn:
      return "dqn";
    case AgentKind::A2c:
      return "a2c";
  }
  return "?";
}

std::optional<AgentKind> parse_agent_kind(std::string_view s) {
  for (auto k : {AgentKind::Iddpg, AgentKind::Ddpg, AgentKind::Dqn, AgentKind::A2c})
    if (to_string(k) == s) return k;
  return std::nullopt;
}

void AgentConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("invalid agent config: " + what); };
  if (!(gamma > 0.0 && gamma <= 1.0)) fail("gamma must be in (0, 1]");
  if (!(tau >= 0.0 && tau <= 1.0)) fail("tau must be in [0, 1]");
  if (batch_size == 0) fail("batch_size must be positive");
  if (memory_capacity < batch_size) fail("memory_capacity must be at least batch_size");
  if (!(actor_lr > 0.0) || !(critic_lr > 0.0)) fail("learning rates must be positive");
  if (noise_start < 0.0 || noise_end < 0.0) fail("noise scales must be non-negative");
  if (epsilon_start < 0.0 || epsilon_start > 1.0 || epsilon_end < 0.0 || epsilon_end > 1.0)
    fail("epsilon must be in [0, 1]");
  if (target_sync == 0) fail("target_sync must be positive");
  if (n_step == 0) fail("n_step must be positive");
  if (entropy_coef < 0.0) fail("entropy_coef must be non-negative");
  if (!(reward_scale > 0.0)) fail("reward_scale must be positive");
  if (train_interval == 0) fail("train_interval must be positive");
  if (!(grad_clip > 0.0)) fail("grad_clip must be positive");
  if (!std::isfinite(infeasible_reward)) fail("infeasible_reward must be finite");
  if (!(target_floor < 0.0)) fail("target_floor must be negative");
}

std::uint64_t TrainingResult::success_count() const {
  return std::accumulate(episode_successes.begin(), episode_successes.end(), std::uint64_t{0});
}

std::optional<std::uint64_t> TrainingResult::minimum_steps() const {
  std::optional<std::uint64_t> best;
  for (auto s : episode_min_steps)
    if (s > 0 && (!best || s < *best)) best = s;
  return best;
}

std::optional<double> TrainingResult::mean_attack_steps() const {
  const auto n = success_count();
  if (n == 0) return std::nullopt;
  const auto total = std::accumulate(episode_attack_steps.begin(), episode_attack_steps.end(), std::uint64_t{0});
  return static_cast<double>(total) / static_cast<double>(n);
}

double linear_schedule(double start, double end, std::uint64_t step, std::uint64_t total) {
  if (total <= 1 || step >= total) return step == 0 && total > 1 ? start : end;
  const double frac = static_cast<double>(step) / static_cast<double>(total - 1);
  return start + (end - start) * frac;
}

ActionChoice select_action_iddpg(const Vector& scores, const BitSet& mask, const Vector& noise) {
  if (static_cast<std::size_t>(scores.size()) != mask.size() || noise.size() != scores.size())
    throw std::invalid_argument("score, mask and noise sizes differ");
  ActionChoice out;
  double best_all = -std::numeric_limits<double>::infinity();
  double best_ok = best_all;
  bool any = false;
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    const double v = scores[i] + noise[i];
    const auto idx = static_cast<std::size_t>(i);
    if (v > best_all) {
      best_all = v;
      out.theory = idx;
    }
    if (mask.test(idx) && (!any || v > best_ok)) {
      best_ok = v;
      out.executed = idx;
      any = true;
    }
  }
  if (!any) throw std::invalid_argument("action mask has no feasible action");
  return out;
}

ActionChoice select_action_iddpg(const Vector& scores, const BitSet& mask) {
  return select_action_iddpg(scores, mask, Vector::Zero(scores.size()));
}

std::size_t epsilon_greedy(const Vector& values, const BitSet& mask, double epsilon, std::mt19937_64& rng) {
  if (static_cast<std::size_t>(values.size()) != mask.size())
    throw std::invalid_argument("value and mask sizes differ");
  const auto feasible = mask.count();
  if (feasible == 0) throw std::invalid_argument("action mask has no feasible action");
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  if (coin(rng) < epsilon) {
    std::uniform_int_distribution<std::size_t> pick(0, feasible - 1);
    auto k = pick(rng);
    for (std::size_t i = 0; i < mask.size(); ++i)
      if (mask.test(i) && k-- == 0) return i;
  }
  return select_action_iddpg(values, mask).executed;
}

Vector a2c_logit_gradient(const Vector& probs, std::size_t action, double advantage, double entropy_coef) {
  Vector g = probs * advantage;
  g[static_cast<Eigen::Index>(action)] -= advantage;
  if (entropy_coef > 0.0) {
    double h = 0.0;
    for (Eigen::Index i = 0; i < probs.size(); ++i)
      if (probs[i] > 0.0) h -= probs[i] * std::log(probs[i]);
    for (Eigen::Index i = 0; i < probs.size(); ++i)
      if (probs[i] > 0.0) g[i] += entropy_coef * probs[i] * (std::log(probs[i]) + h);
  }
  return g;
}

Matrix greedy_logit_gradient(const Matrix& scores, const Matrix& mask, const Matrix& values) {
  if (scores.rows() != mask.rows() || scores.cols() != mask.cols() || values.rows() != scores.rows() ||
      values.cols() != scores.cols())
    throw std::invalid_argument("score/mask/value shape");
  Matrix out = scores;
  for (Eigen::Index j = 0; j < scores.cols(); ++j) {
    Eigen::Index best = -1;
    for (Eigen::Index i = 0; i < scores.rows(); ++i)
      if (mask(i, j) > 0.0 && (best < 0 || values(i, j) > values(best, j))) best = i;
    if (best >= 0) out(best, j) -= 1.0;
  }
  return out / static_cast<double>(scores.cols());
}

void record_infeasible(ReplayMemory& memory, const AttackEnvironment& env, const EnvState& state,
                       std::size_t action, const Vector& hidden, double reward) {
  if (env.feasible(state, action)) throw std::invalid_argument("record_infeasible called with a feasible action");
  Transition t;
  t.state = state.permissions;
  t.action = action;
  t.reward = reward;
  t.next_state = state.permissions;
  t.feasible_penalty = true;
  t.hidden = hidden;
  t.next_hidden = hidden;
  t.mask = env.action_mask(state);
  memory.push(std::move(t));
}

namespace {

Vector column(const BitSet& bits) {
  Vector v(static_cast<Eigen::Index>(bits.size()));
  for (std::size_t i = 0; i < bits.size(); ++i) v[static_cast<Eigen::Index>(i)] = bits.test(i) ? 1.0 : 0.0;
  return v;
}

void fill_column(Matrix& m, Eigen::Index col, const BitSet& bits) {
  for (std::size_t i = 0; i < bits.size(); ++i) m(static_cast<Eigen::Index>(i), col) = bits.test(i) ? 1.0 : 0.0;
}

void clip_gradients(const nn::TensorRefs& grads, double max_norm) {
  double sq = 0.0;
  for (const auto* g : grads) sq += g->squaredNorm();
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double k = max_norm / norm;
    for (auto* g : grads) *g *= k;
  }
}

// Per-episode bookkeeping shared by every learner.
class EpisodeLog {
 public:
  explicit EpisodeLog(TrainingResult& r) : r_(r) {}

  void begin() {
    r_.episode_rewards.push_back(0.0);
    r_.episode_successes.push_back(0);
    r_.episode_min_steps.push_back(0);
    r_.episode_attack_steps.push_back(0);
  }

  void record(const StepOutcome& out) {
    ++r_.total_steps;
    if (!out.feasible) ++r_.infeasible_executions;
    r_.episode_rewards.back() += out.reward;
    if (out.attack_succeeded) {
      ++r_.episode_successes.back();
      r_.episode_attack_steps.back() += out.attack_steps;
      auto& best = r_.episode_min_steps.back();
      if (best == 0 || out.attack_steps < best) best = out.attack_steps;
    }
  }

 private:
  TrainingResult& r_;
};

std::uint64_t total_steps(const AttackEnvironment& env, const AgentConfig& cfg) {
  return static_cast<std::uint64_t>(cfg.episodes) * env.config().episode_limit;
}

// --- DDPG family ---

class DdpgLearner {
 public:
  DdpgLearner(const AttackEnvironment& env, const AgentConfig& cfg, bool improved, std::mt19937_64& rng)
      : env_(env),
        cfg_(cfg),
        improved_(improved),
        rng_(rng),
        actor_(static_cast<Eigen::Index>(env.state_size()), static_cast<Eigen::Index>(env.action_count()), rng),
        critic_(static_cast<Eigen::Index>(env.state_size()), static_cast<Eigen::Index>(env.action_count()), rng),
        actor_target_(actor_),
        critic_target_(critic_),
        actor_opt_(cfg.actor_lr),
        critic_opt_(cfg.critic_lr),
        memory_(cfg.memory_capacity) {}

  TrainingResult run(const StepObserver& observe) {
    TrainingResult result;
    EpisodeLog log(result);
    const auto n_actions = static_cast<Eigen::Index>(env_.action_count());
    const auto horizon = total_steps(env_, cfg_);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Vector noise(n_actions);
    std::uint64_t global = 0;

    for (std::size_t ep = 0; ep < cfg_.episodes; ++ep) {
      log.begin();
      auto state = env_.reset();
      Vector h = actor_.initial_hidden().col(0);
      for (std::uint64_t step = 0;; ++step) {
        const double sigma = linear_schedule(cfg_.noise_start, cfg_.noise_end, global, horizon);
        const auto fwd = actor_.forward(column(state.permissions), h);
        for (Eigen::Index i = 0; i < n_actions; ++i) noise[i] = sigma * gauss(rng_);

        ActionChoice choice;
        BitSet mask;
        if (improved_) {
          mask = env_.action_mask(state);
          choice = select_action_iddpg(fwd.scores.col(0), mask, noise);
        } else {
          Eigen::Index best = 0;
          (fwd.scores.col(0) + noise).maxCoeff(&best);
          choice.theory = choice.executed = static_cast<std::size_t>(best);
        }

        auto out = env_.step(state, choice.executed);
        Vector h_next = fwd.hidden.col(0);

        Transition t;
        t.state = state.permissions;
        t.action = choice.executed;
        t.reward = out.reward;
        t.next_state = out.next.permissions;
        t.terminal = out.attack_succeeded;
        t.hidden = h;
        t.next_hidden = h_next;
        if (improved_) {
          t.mask = mask;
          t.next_mask = env_.action_mask(out.next);
        }
        memory_.push(std::move(t));
        if (improved_ && !mask.test(choice.theory)) {
          record_infeasible(memory_, env_, state, choice.theory, h, cfg_.infeasible_reward);
          ++result.augmented_records;
        }

        log.record(out);
        if (observe) observe(ep, step, choice.executed, out);
        ++global;
        if (memory_.size() >= cfg_.batch_size && global % cfg_.train_interval == 0) {
          update();
          ++result.updates;
        }

        const bool done = out.episode_done;
        state = std::move(out.next);
        h = out.attack_succeeded ? Vector::Zero(h.size()) : std::move(h_next);
        if (done) break;
      }
    }
    result.final_parameters = nn::snapshot(actor_.tensors());
    return result;
  }

 private:
  void update() {
    const auto m = cfg_.batch_size;
    const auto mi = static_cast<Eigen::Index>(m);
    const auto idx = memory_.sample(m, rng_);
    const auto ns = static_cast<Eigen::Index>(env_.state_size());
    const auto na = static_cast<Eigen::Index>(env_.action_count());
    const auto nh = nn::kRecurrentUnits;

    Matrix s(ns, mi), s2(ns, mi), a = Matrix::Zero(na, mi), h(nh, mi), h2(nh, mi);
    Matrix mask = Matrix::Ones(na, mi), mask2 = Matrix::Ones(na, mi);
    Vector r(mi);
    std::vector<bool> stop(m);
    for (std::size_t j = 0; j < m; ++j) {
      const auto& t = memory_[idx[j]];
      const auto c = static_cast<Eigen::Index>(j);
      fill_column(s, c, t.state);
      fill_column(s2, c, t.next_state);
      a(static_cast<Eigen::Index>(t.action), c) = 1.0;
      h.col(c) = t.hidden;
      h2.col(c) = t.next_hidden;
      r[c] = std::max(t.reward, cfg_.target_floor) * cfg_.reward_scale;
      stop[j] = t.terminal || t.feasible_penalty;
      if (improved_) {
        fill_column(mask, c, t.mask);
        if (!t.feasible_penalty) fill_column(mask2, c, t.next_mask);
      }
    }

    const auto next = actor_target_.forward(s2, h2);
    // the target policy's executed action: masked argmax for the improved
    // learner, plain argmax otherwise
    Matrix a2 = Matrix::Zero(na, mi);
    for (Eigen::Index j = 0; j < mi; ++j) {
      Eigen::Index best = -1;
      for (Eigen::Index i = 0; i < na; ++i)
        if (mask2(i, j) > 0.0 && (best < 0 || next.scores(i, j) > next.scores(best, j))) best = i;
      a2(best < 0 ? 0 : best, j) = 1.0;
    }
    const Matrix q_next = critic_target_.forward(s2, a2);
    Vector y(mi);
    for (Eigen::Index j = 0; j < mi; ++j)
      y[j] = std::max(r[j] + (stop[static_cast<std::size_t>(j)] ? 0.0 : cfg_.gamma * q_next(0, j)),
                      cfg_.target_floor * cfg_.reward_scale);

    const Matrix q = critic_.forward(s, a);
    const Matrix grad_q = (2.0 / static_cast<double>(m)) * (q - y.transpose());
    critic_.backward(grad_q);
    clip_gradients(critic_.grad_tensors(), cfg_.grad_clip);
    critic_opt_.step(critic_.tensors(), critic_.grad_tensors());

    const auto pol = actor_.forward(s, h);
    // per-action values Q(s_j, e_i) for every candidate action
    std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs;
    for (Eigen::Index j = 0; j < mi; ++j)
      for (Eigen::Index i = 0; i < na; ++i)
        if (mask(i, j) > 0.0) pairs.emplace_back(j, i);
    const Vector pq = critic_.one_hot_values(s, pairs);
    Matrix qall = Matrix::Zero(na, mi);
    for (std::size_t k = 0; k < pairs.size(); ++k) qall(pairs[k].second, pairs[k].first) = pq[static_cast<Eigen::Index>(k)];
    actor_.backward_logits(greedy_logit_gradient(pol.scores, mask, qall));
    clip_gradients(actor_.grad_tensors(), cfg_.grad_clip);
    actor_opt_.step(actor_.tensors(), actor_.grad_tensors());

    nn::soft_update(actor_target_.tensors(), actor_.tensors(), cfg_.tau);
    nn::soft_update(critic_target_.tensors(), critic_.tensors(), cfg_.tau);
  }

  const AttackEnvironment& env_;
  const AgentConfig& cfg_;
  bool improved_;
  std::mt19937_64& rng_;
  nn::PolicyNet actor_;
  nn::CriticNet critic_;
  nn::PolicyNet actor_target_;
  nn::CriticNet critic_target_;
  nn::Adam actor_opt_;
  nn::Adam critic_opt_;
  ReplayMemory memory_;
};

TrainingResult run_ddpg(const AttackEnvironment& env, const AgentConfig& cfg, bool improved,
                        const StepObserver& observe) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  DdpgLearner learner(env, cfg, improved, rng);
  return learner.run(observe);
}

// --- DQN ---

class DqnLearner {
 public:
  DqnLearner(const AttackEnvironment& env, const AgentConfig& cfg, std::mt19937_64& rng)
      : env_(env),
        cfg_(cfg),
        rng_(rng),
        q_(static_cast<Eigen::Index>(env.state_size()), nn::kDenseUnits, nn::kDenseUnits,
           static_cast<Eigen::Index>(env.action_count()), nn::Activation::Linear, rng),
        q_target_(q_),
        opt_(cfg.critic_lr),
        memory_(cfg.memory_capacity) {}

  TrainingResult run(const StepObserver& observe) {
    TrainingResult result;
    EpisodeLog log(result);
    const auto horizon = total_steps(env_, cfg_);
    std::uint64_t global = 0;
    for (std::size_t ep = 0; ep < cfg_.episodes; ++ep) {
      log.begin();
      auto state = env_.reset();
      auto mask = env_.action_mask(state);
      for (std::uint64_t step = 0;; ++step) {
        const double eps = linear_schedule(cfg_.epsilon_start, cfg_.epsilon_end, global, horizon);
        const Vector values = q_.forward(column(state.permissions)).col(0);
        const auto action = epsilon_greedy(values, mask, eps, rng_);
        auto out = env_.step(state, action);
        auto next_mask = env_.action_mask(out.next);

        Transition t;
        t.state = state.permissions;
        t.action = action;
        t.reward = out.reward;
        t.next_state = out.next.permissions;
        t.terminal = out.attack_succeeded;
        t.next_mask = next_mask;
        memory_.push(std::move(t));

        log.record(out);
        if (observe) observe(ep, step, action, out);
        ++global;
        if (memory_.size() >= cfg_.batch_size && global % cfg_.train_interval == 0) {
          update();
          ++result.updates;
        }
        if (global % cfg_.target_sync == 0) nn::restore(q_target_.tensors(), nn::snapshot(q_.tensors()));

        const bool done = out.episode_done;
        state = std::move(out.next);
        mask = std::move(next_mask);
        if (done) break;
      }
    }
    result.final_parameters = nn::snapshot(q_.tensors());
    return result;
  }

 private:
  void update() {
    const auto m = cfg_.batch_size;
    const auto mi = static_cast<Eigen::Index>(m);
    const auto idx = memory_.sample(m, rng_);
    const auto ns = static_cast<Eigen::Index>(env_.state_size());
    Matrix s(ns, mi), s2(ns, mi);
    for (std::size_t j = 0; j < m; ++j) {
      fill_column(s, static_cast<Eigen::Index>(j), memory_[idx[j]].state);
      fill_column(s2, static_cast<Eigen::Index>(j), memory_[idx[j]].next_state);
    }
    const Matrix q_next = q_target_.forward(s2);
    const Matrix q = q_.forward(s);
    Matrix grad = Matrix::Zero(q.rows(), q.cols());
    for (std::size_t j = 0; j < m; ++j) {
      const auto& t = memory_[idx[j]];
      const auto c = static_cast<Eigen::Index>(j);
      double y = t.reward * cfg_.reward_scale;
      if (!t.terminal) {
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < t.next_mask.size(); ++i)
          if (t.next_mask.test(i)) best = std::max(best, q_next(static_cast<Eigen::Index>(i), c));
        if (std::isfinite(best)) y += cfg_.gamma * best;
      }
      const auto a = static_cast<Eigen::Index>(t.action);
      grad(a, c) = (2.0 / static_cast<double>(m)) * (q(a, c) - y);
    }
    q_.backward(grad);
    clip_gradients(q_.grad_tensors(), cfg_.grad_clip);
    opt_.step(q_.tensors(), q_.grad_tensors());
  }

  const AttackEnvironment& env_;
  const AgentConfig& cfg_;
  std::mt19937_64& rng_;
  nn::Mlp q_;
  nn::Mlp q_target_;
  nn::Adam opt_;
  ReplayMemory memory_;
};

// --- A2C ---

}  // namespace

Vector masked_softmax(const Vector& logits, const BitSet& mask) {
  double top = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < logits.size(); ++i)
    if (mask.test(static_cast<std::size_t>(i))) top = std::max(top, logits[i]);
  Vector p = Vector::Zero(logits.size());
  double z = 0.0;
  for (Eigen::Index i = 0; i < logits.size(); ++i)
    if (mask.test(static_cast<std::size_t>(i))) z += p[i] = std::exp(logits[i] - top);
  return p / z;
}

namespace {

class A2cLearner {
 public:
  A2cLearner(const AttackEnvironment& env, const AgentConfig& cfg, std::mt19937_64& rng)
      : env_(env),
        cfg_(cfg),
        rng_(rng),
        policy_(static_cast<Eigen::Index>(env.state_size()), nn::kDenseUnits, nn::kDenseUnits,
                static_cast<Eigen::Index>(env.action_count()), nn::Activation::Linear, rng),
        value_(static_cast<Eigen::Index>(env.state_size()), nn::kDenseUnits, nn::kDenseUnits, 1,
               nn::Activation::Linear, rng),
        policy_opt_(cfg.actor_lr),
        value_opt_(cfg.critic_lr) {}

  TrainingResult run(const StepObserver& observe) {
    TrainingResult result;
    EpisodeLog log(result);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t ep = 0; ep < cfg_.episodes; ++ep) {
      log.begin();
      auto state = env_.reset();
      for (std::uint64_t step = 0;; ++step) {
        const auto mask = env_.action_mask(state);
        const Vector probs = masked_softmax(policy_.forward(column(state.permissions)).col(0), mask);
        std::size_t action = 0;
        double u = unit(rng_), acc = 0.0;
        for (Eigen::Index i = 0; i < probs.size(); ++i) {
          if (!mask.test(static_cast<std::size_t>(i))) continue;
          action = static_cast<std::size_t>(i);
          acc += probs[i];
          if (u < acc) break;
        }
        auto out = env_.step(state, action);
        rollout_.push_back({state.permissions, mask, action, out.reward * cfg_.reward_scale});

        log.record(out);
        if (observe) observe(ep, step, action, out);

        const bool done = out.episode_done;
        if (rollout_.size() >= cfg_.n_step || out.attack_succeeded || done) {
          update(out.next.permissions, out.attack_succeeded);
          ++result.updates;
        }
        state = std::move(out.next);
        if (done) break;
      }
    }
    result.final_parameters = nn::snapshot(policy_.tensors());
    for (auto& p : nn::snapshot(value_.tensors())) result.final_parameters.push_back(std::move(p));
    return result;
  }

 private:
  struct Step {
    BitSet state;
    BitSet mask;
    std::size_t action;
    double reward;
  };

  void update(const BitSet& last_state, bool terminal) {
    const auto k = static_cast<Eigen::Index>(rollout_.size());
    const auto ns = static_cast<Eigen::Index>(env_.state_size());
    double ret = terminal ? 0.0 : value_.forward(column(last_state))(0, 0);
    Vector returns(k);
    for (Eigen::Index j = k - 1; j >= 0; --j) {
      ret = rollout_[static_cast<std::size_t>(j)].reward + cfg_.gamma * ret;
      returns[j] = ret;
    }
    Matrix s(ns, k);
    for (Eigen::Index j = 0; j < k; ++j) fill_column(s, j, rollout_[static_cast<std::size_t>(j)].state);

    const Matrix v = value_.forward(s);
    const Vector adv = returns - v.row(0).transpose();
    value_.backward((-2.0 / static_cast<double>(k)) * adv.transpose());
    clip_gradients(value_.grad_tensors(), cfg_.grad_clip);
    value_opt_.step(value_.tensors(), value_.grad_tensors());

    const Matrix logits = policy_.forward(s);
    Matrix grad(logits.rows(), k);
    for (Eigen::Index j = 0; j < k; ++j) {
      const auto& st = rollout_[static_cast<std::size_t>(j)];
      const Vector probs = masked_softmax(logits.col(j), st.mask);
      grad.col(j) = a2c_logit_gradient(probs, st.action, adv[j], cfg_.entropy_coef) / static_cast<double>(k);
    }
    policy_.backward(grad);
    clip_gradients(policy_.grad_tensors(), cfg_.grad_clip);
    policy_opt_.step(policy_.tensors(), policy_.grad_tensors());
    rollout_.clear();
  }

  const AttackEnvironment& env_;
  const AgentConfig& cfg_;
  std::mt19937_64& rng_;
  nn::Mlp policy_;
  nn::Mlp value_;
  nn::Adam policy_opt_;
  nn::Adam value_opt_;
  std::vector<Step> rollout_;
};

}  // namespace

TrainingResult train_iddpg(const AttackEnvironment& env, const AgentConfig& config, const StepObserver& observe) {
  return run_ddpg(env, config, true, observe);
}

TrainingResult train_ddpg(const AttackEnvironment& env, const AgentConfig& config, const StepObserver& observe) {
  return run_ddpg(env, config, false, observe);
}

TrainingResult train_dqn(const AttackEnvironment& env, const AgentConfig& config, const StepObserver& observe) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  DqnLearner learner(env, config, rng);
  return learner.run(observe);
}

TrainingResult train_a2c(const AttackEnvironment& env, const AgentConfig& config, const StepObserver& observe) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  A2cLearner learner(env, config, rng);
  return learner.run(observe);
}

TrainingResult train(AgentKind kind, const AttackEnvironment& env, const AgentConfig& config,
                     const StepObserver& observe) {
  switch (kind) {
    case AgentKind::Iddpg:
      return train_iddpg(env, config, observe);
    case AgentKind::Ddpg:
      return train_ddpg(env, config, observe);
    case AgentKind::Dqn:
      return train_dqn(env, config, observe);
    case AgentKind::A2c:
      return train_a2c(env, config, observe);
  }
  throw std::invalid_argument("unknown agent kind");
}

}  // namespace pathfinder
