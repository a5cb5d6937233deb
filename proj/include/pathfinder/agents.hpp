#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "pathfinder/env.hpp"
#include "pathfinder/nn.hpp"

namespace pathfinder {

// Stored reward of a theory action the mask rejected.
inline constexpr double kInfeasibleReward = -1e6;

struct Transition {
  BitSet state;
  std::size_t action = 0;
  double reward = 0.0;
  BitSet next_state;
  bool terminal = false;
  bool feasible_penalty = false;
  // Actor recurrent state before and after the step (DDPG family only).
  nn::Vector hidden;
  nn::Vector next_hidden;
  // Feasible actions in state and next_state (masked learners only).
  BitSet mask;
  BitSet next_mask;

  std::vector<double> one_hot(std::size_t action_count) const;
};

class ReplayMemory {
 public:
  explicit ReplayMemory(std::size_t capacity);

  void push(Transition t);
  // `count` distinct slots, uniformly at random.
  std::vector<std::size_t> sample(std::size_t count, std::mt19937_64& rng) const;

  const Transition& operator[](std::size_t i) const { return items_.at(i); }
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::size_t cursor() const { return cursor_; }

 private:
  std::size_t capacity_;
  std::size_t cursor_ = 0;
  std::vector<Transition> items_;
};

enum class AgentKind : std::uint8_t { Iddpg, Ddpg, Dqn, A2c };

std::string_view to_string(AgentKind k);
std::optional<AgentKind> parse_agent_kind(std::string_view s);

struct AgentConfig {
  std::uint64_t seed = 1;
  std::size_t episodes = 500;
  double gamma = 0.95;
  double tau = 0.01;
  std::size_t batch_size = 64;
  std::size_t memory_capacity = 100000;
  double actor_lr = 1e-4;
  double critic_lr = 1e-3;
  // Gaussian score noise, interpolated linearly over all training steps.
  double noise_start = 0.3;
  double noise_end = 0.3;
  // epsilon-greedy schedule (DQN), decayed linearly over all training steps.
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  std::size_t target_sync = 1000;
  // A2C rollout length and entropy weight.
  std::size_t n_step = 5;
  double entropy_coef = 0.0;
  // Multiplies rewards before they enter any loss.
  double reward_scale = 1e-2;
  // One gradient update every `train_interval` environment steps.
  std::size_t train_interval = 1;
  double grad_clip = 10.0;
  double infeasible_reward = kInfeasibleReward;
  // Lower bound on DDPG rewards and critic targets, in reward units.
  double target_floor = -1.0;

  void validate() const;
};

struct TrainingResult {
  std::vector<double> episode_rewards;
  std::vector<std::uint64_t> episode_successes;
  // Shortest successful attempt in the episode, 0 when there was none.
  std::vector<std::uint64_t> episode_min_steps;
  // Sum of the lengths of the episode's successful attempts.
  std::vector<std::uint64_t> episode_attack_steps;
  std::uint64_t total_steps = 0;
  std::uint64_t infeasible_executions = 0;
  std::uint64_t augmented_records = 0;
  std::uint64_t updates = 0;
  nn::ParamList final_parameters;

  std::uint64_t success_count() const;
  std::optional<std::uint64_t> minimum_steps() const;
  // Summed successful attack steps over the number of successes.
  std::optional<double> mean_attack_steps() const;
};

// Called after every environment step.
using StepObserver = std::function<void(std::uint64_t episode, std::uint64_t step, std::size_t action,
                                        const StepOutcome& outcome)>;

struct ActionChoice {
  std::size_t theory = 0;    // argmax over all actions
  std::size_t executed = 0;  // argmax over feasible actions
};

// Both argmaxes are taken over scores + noise; ties go to the lower index.
ActionChoice select_action_iddpg(const nn::Vector& scores, const BitSet& mask, const nn::Vector& noise);
ActionChoice select_action_iddpg(const nn::Vector& scores, const BitSet& mask);

// With probability `epsilon` a uniformly random feasible action, otherwise the
// feasible action with the largest value.
std::size_t epsilon_greedy(const nn::Vector& values, const BitSet& mask, double epsilon, std::mt19937_64& rng);

// Actor gradient with respect to its pre-sigmoid logits: binary cross-entropy
// between the scores and the one-hot of each column's best feasible value,
// averaged over the batch. Columns with no feasible entry contribute
// scores / batch.
nn::Matrix greedy_logit_gradient(const nn::Matrix& scores, const nn::Matrix& mask, const nn::Matrix& values);

// Softmax over the feasible entries; infeasible entries get probability 0.
nn::Vector masked_softmax(const nn::Vector& logits, const BitSet& mask);

// d/d(logits) of -log pi(action) * advantage - entropy_coef * H(pi).
nn::Vector a2c_logit_gradient(const nn::Vector& probs, std::size_t action, double advantage, double entropy_coef);

// Appends the (s, a, R_NEG, s) penalty record. Throws std::invalid_argument if
// the action is feasible in `state`.
void record_infeasible(ReplayMemory& memory, const AttackEnvironment& env, const EnvState& state,
                       std::size_t action, const nn::Vector& hidden, double reward = kInfeasibleReward);

TrainingResult train_iddpg(const AttackEnvironment& env, const AgentConfig& config, const StepObserver& observe = {});
TrainingResult train_ddpg(const AttackEnvironment& env, const AgentConfig& config, const StepObserver& observe = {});
TrainingResult train_dqn(const AttackEnvironment& env, const AgentConfig& config, const StepObserver& observe = {});
TrainingResult train_a2c(const AttackEnvironment& env, const AgentConfig& config, const StepObserver& observe = {});

TrainingResult train(AgentKind kind, const AttackEnvironment& env, const AgentConfig& config,
                     const StepObserver& observe = {});

// Linear interpolation from `start` to `end` as `step` runs over [0, total).
double linear_schedule(double start, double end, std::uint64_t step, std::uint64_t total);

}  // namespace pathfinder
