#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <vector>

#include "pathfinder/env.hpp"

namespace pathfinder {

// A replay-verified action sequence from reset to a successful attack.
struct AttackPath {
  std::vector<std::size_t> actions;
  std::vector<double> rewards;

  std::size_t length() const { return actions.size(); }
  double terminal_reward() const { return rewards.empty() ? 0.0 : rewards.back(); }
};

struct OracleOptions {
  std::size_t depth_limit = 200;
  // Maximum number of distinct states held before giving up.
  std::size_t node_budget = 4'000'000;
  // Verbs removed from the action table for this search.
  std::vector<Verb> excluded_verbs;
};

class OracleBudgetExceeded : public std::runtime_error {
 public:
  OracleBudgetExceeded(std::size_t expanded, std::size_t frontier);
  std::size_t expanded() const { return expanded_; }
  std::size_t frontier() const { return frontier_; }

 private:
  std::size_t expanded_;
  std::size_t frontier_;
};

struct SearchStats {
  std::size_t expanded = 0;
  std::size_t generated = 0;
};

// Minimum-length attack path, or nullopt when the goal is unreachable within
// the depth limit. Best-first over canonical states (permissions, ACL,
// position) ordered by depth plus a delete-relaxation lower bound, so the
// first goal popped is a shortest path.
std::optional<AttackPath> shortest_attack_path(const AttackEnvironment& env, const OracleOptions& options = {},
                                               SearchStats* stats = nullptr);

// Plain layer-by-layer breadth-first search with no lower bound. Exhaustive and
// only practical on small scenarios; used to cross-check the main oracle.
std::optional<AttackPath> breadth_first_attack_path(const AttackEnvironment& env, const OracleOptions& options = {},
                                                    SearchStats* stats = nullptr);

// Atoms that some action sequence of at most `depth_limit` steps grants.
std::vector<PermissionAtom> reachable_permissions(const AttackEnvironment& env, std::size_t depth_limit,
                                                  const OracleOptions& options = {});

// Replays `actions` from reset. True iff every step is feasible and the last
// step (and only the last) completes the attack. Fills `rewards` if given.
bool replay_attack(const AttackEnvironment& env, const std::vector<std::size_t>& actions,
                   std::vector<double>* rewards = nullptr);

// Relaxed distance (in layers) from `state` to each atom; SIZE_MAX when the
// atom is unreachable even under the relaxation.
std::vector<std::size_t> relaxed_atom_levels(const AttackEnvironment& env, const EnvState& state,
                                             const std::vector<Verb>& excluded = {});

}  // namespace pathfinder
