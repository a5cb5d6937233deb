#include "pathfinder/oracle.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>
#include <queue>
#include <string>
#include <unordered_map>

namespace pathfinder {

OracleBudgetExceeded::OracleBudgetExceeded(std::size_t expanded, std::size_t frontier)
    : std::runtime_error("oracle node budget exceeded after " + std::to_string(expanded) +
                         " expansions (frontier size " + std::to_string(frontier) + ")"),
      expanded_(expanded),
      frontier_(frontier) {}

namespace {

constexpr std::size_t kUnreachable = std::numeric_limits<std::size_t>::max();

struct Key {
  BitSet permissions;
  BitSet acl;
  EntityIndex space = kNoEntity;
  friend bool operator==(const Key&, const Key&) = default;
};

struct KeyHash {
  std::size_t operator()(const Key& k) const {
    return k.permissions.hash() * 31 + k.acl.hash() * 131 + k.space;
  }
};

class SearchContext {
 public:
  SearchContext(const AttackEnvironment& env, const std::vector<Verb>& excluded) : env_(env) {
    const auto n = env.action_count();
    allowed_.resize(n);
    effects_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto verb = env.actions()[i].verb;
      // Removing a rule or standing still never shortens a path.
      bool ok = verb != Verb::Stay && verb != Verb::AclRemove;
      if (std::find(excluded.begin(), excluded.end(), verb) != excluded.end()) ok = false;
      allowed_[i] = ok;
      effects_[i] = env.effect_atoms(i);
    }
  }

  const AttackEnvironment& env() const { return env_; }
  bool allowed(std::size_t i) const { return allowed_[i]; }

  // Relaxed layer count until `target` is held, or kUnreachable. Stops early
  // once the count exceeds `cap`.
  std::size_t lower_bound(const BitSet& perms0, const BitSet& acl0, EntityIndex space, std::size_t target,
                          std::size_t cap) const {
    if (perms0.test(target)) return 0;
    auto levels = layers(perms0, acl0, space, target, cap);
    return levels[target];
  }

  std::vector<std::size_t> layers(const BitSet& perms0, const BitSet& acl0, EntityIndex space,
                                  std::size_t target, std::size_t cap) const {
    const auto& actions = env_.actions();
    std::vector<std::size_t> level(perms0.size(), kUnreachable);
    for (std::size_t i = 0; i < perms0.size(); ++i)
      if (perms0.test(i)) level[i] = 0;
    BitSet perms = perms0, acl = acl0;
    BitSet locs(env_.model().entities.size());
    locs.set(space);
    for (std::size_t depth = 1;; ++depth) {
      BitSet np = perms, nacl = acl, nlocs = locs;
      bool changed = false;
      for (std::size_t i = 0; i < actions.size(); ++i) {
        if (!allowed_[i]) continue;
        const auto& a = actions[i];
        bool fresh = false;
        if (a.verb == Verb::AclAdd) {
          fresh = !acl.test(a.target);
        } else {
          if (a.verb == Verb::EnterSpace && !locs.test(a.target)) fresh = true;
          for (auto atom : effects_[i])
            if (!perms.test(atom)) fresh = true;
        }
        if (!fresh || !env_.relaxed_feasible(perms, acl, locs, i)) continue;
        changed = true;
        if (a.verb == Verb::AclAdd) nacl.set(a.target);
        if (a.verb == Verb::EnterSpace) nlocs.set(a.target);
        for (auto atom : effects_[i])
          if (!np.test(atom)) {
            np.set(atom);
            level[atom] = depth;
          }
      }
      if (!changed) break;
      perms = std::move(np);
      acl = std::move(nacl);
      locs = std::move(nlocs);
      if (target != kUnreachable && (perms.test(target) || depth > cap)) {
        if (!perms.test(target)) level[target] = depth + 1;
        break;
      }
    }
    return level;
  }

  const std::vector<std::size_t>& effects(std::size_t i) const { return effects_[i]; }

 private:
  const AttackEnvironment& env_;
  std::vector<bool> allowed_;
  std::vector<std::vector<std::size_t>> effects_;
};

struct Node {
  const Key* key = nullptr;
  std::size_t g = 0;
  std::size_t h = 0;
  std::int64_t parent = -1;
  std::size_t action = 0;
  bool goal = false;
};

struct Entry {
  std::size_t f;
  std::size_t g;
  std::uint64_t seq;
  std::uint32_t node;
};

struct EntryOrder {
  bool operator()(const Entry& a, const Entry& b) const {
    if (a.f != b.f) return a.f > b.f;
    if (a.g != b.g) return a.g < b.g;
    return a.seq > b.seq;
  }
};

// Best-first search for the first step that grants `target`. With
// use_bound = false this is breadth-first in FIFO order.
std::optional<std::vector<std::size_t>> search(const SearchContext& ctx, std::size_t target,
                                               const OracleOptions& options, bool use_bound, SearchStats* stats) {
  const auto& env = ctx.env();
  const auto start = env.reset();
  const auto limit = options.depth_limit;

  std::unordered_map<Key, std::uint32_t, KeyHash> index;
  std::vector<Node> nodes;
  std::priority_queue<Entry, std::vector<Entry>, EntryOrder> open;
  std::uint64_t seq = 0;
  SearchStats local;

  auto bound = [&](const Key& k) -> std::size_t {
    if (!use_bound) return 0;
    return ctx.lower_bound(k.permissions, k.acl, k.space, target, limit);
  };

  Key root{start.permissions, start.acl, start.attacker_space};
  const auto h0 = bound(root);
  if (h0 == kUnreachable || h0 > limit) return std::nullopt;
  auto [it0, _] = index.emplace(std::move(root), 0);
  nodes.push_back({&it0->first, 0, h0, -1, 0, false});
  open.push({h0, 0, seq++, 0});

  EnvState scratch;
  while (!open.empty()) {
    const auto entry = open.top();
    open.pop();
    const auto& node = nodes[entry.node];
    if (entry.g != node.g) continue;  // stale
    if (node.goal) {
      std::vector<std::size_t> path;
      for (std::int64_t cur = entry.node; nodes[cur].parent >= 0; cur = nodes[cur].parent)
        path.push_back(nodes[cur].action);
      std::reverse(path.begin(), path.end());
      if (stats) *stats = local;
      return path;
    }
    if (node.g >= limit) continue;
    ++local.expanded;

    scratch.permissions = node.key->permissions;
    scratch.acl = node.key->acl;
    scratch.attacker_space = node.key->space;
    scratch.steps_this_attack = 0;
    scratch.steps_this_episode = 0;
    const auto g_child = node.g + 1;
    const auto parent = static_cast<std::int64_t>(entry.node);

    for (std::size_t i = 0; i < env.action_count(); ++i) {
      if (!ctx.allowed(i) || !env.feasible(scratch, i)) continue;
      auto out = env.step(scratch, i);
      ++local.generated;
      const bool hit = std::find(out.newly_granted.begin(), out.newly_granted.end(), target) !=
                       out.newly_granted.end();
      if (hit) {
        Node goal{nullptr, g_child, 0, parent, i, true};
        nodes.push_back(goal);
        open.push({g_child, g_child, seq++, static_cast<std::uint32_t>(nodes.size() - 1)});
        continue;
      }
      if (out.attack_succeeded) continue;  // the attempt restarted; nothing useful past here
      Key k{std::move(out.next.permissions), std::move(out.next.acl), out.next.attacker_space};
      auto found = index.find(k);
      if (found != index.end()) {
        auto& existing = nodes[found->second];
        if (existing.g <= g_child) continue;
        existing.g = g_child;
        existing.parent = parent;
        existing.action = i;
        open.push({g_child + existing.h, g_child, seq++, found->second});
        continue;
      }
      const auto h = bound(k);
      if (h == kUnreachable || g_child + h > limit) continue;
      if (nodes.size() >= options.node_budget) throw OracleBudgetExceeded(local.expanded, open.size());
      auto [ins, ok] = index.emplace(std::move(k), static_cast<std::uint32_t>(nodes.size()));
      nodes.push_back({&ins->first, g_child, h, parent, i, false});
      open.push({g_child + h, g_child, seq++, static_cast<std::uint32_t>(nodes.size() - 1)});
    }
  }
  if (stats) *stats = local;
  return std::nullopt;
}

std::optional<AttackPath> finish(const AttackEnvironment& env, std::optional<std::vector<std::size_t>> actions) {
  if (!actions) return std::nullopt;
  AttackPath path;
  path.actions = std::move(*actions);
  if (!replay_attack(env, path.actions, &path.rewards))
    throw std::logic_error("oracle path failed replay verification");
  return path;
}

}  // namespace

bool replay_attack(const AttackEnvironment& env, const std::vector<std::size_t>& actions,
                   std::vector<double>* rewards) {
  if (actions.empty()) return false;
  auto state = env.reset();
  if (rewards) rewards->clear();
  for (std::size_t i = 0; i < actions.size(); ++i) {
    if (actions[i] >= env.action_count()) return false;
    auto out = env.step(state, actions[i]);
    if (!out.feasible) return false;
    if (rewards) rewards->push_back(out.reward);
    const bool last = i + 1 == actions.size();
    if (out.attack_succeeded != last) return false;
    if (last && out.attack_steps != actions.size()) return false;
    state = std::move(out.next);
  }
  return true;
}

std::optional<AttackPath> shortest_attack_path(const AttackEnvironment& env, const OracleOptions& options,
                                               SearchStats* stats) {
  if (options.depth_limit < 1) throw std::invalid_argument("depth_limit must be >= 1");
  SearchContext ctx(env, options.excluded_verbs);
  return finish(env, search(ctx, env.goal_atom(), options, true, stats));
}

std::optional<AttackPath> breadth_first_attack_path(const AttackEnvironment& env, const OracleOptions& options,
                                                    SearchStats* stats) {
  if (options.depth_limit < 1) throw std::invalid_argument("depth_limit must be >= 1");
  SearchContext ctx(env, options.excluded_verbs);
  return finish(env, search(ctx, env.goal_atom(), options, false, stats));
}

std::vector<std::size_t> relaxed_atom_levels(const AttackEnvironment& env, const EnvState& state,
                                             const std::vector<Verb>& excluded) {
  SearchContext ctx(env, excluded);
  return ctx.layers(state.permissions, state.acl, state.attacker_space, kUnreachable, kUnreachable);
}

std::vector<PermissionAtom> reachable_permissions(const AttackEnvironment& env, std::size_t depth_limit,
                                                  const OracleOptions& options) {
  std::vector<PermissionAtom> out;
  if (depth_limit == 0) return out;
  SearchContext ctx(env, options.excluded_verbs);
  const auto start = env.reset();
  const auto levels = ctx.layers(start.permissions, start.acl, start.attacker_space, kUnreachable, kUnreachable);
  const auto n = env.state_size();
  std::vector<bool> reachable(n, false);
  OracleOptions bounded = options;
  bounded.depth_limit = depth_limit;

  for (std::size_t atom = 0; atom < n; ++atom) {
    if (reachable[atom] || levels[atom] == kUnreachable || levels[atom] > depth_limit) continue;
    auto path = search(ctx, atom, bounded, true, nullptr);
    if (!path) continue;
    // everything granted along a witness path is reachable within its length
    auto state = start;
    for (auto a : *path) {
      auto step = env.step(state, a);
      for (auto g : step.newly_granted) reachable[g] = true;
      state = std::move(step.next);
    }
  }
  for (std::size_t atom = 0; atom < n; ++atom)
    if (reachable[atom]) out.push_back(env.model().atom_order[atom]);
  return out;
}

}  // namespace pathfinder
