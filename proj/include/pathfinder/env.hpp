#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pathfinder/bitset.hpp"
#include "pathfinder/model.hpp"

namespace pathfinder {

enum class Verb : std::uint8_t {
  EnterSpace,
  UseDevice,
  DominateDevice,
  UsePort,
  DominatePort,
  ReachService,
  AuthService,
  ReadFile,
  ExtractInfo,
  AclAdd,
  AclRemove,
  Stay,
};

std::string_view to_string(Verb v);

// One entry of the global action table. `target` is an entity index, or an
// index into the ACL universe for AclAdd/AclRemove.
struct AttackAction {
  Verb verb = Verb::Stay;
  std::uint32_t target = 0;
  std::size_t index = 0;
};

struct EnvState {
  BitSet permissions;  // over model.atom_order
  BitSet acl;          // over the environment's ACL universe
  EntityIndex attacker_space = kNoEntity;
  std::uint64_t steps_this_attack = 0;
  std::uint64_t steps_this_episode = 0;

  friend bool operator==(const EnvState&, const EnvState&) = default;
};

struct StepOutcome {
  EnvState next;
  double reward = 0.0;
  bool attack_succeeded = false;
  bool episode_done = false;
  bool feasible = false;
  // Length of the attempt that just succeeded (0 otherwise).
  std::uint64_t attack_steps = 0;
  // Atoms granted by this step, in atom order.
  std::vector<std::size_t> newly_granted;
};

struct EnvConfig {
  std::uint64_t episode_limit = 10000;
};

inline constexpr double kStepPenalty = -0.1;
inline constexpr double kSuccessNumerator = 500000.0;

class ActionIndexError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// The attack MDP over one immutable model. All operations are const and pure
// in (state, action); one environment may serve many concurrent states.
class AttackEnvironment {
 public:
  explicit AttackEnvironment(std::shared_ptr<const CyberspaceModel> model, EnvConfig config = {});

  const CyberspaceModel& model() const { return *model_; }
  std::shared_ptr<const CyberspaceModel> model_ptr() const { return model_; }
  const EnvConfig& config() const { return config_; }

  const std::vector<AttackAction>& actions() const { return actions_; }
  std::size_t action_count() const { return actions_.size(); }
  std::size_t state_size() const { return model_->atom_count(); }
  const std::vector<AclRule>& acl_universe() const { return acl_universe_; }

  EnvState reset() const;

  // mask bit i is set iff action i's preconditions hold
  BitSet action_mask(const EnvState& state) const;
  bool feasible(const EnvState& state, std::size_t action) const;

  StepOutcome step(const EnvState& state, std::size_t action) const;

  double reward_of(const EnvState& prev, std::span<const std::size_t> newly_granted, std::uint64_t t) const;

  std::vector<double> state_vector(const EnvState& state) const;
  void write_state_vector(const EnvState& state, std::span<double> out) const;

  std::string describe(std::size_t action) const;
  std::string target_name(std::size_t action) const;
  std::optional<std::size_t> find_action(Verb verb, std::string_view target) const;
  std::optional<std::size_t> find_acl_action(Verb verb, const AclRule& rule) const;
  std::optional<std::size_t> acl_index(const AclRule& rule) const;

  bool goal_known(const BitSet& permissions) const { return permissions.test(goal_atom_); }
  std::size_t goal_atom() const { return goal_atom_; }

  // Delete-relaxed evaluation used by the oracle's lower bound: the attacker
  // is taken to stand in every space of `locations` at once.
  bool relaxed_feasible(const BitSet& permissions, const BitSet& acl, const BitSet& locations,
                        std::size_t action) const;
  // Atoms the action grants (ignoring whether they are already held).
  std::vector<std::size_t> effect_atoms(std::size_t action) const;

  // Whether traffic from `source_port` arrives at `service`'s dependent port
  // under `acl`; every firewall that forwards the flow must hold a matching rule.
  bool route_permitted(EntityIndex source_port, EntityIndex service, const BitSet& acl) const;

  // Tab-separated step-trace record.
  std::string trace_line(std::uint64_t episode, std::uint64_t step, std::size_t action,
                         const StepOutcome& outcome) const;

 private:
  template <class AtFn>
  bool preconditions(const BitSet& perms, const BitSet& acl, AtFn&& at, const AttackAction& a) const;
  bool has(const BitSet& perms, EntityIndex e, PermissionKind k) const;
  EntityIndex device_of_port(EntityIndex port) const { return model_->entity(port).host; }
  EntityIndex device_of_service(EntityIndex service) const;
  bool forwards_from(EntityIndex arrival_port) const;
  void build_tables();
  void build_acl_universe();

  std::shared_ptr<const CyberspaceModel> model_;
  EnvConfig config_;
  std::vector<AttackAction> actions_;
  std::vector<AclRule> acl_universe_;
  // firewall-position x port x service -> universe index or -1
  std::vector<std::int32_t> acl_lookup_;
  std::vector<EntityIndex> firewalls_;
  std::vector<std::int32_t> firewall_slot_;
  std::vector<std::vector<EntityIndex>> ports_of_device_;
  std::vector<std::vector<EntityIndex>> services_on_device_;
  std::vector<std::vector<EntityIndex>> link_peers_;
  std::vector<std::vector<EntityIndex>> adjacent_spaces_;
  std::vector<std::vector<EntityIndex>> access_keys_;      // per space
  std::vector<std::vector<EntityIndex>> encryption_keys_;  // per file
  std::vector<std::vector<EntityIndex>> files_holding_;    // per info item
  std::vector<bool> management_port_;  // dependent port of some service
  std::vector<EntityIndex> ports_;
  std::vector<EntityIndex> goal_files_;
  std::size_t goal_atom_ = 0;
};

}  // namespace pathfinder
