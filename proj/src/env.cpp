#include "pathfinder/env.hpp"

#include <algorithm>
#include <deque>
#include <functional>
#include <set>
#include <sstream>

namespace pathfinder {

std::string_view to_string(Verb v) {
  switch (v) {
    case Verb::EnterSpace: return "EnterSpace";
    case Verb::UseDevice: return "UseDevice";
    case Verb::DominateDevice: return "DominateDevice";
    case Verb::UsePort: return "UsePort";
    case Verb::DominatePort: return "DominatePort";
    case Verb::ReachService: return "ReachService";
    case Verb::AuthService: return "AuthService";
    case Verb::ReadFile: return "ReadFile";
    case Verb::ExtractInfo: return "ExtractInfo";
    case Verb::AclAdd: return "AclAdd";
    case Verb::AclRemove: return "AclRemove";
    case Verb::Stay: return "Stay";
  }
  return "?";
}

AttackEnvironment::AttackEnvironment(std::shared_ptr<const CyberspaceModel> model, EnvConfig config)
    : model_(std::move(model)), config_(config) {
  if (!model_) throw std::invalid_argument("null model");
  if (config_.episode_limit == 0) throw std::invalid_argument("episode_limit must be >= 1");
  build_tables();
  build_acl_universe();

  const auto& m = *model_;
  auto push = [&](Verb v, std::uint32_t target) { actions_.push_back({v, target, actions_.size()}); };
  auto each = [&](EntityClass cls, Verb v) {
    for (EntityIndex i = 0; i < m.entities.size(); ++i)
      if (m.entities[i].cls == cls) push(v, i);
  };
  each(EntityClass::Space, Verb::EnterSpace);
  each(EntityClass::Device, Verb::UseDevice);
  each(EntityClass::Device, Verb::DominateDevice);
  each(EntityClass::Port, Verb::UsePort);
  each(EntityClass::Port, Verb::DominatePort);
  each(EntityClass::Service, Verb::ReachService);
  each(EntityClass::Service, Verb::AuthService);
  each(EntityClass::File, Verb::ReadFile);
  for (EntityIndex i = 0; i < m.entities.size(); ++i)
    if (m.entities[i].cls == EntityClass::InfoItem && !files_holding_[i].empty()) push(Verb::ExtractInfo, i);
  for (std::uint32_t r = 0; r < acl_universe_.size(); ++r) push(Verb::AclAdd, r);
  for (std::uint32_t r = 0; r < acl_universe_.size(); ++r) push(Verb::AclRemove, r);
  push(Verb::Stay, 0);

  goal_atom_ = *m.atom_index(m.goal, PermissionKind::InformationKnow);
  goal_files_ = files_holding_[m.goal];
}

void AttackEnvironment::build_tables() {
  const auto& m = *model_;
  const auto n = m.entities.size();
  ports_of_device_.assign(n, {});
  services_on_device_.assign(n, {});
  link_peers_.assign(n, {});
  adjacent_spaces_.assign(n, {});
  access_keys_.assign(n, {});
  encryption_keys_.assign(n, {});
  files_holding_.assign(n, {});
  firewall_slot_.assign(n, -1);
  management_port_.assign(n, false);

  for (EntityIndex i = 0; i < n; ++i) {
    const auto& e = m.entities[i];
    if (e.cls == EntityClass::Port) {
      ports_of_device_[e.host].push_back(i);
      ports_.push_back(i);
    }
    if (e.cls == EntityClass::Service) services_on_device_[device_of_port(e.host)].push_back(i);
    if (e.cls == EntityClass::Service) management_port_[e.host] = true;
    if (e.cls == EntityClass::File)
      for (auto info : e.payload) files_holding_[info].push_back(i);
    if (e.cls == EntityClass::Device && e.device_kind == DeviceKind::Firewall) {
      firewall_slot_[i] = static_cast<std::int32_t>(firewalls_.size());
      firewalls_.push_back(i);
    }
  }
  for (const auto& [a, b] : m.links) {
    link_peers_[a].push_back(b);
    link_peers_[b].push_back(a);
  }
  for (const auto& [a, b] : m.space_adjacency) {
    adjacent_spaces_[a].push_back(b);
    adjacent_spaces_[b].push_back(a);
  }
  for (const auto& r : m.base_rules) {
    if (r.kind == RuleKind::PhysicalAccess && r.key != kNoEntity) access_keys_[r.subject].push_back(r.key);
    if (r.kind == RuleKind::Encryption) encryption_keys_[r.subject].push_back(r.key);
  }
}

EntityIndex AttackEnvironment::device_of_service(EntityIndex service) const {
  return device_of_port(model_->entity(service).host);
}

// Every firewall that some forwarding path from `source_port` to a service's
// dependent port crosses gets one candidate rule per (source port, service).
void AttackEnvironment::build_acl_universe() {
  const auto& m = *model_;
  std::set<AclRule> rules(m.initial_acl.begin(), m.initial_acl.end());

  for (auto q : ports_) {
    const auto src = device_of_port(q);
    if (is_forwarding(m.entity(src).device_kind)) continue;
    for (EntityIndex v = 0; v < m.entities.size(); ++v) {
      if (m.entities[v].cls != EntityClass::Service) continue;
      const auto dst = device_of_service(v);
      const auto dst_port = m.entity(v).host;
      if (dst == src) continue;
      std::set<EntityIndex> crossed;
      std::vector<EntityIndex> path;
      std::vector<bool> on_path(m.entities.size(), false);
      on_path[src] = true;
      std::function<void(EntityIndex)> walk = [&](EntityIndex arrival) {
        const auto dev = device_of_port(arrival);
        if (arrival == dst_port) {
          for (auto d : path)
            if (m.entity(d).device_kind == DeviceKind::Firewall) crossed.insert(d);
          return;
        }
        if (!forwards_from(arrival) || on_path[dev]) return;
        on_path[dev] = true;
        path.push_back(dev);
        for (auto p : ports_of_device_[dev]) {
          if (p == arrival) continue;
          for (auto peer : link_peers_[p]) walk(peer);
        }
        path.pop_back();
        on_path[dev] = false;
      };
      for (auto peer : link_peers_[q])
        if (device_of_port(peer) != src) walk(peer);
      for (auto fw : crossed) rules.insert({fw, q, dst_port, v});
    }
  }
  acl_universe_.assign(rules.begin(), rules.end());

  acl_lookup_.assign(firewalls_.size() * m.entities.size() * m.entities.size(), -1);
  for (std::size_t r = 0; r < acl_universe_.size(); ++r) {
    const auto& rule = acl_universe_[r];
    auto slot = firewall_slot_[rule.firewall];
    if (slot < 0) continue;
    acl_lookup_[(static_cast<std::size_t>(slot) * m.entities.size() + rule.source_port) * m.entities.size() +
                rule.service] = static_cast<std::int32_t>(r);
  }
}

// Forwarding devices relay traffic between their ports, except traffic that
// arrives on the dependent port of one of their own services (management plane).
bool AttackEnvironment::forwards_from(EntityIndex arrival_port) const {
  return is_forwarding(model_->entity(device_of_port(arrival_port)).device_kind) && !management_port_[arrival_port];
}

std::optional<std::size_t> AttackEnvironment::acl_index(const AclRule& rule) const {
  auto it = std::lower_bound(acl_universe_.begin(), acl_universe_.end(), rule);
  if (it == acl_universe_.end() || !(*it == rule)) return std::nullopt;
  return static_cast<std::size_t>(it - acl_universe_.begin());
}

EnvState AttackEnvironment::reset() const {
  EnvState s;
  s.permissions = BitSet(model_->atom_count());
  s.acl = BitSet(acl_universe_.size());
  for (const auto& rule : model_->initial_acl) s.acl.set(*acl_index(rule));
  s.attacker_space = model_->attacker_start;
  return s;
}

bool AttackEnvironment::has(const BitSet& perms, EntityIndex e, PermissionKind k) const {
  auto idx = model_->atom_index(e, k);
  return idx && perms.test(*idx);
}

bool AttackEnvironment::route_permitted(EntityIndex source_port, EntityIndex service, const BitSet& acl) const {
  const auto& m = *model_;
  const auto src = device_of_port(source_port);
  const auto dst_port = m.entity(service).host;
  if (src == device_of_port(dst_port)) return true;
  const auto n = m.entities.size();
  std::vector<bool> seen(n, false);
  std::deque<EntityIndex> queue;
  auto enqueue = [&](EntityIndex port) {
    if (!seen[port]) {
      seen[port] = true;
      queue.push_back(port);
    }
  };
  for (auto peer : link_peers_[source_port]) enqueue(peer);
  while (!queue.empty()) {
    const auto arrival = queue.front();
    queue.pop_front();
    if (arrival == dst_port) return true;
    if (!forwards_from(arrival)) continue;
    const auto dev = device_of_port(arrival);
    if (m.entity(dev).device_kind == DeviceKind::Firewall) {
      auto slot = static_cast<std::size_t>(firewall_slot_[dev]);
      auto r = acl_lookup_[(slot * n + source_port) * n + service];
      if (r < 0 || !acl.test(static_cast<std::size_t>(r))) continue;
    }
    for (auto p : ports_of_device_[dev]) {
      if (p == arrival) continue;
      for (auto peer : link_peers_[p]) enqueue(peer);
    }
  }
  return false;
}

template <class AtFn>
bool AttackEnvironment::preconditions(const BitSet& perms, const BitSet& acl, AtFn&& at,
                                      const AttackAction& a) const {
  using K = PermissionKind;
  const auto& m = *model_;
  const EntityIndex t = a.target;
  switch (a.verb) {
    case Verb::EnterSpace: {
      bool adjacent = false;
      for (auto s : adjacent_spaces_[t])
        if (at(s)) adjacent = true;
      if (!adjacent) return false;
      for (auto key : access_keys_[t])
        if (!has(perms, key, K::InformationKnow)) return false;
      return true;
    }
    case Verb::UseDevice:
      return has(perms, m.entity(t).location, K::SpaceEnter);
    case Verb::DominateDevice:
      return has(perms, t, K::ObjectUse);
    case Verb::UsePort: {
      const auto dev = device_of_port(t);
      if (has(perms, dev, K::ObjectUse)) return true;
      if (is_forwarding(m.entity(dev).device_kind)) return false;
      for (auto v : services_on_device_[dev])
        if (has(perms, v, K::ServiceDominate)) return true;
      return false;
    }
    case Verb::DominatePort:
      return has(perms, t, K::PortUse) && has(perms, device_of_port(t), K::ObjectDominate);
    case Verb::ReachService:
      for (auto q : ports_)
        if (has(perms, q, K::PortUse) && route_permitted(q, t, acl)) return true;
      return false;
    case Verb::AuthService: {
      if (!has(perms, t, K::ServiceReach)) return false;
      const auto pw = m.entity(t).password;
      return pw == kNoEntity || has(perms, pw, K::InformationKnow);
    }
    case Verb::ReadFile: {
      const auto host = m.entity(t).host;
      const auto cls = m.entity(host).cls;
      if (cls == EntityClass::Service) return has(perms, host, K::ServiceDominate);
      return has(perms, host, K::ObjectDominate);
    }
    case Verb::ExtractInfo:
      for (auto f : files_holding_[t]) {
        if (!has(perms, f, K::FileDominate)) continue;
        bool unlocked = true;
        for (auto key : encryption_keys_[f])
          if (!has(perms, key, K::InformationKnow)) unlocked = false;
        if (unlocked) return true;
      }
      return false;
    case Verb::AclAdd:
    case Verb::AclRemove: {
      const auto& rule = acl_universe_[t];
      bool managed = false;
      for (auto v : services_on_device_[rule.firewall])
        if (has(perms, v, K::ServiceDominate)) managed = true;
      if (!managed) return false;
      return a.verb == Verb::AclAdd ? !acl.test(t) : acl.test(t);
    }
    case Verb::Stay:
      return true;
  }
  return false;
}

bool AttackEnvironment::feasible(const EnvState& state, std::size_t action) const {
  if (action >= actions_.size()) throw ActionIndexError("action index out of range");
  auto at = [&](EntityIndex s) { return s == state.attacker_space; };
  return preconditions(state.permissions, state.acl, at, actions_[action]);
}

BitSet AttackEnvironment::action_mask(const EnvState& state) const {
  BitSet mask(actions_.size());
  auto at = [&](EntityIndex s) { return s == state.attacker_space; };
  for (std::size_t i = 0; i < actions_.size(); ++i)
    if (preconditions(state.permissions, state.acl, at, actions_[i])) mask.set(i);
  return mask;
}

bool AttackEnvironment::relaxed_feasible(const BitSet& permissions, const BitSet& acl, const BitSet& locations,
                                         std::size_t action) const {
  auto at = [&](EntityIndex s) { return locations.test(s); };
  const auto& a = actions_.at(action);
  if (a.verb == Verb::AclAdd) {
    // adding is monotone in the relaxation; presence does not block it
    BitSet without = acl;
    without.reset(a.target);
    return preconditions(permissions, without, at, a);
  }
  if (a.verb == Verb::AclRemove) return false;
  return preconditions(permissions, acl, at, a);
}

std::vector<std::size_t> AttackEnvironment::effect_atoms(std::size_t action) const {
  using K = PermissionKind;
  const auto& m = *model_;
  const auto& a = actions_.at(action);
  std::vector<std::size_t> out;
  auto grant = [&](EntityIndex e, K k) {
    if (auto i = m.atom_index(e, k)) out.push_back(*i);
  };
  switch (a.verb) {
    case Verb::EnterSpace: grant(a.target, K::SpaceEnter); break;
    case Verb::UseDevice:
      grant(a.target, K::ObjectUse);
      for (auto info : m.entity(a.target).payload) grant(info, K::InformationKnow);
      break;
    case Verb::DominateDevice: grant(a.target, K::ObjectDominate); break;
    case Verb::UsePort: grant(a.target, K::PortUse); break;
    case Verb::DominatePort: grant(a.target, K::PortDominate); break;
    case Verb::ReachService: grant(a.target, K::ServiceReach); break;
    case Verb::AuthService:
      grant(a.target, K::ServiceDominate);
      for (auto info : m.entity(a.target).payload) grant(info, K::InformationKnow);
      break;
    case Verb::ReadFile: grant(a.target, K::FileDominate); break;
    case Verb::ExtractInfo: grant(a.target, K::InformationKnow); break;
    default: break;
  }
  return out;
}

StepOutcome AttackEnvironment::step(const EnvState& state, std::size_t action) const {
  if (action >= actions_.size()) throw ActionIndexError("action index out of range");
  StepOutcome out;
  out.next = state;
  auto& next = out.next;
  next.steps_this_attack += 1;
  next.steps_this_episode += 1;

  out.feasible = feasible(state, action);
  if (out.feasible) {
    const auto& a = actions_[action];
    for (auto atom : effect_atoms(action))
      if (!next.permissions.test(atom)) {
        next.permissions.set(atom);
        out.newly_granted.push_back(atom);
      }
    std::sort(out.newly_granted.begin(), out.newly_granted.end());
    if (a.verb == Verb::EnterSpace) next.attacker_space = a.target;
    if (a.verb == Verb::AclAdd) next.acl.set(a.target);
    if (a.verb == Verb::AclRemove) next.acl.reset(a.target);
    out.reward = reward_of(state, out.newly_granted, next.steps_this_attack);
    if (next.permissions.test(goal_atom_) && !state.permissions.test(goal_atom_)) {
      out.attack_succeeded = true;
      out.attack_steps = next.steps_this_attack;
      // every attempt starts from the initial environment
      const auto steps = next.steps_this_episode;
      next = reset();
      next.steps_this_episode = steps;
    }
  } else {
    out.reward = kStepPenalty;
  }
  out.episode_done = next.steps_this_episode >= config_.episode_limit;
  return out;
}

double AttackEnvironment::reward_of(const EnvState& /*prev*/, std::span<const std::size_t> newly_granted,
                                    std::uint64_t t) const {
  using K = PermissionKind;
  const auto& m = *model_;
  bool goal = false, goal_file = false, primary_dom = false, secondary_dom = false, secondary_port = false,
       primary_port = false;
  const auto primary = m.reward_targets.primary_server;
  const auto secondary = m.reward_targets.secondary_server;
  for (auto idx : newly_granted) {
    const auto& atom = m.atom_order.at(idx);
    switch (atom.kind) {
      case K::InformationKnow:
        if (atom.entity == m.goal) goal = true;
        break;
      case K::FileDominate:
        if (std::find(goal_files_.begin(), goal_files_.end(), atom.entity) != goal_files_.end()) goal_file = true;
        break;
      case K::ObjectDominate:
        if (atom.entity == primary) primary_dom = true;
        if (atom.entity == secondary) secondary_dom = true;
        break;
      case K::ServiceDominate: {
        auto dev = device_of_service(atom.entity);
        if (dev == primary) primary_dom = true;
        if (dev == secondary) secondary_dom = true;
        break;
      }
      case K::PortUse: {
        auto dev = device_of_port(atom.entity);
        if (dev == primary) primary_port = true;
        if (dev == secondary) secondary_port = true;
        break;
      }
      default:
        break;
    }
  }
  if (goal) return kSuccessNumerator / static_cast<double>(std::max<std::uint64_t>(t, 1));
  if (goal_file) return 10.0;
  if (primary_dom || secondary_dom) return 5.0;
  if (secondary_port || primary_port) return 1.0;
  return kStepPenalty;
}

void AttackEnvironment::write_state_vector(const EnvState& state, std::span<double> out) const {
  if (out.size() != state.permissions.size()) throw std::invalid_argument("state vector size mismatch");
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = state.permissions.test(i) ? 1.0 : 0.0;
}

std::vector<double> AttackEnvironment::state_vector(const EnvState& state) const {
  std::vector<double> v(state.permissions.size());
  write_state_vector(state, v);
  return v;
}

std::string AttackEnvironment::target_name(std::size_t action) const {
  const auto& a = actions_.at(action);
  const auto& m = *model_;
  if (a.verb == Verb::Stay) return "-";
  if (a.verb == Verb::AclAdd || a.verb == Verb::AclRemove) {
    const auto& r = acl_universe_[a.target];
    return m.id_of(r.firewall) + ":" + m.id_of(r.source_port) + "->" + m.id_of(r.destination_port) + "/" +
           m.id_of(r.service);
  }
  return m.id_of(a.target);
}

std::string AttackEnvironment::describe(std::size_t action) const {
  return std::string(to_string(actions_.at(action).verb)) + "(" + target_name(action) + ")";
}

std::optional<std::size_t> AttackEnvironment::find_action(Verb verb, std::string_view target) const {
  for (std::size_t i = 0; i < actions_.size(); ++i)
    if (actions_[i].verb == verb && (verb == Verb::Stay || target_name(i) == target)) return i;
  return std::nullopt;
}

std::optional<std::size_t> AttackEnvironment::find_acl_action(Verb verb, const AclRule& rule) const {
  auto r = acl_index(rule);
  if (!r) return std::nullopt;
  for (std::size_t i = 0; i < actions_.size(); ++i)
    if (actions_[i].verb == verb && actions_[i].target == *r) return i;
  return std::nullopt;
}

std::string AttackEnvironment::trace_line(std::uint64_t episode, std::uint64_t step, std::size_t action,
                                          const StepOutcome& outcome) const {
  std::ostringstream os;
  os.precision(17);
  os << episode << '\t' << step << '\t' << action << '\t' << to_string(actions_.at(action).verb) << '\t'
     << target_name(action) << '\t' << outcome.reward << '\t' << (outcome.feasible ? 1 : 0) << '\t'
     << (outcome.attack_succeeded ? 1 : 0);
  return os.str();
}

}  // namespace pathfinder
