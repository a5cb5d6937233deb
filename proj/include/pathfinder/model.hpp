#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace pathfinder {

// Closed entity ontology: physical (Space, Device), network (Port, Service)
// and information (File, InfoItem) domains.
enum class EntityClass : std::uint8_t { Space, Device, Port, Service, File, InfoItem };

enum class PermissionKind : std::uint8_t {
  SpaceEnter,
  ObjectUse,
  ObjectDominate,
  PortUse,
  PortDominate,
  ServiceReach,
  ServiceDominate,
  FileDominate,
  InformationKnow,
};

inline constexpr std::size_t kPermissionKindCount = 9;
inline constexpr std::array<PermissionKind, kPermissionKindCount> kAllPermissionKinds = {
    PermissionKind::SpaceEnter,      PermissionKind::ObjectUse,   PermissionKind::ObjectDominate,
    PermissionKind::PortUse,         PermissionKind::PortDominate, PermissionKind::ServiceReach,
    PermissionKind::ServiceDominate, PermissionKind::FileDominate, PermissionKind::InformationKnow,
};

enum class DeviceKind : std::uint8_t { Computer, Firewall, Sensor, Router, Switch, Server };

using EntityIndex = std::uint32_t;
inline constexpr EntityIndex kNoEntity = static_cast<EntityIndex>(-1);

std::string_view to_string(EntityClass c);
std::string_view to_string(PermissionKind k);
std::string_view to_string(DeviceKind k);
std::optional<PermissionKind> parse_permission_kind(std::string_view s);
std::optional<DeviceKind> parse_device_kind(std::string_view s);

// Kinds legal for an entity class. The union over all classes is the nine kinds.
std::vector<PermissionKind> legal_kinds(EntityClass c);
bool is_legal(EntityClass c, PermissionKind k);

// Forwarding devices pass traffic between their ports; end hosts do not.
bool is_forwarding(DeviceKind k);

struct Entity {
  std::string id;
  EntityClass cls = EntityClass::Space;
  // Device: containing space.
  EntityIndex location = kNoEntity;
  // Port: owning device. Service: dependent port. File: hosting service or device.
  EntityIndex host = kNoEntity;
  // Info items stored here (credential placement).
  std::vector<EntityIndex> payload;
  // Device only.
  DeviceKind device_kind = DeviceKind::Computer;
  // Service only: descriptive role and required credential (kNoEntity = none).
  std::string role;
  EntityIndex password = kNoEntity;

  friend bool operator==(const Entity&, const Entity&) = default;
};

struct PermissionAtom {
  EntityIndex entity = kNoEntity;
  PermissionKind kind = PermissionKind::SpaceEnter;
  friend bool operator==(const PermissionAtom&, const PermissionAtom&) = default;
};

// Firewall rule: traffic from `source_port` may cross `firewall` toward
// `service` on its dependent port `destination_port`.
struct AclRule {
  EntityIndex firewall = kNoEntity;
  EntityIndex source_port = kNoEntity;
  EntityIndex destination_port = kNoEntity;
  EntityIndex service = kNoEntity;
  friend bool operator==(const AclRule&, const AclRule&) = default;
  friend auto operator<=>(const AclRule&, const AclRule&) = default;
};

enum class RuleKind : std::uint8_t { PhysicalAccess, AclAllow, Encryption };

struct SecurityRule {
  RuleKind kind = RuleKind::PhysicalAccess;
  // PhysicalAccess: space + key (kNoEntity = open). Encryption: file + key.
  EntityIndex subject = kNoEntity;
  EntityIndex key = kNoEntity;
  // AclAllow only.
  AclRule acl;
  friend bool operator==(const SecurityRule&, const SecurityRule&) = default;
};

// Entities whose permissions feed the shaping rewards.
struct RewardTargets {
  EntityIndex primary_server = kNoEntity;
  EntityIndex secondary_server = kNoEntity;
  friend bool operator==(const RewardTargets&, const RewardTargets&) = default;
};

class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ScenarioParseError : public ScenarioError {
 public:
  using ScenarioError::ScenarioError;
};

class ScenarioValidationError : public ScenarioError {
 public:
  ScenarioValidationError(const std::string& message, std::string offending_id)
      : ScenarioError(message), offending_id_(std::move(offending_id)) {}
  const std::string& offending_id() const { return offending_id_; }

 private:
  std::string offending_id_;
};

// Immutable world description. Built by load_scenario; read-only afterwards.
struct CyberspaceModel {
  std::string name;
  std::vector<Entity> entities;
  std::vector<std::pair<EntityIndex, EntityIndex>> space_adjacency;
  std::vector<std::pair<EntityIndex, EntityIndex>> links;
  std::vector<SecurityRule> base_rules;
  std::vector<AclRule> initial_acl;
  EntityIndex attacker_start = kNoEntity;
  EntityIndex goal = kNoEntity;
  RewardTargets reward_targets;
  std::vector<PermissionAtom> atom_order;

  std::optional<EntityIndex> find(std::string_view id) const;
  EntityIndex require(std::string_view id) const;
  const Entity& entity(EntityIndex i) const { return entities.at(i); }
  const std::string& id_of(EntityIndex i) const { return entities.at(i).id; }

  // Position of (entity, kind) in atom_order.
  std::optional<std::size_t> atom_index(EntityIndex e, PermissionKind k) const;
  std::size_t atom_count() const { return atom_order.size(); }

  // Walks host/location references up to the device holding `e`, if any.
  EntityIndex storage_device(EntityIndex e) const;
  // Every place (device, service or file) whose payload holds `info`.
  std::vector<EntityIndex> holders_of(EntityIndex info) const;

  friend bool operator==(const CyberspaceModel& a, const CyberspaceModel& b) {
    return a.name == b.name && a.entities == b.entities && a.space_adjacency == b.space_adjacency &&
           a.links == b.links && a.base_rules == b.base_rules && a.initial_acl == b.initial_acl &&
           a.attacker_start == b.attacker_start && a.goal == b.goal &&
           a.reward_targets == b.reward_targets && a.atom_order == b.atom_order;
  }

  // Derived lookups, rebuilt by finalize().
  void finalize();

 private:
  std::unordered_map<std::string, EntityIndex> index_;
  std::vector<std::array<std::int32_t, kPermissionKindCount>> atom_lookup_;
};

// Parses and validates a scenario document (JSON text).
CyberspaceModel load_scenario(std::string_view source);
CyberspaceModel load_scenario_file(const std::string& path);
std::string serialize_scenario(const CyberspaceModel& model);

// Declaration order x fixed kind order.
std::vector<PermissionAtom> natural_atom_order(const CyberspaceModel& model);

// Checks that a model is the published benchmark environment. Each missing
// or misplaced element yields one entry; an empty list means all checks pass.
struct BenchmarkReport {
  std::vector<std::string> problems;
  bool ok() const { return problems.empty(); }
};
BenchmarkReport validate_benchmark(const CyberspaceModel& model);

}  // namespace pathfinder
