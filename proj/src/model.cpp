#include "pathfinder/model.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace pathfinder {

using nlohmann::json;

std::string_view to_string(EntityClass c) {
  switch (c) {
    case EntityClass::Space: return "space";
    case EntityClass::Device: return "device";
    case EntityClass::Port: return "port";
    case EntityClass::Service: return "service";
    case EntityClass::File: return "file";
    case EntityClass::InfoItem: return "info";
  }
  return "?";
}

std::string_view to_string(PermissionKind k) {
  switch (k) {
    case PermissionKind::SpaceEnter: return "SpaceEnter";
    case PermissionKind::ObjectUse: return "ObjectUse";
    case PermissionKind::ObjectDominate: return "ObjectDominate";
    case PermissionKind::PortUse: return "PortUse";
    case PermissionKind::PortDominate: return "PortDominate";
    case PermissionKind::ServiceReach: return "ServiceReach";
    case PermissionKind::ServiceDominate: return "ServiceDominate";
    case PermissionKind::FileDominate: return "FileDominate";
    case PermissionKind::InformationKnow: return "InformationKnow";
  }
  return "?";
}

std::string_view to_string(DeviceKind k) {
  switch (k) {
    case DeviceKind::Computer: return "computer";
    case DeviceKind::Firewall: return "firewall";
    case DeviceKind::Sensor: return "sensor";
    case DeviceKind::Router: return "router";
    case DeviceKind::Switch: return "switch";
    case DeviceKind::Server: return "server";
  }
  return "?";
}

std::optional<PermissionKind> parse_permission_kind(std::string_view s) {
  for (auto k : kAllPermissionKinds)
    if (to_string(k) == s) return k;
  return std::nullopt;
}

std::optional<DeviceKind> parse_device_kind(std::string_view s) {
  for (auto k : {DeviceKind::Computer, DeviceKind::Firewall, DeviceKind::Sensor, DeviceKind::Router,
                 DeviceKind::Switch, DeviceKind::Server})
    if (to_string(k) == s) return k;
  return std::nullopt;
}

std::vector<PermissionKind> legal_kinds(EntityClass c) {
  using K = PermissionKind;
  switch (c) {
    case EntityClass::Space: return {K::SpaceEnter};
    case EntityClass::Device: return {K::ObjectUse, K::ObjectDominate};
    case EntityClass::Port: return {K::PortUse, K::PortDominate};
    case EntityClass::Service: return {K::ServiceReach, K::ServiceDominate};
    case EntityClass::File: return {K::FileDominate};
    case EntityClass::InfoItem: return {K::InformationKnow};
  }
  return {};
}

bool is_legal(EntityClass c, PermissionKind k) {
  auto kinds = legal_kinds(c);
  return std::find(kinds.begin(), kinds.end(), k) != kinds.end();
}

bool is_forwarding(DeviceKind k) {
  return k == DeviceKind::Firewall || k == DeviceKind::Router || k == DeviceKind::Switch;
}

std::optional<EntityIndex> CyberspaceModel::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

EntityIndex CyberspaceModel::require(std::string_view id) const {
  auto i = find(id);
  if (!i) throw ScenarioValidationError("unknown entity '" + std::string(id) + "'", std::string(id));
  return *i;
}

std::optional<std::size_t> CyberspaceModel::atom_index(EntityIndex e, PermissionKind k) const {
  if (e >= atom_lookup_.size()) return std::nullopt;
  auto v = atom_lookup_[e][static_cast<std::size_t>(k)];
  if (v < 0) return std::nullopt;
  return static_cast<std::size_t>(v);
}

EntityIndex CyberspaceModel::storage_device(EntityIndex e) const {
  for (std::size_t guard = 0; e != kNoEntity && guard <= entities.size(); ++guard) {
    const auto& ent = entities[e];
    if (ent.cls == EntityClass::Device) return e;
    e = ent.host;
  }
  return kNoEntity;
}

std::vector<EntityIndex> CyberspaceModel::holders_of(EntityIndex info) const {
  std::vector<EntityIndex> out;
  for (EntityIndex i = 0; i < entities.size(); ++i) {
    const auto& p = entities[i].payload;
    if (std::find(p.begin(), p.end(), info) != p.end()) out.push_back(i);
  }
  return out;
}

void CyberspaceModel::finalize() {
  index_.clear();
  for (EntityIndex i = 0; i < entities.size(); ++i) index_.emplace(entities[i].id, i);
  atom_lookup_.assign(entities.size(), {});
  for (auto& row : atom_lookup_) row.fill(-1);
  for (std::size_t a = 0; a < atom_order.size(); ++a) {
    const auto& atom = atom_order[a];
    if (atom.entity < entities.size())
      atom_lookup_[atom.entity][static_cast<std::size_t>(atom.kind)] = static_cast<std::int32_t>(a);
  }
}

std::vector<PermissionAtom> natural_atom_order(const CyberspaceModel& model) {
  std::vector<PermissionAtom> out;
  for (EntityIndex i = 0; i < model.entities.size(); ++i)
    for (auto k : legal_kinds(model.entities[i].cls)) out.push_back({i, k});
  return out;
}

namespace {

[[noreturn]] void invalid(const std::string& message, const std::string& id) {
  throw ScenarioValidationError(message, id);
}

const json& section(const json& doc, const char* key) {
  static const json empty = json::array();
  auto it = doc.find(key);
  if (it == doc.end() || it->is_null()) return empty;
  if (!it->is_array()) throw ScenarioParseError(std::string("section '") + key + "' must be a list");
  return *it;
}

std::string str_field(const json& node, const char* key, const char* where) {
  auto it = node.find(key);
  if (it == node.end() || !it->is_string())
    throw ScenarioParseError(std::string(where) + ": missing string field '" + key + "'");
  return it->get<std::string>();
}

std::optional<std::string> opt_str(const json& node, const char* key) {
  auto it = node.find(key);
  if (it == node.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw ScenarioParseError(std::string("field '") + key + "' must be a string");
  return it->get<std::string>();
}

std::vector<std::string> str_list(const json& node, const char* key) {
  std::vector<std::string> out;
  auto it = node.find(key);
  if (it == node.end() || it->is_null()) return out;
  if (!it->is_array()) throw ScenarioParseError(std::string("field '") + key + "' must be a list");
  for (const auto& v : *it) {
    if (!v.is_string()) throw ScenarioParseError(std::string("field '") + key + "' must hold strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

// Resolves an id and checks its class.
EntityIndex ref(const CyberspaceModel& m, const std::string& id, EntityClass expected,
                const std::string& context) {
  auto i = m.find(id);
  if (!i) invalid(context + " references unknown " + std::string(to_string(expected)) + " '" + id + "'", id);
  if (m.entities[*i].cls != expected)
    invalid(context + " expects a " + std::string(to_string(expected)) + " but '" + id + "' is a " +
                std::string(to_string(m.entities[*i].cls)),
            id);
  return *i;
}

struct PendingRefs {
  std::vector<std::string> location, host, payload_owner;
  std::vector<std::vector<std::string>> payload;
  std::vector<std::optional<std::string>> password;
};

void validate(const CyberspaceModel& m) {
  if (m.entities.empty()) invalid("empty model", "");
  if (m.attacker_start == kNoEntity) invalid("missing attacker_start", "");
  if (m.goal == kNoEntity) invalid("missing goal", "");

  // host chains must terminate
  for (EntityIndex i = 0; i < m.entities.size(); ++i) {
    std::set<EntityIndex> seen;
    for (EntityIndex cur = i; cur != kNoEntity; cur = m.entities[cur].host)
      if (!seen.insert(cur).second) invalid("host cycle through '" + m.entities[i].id + "'", m.entities[i].id);
  }

  std::set<std::pair<EntityIndex, PermissionKind>> seen_atoms;
  for (const auto& atom : m.atom_order) {
    const auto& e = m.entities.at(atom.entity);
    if (!is_legal(e.cls, atom.kind))
      invalid("atom " + e.id + ":" + std::string(to_string(atom.kind)) + " pairs an illegal kind", e.id);
    if (!seen_atoms.insert({atom.entity, atom.kind}).second)
      invalid("duplicate atom " + e.id + ":" + std::string(to_string(atom.kind)), e.id);
  }
  for (const auto& atom : natural_atom_order(m))
    if (!seen_atoms.count({atom.entity, atom.kind}))
      invalid("atom order missing " + m.id_of(atom.entity) + ":" + std::string(to_string(atom.kind)),
              m.id_of(atom.entity));

  for (const auto& acl : m.initial_acl) {
    const auto& fw = m.entities[acl.firewall];
    if (fw.device_kind != DeviceKind::Firewall) invalid("acl names non-firewall device '" + fw.id + "'", fw.id);
    const auto& svc = m.entities[acl.service];
    if (svc.host != acl.destination_port)
      invalid("acl destination port '" + m.id_of(acl.destination_port) + "' is not the port of service '" +
                  svc.id + "'",
              m.id_of(acl.destination_port));
  }
}

}  // namespace

CyberspaceModel load_scenario(std::string_view source) {
  json doc;
  try {
    doc = json::parse(source);
  } catch (const json::parse_error& e) {
    throw ScenarioParseError(std::string("malformed scenario: ") + e.what());
  }
  if (!doc.is_object()) throw ScenarioParseError("scenario root must be a map");

  CyberspaceModel m;
  m.name = doc.value("name", std::string{});

  PendingRefs pending;
  auto declare = [&](const json& node, EntityClass cls, const char* where) -> Entity& {
    if (!node.is_object()) throw ScenarioParseError(std::string(where) + " entries must be maps");
    Entity e;
    e.id = str_field(node, "id", where);
    e.cls = cls;
    if (m.find(e.id)) invalid("duplicate entity id '" + e.id + "'", e.id);
    m.entities.push_back(e);
    m.finalize();
    pending.location.push_back(opt_str(node, "location").value_or(""));
    pending.host.push_back(opt_str(node, "host").value_or(""));
    pending.payload.push_back(str_list(node, "payload"));
    pending.password.push_back(opt_str(node, "password"));
    return m.entities.back();
  };

  for (const auto& n : section(doc, "spaces")) declare(n, EntityClass::Space, "spaces");
  for (const auto& n : section(doc, "devices")) {
    auto& e = declare(n, EntityClass::Device, "devices");
    auto kind = opt_str(n, "kind").value_or("computer");
    auto dk = parse_device_kind(kind);
    if (!dk) invalid("device '" + e.id + "' has unknown kind '" + kind + "'", e.id);
    e.device_kind = *dk;
  }
  for (const auto& n : section(doc, "ports")) declare(n, EntityClass::Port, "ports");
  for (const auto& n : section(doc, "services")) {
    auto& e = declare(n, EntityClass::Service, "services");
    e.role = opt_str(n, "role").value_or("");
  }
  for (const auto& n : section(doc, "files")) declare(n, EntityClass::File, "files");
  for (const auto& n : section(doc, "info")) declare(n, EntityClass::InfoItem, "info");

  if (m.entities.empty()) invalid("empty model", "");

  for (EntityIndex i = 0; i < m.entities.size(); ++i) {
    auto& e = m.entities[i];
    const std::string ctx = std::string(to_string(e.cls)) + " '" + e.id + "'";
    switch (e.cls) {
      case EntityClass::Device:
        if (pending.location[i].empty()) invalid(ctx + " has no location", e.id);
        e.location = ref(m, pending.location[i], EntityClass::Space, ctx);
        break;
      case EntityClass::Port:
        if (pending.host[i].empty()) invalid(ctx + " has no host device", e.id);
        e.host = ref(m, pending.host[i], EntityClass::Device, ctx);
        break;
      case EntityClass::Service:
        if (pending.host[i].empty()) invalid(ctx + " has no dependent port", e.id);
        e.host = ref(m, pending.host[i], EntityClass::Port, ctx);
        if (pending.password[i]) e.password = ref(m, *pending.password[i], EntityClass::InfoItem, ctx);
        break;
      case EntityClass::File: {
        if (pending.host[i].empty()) invalid(ctx + " has no host", e.id);
        auto h = m.find(pending.host[i]);
        if (!h) invalid(ctx + " references unknown host '" + pending.host[i] + "'", pending.host[i]);
        auto hc = m.entities[*h].cls;
        if (hc != EntityClass::Service && hc != EntityClass::Device)
          invalid(ctx + " must be hosted on a service or device", pending.host[i]);
        e.host = *h;
        break;
      }
      default:
        break;
    }
    if (!pending.payload[i].empty()) {
      if (e.cls != EntityClass::Device && e.cls != EntityClass::Service && e.cls != EntityClass::File)
        invalid(ctx + " cannot carry a payload", e.id);
      for (const auto& p : pending.payload[i]) e.payload.push_back(ref(m, p, EntityClass::InfoItem, ctx));
    }
  }

  auto pairs = [&](const char* key, EntityClass cls, auto& out) {
    for (const auto& n : section(doc, key)) {
      if (!n.is_array() || n.size() != 2 || !n[0].is_string() || !n[1].is_string())
        throw ScenarioParseError(std::string(key) + " entries must be [id, id] pairs");
      auto a = ref(m, n[0].get<std::string>(), cls, key);
      auto b = ref(m, n[1].get<std::string>(), cls, key);
      if (a == b) invalid(std::string(key) + " pair joins '" + m.id_of(a) + "' to itself", m.id_of(a));
      out.emplace_back(a, b);
    }
  };
  pairs("adjacency", EntityClass::Space, m.space_adjacency);
  pairs("links", EntityClass::Port, m.links);

  for (const auto& n : section(doc, "rules")) {
    if (!n.is_object()) throw ScenarioParseError("rules entries must be maps");
    auto kind = str_field(n, "kind", "rules");
    SecurityRule r;
    if (kind == "physical_access") {
      r.kind = RuleKind::PhysicalAccess;
      r.subject = ref(m, str_field(n, "space", "rules"), EntityClass::Space, "physical_access rule");
      auto key = str_field(n, "key", "rules");
      r.key = key == "open" ? kNoEntity : ref(m, key, EntityClass::InfoItem, "physical_access rule");
    } else if (kind == "encryption") {
      r.kind = RuleKind::Encryption;
      r.subject = ref(m, str_field(n, "file", "rules"), EntityClass::File, "encryption rule");
      r.key = ref(m, str_field(n, "key", "rules"), EntityClass::InfoItem, "encryption rule");
    } else {
      throw ScenarioParseError("unknown rule kind '" + kind + "'");
    }
    m.base_rules.push_back(r);
  }

  for (const auto& n : section(doc, "acl")) {
    if (!n.is_object()) throw ScenarioParseError("acl entries must be maps");
    AclRule a;
    a.firewall = ref(m, str_field(n, "firewall", "acl"), EntityClass::Device, "acl");
    a.source_port = ref(m, str_field(n, "source_port", "acl"), EntityClass::Port, "acl");
    a.destination_port = ref(m, str_field(n, "destination_port", "acl"), EntityClass::Port, "acl");
    a.service = ref(m, str_field(n, "service", "acl"), EntityClass::Service, "acl");
    m.initial_acl.push_back(a);
  }

  if (auto s = opt_str(doc, "attacker_start")) m.attacker_start = ref(m, *s, EntityClass::Space, "attacker_start");
  if (auto g = opt_str(doc, "goal")) m.goal = ref(m, *g, EntityClass::InfoItem, "goal");

  if (auto it = doc.find("reward_targets"); it != doc.end() && it->is_object()) {
    if (auto p = opt_str(*it, "primary_server"))
      m.reward_targets.primary_server = ref(m, *p, EntityClass::Device, "reward_targets");
    if (auto s = opt_str(*it, "secondary_server"))
      m.reward_targets.secondary_server = ref(m, *s, EntityClass::Device, "reward_targets");
  }

  auto atoms_it = doc.find("atoms");
  if (atoms_it == doc.end() || atoms_it->is_null()) {
    m.atom_order = natural_atom_order(m);
  } else {
    if (!atoms_it->is_array()) throw ScenarioParseError("atoms must be a list");
    for (const auto& n : *atoms_it) {
      if (!n.is_array() || n.size() != 2 || !n[0].is_string() || !n[1].is_string())
        throw ScenarioParseError("atoms entries must be [entity, kind] pairs");
      auto id = n[0].get<std::string>();
      auto e = m.find(id);
      if (!e) invalid("atom references unknown entity '" + id + "'", id);
      auto k = parse_permission_kind(n[1].get<std::string>());
      if (!k) throw ScenarioParseError("unknown permission kind '" + n[1].get<std::string>() + "'");
      m.atom_order.push_back({*e, *k});
    }
  }

  m.finalize();
  validate(m);
  return m;
}

CyberspaceModel load_scenario_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ScenarioParseError("cannot open scenario file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_scenario(buf.str());
}

std::string serialize_scenario(const CyberspaceModel& m) {
  json doc = json::object();
  doc["name"] = m.name;
  auto ids = [&](const std::vector<EntityIndex>& v) {
    json out = json::array();
    for (auto i : v) out.push_back(m.id_of(i));
    return out;
  };
  json spaces = json::array(), devices = json::array(), ports = json::array(), services = json::array(),
       files = json::array(), info = json::array();
  for (const auto& e : m.entities) {
    json n = {{"id", e.id}};
    switch (e.cls) {
      case EntityClass::Space: spaces.push_back(n); break;
      case EntityClass::Device:
        n["kind"] = to_string(e.device_kind);
        n["location"] = m.id_of(e.location);
        if (!e.payload.empty()) n["payload"] = ids(e.payload);
        devices.push_back(n);
        break;
      case EntityClass::Port:
        n["host"] = m.id_of(e.host);
        ports.push_back(n);
        break;
      case EntityClass::Service:
        n["role"] = e.role;
        n["host"] = m.id_of(e.host);
        n["password"] = e.password == kNoEntity ? json(nullptr) : json(m.id_of(e.password));
        if (!e.payload.empty()) n["payload"] = ids(e.payload);
        services.push_back(n);
        break;
      case EntityClass::File:
        n["host"] = m.id_of(e.host);
        if (!e.payload.empty()) n["payload"] = ids(e.payload);
        files.push_back(n);
        break;
      case EntityClass::InfoItem: info.push_back(n); break;
    }
  }
  doc["spaces"] = spaces;
  doc["devices"] = devices;
  doc["ports"] = ports;
  doc["services"] = services;
  doc["files"] = files;
  doc["info"] = info;
  auto pair_list = [&](const auto& v) {
    json out = json::array();
    for (const auto& [a, b] : v) out.push_back({m.id_of(a), m.id_of(b)});
    return out;
  };
  doc["adjacency"] = pair_list(m.space_adjacency);
  doc["links"] = pair_list(m.links);
  json rules = json::array();
  for (const auto& r : m.base_rules) {
    if (r.kind == RuleKind::PhysicalAccess)
      rules.push_back({{"kind", "physical_access"},
                       {"space", m.id_of(r.subject)},
                       {"key", r.key == kNoEntity ? std::string("open") : m.id_of(r.key)}});
    else if (r.kind == RuleKind::Encryption)
      rules.push_back({{"kind", "encryption"}, {"file", m.id_of(r.subject)}, {"key", m.id_of(r.key)}});
  }
  doc["rules"] = rules;
  json acl = json::array();
  for (const auto& a : m.initial_acl)
    acl.push_back({{"firewall", m.id_of(a.firewall)},
                   {"source_port", m.id_of(a.source_port)},
                   {"destination_port", m.id_of(a.destination_port)},
                   {"service", m.id_of(a.service)}});
  doc["acl"] = acl;
  doc["attacker_start"] = m.id_of(m.attacker_start);
  doc["goal"] = m.id_of(m.goal);
  json targets = json::object();
  if (m.reward_targets.primary_server != kNoEntity)
    targets["primary_server"] = m.id_of(m.reward_targets.primary_server);
  if (m.reward_targets.secondary_server != kNoEntity)
    targets["secondary_server"] = m.id_of(m.reward_targets.secondary_server);
  doc["reward_targets"] = targets;
  json atoms = json::array();
  for (const auto& a : m.atom_order) atoms.push_back({m.id_of(a.entity), to_string(a.kind)});
  doc["atoms"] = atoms;
  return doc.dump(1);
}

BenchmarkReport validate_benchmark(const CyberspaceModel& m) {
  BenchmarkReport report;
  auto expect = [&](const char* id, EntityClass cls) -> EntityIndex {
    auto i = m.find(id);
    if (!i) {
      report.problems.push_back(std::string("missing ") + std::string(to_string(cls)) + " " + id);
      return kNoEntity;
    }
    if (m.entities[*i].cls != cls) {
      report.problems.push_back(std::string(id) + " is not a " + std::string(to_string(cls)));
      return kNoEntity;
    }
    return *i;
  };

  for (const char* s : {"Outer", "P1", "P2", "P3", "P4"}) expect(s, EntityClass::Space);
  for (const char* d : {"T1", "T2", "D1", "FW1", "FW2", "R", "SW", "S1", "S2"}) expect(d, EntityClass::Device);
  for (const char* v : {"T2_manager", "FW1_manager", "FW2_manager", "S1_web", "S2_web"})
    expect(v, EntityClass::Service);

  // Is `info` stored somewhere whose storage device matches `device`?
  auto stored_on = [&](const char* info, EntityIndex device) {
    auto i = m.find(info);
    if (!i || device == kNoEntity) return false;
    for (auto h : m.holders_of(*i))
      if (m.storage_device(h) == device) return true;
    return false;
  };
  auto stored_in_service = [&](const char* info, const char* service) {
    auto i = m.find(info);
    auto s = m.find(service);
    if (!i || !s) return false;
    for (auto h : m.holders_of(*i)) {
      for (EntityIndex cur = h; cur != kNoEntity; cur = m.entities[cur].host)
        if (cur == *s) return true;
    }
    return false;
  };

  auto fw1_pw = m.find("FW1_password");
  bool fw1_in_p2 = false;
  auto p2 = m.find("P2");
  if (fw1_pw && p2)
    for (auto h : m.holders_of(*fw1_pw)) {
      auto dev = m.storage_device(h);
      if (dev != kNoEntity && m.entities[dev].location == *p2) fw1_in_p2 = true;
    }
  if (!fw1_in_p2) report.problems.push_back("FW1_password not obtainable in P2");

  auto t2 = m.find("T2");
  if (!stored_on("FW2_password", t2.value_or(kNoEntity))) report.problems.push_back("FW2_password not stored on T2");
  if (!stored_on("S1_web_password", t2.value_or(kNoEntity)))
    report.problems.push_back("S1_web_password not stored on T2");
  if (!stored_in_service("S2_web_password", "S1_web"))
    report.problems.push_back("S2_web_password not stored on S1_web");

  auto s2 = m.find("S2");
  bool goal_ok = false;
  if (m.goal != kNoEntity && s2)
    for (auto h : m.holders_of(m.goal))
      if (m.storage_device(h) == *s2) goal_ok = true;
  if (!goal_ok) report.problems.push_back("goal information is not stored on S2");

  return report;
}

}  // namespace pathfinder
