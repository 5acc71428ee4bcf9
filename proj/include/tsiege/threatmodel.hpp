#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace tsiege {

enum class ComponentKind { Sensor, Controller, Bus, Firmware, Inverter, Battery, UpdateChannel };

enum class StrideCategory {
  Spoofing,
  Tampering,
  Repudiation,
  InformationDisclosure,
  DenialOfService,
  ElevationOfPrivilege
};

struct UnknownKind : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline const char* to_string(ComponentKind k) {
  switch (k) {
    case ComponentKind::Sensor: return "sensor";
    case ComponentKind::Controller: return "controller";
    case ComponentKind::Bus: return "bus";
    case ComponentKind::Firmware: return "firmware";
    case ComponentKind::Inverter: return "inverter";
    case ComponentKind::Battery: return "battery";
    case ComponentKind::UpdateChannel: return "update_channel";
  }
  return "?";
}

inline ComponentKind component_kind_from(const std::string& s) {
  if (s == "sensor") return ComponentKind::Sensor;
  if (s == "controller") return ComponentKind::Controller;
  if (s == "bus") return ComponentKind::Bus;
  if (s == "firmware") return ComponentKind::Firmware;
  if (s == "inverter") return ComponentKind::Inverter;
  if (s == "battery") return ComponentKind::Battery;
  if (s == "update_channel") return ComponentKind::UpdateChannel;
  throw UnknownKind("unknown component kind: " + s);
}

inline const char* to_string(StrideCategory c) {
  switch (c) {
    case StrideCategory::Spoofing: return "Spoofing";
    case StrideCategory::Tampering: return "Tampering";
    case StrideCategory::Repudiation: return "Repudiation";
    case StrideCategory::InformationDisclosure: return "Information Disclosure";
    case StrideCategory::DenialOfService: return "Denial of Service";
    case StrideCategory::ElevationOfPrivilege: return "Elevation of Privilege";
  }
  return "?";
}

inline StrideCategory stride_category_from(const std::string& s) {
  if (s == "Spoofing") return StrideCategory::Spoofing;
  if (s == "Tampering") return StrideCategory::Tampering;
  if (s == "Repudiation") return StrideCategory::Repudiation;
  if (s == "Information Disclosure") return StrideCategory::InformationDisclosure;
  if (s == "Denial of Service") return StrideCategory::DenialOfService;
  if (s == "Elevation of Privilege") return StrideCategory::ElevationOfPrivilege;
  throw std::runtime_error("unknown STRIDE category: " + s);
}

struct ArchComponent {
  std::string name;
  ComponentKind kind = ComponentKind::Sensor;
  std::vector<std::string> links;
};

struct Architecture {
  std::vector<ArchComponent> components;
};

// Links must reference declared components and the graph must be connected.
inline void validate_architecture(const Architecture& arch) {
  if (arch.components.empty()) return;
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < arch.components.size(); ++i) {
    if (!index.emplace(arch.components[i].name, i).second)
      throw std::runtime_error("duplicate component name: " + arch.components[i].name);
  }
  std::map<std::size_t, std::set<std::size_t>> adj;
  for (std::size_t i = 0; i < arch.components.size(); ++i) {
    for (const std::string& l : arch.components[i].links) {
      auto it = index.find(l);
      if (it == index.end())
        throw std::runtime_error("link to unknown component: " + l);
      adj[i].insert(it->second);
      adj[it->second].insert(i);
    }
  }
  std::set<std::size_t> seen{0};
  std::vector<std::size_t> stack{0};
  while (!stack.empty()) {
    const std::size_t c = stack.back();
    stack.pop_back();
    for (std::size_t n : adj[c]) {
      if (seen.insert(n).second) stack.push_back(n);
    }
  }
  if (seen.size() != arch.components.size())
    throw std::runtime_error("architecture graph is not connected");
}

// The mapping table is data, not code: each rule pairs a component kind with
// a STRIDE category, an impact description and whether this simulator covers
// the vector.
struct ThreatRule {
  ComponentKind kind = ComponentKind::Sensor;
  StrideCategory category = StrideCategory::Spoofing;
  std::string impact;
  bool simulated = false;
};

struct ThreatEntry {
  StrideCategory category = StrideCategory::Spoofing;
  std::string target;
  std::string impact;
  bool simulated = false;
};

// Output order: component declaration order, then STRIDE enum order.
inline std::vector<ThreatEntry> enumerate_threats(const Architecture& arch,
                                                  const std::vector<ThreatRule>& rules) {
  validate_architecture(arch);
  std::vector<ThreatEntry> out;
  for (const ArchComponent& c : arch.components) {
    std::vector<ThreatEntry> mine;
    for (const ThreatRule& r : rules) {
      if (r.kind == c.kind) mine.push_back(ThreatEntry{r.category, c.name, r.impact, r.simulated});
    }
    std::stable_sort(mine.begin(), mine.end(), [](const ThreatEntry& a, const ThreatEntry& b) {
      return static_cast<int>(a.category) < static_cast<int>(b.category);
    });
    out.insert(out.end(), mine.begin(), mine.end());
  }
  return out;
}

// --- JSON / text interchange -------------------------------------------------

inline Architecture architecture_from_json(const nlohmann::json& j) {
  Architecture arch;
  for (const auto& jc : j.at("components")) {
    ArchComponent c;
    c.name = jc.at("name").get<std::string>();
    c.kind = component_kind_from(jc.at("kind").get<std::string>());
    if (jc.contains("links")) {
      for (const auto& l : jc.at("links")) c.links.push_back(l.get<std::string>());
    }
    arch.components.push_back(std::move(c));
  }
  return arch;
}

inline std::vector<ThreatRule> threat_rules_from_json(const nlohmann::json& j) {
  std::vector<ThreatRule> rules;
  for (const auto& jr : j.at("rules")) {
    ThreatRule r;
    r.kind = component_kind_from(jr.at("kind").get<std::string>());
    r.category = stride_category_from(jr.at("category").get<std::string>());
    r.impact = jr.at("impact").get<std::string>();
    r.simulated = jr.at("simulated").get<bool>();
    rules.push_back(std::move(r));
  }
  return rules;
}

inline nlohmann::json threats_to_json(const std::vector<ThreatEntry>& entries) {
  nlohmann::json out = nlohmann::json::array();
  for (const ThreatEntry& e : entries) {
    out.push_back({{"category", to_string(e.category)},
                   {"target", e.target},
                   {"impact", e.impact},
                   {"simulated", e.simulated}});
  }
  return out;
}

inline std::string threats_to_text(const std::vector<ThreatEntry>& entries) {
  const std::string headers[4] = {"STRIDE Category", "Target Component", "Impact Scenario",
                                  "Simulated"};
  std::size_t width[4] = {headers[0].size(), headers[1].size(), headers[2].size(),
                          headers[3].size()};
  for (const ThreatEntry& e : entries) {
    width[0] = std::max(width[0], std::string(to_string(e.category)).size());
    width[1] = std::max(width[1], e.target.size());
    width[2] = std::max(width[2], e.impact.size());
  }
  auto pad = [](const std::string& s, std::size_t w) {
    return s + std::string(w - s.size(), ' ');
  };
  std::string out;
  out += pad(headers[0], width[0]) + "  " + pad(headers[1], width[1]) + "  " +
         pad(headers[2], width[2]) + "  " + headers[3] + "\n";
  for (std::size_t i = 0; i < 4; ++i) {
    out += std::string(width[i], '-');
    out += (i + 1 < 4) ? "  " : "\n";
  }
  for (const ThreatEntry& e : entries) {
    out += pad(to_string(e.category), width[0]) + "  " + pad(e.target, width[1]) + "  " +
           pad(e.impact, width[2]) + "  " + (e.simulated ? "yes" : "no") + "\n";
  }
  return out;
}

}  // namespace tsiege
