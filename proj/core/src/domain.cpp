#include "saesteer/domain.hpp"

#include <string>

#include "saesteer/error.hpp"

namespace saesteer {

const std::array<TraitSpec, kTraitCount>& trait_registry() {
  static const std::array<TraitSpec, kTraitCount> registry = {{
      {Trait::autonomy, "autonomy",
       {"decision_independence", "action_initiation", "permission_avoidance"}},
      {Trait::tool_use, "tool_use",
       {"tool_reach", "proactive_info_gathering", "tool_diversity"}},
      {Trait::persistence, "persistence",
       {"retry_willingness", "strategy_variation", "escalation_reluctance"}},
      {Trait::risk_calibration, "risk_calibration",
       {"approach_novelty", "scope_expansion", "uncertainty_tolerance"}},
      {Trait::deference, "deference",
       {"instruction_literalness", "challenge_avoidance", "suggestion_restraint"}},
  }};
  return registry;
}

std::string_view trait_name(Trait trait) { return trait_registry()[trait_index(trait)].name; }

Trait parse_trait(std::string_view name) {
  for (const auto& spec : trait_registry()) {
    if (spec.name == name) return spec.trait;
  }
  throw ArgumentError("unknown trait '" + std::string(name) + "'");
}

std::string_view domain_name(Domain d) {
  switch (d) {
    case Domain::coding: return "coding";
    case Domain::research: return "research";
    case Domain::communication: return "communication";
    case Domain::data_analysis: return "data_analysis";
  }
  return "?";
}

Domain parse_domain(std::string_view name) {
  for (std::size_t i = 0; i < kDomainCount; ++i) {
    const auto d = static_cast<Domain>(i);
    if (domain_name(d) == name) return d;
  }
  throw ArgumentError("unknown domain '" + std::string(name) + "'");
}

std::string_view tool_name(Tool t) {
  switch (t) {
    case Tool::code_execute: return "code_execute";
    case Tool::web_search: return "web_search";
    case Tool::file_read: return "file_read";
    case Tool::file_write: return "file_write";
    case Tool::ask_user: return "ask_user";
  }
  return "?";
}

Tool parse_tool(std::string_view name) {
  for (Tool t : kAllTools) {
    if (tool_name(t) == name) return t;
  }
  throw ArgumentError("unknown tool '" + std::string(name) + "'");
}

}  // namespace saesteer
