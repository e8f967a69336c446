#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string_view>

namespace saesteer {

enum class Trait : std::uint8_t { autonomy, tool_use, persistence, risk_calibration, deference };

inline constexpr std::size_t kTraitCount = 5;
inline constexpr std::array<Trait, kTraitCount> kAllTraits = {
    Trait::autonomy, Trait::tool_use, Trait::persistence, Trait::risk_calibration,
    Trait::deference};

struct TraitSpec {
  Trait trait;
  std::string_view name;
  std::array<std::string_view, 3> sub_behaviors;
};

const std::array<TraitSpec, kTraitCount>& trait_registry();
std::string_view trait_name(Trait trait);
// Throws ArgumentError for an unknown name.
Trait parse_trait(std::string_view name);
constexpr std::size_t trait_index(Trait t) { return static_cast<std::size_t>(t); }

// Per-trait planted intensity carried by a token.
using TraitIntensity = std::array<double, kTraitCount>;

enum class Domain : std::uint8_t { coding, research, communication, data_analysis };
inline constexpr std::size_t kDomainCount = 4;
std::string_view domain_name(Domain d);
Domain parse_domain(std::string_view name);

enum class Tool : std::uint8_t { code_execute, web_search, file_read, file_write, ask_user };
inline constexpr std::size_t kToolCount = 5;
inline constexpr std::array<Tool, kToolCount> kAllTools = {
    Tool::code_execute, Tool::web_search, Tool::file_read, Tool::file_write, Tool::ask_user};
std::string_view tool_name(Tool t);
Tool parse_tool(std::string_view name);
constexpr std::size_t tool_index(Tool t) { return static_cast<std::size_t>(t); }

}  // namespace saesteer
