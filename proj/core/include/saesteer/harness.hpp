#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "saesteer/domain.hpp"
#include "saesteer/toymodel.hpp"

namespace saesteer {

inline constexpr std::size_t kMaxTurns = 5;

struct Scenario {
  std::size_t id = 0;
  Domain domain = Domain::coding;
  TokenSequence prompt;
  std::array<TokenSequence, kToolCount> cached_responses;
  std::size_t max_turns = kMaxTurns;
  TraitIntensity disposition{};
};

// Per-trait disposition planted into every prompt position, drawn as
// mean + spread * N(0, 1) for each scenario.
struct ScenarioDistribution {
  TraitIntensity mean{-0.25, -0.25, -0.25, -0.25, -0.25};
  TraitIntensity spread{0.6, 0.6, 0.6, 0.6, 0.6};
  std::size_t prompt_min = 8;
  std::size_t prompt_max = 12;
  std::size_t response_length = 4;
};

// Domains are assigned round-robin, so 50 scenarios split 13/13/12/12.
std::vector<Scenario> make_scenarios(std::size_t count, std::uint64_t seed, std::size_t vocab_size,
                                     const ScenarioDistribution& dist = {});

struct ToolCall {
  Tool name = Tool::ask_user;
  std::size_t turn_index = 0;

  bool operator==(const ToolCall&) const = default;
};

enum class Termination : std::uint8_t { natural, turn_limit };
std::string_view termination_name(Termination t);
Termination parse_termination(std::string_view name);

struct Trajectory {
  std::size_t scenario_id = 0;
  std::string condition;
  std::vector<ToolCall> calls;
  std::size_t turns_used = 0;
  Termination terminated = Termination::natural;

  bool operator==(const Trajectory&) const = default;
};

struct ProxyVector {
  int autonomy = 1;
  std::size_t tool_count = 0;
  std::size_t persistence_turns = 0;
  double risk_fraction = 0.0;
  int deference = 0;

  // The proxy measuring a given trait.
  double value(Trait t) const;
  bool operator==(const ProxyVector&) const = default;
};

// Prefill on the prompt, then up to max_turns decode turns with at most one
// call each. Tool responses are appended before the next turn.
Trajectory run_rollout(const ToyModel& model, const Scenario& scenario,
                       const SteeringConfig* steering, std::uint64_t seed,
                       std::string condition = "baseline");

ProxyVector extract_proxies(const Trajectory& t);
std::size_t ask_user_count(const Trajectory& t);

struct RolloutResult {
  Trajectory trajectory;
  ProxyVector proxies;
};

// Rollout seeds are derive_seed(base_seed, scenario id). Results are in
// scenario-id order regardless of the worker count.
std::vector<RolloutResult> run_condition(const ToyModel& model, std::span<const Scenario> scenarios,
                                         const SteeringConfig* steering, std::uint64_t base_seed,
                                         const std::string& condition, std::size_t workers = 1);

struct ToolBreakdown {
  std::array<double, kToolCount> fraction{};
  std::size_t total_calls = 0;
};

ToolBreakdown tool_type_breakdown(std::span<const Trajectory> trajectories);
ToolBreakdown tool_type_breakdown(std::span<const RolloutResult> results);

double zero_tool_call_rate(std::span<const Trajectory> trajectories);
double zero_tool_call_rate(std::span<const RolloutResult> results);

}  // namespace saesteer
