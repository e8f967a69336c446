#include "saesteer/harness.hpp"

#include <algorithm>

#include "saesteer/error.hpp"
#include "saesteer/parallel.hpp"
#include "saesteer/rng.hpp"

namespace saesteer {

namespace {

TokenId general_token(SeededRng& rng, std::size_t vocab_size) {
  return vocab::first_general + static_cast<TokenId>(rng.below(vocab_size - vocab::first_general));
}

}  // namespace

std::vector<Scenario> make_scenarios(std::size_t count, std::uint64_t seed, std::size_t vocab_size,
                                     const ScenarioDistribution& dist) {
  if (vocab_size <= vocab::first_general) throw ArgumentError("vocabulary too small for scenarios");
  if (dist.prompt_min == 0 || dist.prompt_max < dist.prompt_min) {
    throw ArgumentError("bad scenario prompt length range");
  }
  std::vector<Scenario> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    SeededRng rng(derive_seed(derive_seed(seed, "scenario"), i));
    Scenario& s = out[i];
    s.id = i;
    s.domain = static_cast<Domain>(i % kDomainCount);
    for (std::size_t t = 0; t < kTraitCount; ++t) {
      s.disposition[t] = dist.mean[t] + dist.spread[t] * rng.normal();
    }
    const std::size_t len = dist.prompt_min + rng.below(dist.prompt_max - dist.prompt_min + 1);
    s.prompt.push_back({vocab::bos, s.disposition});
    s.prompt.push_back({vocab::domain_token(s.domain), s.disposition});
    for (std::size_t k = 0; k < len; ++k) s.prompt.push_back({general_token(rng, vocab_size), s.disposition});
    for (Tool tool : kAllTools) {
      TokenSequence& resp = s.cached_responses[tool_index(tool)];
      resp.push_back({vocab::tool_token(tool), {}});
      for (std::size_t k = 0; k < dist.response_length; ++k) {
        resp.push_back({general_token(rng, vocab_size), {}});
      }
    }
  }
  return out;
}

std::string_view termination_name(Termination t) {
  return t == Termination::natural ? "natural" : "turn_limit";
}

Termination parse_termination(std::string_view name) {
  if (name == "natural") return Termination::natural;
  if (name == "turn_limit") return Termination::turn_limit;
  throw ArgumentError("unknown termination '" + std::string(name) + "'");
}

double ProxyVector::value(Trait t) const {
  switch (t) {
    case Trait::autonomy: return autonomy;
    case Trait::tool_use: return static_cast<double>(tool_count);
    case Trait::persistence: return static_cast<double>(persistence_turns);
    case Trait::risk_calibration: return risk_fraction;
    case Trait::deference: return deference;
  }
  return 0.0;
}

Trajectory run_rollout(const ToyModel& model, const Scenario& scenario,
                       const SteeringConfig* steering, std::uint64_t seed, std::string condition) {
  if (scenario.max_turns == 0 || scenario.max_turns > kMaxTurns) {
    throw ArgumentError("scenario max_turns must be in [1, 5]");
  }
  Trajectory traj;
  traj.scenario_id = scenario.id;
  traj.condition = std::move(condition);
  PrefillResult pre = forward_prefill(model, scenario.prompt, steering);
  ModelState& state = pre.state;
  SeededRng rng(seed);
  traj.terminated = Termination::turn_limit;
  traj.turns_used = scenario.max_turns;
  for (std::size_t turn = 0; turn < scenario.max_turns; ++turn) {
    const PolicyEvent event =
        forward_decode_step(model, state, Token{vocab::turn_start, {}}, steering, rng);
    if (!event) {
      traj.turns_used = turn + 1;
      traj.terminated = Termination::natural;
      break;
    }
    traj.calls.push_back({*event, turn});
    if (turn + 1 < scenario.max_turns) {
      append_context(model, state, scenario.cached_responses[tool_index(*event)], steering);
    }
  }
  return traj;
}

std::size_t ask_user_count(const Trajectory& t) {
  return static_cast<std::size_t>(std::count_if(
      t.calls.begin(), t.calls.end(), [](const ToolCall& c) { return c.name == Tool::ask_user; }));
}

ProxyVector extract_proxies(const Trajectory& t) {
  ProxyVector p;
  const std::size_t asks = ask_user_count(t);
  std::size_t risky = 0;
  for (const ToolCall& c : t.calls) {
    if (c.name == Tool::code_execute || c.name == Tool::file_write) ++risky;
  }
  p.deference = asks > 0 ? 1 : 0;
  p.autonomy = 1 - p.deference;
  p.tool_count = t.calls.size() - asks;
  p.persistence_turns = t.turns_used;
  p.risk_fraction = t.calls.empty() ? 0.0
                                    : static_cast<double>(risky) / static_cast<double>(t.calls.size());
  return p;
}

std::vector<RolloutResult> run_condition(const ToyModel& model, std::span<const Scenario> scenarios,
                                         const SteeringConfig* steering, std::uint64_t base_seed,
                                         const std::string& condition, std::size_t workers) {
  if (scenarios.empty()) throw ArgumentError("run_condition needs at least one scenario");
  std::vector<std::size_t> order(scenarios.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scenarios[a].id < scenarios[b].id;
  });
  std::vector<RolloutResult> results(scenarios.size());
  parallel_for(scenarios.size(), workers, [&](std::size_t i) {
    const Scenario& s = scenarios[order[i]];
    Trajectory t = run_rollout(model, s, steering, derive_seed(base_seed, s.id), condition);
    ProxyVector p = extract_proxies(t);
    results[i] = {std::move(t), p};
  });
  return results;
}

ToolBreakdown tool_type_breakdown(std::span<const Trajectory> trajectories) {
  ToolBreakdown b;
  std::array<std::size_t, kToolCount> counts{};
  for (const Trajectory& t : trajectories) {
    for (const ToolCall& c : t.calls) ++counts[tool_index(c.name)];
  }
  for (std::size_t c : counts) b.total_calls += c;
  if (b.total_calls > 0) {
    for (std::size_t i = 0; i < kToolCount; ++i) {
      b.fraction[i] = static_cast<double>(counts[i]) / static_cast<double>(b.total_calls);
    }
  }
  return b;
}

ToolBreakdown tool_type_breakdown(std::span<const RolloutResult> results) {
  std::vector<Trajectory> t;
  t.reserve(results.size());
  for (const auto& r : results) t.push_back(r.trajectory);
  return tool_type_breakdown(t);
}

double zero_tool_call_rate(std::span<const Trajectory> trajectories) {
  if (trajectories.empty()) return 0.0;
  const auto zero = std::count_if(trajectories.begin(), trajectories.end(),
                                  [](const Trajectory& t) { return t.calls.empty(); });
  return static_cast<double>(zero) / static_cast<double>(trajectories.size());
}

double zero_tool_call_rate(std::span<const RolloutResult> results) {
  if (results.empty()) return 0.0;
  const auto zero = std::count_if(results.begin(), results.end(),
                                  [](const RolloutResult& r) { return r.trajectory.calls.empty(); });
  return static_cast<double>(zero) / static_cast<double>(results.size());
}

}  // namespace saesteer
