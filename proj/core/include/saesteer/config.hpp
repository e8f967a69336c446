#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "saesteer/contrastive.hpp"
#include "saesteer/domain.hpp"
#include "saesteer/harness.hpp"
#include "saesteer/probe.hpp"
#include "saesteer/sae.hpp"
#include "saesteer/stats.hpp"
#include "saesteer/toymodel.hpp"

namespace saesteer {

// Tiers are assigned on d(pro) of a trait's best condition. Tiers 1 and 2
// also require the Mann-Whitney p to pass the Bonferroni threshold; tier 3
// only requires p below tier3_p.
struct TierThresholds {
  double tier1_d = 0.8;
  double tier2_d = 0.5;
  double tier3_d = 0.3;
  double tier3_p = 0.05;
};

struct RunConfig {
  std::uint64_t seed = 1;
  std::size_t workers = 1;
  std::filesystem::path output_dir = "results";

  ToyModelConfig model = default_model_config();
  std::vector<HookPoint> hooks = default_hooks();
  // Base SAE settings, then the resolved per-hook configs (same order as
  // hooks). Per-hook seeds are derived from the run seed unless given.
  SaeConfig sae;
  std::vector<SaeConfig> sae_per_hook;
  std::size_t sae_log_every = 100;
  CorpusOptions corpus;

  PairCounts pairs;
  std::vector<double> lambda_grid = default_lambda_grid();
  double holdout_fraction = 0.2;

  std::vector<Trait> traits{kAllTraits.begin(), kAllTraits.end()};
  std::vector<double> multipliers{1.0, 2.0, 3.0, 5.0, 10.0};
  std::vector<SteeringMode> modes{SteeringMode::all_positions, SteeringMode::prefill_only,
                                  SteeringMode::decode_only};
  std::size_t scenario_count = 50;
  ScenarioDistribution scenarios;
  // false: every condition replays the baseline's per-scenario seeds.
  bool independent_rollout_seeds = false;

  double alpha = 0.05;
  std::size_t bonferroni_m = kDefaultBonferroniM;
  std::size_t bootstrap_resamples = 10000;
  TierThresholds tiers;
  DoseResponseThresholds dose;
  // Multipliers searched for each trait's best condition in the main table.
  std::vector<double> table_multipliers{1.0, 2.0, 3.0};
  double cross_trait_multiplier = 2.0;
  SteeringMode cross_trait_mode = SteeringMode::all_positions;

  // Explicit per-stage seeds from the [seeds] section.
  std::map<std::string, std::uint64_t, std::less<>> seed_overrides;

  // derive_seed(seed, stage) unless overridden.
  std::uint64_t seed_for(std::string_view stage) const;
  const SaeConfig& sae_for(const HookPoint& hook) const;
  double bonferroni() const { return bonferroni_threshold(alpha, bonferroni_m); }

  // Rebuilds sae_per_hook from sae and hooks (dropping overrides).
  void resolve_sae_configs();
  // Throws ConfigError.
  void validate() const;

  static ToyModelConfig default_model_config();
  static std::vector<HookPoint> default_hooks();
};

inline constexpr std::string_view kSeedStages[] = {"model",  "corpus",    "sae",      "pairs",
                                                   "probe",  "scenarios", "rollouts", "bootstrap"};

// Command-line values that replace [run] keys before anything is derived
// from them.
struct ConfigOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::optional<std::filesystem::path> output_dir;
};

RunConfig default_run_config(const ConfigOverrides& overrides = {});

// Parses the INI format documented in docs/config.md. Unknown sections or
// keys and malformed values throw ConfigError.
RunConfig parse_run_config(std::string_view text, const ConfigOverrides& overrides = {});
// Throws IoError when the file cannot be read.
RunConfig load_run_config(const std::filesystem::path& path, const ConfigOverrides& overrides = {});

// Canonical INI rendering; parse_run_config(render_run_config(c)) == c for
// every field the format covers. The output directory and worker count are
// omitted because they never change results.
std::string render_run_config(const RunConfig& config);

// The subset of the rendered config that one stage depends on, used for
// cache keys.
std::string config_section_text(const RunConfig& config, std::string_view section);

}  // namespace saesteer
