#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "saesteer/config.hpp"
#include "saesteer/harness.hpp"
#include "saesteer/records.hpp"
#include "saesteer/stats.hpp"
#include "saesteer/steering_vector.hpp"

namespace saesteer {

// Everything a report is computed from. All of it lives on disk.
struct ReportInputs {
  RunConfig config;
  std::vector<RolloutResult> rollouts;
  std::vector<ProbeRecord> probes;
  std::vector<SteeringVector> vectors;
};

// Paths relative to the results directory.
inline constexpr std::string_view kRunConfigFile = "run_config.ini";
inline constexpr std::string_view kProbesFile = "probes/probes.jsonl";
inline constexpr std::string_view kTrajectoriesFile = "trajectories/trajectories.jsonl";
std::filesystem::path vector_file(Trait trait);  // "vectors/<trait>.qstv"

// Throws IoError listing every expected file that is missing.
ReportInputs load_report_inputs(const std::filesystem::path& results_dir);

struct GroupMeans {
  double ask = 0.0;
  double pro = 0.0;
  double zero_tc = 0.0;
  // Mean of each trait's proxy, in Trait order.
  std::array<double, kTraitCount> proxies{};
};

struct ConditionAnalysis {
  ConditionKey key;
  ConditionSummary summary;
  GroupMeans means;
  ToolBreakdown tools;
};

struct MainRow {
  Trait trait = Trait::autonomy;
  std::string sae;
  std::size_t layer = 0;
  double r2 = 0.0;
  std::optional<ConditionKey> best;
  EffectReport d_ask;
  EffectReport d_pro;
  double zero_tc = 0.0;
  std::string tier;
};

struct RunAnalysis {
  GroupMeans baseline;
  ToolBreakdown baseline_tools;
  std::size_t baseline_n = 0;
  std::vector<ConditionAnalysis> conditions;  // config order: trait, mode, multiplier
  std::vector<MainRow> main;
  // Present when every trait was run at the cross-trait (multiplier, mode).
  std::optional<CrossTraitMatrix> cross;
};

// d(ask) and d(pro) of one steered group against the baseline, with
// Mann-Whitney p values and bootstrap intervals.
ConditionSummary summarize_condition(const ConditionKey& key, std::span<const RolloutResult> steered,
                                     std::span<const RolloutResult> baseline,
                                     const BootstrapOptions* bootstrap);

ProxySamples proxy_samples(std::span<const RolloutResult> results);
std::vector<double> pro_samples(std::span<const RolloutResult> results);
std::vector<double> ask_samples(std::span<const RolloutResult> results);

// "1", "2", "3" or "fail".
std::string assign_tier(const EffectReport& d_pro, const TierThresholds& tiers, double bonferroni);

RunAnalysis analyze_run(const ReportInputs& inputs);

struct ReportFile {
  std::string path;  // relative to the results directory
  std::string content;
};

std::vector<ReportFile> render_report(const ReportInputs& inputs);
void write_report(const std::filesystem::path& results_dir, std::span<const ReportFile> files);

// Formatting shared by the tables.
std::string format_signed(double x, int decimals = 2);
std::string format_p(double p);
std::string format_percent(double fraction);
std::string significance_stars(double p);
std::string condition_display(const ConditionKey& key);  // "all, α=3"

}  // namespace saesteer
