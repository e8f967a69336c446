#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "saesteer/contrastive.hpp"
#include "saesteer/domain.hpp"
#include "saesteer/harness.hpp"
#include "saesteer/probe.hpp"
#include "saesteer/sae.hpp"
#include "saesteer/toymodel.hpp"

namespace saesteer {

// Line-delimited JSON records. Every reader throws IoError naming the file
// and line of the first malformed record.

// Condition labels: "baseline" or "<trait>/<mode>/<multiplier>", e.g.
// "autonomy/prefill/2".
struct ConditionKey {
  Trait trait = Trait::autonomy;
  SteeringMode mode = SteeringMode::all_positions;
  double multiplier = 0.0;

  bool operator==(const ConditionKey&) const = default;
};

inline constexpr std::string_view kBaselineCondition = "baseline";

std::string condition_label(const ConditionKey& key);
// nullopt for the baseline. Throws ArgumentError for anything else.
std::optional<ConditionKey> parse_condition_label(std::string_view label);
// Shortest decimal that round-trips, e.g. "2" or "0.5".
std::string format_multiplier(double multiplier);

std::string to_jsonl(const ContrastivePair& pair);
std::string to_jsonl(const RolloutResult& result);
std::string to_jsonl(const TrainStats& stats);

void write_pairs(const std::filesystem::path& path, std::span<const ContrastivePair> pairs);
std::vector<ContrastivePair> read_pairs(const std::filesystem::path& path);

// Proxies are recomputed from the trajectory on read; a stored proxy that
// disagrees is reported as a malformed record.
void write_trajectories(const std::filesystem::path& path, std::span<const RolloutResult> results);
std::vector<RolloutResult> read_trajectories(const std::filesystem::path& path);

void write_training_log(const std::filesystem::path& path, std::span<const TrainStats> log);
std::vector<TrainStats> read_training_log(const std::filesystem::path& path);

struct TasRecord {
  Trait trait = Trait::autonomy;
  HookPoint hook;
  std::string sae_id;
  double mean_abs_tas = 0.0;
  bool selected = false;
  // Largest |TAS| features, descending.
  std::vector<std::pair<std::size_t, double>> top_features;
};

void write_tas(const std::filesystem::path& path, std::span<const TasRecord> records);
std::vector<TasRecord> read_tas(const std::filesystem::path& path);

struct ProbeRecord {
  Trait trait = Trait::autonomy;
  HookPoint hook;
  std::string sae_id;
  RidgeProbe probe;
  std::vector<LambdaScore> scores;
};

void write_probes(const std::filesystem::path& path, std::span<const ProbeRecord> records);
std::vector<ProbeRecord> read_probes(const std::filesystem::path& path);

// Checkpoint identity: "sae_<hook label>@<fnv1a hex of the file bytes>".
std::string sae_id(const HookPoint& hook, std::span<const std::uint8_t> checkpoint_bytes);
// The "sae_<hook label>" part of an id.
std::string sae_display_name(std::string_view id);

}  // namespace saesteer
