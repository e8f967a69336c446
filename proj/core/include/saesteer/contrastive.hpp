#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "saesteer/domain.hpp"
#include "saesteer/numerics.hpp"
#include "saesteer/rng.hpp"
#include "saesteer/toymodel.hpp"

namespace saesteer {

enum class PairKind : std::uint8_t { composite, sub_behavior };

struct ContrastivePair {
  Trait trait = Trait::autonomy;
  TokenSequence high;
  TokenSequence low;
  std::size_t template_id = 0;
  std::size_t variation_id = 0;
  Domain domain = Domain::coding;
  PairKind kind = PairKind::composite;
  std::optional<std::size_t> sub_behavior;

  bool operator==(const ContrastivePair&) const = default;
};

struct PairCounts {
  std::size_t templates = 10;
  std::size_t variations = 4;
  std::size_t domains = 4;
  // Sub-behavior pairs per trait: sub_templates x sub_variations x 3.
  std::size_t sub_templates = 12;
  std::size_t sub_variations = 4;
  // Spread of the shared, non-target trait intensities.
  double background_spread = 0.0;

  // Throws ArgumentError.
  void validate() const;
  std::size_t per_trait() const {
    return templates * variations * domains + sub_templates * sub_variations * 3;
  }
};

// HIGH and LOW share every token and every non-target intensity; the target
// trait carries +1 in HIGH and -1 in LOW at every position.
std::vector<ContrastivePair> generate_pairs(Trait trait, const PairCounts& counts, SeededRng& rng,
                                            std::size_t vocab_size);

// All traits in order, each from its own derived stream.
std::vector<ContrastivePair> generate_pair_set(std::span<const Trait> traits,
                                               const PairCounts& counts, std::uint64_t seed,
                                               std::size_t vocab_size);

struct PooledActivationPair {
  HookPoint hook;
  Vector x_high;
  Vector x_low;
};

// Last-position residual at each hook for both polarities.
std::vector<PooledActivationPair> harvest(const ToyModel& model, const ContrastivePair& pair,
                                          std::span<const HookPoint> hooks);

struct TasResult {
  HookPoint hook;
  Vector tas;
  double mean_abs_tas = 0.0;
};

inline constexpr double kTasMinStd = 1e-9;

// Per-feature (mean(high) - mean(low)) / sample std of paired differences.
TasResult compute_tas(std::span<const Vector> z_high, std::span<const Vector> z_low);

// Random filler sequences for SAE training. Each trait is active in a
// sequence with active_probability, with a random sign and a magnitude in
// [min_magnitude, max_magnitude]; the intensity holds at every position.
struct CorpusOptions {
  std::size_t sequences = 2000;
  std::size_t length = 12;
  double active_probability = 0.3;
  double min_magnitude = 0.5;
  double max_magnitude = 1.5;

  void validate() const;
};

// Residuals at every position of every corpus sequence, one array per hook.
std::vector<std::vector<Vector>> harvest_corpus(const ToyModel& model,
                                                std::span<const HookPoint> hooks,
                                                const CorpusOptions& options, std::uint64_t seed,
                                                std::size_t workers = 1);

// Highest mean |TAS|; ties go to the lowest layer index.
HookPoint select_best_sae(std::span<const TasResult> results);

}  // namespace saesteer
