#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "saesteer/domain.hpp"
#include "saesteer/numerics.hpp"
#include "saesteer/rng.hpp"
#include "saesteer/steering_vector.hpp"

namespace saesteer {

enum class SublayerKind : std::uint8_t { delta, attention };

struct HookPoint {
  std::size_t layer_index = 0;
  SublayerKind kind = SublayerKind::delta;

  auto operator<=>(const HookPoint&) const = default;
};

// "delta_L9", "attn_L11"
std::string hook_label(const HookPoint& hook);
// Inverse of hook_label. Throws ArgumentError.
HookPoint parse_hook_label(std::string_view label);

using TokenId = std::uint32_t;

struct Token {
  TokenId id = 0;
  TraitIntensity intensity{};

  bool operator==(const Token&) const = default;
};

using TokenSequence = std::vector<Token>;

// Reserved token ids. Everything from first_general up to vocab_size is
// free filler used by templates, prompts and tool responses.
namespace vocab {
inline constexpr TokenId bos = 0;
inline constexpr TokenId turn_start = 1;
inline constexpr TokenId no_call = 2;
inline constexpr TokenId tool_base = 3;
inline constexpr TokenId trait_marker_base = tool_base + kToolCount;
inline constexpr TokenId domain_base = trait_marker_base + kTraitCount;
inline constexpr TokenId sub_behavior_base = domain_base + kDomainCount;
inline constexpr TokenId first_general = sub_behavior_base + 3 * kTraitCount;

constexpr TokenId tool_token(Tool t) { return tool_base + static_cast<TokenId>(tool_index(t)); }
constexpr TokenId trait_marker(Trait t) {
  return trait_marker_base + static_cast<TokenId>(trait_index(t));
}
constexpr TokenId domain_token(Domain d) { return domain_base + static_cast<TokenId>(d); }
constexpr TokenId sub_behavior_token(Trait t, std::size_t sub) {
  return sub_behavior_base + static_cast<TokenId>(3 * trait_index(t) + sub);
}
}  // namespace vocab

// Coordinates of a residual inside the planted subspace: the agency axis
// followed by the five trait-specific axes in Trait order.
inline constexpr std::size_t kPlantedDims = 1 + kTraitCount;
using PlantedCoords = std::array<double, kPlantedDims>;

struct PlantedTraits {
  Vector g_agency;
  std::array<Vector, kTraitCount> g_specific;
  double mix_weight = 0.8;
  std::size_t injection_layer = 0;

  // sqrt(rho) * g_agency + sqrt(1 - rho) * g_specific[t]
  Vector effective_direction(Trait t) const;
  // Sum over traits of intensity[t] * effective_direction(t).
  Vector offset(const TraitIntensity& intensity) const;
  PlantedCoords coordinates(std::span<const double> x) const;
  // x minus its component inside the planted subspace.
  Vector project_out(std::span<const double> x) const;
};

// Outcome order used by the readout: stop, then tools in Tool order.
inline constexpr std::size_t kOutcomeCount = 1 + kToolCount;

struct PolicyReadout {
  std::array<double, kOutcomeCount> bias{};
  // gain[outcome][coordinate], coordinates as in PlantedCoords.
  std::array<std::array<double, kPlantedDims>, kOutcomeCount> gain{};
  // Adds collapse_gain * max(0, |coords| - collapse_radius)^2 to the stop logit.
  double collapse_radius = 0.0;
  double collapse_gain = 0.0;
};

PolicyReadout default_policy_readout();

struct ToyModelConfig {
  std::size_t n_blocks = 2;
  std::size_t hidden_dim = 32;
  std::size_t vocab_size = 96;
  std::uint64_t seed = 0;
  double mix_weight = 0.8;
  std::size_t injection_layer = 0;
  double embedding_scale = 0.5;
  double output_scale = 0.15;
  PolicyReadout policy = default_policy_readout();

  // Throws ConfigError.
  void validate() const;
  std::size_t n_layers() const { return 4 * n_blocks; }
};

struct DeltaLayerParams {
  DenseMatrix w_q, w_k, w_v, w_o;
  Vector w_gate;
  double b_gate = 0.0;
  Vector w_beta;
  double b_beta = 0.0;
};

struct AttentionLayerParams {
  DenseMatrix w_q, w_k, w_v, w_o;
};

struct DeltaLayerState {
  DenseMatrix s;
};

struct DeltaStepResult {
  Vector output;
  DeltaLayerState state;
};

// S_t = g S_{t-1} (I - beta k k^T) + beta v k^T, output S_t q. The input is
// taken as given (the model normalizes before calling). Throws NumericError
// if the new state is not finite.
DeltaStepResult delta_layer_step(const DeltaLayerState& state, std::span<const double> x_t,
                                 const DeltaLayerParams& params);
void delta_layer_step_in_place(DeltaLayerState& state, std::span<const double> x_t,
                               const DeltaLayerParams& params, Vector& output);

// Single-head causal softmax attention; output t is the attention-weighted
// mean of value projections over positions <= t.
std::vector<Vector> attention_layer(std::span<const Vector> x_seq,
                                    const AttentionLayerParams& params);

struct AttentionCache {
  std::vector<Vector> keys;
  std::vector<Vector> values;
};

enum class SteeringMode : std::uint8_t { all_positions, prefill_only, decode_only };

std::string_view steering_mode_name(SteeringMode mode);  // "all", "prefill", "decode"
SteeringMode parse_steering_mode(std::string_view name);

struct SteeringConfig {
  SteeringVector vector;
  double multiplier = 0.0;
  SteeringMode mode = SteeringMode::all_positions;
};

struct BehaviorCommitment {
  double agency_score = 0.0;
  std::array<double, kToolCount> tool_logits{};
  double stop_logit = 0.0;
  PlantedCoords coords{};
};

class ToyModel {
 public:
  explicit ToyModel(ToyModelConfig config);

  const ToyModelConfig& config() const noexcept { return config_; }
  const PlantedTraits& planted() const noexcept { return planted_; }
  std::size_t dim() const noexcept { return config_.hidden_dim; }
  std::size_t n_layers() const noexcept { return layers_.size(); }
  SublayerKind layer_kind(std::size_t layer) const;
  HookPoint hook_at(std::size_t layer) const { return {layer, layer_kind(layer)}; }
  std::vector<HookPoint> all_hooks() const;

  const DeltaLayerParams& delta_params(std::size_t layer) const;
  const AttentionLayerParams& attention_params(std::size_t layer) const;
  // Token embedding without planted offsets.
  std::span<const double> embedding(TokenId id) const;

  BehaviorCommitment commit(std::span<const double> final_residual) const;

  // Throws ConfigError for a hook that does not exist in this model.
  void validate_hook(const HookPoint& hook) const;
  void validate_steering(const SteeringConfig& steering) const;

 private:
  ToyModelConfig config_;
  PlantedTraits planted_;
  DenseMatrix embeddings_;
  std::vector<std::variant<DeltaLayerParams, AttentionLayerParams>> layers_;
};

struct ModelState {
  std::vector<DeltaLayerState> delta;  // indexed by layer; empty for attention layers
  std::vector<AttentionCache> attention;
  std::size_t position = 0;
  bool prefilled = false;
  BehaviorCommitment commitment;
};

// Residuals recorded after each hooked layer (and after steering), one row
// per processed position.
struct ResidualTaps {
  std::vector<HookPoint> hooks;
  std::vector<DenseMatrix> values;

  const DenseMatrix& at(const HookPoint& hook) const;
};

struct PrefillResult {
  ModelState state;
  ResidualTaps taps;
  BehaviorCommitment commitment;
  Vector final_residual;
};

ModelState initial_state(const ToyModel& model);

PrefillResult forward_prefill(const ToyModel& model, const TokenSequence& tokens,
                              const SteeringConfig* steering,
                              std::span<const HookPoint> hooks = {});

// Unsteered taps only, computing no layer above the deepest hook. Equal to
// forward_prefill(model, tokens, nullptr, hooks).taps.
ResidualTaps forward_taps(const ToyModel& model, const TokenSequence& tokens, std::span<const HookPoint> hooks);

// Feeds extra context (tool responses) as prefill-phase positions. The
// commitment is left untouched.
void append_context(const ToyModel& model, ModelState& state, const TokenSequence& tokens,
                    const SteeringConfig* steering);

// nullopt means the agent made no call this turn.
using PolicyEvent = std::optional<Tool>;

PolicyEvent sample_policy_event(const BehaviorCommitment& commitment, SeededRng& rng);

// Runs one decode position, then samples the next behavior event from the
// prefill commitment. Throws StateError before prefill.
PolicyEvent forward_decode_step(const ToyModel& model, ModelState& state, const Token& token,
                                const SteeringConfig* steering, SeededRng& rng);

double rms_of_residuals(const DenseMatrix& taps);
// +infinity when rms is zero.
double perturbation_ratio(double perturbation_norm, double rms);

}  // namespace saesteer
