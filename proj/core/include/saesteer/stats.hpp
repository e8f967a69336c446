#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "saesteer/domain.hpp"
#include "saesteer/toymodel.hpp"

namespace saesteer {

double mean(std::span<const double> x);
// Sample variance (n - 1).
double sample_variance(std::span<const double> x);

// (mean(a) - mean(b)) / pooled SD. Throws DegenerateSamples when either
// group has fewer than two values or the pooled SD is zero.
double cohens_d(std::span<const double> a, std::span<const double> b);

struct MannWhitneyResult {
  double u = 0.0;  // U for sample a
  double p_two_sided = 1.0;
  bool exact = false;
};

inline constexpr std::size_t kExactMannWhitneyLimit = 12;

// Exact enumeration when n_a + n_b <= 12, else the normal approximation
// with tie-adjusted variance and a 0.5 continuity correction.
MannWhitneyResult mann_whitney_u(std::span<const double> a, std::span<const double> b);
MannWhitneyResult mann_whitney_exact(std::span<const double> a, std::span<const double> b);
MannWhitneyResult mann_whitney_normal(std::span<const double> a, std::span<const double> b);

double bonferroni_threshold(double alpha, std::size_t m);

inline constexpr std::size_t kDefaultBonferroniM = 35;

struct ConfidenceInterval {
  double low = 0.0;
  double high = 0.0;
};

struct BootstrapOptions {
  std::size_t resamples = 10000;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  std::size_t max_redraws = 10;
};

// Percentile 2.5/97.5 bounds of Cohen's d over independent resamples of
// both groups. A degenerate resample is redrawn; after max_redraws failures
// in a row DegenerateSamples is thrown.
ConfidenceInterval bootstrap_ci_d(std::span<const double> a, std::span<const double> b,
                                  const BootstrapOptions& options);

struct EffectReport {
  double d = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double p = 1.0;
  std::size_t n_a = 0;
  std::size_t n_b = 0;
  // Both groups constant: d, p and the CI are reported as 0, 1 and [0, 0].
  bool degenerate = false;
};

// Steered sample a against baseline sample b. The interval is widened to
// contain d when percentile bounds miss it.
EffectReport effect_report(std::span<const double> a, std::span<const double> b,
                           const BootstrapOptions& options);
// Same, without a bootstrap (ci collapses to d).
EffectReport effect_report_no_ci(std::span<const double> a, std::span<const double> b);

struct ConditionSummary {
  Trait trait = Trait::autonomy;
  SteeringMode mode = SteeringMode::all_positions;
  double multiplier = 0.0;
  EffectReport d_ask;
  EffectReport d_pro;
  double zero_tc = 0.0;
};

enum class DoseLabel : std::uint8_t { inverted_u, phase_transition, suppression, unclassified };
std::string_view dose_label_name(DoseLabel label);

struct DosePoint {
  double multiplier = 0.0;
  double d_pro = 0.0;
  double zero_tc = 0.0;
};

struct DoseResponseThresholds {
  double suppression_max_d = 0.3;
  double effect_d = 0.5;
  double collapse_zero_tc = 0.8;
  double transition_margin = 0.05;
  double transition_final_d = 0.3;
};

struct DoseResponseCurve {
  std::vector<DosePoint> points;
  DoseLabel label = DoseLabel::unclassified;
};

// Rules in order: suppression, phase_transition, inverted_u, else
// unclassified. Throws ArgumentError for fewer than three points or
// multipliers that are not strictly increasing.
DoseLabel classify_dose_response(std::span<const DosePoint> points,
                                 const DoseResponseThresholds& thresholds = {});

struct CrossTraitMatrix {
  // cells[steered][measured proxy]
  std::array<std::array<EffectReport, kTraitCount>, kTraitCount> cells{};
  std::array<double, kTraitCount> specificity_ratios{};
};

// proxies[t] holds the five proxy samples under steering of trait t;
// baseline holds the same under no steering. Ratio = |diag d| / max |off d|
// (infinite when every off-target d is zero).
struct ProxySamples {
  std::array<std::vector<double>, kTraitCount> by_proxy;
};

CrossTraitMatrix build_cross_trait_matrix(std::span<const std::optional<ProxySamples>> steered,
                                          const ProxySamples& baseline,
                                          const BootstrapOptions* bootstrap = nullptr);

}  // namespace saesteer
