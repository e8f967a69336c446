#include "saesteer/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "saesteer/error.hpp"
#include "saesteer/parallel.hpp"
#include "saesteer/rng.hpp"

namespace saesteer {

namespace {

constexpr double kUTolerance = 1e-9;

double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

// U for sample a using midranks over the pooled sample.
double u_statistic(std::span<const double> a, std::span<const double> b) {
  double u = 0.0;
  for (double x : a) {
    for (double y : b) {
      if (x > y) {
        u += 1.0;
      } else if (x == y) {
        u += 0.5;
      }
    }
  }
  return u;
}

// Percentile with linear interpolation between order statistics.
double percentile(std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

double mean(std::span<const double> x) {
  if (x.empty()) throw ArgumentError("mean of an empty sample");
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double sample_variance(std::span<const double> x) {
  if (x.size() < 2) throw DegenerateSamples("sample variance needs two values");
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return ss / static_cast<double>(x.size() - 1);
}

double cohens_d(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw DegenerateSamples("Cohen's d needs two values per group");
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double pooled =
      ((na - 1.0) * sample_variance(a) + (nb - 1.0) * sample_variance(b)) / (na + nb - 2.0);
  if (!(pooled > 0.0)) throw DegenerateSamples("Cohen's d undefined: pooled SD is zero");
  return (mean(a) - mean(b)) / std::sqrt(pooled);
}

MannWhitneyResult mann_whitney_exact(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw ArgumentError("Mann-Whitney needs non-empty samples");
  const std::size_t n = a.size() + b.size();
  if (n > 24) throw ArgumentError("exact Mann-Whitney enumeration limited to 24 values");
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());

  MannWhitneyResult r;
  r.exact = true;
  r.u = u_statistic(a, b);
  const double mu = static_cast<double>(a.size() * b.size()) / 2.0;
  const double observed = std::abs(r.u - mu);

  // Every way of choosing which pooled values form group a is equally likely
  // under the null.
  std::size_t extreme = 0;
  std::size_t total = 0;
  std::vector<double> ga;
  std::vector<double> gb;
  const std::uint32_t limit = 1u << n;
  for (std::uint32_t mask = 0; mask < limit; ++mask) {
    if (static_cast<std::size_t>(__builtin_popcount(mask)) != a.size()) continue;
    ga.clear();
    gb.clear();
    for (std::size_t i = 0; i < n; ++i) ((mask >> i) & 1u ? ga : gb).push_back(pooled[i]);
    ++total;
    if (std::abs(u_statistic(ga, gb) - mu) >= observed - kUTolerance) ++extreme;
  }
  r.p_two_sided = std::min(1.0, static_cast<double>(extreme) / static_cast<double>(total));
  return r;
}

MannWhitneyResult mann_whitney_normal(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw ArgumentError("Mann-Whitney needs non-empty samples");
  MannWhitneyResult r;
  r.u = u_statistic(a, b);
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double n = na + nb;
  const double mu = na * nb / 2.0;

  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  std::sort(pooled.begin(), pooled.end());
  double tie_term = 0.0;
  for (std::size_t i = 0; i < pooled.size();) {
    std::size_t j = i;
    while (j < pooled.size() && pooled[j] == pooled[i]) ++j;
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    i = j;
  }
  const double var = na * nb / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
  if (!(var > 0.0)) {
    r.p_two_sided = 1.0;
    return r;
  }
  const double z = std::max(0.0, std::abs(r.u - mu) - 0.5) / std::sqrt(var);
  r.p_two_sided = std::min(1.0, 2.0 * normal_sf(z));
  return r;
}

MannWhitneyResult mann_whitney_u(std::span<const double> a, std::span<const double> b) {
  if (a.size() + b.size() <= kExactMannWhitneyLimit) return mann_whitney_exact(a, b);
  return mann_whitney_normal(a, b);
}

double bonferroni_threshold(double alpha, std::size_t m) {
  if (m == 0) throw ArgumentError("Bonferroni needs m >= 1");
  return alpha / static_cast<double>(m);
}

ConfidenceInterval bootstrap_ci_d(std::span<const double> a, std::span<const double> b,
                                  const BootstrapOptions& options) {
  if (options.resamples < 1000) throw ArgumentError("bootstrap needs at least 1000 resamples");
  if (a.size() < 2 || b.size() < 2) throw DegenerateSamples("bootstrap needs two values per group");
  std::vector<double> ds(options.resamples);
  parallel_for(options.resamples, options.workers, [&](std::size_t r) {
    SeededRng rng(derive_seed(options.seed, r));
    std::vector<double> ra(a.size());
    std::vector<double> rb(b.size());
    for (std::size_t attempt = 0; attempt <= options.max_redraws; ++attempt) {
      for (double& x : ra) x = a[rng.below(a.size())];
      for (double& x : rb) x = b[rng.below(b.size())];
      try {
        ds[r] = cohens_d(ra, rb);
        return;
      } catch (const DegenerateSamples&) {
      }
    }
    throw DegenerateSamples("bootstrap resample stayed degenerate after redraws");
  });
  std::sort(ds.begin(), ds.end());
  return {percentile(ds, 0.025), percentile(ds, 0.975)};
}

EffectReport effect_report_no_ci(std::span<const double> a, std::span<const double> b) {
  EffectReport e;
  e.n_a = a.size();
  e.n_b = b.size();
  try {
    e.d = cohens_d(a, b);
  } catch (const DegenerateSamples&) {
    e.degenerate = true;
    e.d = 0.0;
    e.p = 1.0;
    return e;
  }
  e.p = mann_whitney_u(a, b).p_two_sided;
  e.ci_low = e.d;
  e.ci_high = e.d;
  return e;
}

EffectReport effect_report(std::span<const double> a, std::span<const double> b,
                           const BootstrapOptions& options) {
  EffectReport e = effect_report_no_ci(a, b);
  if (e.degenerate) return e;
  try {
    const ConfidenceInterval ci = bootstrap_ci_d(a, b, options);
    e.ci_low = std::min(ci.low, e.d);
    e.ci_high = std::max(ci.high, e.d);
  } catch (const DegenerateSamples&) {
    e.ci_low = e.d;
    e.ci_high = e.d;
  }
  return e;
}

std::string_view dose_label_name(DoseLabel label) {
  switch (label) {
    case DoseLabel::inverted_u: return "inverted_u";
    case DoseLabel::phase_transition: return "phase_transition";
    case DoseLabel::suppression: return "suppression";
    case DoseLabel::unclassified: return "unclassified";
  }
  return "?";
}

DoseLabel classify_dose_response(std::span<const DosePoint> points,
                                 const DoseResponseThresholds& th) {
  if (points.size() < 3) throw ArgumentError("dose-response needs at least three multipliers");
  for (std::size_t i = 1; i < points.size(); ++i) {
    if (!(points[i].multiplier > points[i - 1].multiplier)) {
      throw ArgumentError("dose-response multipliers must be strictly increasing");
    }
  }
  double max_d = -std::numeric_limits<double>::infinity();
  for (const DosePoint& p : points) max_d = std::max(max_d, p.d_pro);
  if (max_d < th.suppression_max_d) return DoseLabel::suppression;

  const double first = points.front().zero_tc;
  const double last = points.back().zero_tc;
  double interior = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i + 1 < points.size(); ++i) interior = std::max(interior, points[i].zero_tc);
  if (interior >= first + th.transition_margin && interior >= last + th.transition_margin &&
      points.back().d_pro >= th.transition_final_d) {
    return DoseLabel::phase_transition;
  }

  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].d_pro < th.effect_d) continue;
    for (std::size_t j = i + 1; j < points.size(); ++j) {
      if (points[j].zero_tc >= th.collapse_zero_tc) return DoseLabel::inverted_u;
    }
  }
  return DoseLabel::unclassified;
}

CrossTraitMatrix build_cross_trait_matrix(std::span<const std::optional<ProxySamples>> steered,
                                          const ProxySamples& baseline,
                                          const BootstrapOptions* bootstrap) {
  if (steered.size() != kTraitCount) throw ArgumentError("cross-trait matrix needs all five traits");
  CrossTraitMatrix m;
  for (std::size_t t = 0; t < kTraitCount; ++t) {
    if (!steered[t]) {
      throw ArgumentError("cross-trait matrix is missing trait " +
                          std::string(trait_name(kAllTraits[t])));
    }
    for (std::size_t q = 0; q < kTraitCount; ++q) {
      const auto& a = steered[t]->by_proxy[q];
      const auto& b = baseline.by_proxy[q];
      m.cells[t][q] = bootstrap != nullptr ? effect_report(a, b, *bootstrap)
                                           : effect_report_no_ci(a, b);
    }
    double off = 0.0;
    for (std::size_t q = 0; q < kTraitCount; ++q) {
      if (q != t) off = std::max(off, std::abs(m.cells[t][q].d));
    }
    const double on = std::abs(m.cells[t][t].d);
    m.specificity_ratios[t] = off > 0.0 ? on / off
                                        : (on > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
  }
  return m;
}

}  // namespace saesteer
