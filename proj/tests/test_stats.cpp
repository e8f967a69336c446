#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <optional>
#include <vector>

#include <gtest/gtest.h>

#include "saesteer/error.hpp"
#include "saesteer/rng.hpp"
#include "saesteer/stats.hpp"

namespace saesteer {
namespace {

using Sample = std::vector<double>;

// U for a by direct pair counting, ties worth one half.
double pair_count_u(const Sample& a, const Sample& b) {
  double u = 0.0;
  for (double x : a) {
    for (double y : b) u += x > y ? 1.0 : (x == y ? 0.5 : 0.0);
  }
  return u;
}

// Two-sided permutation p: every split of the pooled values into groups of
// the original sizes, counting those at least as far from n_a n_b / 2.
double enumeration_p(const Sample& a, const Sample& b) {
  Sample pooled = a;
  pooled.insert(pooled.end(), b.begin(), b.end());
  std::vector<bool> pick(pooled.size(), false);
  std::fill(pick.begin(), pick.begin() + static_cast<long>(a.size()), true);
  const double mu = double(a.size() * b.size()) / 2.0;
  const double observed = std::abs(pair_count_u(a, b) - mu);
  int extreme = 0, total = 0;
  std::sort(pick.begin(), pick.end());
  do {
    Sample ga, gb;
    for (std::size_t i = 0; i < pooled.size(); ++i) (pick[i] ? ga : gb).push_back(pooled[i]);
    ++total;
    extreme += std::abs(pair_count_u(ga, gb) - mu) >= observed - 1e-9 ? 1 : 0;
  } while (std::next_permutation(pick.begin(), pick.end()));
  return double(extreme) / double(total);
}

TEST(CohensD, HandValues) {
  const Sample a{1, 1, 2, 2}, b{0, 0, 1, 1};
  EXPECT_NEAR(cohens_d(a, b), 1.7321, 1e-4);
  EXPECT_EQ(cohens_d(a, b), -cohens_d(b, a));
  const Sample c{0.5, 1.5, 3.0};
  EXPECT_EQ(cohens_d(c, c), 0.0);
}

TEST(CohensD, AffineInvariant) {
  SeededRng rng(1);
  for (int trial = 0; trial < 30; ++trial) {
    Sample a(12), b(9);
    for (double& x : a) x = rng.normal() + 0.5;
    for (double& x : b) x = rng.normal();
    const double scale = 0.1 + 5.0 * rng.uniform();
    const double shift = 10.0 * rng.normal();
    Sample ta = a, tb = b;
    for (double& x : ta) x = scale * x + shift;
    for (double& x : tb) x = scale * x + shift;
    EXPECT_NEAR(cohens_d(a, b), cohens_d(ta, tb), 1e-9);
    EXPECT_EQ(cohens_d(a, b), -cohens_d(b, a));
  }
}

TEST(CohensD, DegenerateThrows) {
  EXPECT_THROW(cohens_d(Sample{1, 1}, Sample{2, 2}), DegenerateSamples);
  EXPECT_THROW(cohens_d(Sample{1}, Sample{2, 3}), DegenerateSamples);
}

TEST(MannWhitney, HandExample) {
  const auto r = mann_whitney_u(Sample{1, 2}, Sample{3, 4});
  EXPECT_TRUE(r.exact);
  EXPECT_EQ(r.u, 0.0);
  EXPECT_NEAR(r.p_two_sided, 1.0 / 3.0, 1e-12);
}

TEST(MannWhitney, IdenticalMultisetsGiveCenteredU) {
  const Sample a{1, 2, 2, 5}, b{2, 5, 1, 2};
  EXPECT_DOUBLE_EQ(mann_whitney_u(a, b).u, 8.0);
  EXPECT_DOUBLE_EQ(mann_whitney_u(a, b).p_two_sided, 1.0);
}

TEST(MannWhitney, ExactMatchesEnumerationOnEveryThreeByThreeSample) {
  int checked = 0;
  for (int code_a = 0; code_a < 27; ++code_a) {
    for (int code_b = 0; code_b < 27; ++code_b) {
      const Sample a{double(code_a % 3), double(code_a / 3 % 3), double(code_a / 9)};
      const Sample b{double(code_b % 3), double(code_b / 3 % 3), double(code_b / 9)};
      const auto r = mann_whitney_u(a, b);
      ASSERT_TRUE(r.exact);
      ASSERT_DOUBLE_EQ(r.u, pair_count_u(a, b));
      ASSERT_NEAR(r.p_two_sided, enumeration_p(a, b), 1e-12) << code_a << "," << code_b;
      ++checked;
    }
  }
  EXPECT_EQ(checked, 729);
}

TEST(MannWhitney, NormalApproximationCloseToExactWithoutTies) {
  SeededRng rng(2);
  double worst = 0.0;
  for (int draw = 0; draw < 200; ++draw) {
    std::vector<double> values(12);
    std::iota(values.begin(), values.end(), 0.0);
    for (std::size_t i = values.size(); i > 1; --i) std::swap(values[i - 1], values[rng.below(i)]);
    const Sample a(values.begin(), values.begin() + 6), b(values.begin() + 6, values.end());
    worst = std::max(worst, std::abs(mann_whitney_normal(a, b).p_two_sided - enumeration_p(a, b)));
  }
  EXPECT_LT(worst, 0.03);
}

TEST(MannWhitney, NormalApproximationCloseToExactOnIntegerSamples) {
  SeededRng rng(3);
  double worst = 0.0;
  for (int draw = 0; draw < 200; ++draw) {
    Sample a(6), b(6);
    for (double& x : a) x = double(rng.below(4));
    for (double& x : b) x = double(rng.below(4));
    worst = std::max(worst, std::abs(mann_whitney_normal(a, b).p_two_sided - enumeration_p(a, b)));
  }
  EXPECT_LT(worst, 0.03);
}

TEST(MannWhitney, LargeSamplesUseNormalApproximation) {
  Sample a(30), b(30);
  for (std::size_t i = 0; i < 30; ++i) {
    a[i] = double(i);
    b[i] = double(i) + 10.0;
  }
  const auto r = mann_whitney_u(a, b);
  EXPECT_FALSE(r.exact);
  EXPECT_LT(r.p_two_sided, 0.01);
  EXPECT_GE(r.p_two_sided, 0.0);
}

TEST(Bonferroni, HandValues) {
  EXPECT_NEAR(bonferroni_threshold(0.05, 35), 0.0014286, 1e-7);
  EXPECT_EQ(bonferroni_threshold(0.05, 1), 0.05);
  EXPECT_DOUBLE_EQ(bonferroni_threshold(0.05, 5), 0.01);
}

TEST(Bootstrap, SeparatedGroupsExcludeZero) {
  SeededRng rng(4);
  Sample a(30), b(30);
  for (double& x : a) x = 5.0 + 0.1 * rng.normal();
  for (double& x : b) x = 0.1 * rng.normal();
  BootstrapOptions opt;
  opt.resamples = 2000;
  opt.seed = 1;
  const auto ci = bootstrap_ci_d(a, b, opt);
  EXPECT_GT(ci.low, 0.0);
  EXPECT_LE(ci.low, ci.high);
}

TEST(Bootstrap, SameDistributionStraddlesZero) {
  SeededRng rng(5);
  Sample a(50), b(50);
  for (double& x : a) x = rng.normal();
  for (double& x : b) x = rng.normal();
  BootstrapOptions opt;
  opt.resamples = 2000;
  opt.seed = 2;
  const auto ci = bootstrap_ci_d(a, b, opt);
  EXPECT_LT(ci.low, 0.0);
  EXPECT_GT(ci.high, 0.0);
}

TEST(Bootstrap, DeterministicAndWorkerIndependent) {
  SeededRng rng(6);
  Sample a(20), b(20);
  for (double& x : a) x = rng.normal() + 0.3;
  for (double& x : b) x = rng.normal();
  BootstrapOptions opt;
  opt.resamples = 1000;
  opt.seed = 3;
  const auto one = bootstrap_ci_d(a, b, opt);
  opt.workers = 4;
  const auto four = bootstrap_ci_d(a, b, opt);
  EXPECT_EQ(one.low, four.low);
  EXPECT_EQ(one.high, four.high);
}

TEST(Bootstrap, ConstantGroupsExhaustRedraws) {
  BootstrapOptions opt;
  opt.resamples = 1000;
  EXPECT_THROW(bootstrap_ci_d(Sample{1, 1, 1}, Sample{2, 2, 2}, opt), DegenerateSamples);
}

TEST(EffectReport, IntervalContainsEstimate) {
  SeededRng rng(7);
  Sample a(25), b(25);
  for (double& x : a) x = double(rng.below(4));
  for (double& x : b) x = double(rng.below(3));
  BootstrapOptions opt;
  opt.resamples = 1000;
  const EffectReport e = effect_report(a, b, opt);
  EXPECT_LE(e.ci_low, e.d);
  EXPECT_GE(e.ci_high, e.d);
  EXPECT_GE(e.p, 0.0);
  EXPECT_LE(e.p, 1.0);
  EXPECT_EQ(e.n_a, 25u);
}

TEST(EffectReport, ConstantGroupsAreDegenerate) {
  const EffectReport e = effect_report_no_ci(Sample(10, 1.0), Sample(10, 1.0));
  EXPECT_TRUE(e.degenerate);
  EXPECT_EQ(e.d, 0.0);
  EXPECT_EQ(e.p, 1.0);
}

std::vector<DosePoint> curve(const std::vector<double>& alpha, const std::vector<double>& d,
                             const std::vector<double>& ztc) {
  std::vector<DosePoint> pts;
  for (std::size_t i = 0; i < alpha.size(); ++i) pts.push_back({alpha[i], d[i], ztc[i]});
  return pts;
}

TEST(DoseResponse, AutonomyFixtureIsInvertedU) {
  const auto pts = curve({1, 2, 3, 5}, {0.47, 1.01, 1.04, -0.50}, {0.22, 0.30, 0.36, 1.00});
  EXPECT_EQ(classify_dose_response(pts), DoseLabel::inverted_u);
}

TEST(DoseResponse, ToolUseFixtureIsPhaseTransition) {
  const auto pts = curve({1, 2, 3}, {0.32, 0.63, 0.39}, {0.52, 0.58, 0.26});
  EXPECT_EQ(classify_dose_response(pts), DoseLabel::phase_transition);
}

TEST(DoseResponse, FlatCurveIsSuppression) {
  const auto pts = curve({1, 2, 3, 5, 10}, {0.1, 0.1, 0.1, 0.1, 0.1}, {0.1, 0.2, 0.5, 0.9, 1.0});
  EXPECT_EQ(classify_dose_response(pts), DoseLabel::suppression);
}

TEST(DoseResponse, RejectsShortOrUnorderedCurves) {
  EXPECT_THROW(classify_dose_response(curve({1, 2}, {0, 0}, {0, 0})), ArgumentError);
  EXPECT_THROW(classify_dose_response(curve({1, 3, 2}, {0, 0, 0}, {0, 0, 0})), ArgumentError);
}

TEST(DoseResponse, TotalAndDeterministicOnRandomCurves) {
  SeededRng rng(8);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 3 + rng.below(4);
    std::vector<DosePoint> pts;
    double alpha = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      alpha += 0.1 + rng.uniform();
      pts.push_back({alpha, 3.0 * rng.normal(), rng.uniform()});
    }
    const DoseLabel label = classify_dose_response(pts);
    EXPECT_EQ(label, classify_dose_response(pts));
    EXPECT_FALSE(dose_label_name(label).empty());
  }
}

ProxySamples noise_samples(SeededRng& rng, double shift_autonomy) {
  ProxySamples s;
  for (std::size_t q = 0; q < kTraitCount; ++q) {
    s.by_proxy[q].resize(50);
    for (double& x : s.by_proxy[q]) x = rng.normal() + (q == 0 ? shift_autonomy : 0.0);
  }
  return s;
}

TEST(CrossTrait, RatiosFollowDefinition) {
  SeededRng rng(9);
  const ProxySamples baseline = noise_samples(rng, 0.0);
  std::vector<std::optional<ProxySamples>> steered;
  for (std::size_t t = 0; t < kTraitCount; ++t) steered.emplace_back(noise_samples(rng, 1.0));
  const CrossTraitMatrix m = build_cross_trait_matrix(steered, baseline);
  for (std::size_t t = 0; t < kTraitCount; ++t) {
    double off = 0.0;
    for (std::size_t q = 0; q < kTraitCount; ++q) {
      EXPECT_NEAR(m.cells[t][q].d, cohens_d(steered[t]->by_proxy[q], baseline.by_proxy[q]), 1e-12);
      if (q != t) off = std::max(off, std::abs(m.cells[t][q].d));
    }
    EXPECT_NEAR(m.specificity_ratios[t], std::abs(m.cells[t][t].d) / off, 1e-12);
    EXPECT_GT(m.cells[t][0].d, 0.5);
  }
  // Every row but autonomy's is dominated by the shared autonomy shift.
  for (std::size_t t = 1; t < kTraitCount; ++t) EXPECT_LT(m.specificity_ratios[t], 1.0);
}

TEST(CrossTrait, NullInterventionGivesSmallCells) {
  SeededRng rng(10);
  ProxySamples baseline = noise_samples(rng, 0.0);
  std::vector<std::optional<ProxySamples>> steered(kTraitCount, baseline);
  const CrossTraitMatrix m = build_cross_trait_matrix(steered, baseline);
  for (const auto& row : m.cells) {
    for (const auto& cell : row) EXPECT_LT(std::abs(cell.d), 0.2);
  }
}

TEST(CrossTrait, MissingTraitThrows) {
  SeededRng rng(11);
  const ProxySamples baseline = noise_samples(rng, 0.0);
  std::vector<std::optional<ProxySamples>> steered(kTraitCount, baseline);
  steered[2].reset();
  EXPECT_THROW(build_cross_trait_matrix(steered, baseline), ArgumentError);
}

}  // namespace
}  // namespace saesteer
