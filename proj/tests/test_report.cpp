#include <cmath>
#include <filesystem>
#include <numeric>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "saesteer/error.hpp"
#include "saesteer/io.hpp"
#include "saesteer/report.hpp"

namespace saesteer {
namespace {

// Pooled-variance standardized mean difference, written out independently.
double oracle_d(const std::vector<double>& a, const std::vector<double>& b) {
  auto mean = [](const std::vector<double>& x) { return std::accumulate(x.begin(), x.end(), 0.0) / double(x.size()); };
  auto ss = [](const std::vector<double>& x, double m) {
    double s = 0;
    for (double v : x) s += (v - m) * (v - m);
    return s;
  };
  const double ma = mean(a), mb = mean(b);
  const double pooled = std::sqrt((ss(a, ma) + ss(b, mb)) / double(a.size() + b.size() - 2));
  return (ma - mb) / pooled;
}

RolloutResult rollout(std::size_t id, const std::string& condition, std::vector<Tool> tools) {
  RolloutResult r;
  r.trajectory.scenario_id = id;
  r.trajectory.condition = condition;
  for (std::size_t i = 0; i < tools.size(); ++i) r.trajectory.calls.push_back({tools[i], i});
  r.trajectory.turns_used = std::max<std::size_t>(1, tools.size());
  r.trajectory.terminated = tools.size() >= 5 ? Termination::turn_limit : Termination::natural;
  r.proxies = extract_proxies(r.trajectory);
  return r;
}

// Baseline: 52 rollouts with one ask_user and 15 with one web_search.
// Every trait is steered at all-positions alpha=2; autonomy shifts calls
// from ask_user to code_execute, the others leave the baseline unchanged
// except for a single extra web_search.
ReportInputs fixture() {
  ReportInputs in;
  in.config = load_run_config(std::filesystem::path(SAESTEER_FIXTURE_DIR) / "mini_run.ini");
  for (std::size_t i = 0; i < 67; ++i) {
    in.rollouts.push_back(rollout(i, "baseline", {i < 52 ? Tool::ask_user : Tool::web_search}));
  }
  for (Trait t : kAllTraits) {
    const std::string label = condition_label({t, SteeringMode::all_positions, 2.0});
    for (std::size_t i = 0; i < 67; ++i) {
      std::vector<Tool> tools;
      if (t == Trait::autonomy) {
        tools = i < 20 ? std::vector<Tool>{Tool::ask_user} : std::vector<Tool>{Tool::code_execute, Tool::web_search};
      } else {
        tools = {i < 52 ? Tool::ask_user : Tool::web_search};
        if (i == 0) tools.push_back(Tool::web_search);
      }
      in.rollouts.push_back(rollout(i, label, tools));
    }
  }
  std::size_t k = 0;
  for (Trait t : kAllTraits) {
    ProbeRecord p;
    p.trait = t;
    p.hook = {2, SublayerKind::delta};
    p.sae_id = "sae_delta_L2@00ff";
    p.probe.w = Vector(8, 0.0);
    p.probe.w[k] = 1.0;
    p.probe.w[(k + 1) % 8] = 0.5;
    p.probe.ridge_lambda = 0.1;
    p.probe.r2_holdout = 0.9 + 0.01 * double(k);
    p.scores = {{0.1, p.probe.r2_holdout}};
    in.probes.push_back(p);

    SteeringVector v;
    v.trait = t;
    v.layer = 2;
    v.v = Vector(4, 0.0);
    v.v[k % 4] = 1.0;
    v.v[(k + 1) % 4] = 0.25;
    v.norm = l2_norm(v.v);
    v.source_sae = p.sae_id;
    in.vectors.push_back(v);
    ++k;
  }
  return in;
}

const ReportFile& file(const std::vector<ReportFile>& files, const std::string& path) {
  for (const auto& f : files) {
    if (f.path == path) return f;
  }
  throw std::runtime_error("no report file " + path);
}

TEST(Formatting, SignedPValuesAndPercent) {
  EXPECT_EQ(format_signed(0.5), "+0.50");
  EXPECT_EQ(format_signed(-1.234), "-1.23");
  EXPECT_EQ(format_signed(-0.001), "+0.00");
  EXPECT_EQ(format_signed(0.0655, 3), "+0.066");
  EXPECT_EQ(format_p(0.00001), "<0.0001");
  EXPECT_EQ(format_p(0.0012), "0.0012");
  EXPECT_EQ(format_p(0.5), "0.500");
  EXPECT_EQ(format_percent(0.776), "78%");
  EXPECT_EQ(format_percent(0.003), "<1%");
  EXPECT_EQ(format_percent(0.0), "0%");
  EXPECT_EQ(significance_stars(0.0005), "***");
  EXPECT_EQ(significance_stars(0.03), "*");
  EXPECT_EQ(significance_stars(0.2), "");
  EXPECT_EQ(condition_display({Trait::autonomy, SteeringMode::all_positions, 3.0}), "all, α=3");
}

TEST(Tiers, ThresholdsAndBonferroni) {
  const TierThresholds tiers;
  const double bonf = 0.05 / 35;
  auto eff = [](double d, double p) {
    EffectReport e;
    e.d = d;
    e.p = p;
    return e;
  };
  EXPECT_EQ(assign_tier(eff(0.9, 0.0001), tiers, bonf), "1");
  EXPECT_EQ(assign_tier(eff(0.9, 0.01), tiers, bonf), "3");
  EXPECT_EQ(assign_tier(eff(0.6, 0.0001), tiers, bonf), "2");
  EXPECT_EQ(assign_tier(eff(0.35, 0.04), tiers, bonf), "3");
  EXPECT_EQ(assign_tier(eff(0.35, 0.06), tiers, bonf), "fail");
  EXPECT_EQ(assign_tier(eff(-2.0, 0.0), tiers, bonf), "fail");
  EXPECT_EQ(assign_tier(eff(0.8, bonf), tiers, bonf), "3");
}

TEST(Analysis, EffectSizesMatchOracle) {
  const ReportInputs in = fixture();
  const RunAnalysis a = analyze_run(in);
  EXPECT_EQ(a.baseline_n, 67u);
  EXPECT_EQ(a.baseline_tools.total_calls, 67u);

  std::vector<double> base_pro, base_ask, auto_pro, auto_ask;
  for (std::size_t i = 0; i < 67; ++i) {
    base_ask.push_back(i < 52 ? 1 : 0);
    base_pro.push_back(i < 52 ? 0 : 1);
    auto_ask.push_back(i < 20 ? 1 : 0);
    auto_pro.push_back(i < 20 ? 0 : 2);
  }
  ASSERT_EQ(a.main.size(), 5u);
  const MainRow& row = a.main[0];
  EXPECT_EQ(row.trait, Trait::autonomy);
  EXPECT_EQ(row.sae, "sae_delta_L2");
  EXPECT_EQ(row.layer, 2u);
  ASSERT_TRUE(row.best.has_value());
  EXPECT_NEAR(row.d_pro.d, oracle_d(auto_pro, base_pro), 1e-12);
  EXPECT_NEAR(row.d_ask.d, oracle_d(auto_ask, base_ask), 1e-12);
  EXPECT_LE(row.d_pro.ci_low, row.d_pro.d);
  EXPECT_GE(row.d_pro.ci_high, row.d_pro.d);
  EXPECT_EQ(row.tier, "1");
  EXPECT_EQ(row.zero_tc, 0.0);
  ASSERT_TRUE(a.cross.has_value());
}

TEST(Render, MainTableColumnsAndTierEcho) {
  const auto files = render_report(fixture());
  const std::string& md = file(files, "reports/main_results.md").content;
  EXPECT_NE(md.find("| Trait | SAE | Layer | R² | Condition | d(ask) | d(pro) | ∅TC% | Tier |"), std::string::npos)
      << md;
  EXPECT_NE(md.find("tier 1 d >= 1.25"), std::string::npos) << md;
  EXPECT_NE(md.find("tier 3 d >= 0.3 and p < 0.05"), std::string::npos) << md;
  EXPECT_NE(md.find("sae_delta_L2"), std::string::npos);
}

TEST(Render, BaselineToolRow) {
  const auto files = render_report(fixture());
  const std::string& md = file(files, "reports/tool_types.md").content;
  EXPECT_NE(md.find("| Baseline | 78% | 22% | 0% | 0% | 67 |"), std::string::npos) << md;
}

TEST(Render, ByteStableAndSorted) {
  const auto a = render_report(fixture());
  const auto b = render_report(fixture());
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].path, b[i].path);
    EXPECT_EQ(a[i].content, b[i].content) << a[i].path;
    if (i > 0) EXPECT_LT(a[i - 1].path, a[i].path);
  }
  for (const char* expected : {"reports/report.md", "reports/cross_trait.md", "reports/dose_labels.csv",
                               "reports/geometry.md", "reports/cosines.csv"}) {
    EXPECT_NO_THROW(file(a, expected)) << expected;
  }
}

TEST(Render, DiskRoundTripGivesSameReport) {
  const ReportInputs in = fixture();
  const auto dir = std::filesystem::path(testing::TempDir()) / "report_roundtrip";
  std::filesystem::remove_all(dir);
  ensure_directory(dir / "vectors");
  ensure_directory(dir / "probes");
  ensure_directory(dir / "trajectories");
  write_text(dir / kRunConfigFile, render_run_config(in.config));
  write_probes(dir / kProbesFile, in.probes);
  write_trajectories(dir / kTrajectoriesFile, in.rollouts);
  for (const auto& v : in.vectors) save_steering_vector(dir / vector_file(v.trait), v);

  const ReportInputs back = load_report_inputs(dir);
  const auto a = render_report(in);
  const auto b = render_report(back);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].content, b[i].content) << a[i].path;
}

TEST(Load, MissingInputsAreListed) {
  const auto dir = std::filesystem::path(testing::TempDir()) / "report_empty";
  std::filesystem::remove_all(dir);
  ensure_directory(dir);
  try {
    load_report_inputs(dir);
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("run_config.ini"), std::string::npos) << msg;
    EXPECT_NE(msg.find("trajectories/trajectories.jsonl"), std::string::npos) << msg;
    EXPECT_NE(msg.find("probes/probes.jsonl"), std::string::npos) << msg;
  }
}

TEST(Analysis, TooFewBaselineRolloutsIsAnError) {
  ReportInputs in = fixture();
  std::erase_if(in.rollouts, [](const RolloutResult& r) { return r.trajectory.condition == "baseline"; });
  EXPECT_THROW(analyze_run(in), IoError);
}

}  // namespace
}  // namespace saesteer
