#include "saesteer/report.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <fmt/format.h>

#include "saesteer/attribution.hpp"
#include "saesteer/error.hpp"
#include "saesteer/io.hpp"
#include "saesteer/numerics.hpp"

namespace saesteer {

namespace {

class MarkdownTable {
 public:
  explicit MarkdownTable(std::vector<std::string> headers) : headers_(std::move(headers)) {}
  void add(std::vector<std::string> row) { rows_.push_back(std::move(row)); }

  std::string render() const {
    std::string out = line(headers_);
    out += "|";
    for (std::size_t i = 0; i < headers_.size(); ++i) out += i == 0 ? " --- |" : " ---: |";
    out += "\n";
    for (const auto& r : rows_) out += line(r);
    return out;
  }

 private:
  static std::string line(const std::vector<std::string>& cells) {
    std::string out = "|";
    for (const auto& c : cells) out += " " + c + " |";
    return out + "\n";
  }

  std::vector<std::string> headers_;
  std::vector<std::vector<std::string>> rows_;
};

class Csv {
 public:
  explicit Csv(std::vector<std::string> headers) { add(std::move(headers)); }
  void add(const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i > 0) text_ += ",";
      text_ += escape(row[i]);
    }
    text_ += "\n";
  }
  const std::string& text() const { return text_; }

 private:
  static std::string escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
      if (c == '"') out += '"';
      out += c;
    }
    return out + "\"";
  }
  std::string text_;
};

std::string num(double x) { return fmt::format("{}", x); }

std::string ratio_text(double r) { return std::isinf(r) ? "inf" : fmt::format("{:.2f}", r); }

std::string trait_display(Trait t) {
  switch (t) {
    case Trait::autonomy: return "Autonomy";
    case Trait::tool_use: return "Tool use";
    case Trait::persistence: return "Persistence";
    case Trait::risk_calibration: return "Risk cal.";
    case Trait::deference: return "Deference";
  }
  return "?";
}

std::string mode_short(SteeringMode m) {
  switch (m) {
    case SteeringMode::all_positions: return "all";
    case SteeringMode::prefill_only: return "pre";
    case SteeringMode::decode_only: return "decode";
  }
  return "?";
}

std::vector<double> proxy_column(std::span<const RolloutResult> results, Trait t) {
  std::vector<double> out;
  out.reserve(results.size());
  for (const auto& r : results) out.push_back(r.proxies.value(t));
  return out;
}

GroupMeans group_means(std::span<const RolloutResult> results) {
  GroupMeans g;
  g.ask = mean(ask_samples(results));
  g.pro = mean(pro_samples(results));
  g.zero_tc = zero_tool_call_rate(results);
  for (Trait t : kAllTraits) g.proxies[trait_index(t)] = mean(proxy_column(results, t));
  return g;
}

BootstrapOptions bootstrap_for(const RunConfig& c, std::string_view tag) {
  BootstrapOptions b;
  b.resamples = c.bootstrap_resamples;
  b.seed = derive_seed(c.seed_for("bootstrap"), tag);
  b.workers = c.workers;
  return b;
}

const ProbeRecord* find_probe(const ReportInputs& in, Trait t) {
  for (const auto& p : in.probes) {
    if (p.trait == t) return &p;
  }
  return nullptr;
}

const SteeringVector* find_vector(const ReportInputs& in, Trait t) {
  for (const auto& v : in.vectors) {
    if (v.trait == t) return &v;
  }
  return nullptr;
}

const ConditionAnalysis* find_condition(const RunAnalysis& a, const ConditionKey& key) {
  for (const auto& c : a.conditions) {
    if (c.key == key) return &c;
  }
  return nullptr;
}

std::string tier_echo(const RunConfig& c) {
  return fmt::format(
      "Tier thresholds on d(pro): tier 1 d >= {} and p < {:.7f} (Bonferroni {}/{}); tier 2 d >= {} and "
      "p < {:.7f}; tier 3 d >= {} and p < {}; otherwise fail.\n",
      num(c.tiers.tier1_d), c.bonferroni(), num(c.alpha), c.bonferroni_m, num(c.tiers.tier2_d),
      c.bonferroni(), num(c.tiers.tier3_d), num(c.tiers.tier3_p));
}

// ---- individual report sections ----

void render_main(const ReportInputs& in, const RunAnalysis& a, std::vector<ReportFile>& files,
                 std::string& combined) {
  MarkdownTable md({"Trait", "SAE", "Layer", "R²", "Condition", "d(ask)", "d(pro)", "∅TC%", "Tier"});
  Csv csv({"trait", "sae", "layer", "r2", "condition", "d_ask", "p_ask", "d_pro", "p_pro", "zero_tc", "tier"});
  for (const auto& row : a.main) {
    const std::string cond = row.best ? condition_display(*row.best) : "---";
    md.add({trait_display(row.trait), row.sae, fmt::format("{}", row.layer), fmt::format("{:.3f}", row.r2), cond,
            format_signed(row.d_ask.d), format_signed(row.d_pro.d), format_percent(row.zero_tc), row.tier});
    csv.add({std::string(trait_name(row.trait)), row.sae, fmt::format("{}", row.layer), num(row.r2),
             row.best ? condition_label(*row.best) : "", num(row.d_ask.d), num(row.d_ask.p), num(row.d_pro.d),
             num(row.d_pro.p), num(row.zero_tc), row.tier});
  }
  std::string text = "## Main results\n\n";
  text += fmt::format("Best condition per trait over multipliers {} (all configured modes), {} scenarios.\n\n",
                      [&] {
                        std::string s;
                        for (double m : in.config.table_multipliers) s += (s.empty() ? "" : ", ") + num(m);
                        return s;
                      }(),
                      a.baseline_n);
  text += md.render();
  text += "\n" + tier_echo(in.config);
  files.push_back({"reports/main_results.md", text});
  files.push_back({"reports/main_results.csv", csv.text()});
  combined += text + "\n";
}

void render_conditions(const RunAnalysis& a, std::vector<ReportFile>& files) {
  Csv csv({"condition", "trait", "mode", "multiplier", "mean_ask", "mean_pro", "d_ask", "d_ask_ci_low",
           "d_ask_ci_high", "p_ask", "d_pro", "d_pro_ci_low", "d_pro_ci_high", "p_pro", "zero_tc", "total_calls"});
  csv.add({std::string(kBaselineCondition), "", "", "", num(a.baseline.ask), num(a.baseline.pro), "", "", "", "", "",
           "", "", "", num(a.baseline.zero_tc), fmt::format("{}", a.baseline_tools.total_calls)});
  for (const auto& c : a.conditions) {
    const auto& s = c.summary;
    csv.add({condition_label(c.key), std::string(trait_name(c.key.trait)), std::string(steering_mode_name(c.key.mode)),
             num(c.key.multiplier), num(c.means.ask), num(c.means.pro), num(s.d_ask.d), num(s.d_ask.ci_low),
             num(s.d_ask.ci_high), num(s.d_ask.p), num(s.d_pro.d), num(s.d_pro.ci_low), num(s.d_pro.ci_high),
             num(s.d_pro.p), num(s.zero_tc), fmt::format("{}", c.tools.total_calls)});
  }
  files.push_back({"reports/conditions.csv", csv.text()});
}

void render_decode_only(const ReportInputs& in, const RunAnalysis& a, std::vector<ReportFile>& files,
                        std::string& combined) {
  const auto& cfg = in.config;
  if (std::find(cfg.modes.begin(), cfg.modes.end(), SteeringMode::decode_only) == cfg.modes.end()) return;
  std::string text = "## Decode-only steering\n\n";
  Csv csv({"trait", "condition", "d_ask", "p_ask", "d_pro", "p_pro", "zero_tc"});
  for (Trait t : cfg.traits) {
    std::vector<ConditionKey> keys;
    for (double m : cfg.multipliers) {
      if (m <= cfg.cross_trait_multiplier) keys.push_back({t, SteeringMode::decode_only, m});
    }
    for (SteeringMode mode : {SteeringMode::all_positions, SteeringMode::prefill_only}) {
      keys.push_back({t, mode, cfg.cross_trait_multiplier});
    }
    MarkdownTable md({"Condition", "d(ask)", "p", "d(pro)", "p", "∅TC%"});
    bool any = false;
    for (const auto& key : keys) {
      const auto* c = find_condition(a, key);
      if (c == nullptr) continue;
      any = true;
      const auto& s = c->summary;
      md.add({fmt::format("{} α={}", steering_mode_name(key.mode), format_multiplier(key.multiplier)),
              format_signed(s.d_ask.d), format_p(s.d_ask.p), format_signed(s.d_pro.d), format_p(s.d_pro.p),
              format_percent(s.zero_tc)});
      csv.add({std::string(trait_name(t)), condition_label(key), num(s.d_ask.d), num(s.d_ask.p), num(s.d_pro.d),
               num(s.d_pro.p), num(s.zero_tc)});
    }
    if (any) text += fmt::format("### {}\n\n{}\n", trait_display(t), md.render());
  }
  files.push_back({"reports/decode_only.md", text});
  files.push_back({"reports/decode_only.csv", csv.text()});
  combined += text;
}

void render_dose(const ReportInputs& in, const RunAnalysis& a, std::vector<ReportFile>& files,
                 std::string& combined) {
  const auto& cfg = in.config;
  std::string text = "## Dose-response\n\n";
  Csv csv({"trait", "condition", "mean_ask", "delta_ask", "p_ask", "d_ask", "mean_pro", "d_pro", "zero_tc"});
  Csv labels({"trait", "mode", "label"});
  std::vector<SteeringMode> order;
  // decode first, then all, then prefill, restricted to configured modes
  for (SteeringMode m : {SteeringMode::decode_only, SteeringMode::all_positions, SteeringMode::prefill_only}) {
    if (std::find(cfg.modes.begin(), cfg.modes.end(), m) != cfg.modes.end()) order.push_back(m);
  }
  std::vector<double> grid = cfg.multipliers;
  std::sort(grid.begin(), grid.end());
  for (Trait t : cfg.traits) {
    MarkdownTable md({"Condition", "ask", "Δask", "p", "d(ask)", "pro", "d(pro)", "∅TC%"});
    std::string label_lines;
    bool any = false;
    for (SteeringMode mode : order) {
      std::vector<DosePoint> points;
      std::string series = "# multiplier d_pro d_ask zero_tc mean_pro mean_ask\n";
      for (double m : grid) {
        const ConditionKey key{t, mode, m};
        const auto* c = find_condition(a, key);
        if (c == nullptr) continue;
        any = true;
        const auto& s = c->summary;
        md.add({fmt::format("{} α={}", mode_short(mode), format_multiplier(m)), fmt::format("{:.2f}", c->means.ask),
                format_signed(c->means.ask - a.baseline.ask), format_p(s.d_ask.p), format_signed(s.d_ask.d),
                fmt::format("{:.2f}", c->means.pro), format_signed(s.d_pro.d), format_percent(s.zero_tc)});
        csv.add({std::string(trait_name(t)), condition_label(key), num(c->means.ask), num(c->means.ask - a.baseline.ask),
                 num(s.d_ask.p), num(s.d_ask.d), num(c->means.pro), num(s.d_pro.d), num(s.zero_tc)});
        points.push_back({m, s.d_pro.d, s.zero_tc});
        series += fmt::format("{} {} {} {} {} {}\n", num(m), num(s.d_pro.d), num(s.d_ask.d), num(s.zero_tc),
                              num(c->means.pro), num(c->means.ask));
      }
      if (points.empty()) continue;
      std::string label = "n/a";
      if (points.size() >= 3) label = std::string(dose_label_name(classify_dose_response(points, cfg.dose)));
      labels.add({std::string(trait_name(t)), std::string(steering_mode_name(mode)), label});
      label_lines += fmt::format("- {}: {}\n", steering_mode_name(mode), label);
      files.push_back({fmt::format("reports/plots/dose_{}_{}.dat", trait_name(t), steering_mode_name(mode)), series});
    }
    if (any) {
      text += fmt::format("### {}\n\nBaseline: ask {:.2f}, pro {:.2f}, ∅TC {}.\n\n{}\nCurve labels:\n{}\n",
                          trait_display(t), a.baseline.ask, a.baseline.pro, format_percent(a.baseline.zero_tc),
                          md.render(), label_lines);
    }
  }
  const auto& d = cfg.dose;
  text += fmt::format(
      "Label thresholds: suppression if max d(pro) < {}; phase_transition if interior ∅TC exceeds both ends by >= {} "
      "and final d(pro) >= {}; inverted_u if d(pro) >= {} then ∅TC >= {} at a larger α.\n",
      num(d.suppression_max_d), num(d.transition_margin), num(d.transition_final_d), num(d.effect_d),
      num(d.collapse_zero_tc));
  files.push_back({"reports/dose_response.md", text});
  files.push_back({"reports/dose_response.csv", csv.text()});
  files.push_back({"reports/dose_labels.csv", labels.text()});
  combined += text + "\n";
}

void render_cross(const ReportInputs& in, const RunAnalysis& a, std::vector<ReportFile>& files,
                  std::string& combined) {
  const auto& cfg = in.config;
  std::string text = fmt::format("## Cross-trait specificity (α={}, {})\n\n", format_multiplier(cfg.cross_trait_multiplier),
                                 steering_mode_name(cfg.cross_trait_mode));
  if (!a.cross) {
    text += "Not available: every trait must be run at this multiplier and mode.\n";
    files.push_back({"reports/cross_trait.md", text});
    combined += text + "\n";
    return;
  }
  const auto& m = *a.cross;
  MarkdownTable md({"Steered", "Auton.", "Tool Use", "Persist.", "Risk", "Defer.", "Ratio"});
  Csv csv({"steered", "proxy", "d", "ci_low", "ci_high", "p"});
  Csv ratios({"steered", "specificity_ratio"});
  std::string dat = "# steered_index proxy_index d\n";
  for (Trait t : kAllTraits) {
    std::vector<std::string> row{trait_display(t)};
    for (Trait q : kAllTraits) {
      const auto& e = m.cells[trait_index(t)][trait_index(q)];
      std::string cell = format_signed(e.d) + significance_stars(e.p);
      if (t == q) cell = "**" + cell + "**";
      row.push_back(cell);
      csv.add({std::string(trait_name(t)), std::string(trait_name(q)), num(e.d), num(e.ci_low), num(e.ci_high), num(e.p)});
      dat += fmt::format("{} {} {}\n", trait_index(t), trait_index(q), num(e.d));
    }
    row.push_back(ratio_text(m.specificity_ratios[trait_index(t)]));
    ratios.add({std::string(trait_name(t)), num(m.specificity_ratios[trait_index(t)])});
    md.add(std::move(row));
  }
  text += md.render();
  text += "\nCells are Cohen's d against the baseline; *** p < 0.001, ** p < 0.01, * p < 0.05. Ratio = |diagonal d| / "
          "max off-diagonal |d|.\n";
  files.push_back({"reports/cross_trait.md", text});
  files.push_back({"reports/cross_trait.csv", csv.text()});
  files.push_back({"reports/specificity.csv", ratios.text()});
  files.push_back({"reports/plots/cross_trait.dat", dat});
  combined += text + "\n";
}

void render_tools(const ReportInputs&, const RunAnalysis& a, std::vector<ReportFile>& files, std::string& combined) {
  MarkdownTable md({"Condition", "ask_user", "web_search", "code_exec", "file_r/w", "Total"});
  Csv csv({"condition", "ask_user", "web_search", "code_execute", "file_read", "file_write", "total_calls"});
  auto add = [&](const std::string& display, const std::string& label, const ToolBreakdown& b) {
    const auto& f = b.fraction;
    md.add({display, format_percent(f[tool_index(Tool::ask_user)]), format_percent(f[tool_index(Tool::web_search)]),
            format_percent(f[tool_index(Tool::code_execute)]),
            format_percent(f[tool_index(Tool::file_read)] + f[tool_index(Tool::file_write)]),
            fmt::format("{}", b.total_calls)});
    csv.add({label, num(f[tool_index(Tool::ask_user)]), num(f[tool_index(Tool::web_search)]),
             num(f[tool_index(Tool::code_execute)]), num(f[tool_index(Tool::file_read)]),
             num(f[tool_index(Tool::file_write)]), fmt::format("{}", b.total_calls)});
  };
  add("Baseline", std::string(kBaselineCondition), a.baseline_tools);
  for (const auto& row : a.main) {
    if (!row.best) continue;
    const auto* c = find_condition(a, *row.best);
    const std::string mode = row.best->mode == SteeringMode::all_positions ? "" : ", " + mode_short(row.best->mode);
    add(fmt::format("{} (α={}{})", trait_display(row.trait), format_multiplier(row.best->multiplier), mode),
        condition_label(*row.best), c->tools);
  }
  const std::string text = "## Tool-type composition\n\nBest condition per trait against the baseline.\n\n" + md.render();
  files.push_back({"reports/tool_types.md", text});
  files.push_back({"reports/tool_types.csv", csv.text()});
  combined += text + "\n";
}

void render_geometry(const ReportInputs& in, std::vector<ReportFile>& files, std::string& combined) {
  const auto& cfg = in.config;
  std::string text = "## Vector geometry\n\n";

  MarkdownTable vec({"Trait", "SAE", "Layer", "‖v‖", "λ", "R²"});
  Csv vcsv({"trait", "sae_id", "layer", "norm", "lambda", "r2_holdout"});
  std::vector<SteeringVector> ordered;
  for (Trait t : cfg.traits) {
    const auto* v = find_vector(in, t);
    const auto* p = find_probe(in, t);
    if (v == nullptr || p == nullptr) continue;
    ordered.push_back(*v);
    vec.add({trait_display(t), sae_display_name(p->sae_id), fmt::format("{}", v->layer), fmt::format("{:.3f}", v->norm),
             num(p->probe.ridge_lambda), fmt::format("{:.3f}", p->probe.r2_holdout)});
    vcsv.add({std::string(trait_name(t)), p->sae_id, fmt::format("{}", v->layer), num(v->norm),
              num(p->probe.ridge_lambda), num(p->probe.r2_holdout)});
  }
  text += "### Steering vectors\n\n" + vec.render() + "\n";
  files.push_back({"reports/vectors.csv", vcsv.text()});

  // Pairwise cosines in residual space; † marks vectors at different layers.
  if (ordered.size() >= 2) {
    const auto cm = cosine_matrix(ordered);
    MarkdownTable pairs({"Pair", "Cosine Similarity"});
    Csv ccsv({"trait_a", "trait_b", "cosine", "cross_layer"});
    for (std::size_t i = 0; i < ordered.size(); ++i) {
      for (std::size_t j = i + 1; j < ordered.size(); ++j) {
        const bool cross = cm.cross_layer[i][j];
        pairs.add({fmt::format("{} / {}", trait_display(ordered[i].trait), trait_display(ordered[j].trait)),
                   format_signed(cm.values(i, j), 3) + (cross ? " †" : "")});
        ccsv.add({std::string(trait_name(ordered[i].trait)), std::string(trait_name(ordered[j].trait)),
                  num(cm.values(i, j)), cross ? "true" : "false"});
      }
    }
    text += "### Pairwise cosine similarity (residual stream)\n\n" + pairs.render() +
            "\n† the two vectors act at different layers, so their cosine is not directly comparable.\n\n";
    files.push_back({"reports/cosines.csv", ccsv.text()});
  }

  // Risk-calibration against tool use, the pair that shares an SAE by design
  // in the reference setting.
  const auto* risk_p = find_probe(in, Trait::risk_calibration);
  const auto* tool_p = find_probe(in, Trait::tool_use);
  const auto* risk_v = find_vector(in, Trait::risk_calibration);
  const auto* tool_v = find_vector(in, Trait::tool_use);
  if (risk_p && tool_p && risk_v && tool_v) {
    MarkdownTable md({"Metric", "Value"});
    Csv csv({"metric", "value"});
    const bool same_sae = risk_p->sae_id == tool_p->sae_id;
    if (same_sae) {
      const double c = cosine_similarity(risk_p->probe.w, tool_p->probe.w);
      md.add({"Cosine similarity (SAE feature space)", format_signed(c, 3)});
      csv.add({"cosine_feature_space", num(c)});
    } else {
      md.add({"Cosine similarity (SAE feature space)", "n/a (different SAEs)"});
      csv.add({"cosine_feature_space", ""});
    }
    if (risk_v->v.size() == tool_v->v.size()) {
      const double c = cosine_similarity(risk_v->v, tool_v->v);
      const auto split = variance_split(risk_v->v, tool_v->v);
      md.add({std::string("Cosine similarity (residual stream)") + (risk_v->layer != tool_v->layer ? " †" : ""),
              format_signed(c, 3)});
      md.add({"Risk-cal variance parallel to tool-use", fmt::format("{:.2f}%", split.parallel_pct)});
      md.add({"Risk-cal variance orthogonal to tool-use", fmt::format("{:.2f}%", split.orthogonal_pct)});
      csv.add({"cosine_residual", num(c)});
      csv.add({"parallel_pct", num(split.parallel_pct)});
      csv.add({"orthogonal_pct", num(split.orthogonal_pct)});
    }
    text += "### Risk calibration vs tool use\n\n" + md.render() + "\n";
    files.push_back({"reports/dissociation.csv", csv.text()});
  }

  // Feature concentration of the probe weights.
  {
    MarkdownTable md({"Trait", "SAE", "50%", "80%", "90%", "95%"});
    Csv csv({"trait", "threshold", "features_needed", "fraction_of_dict"});
    for (Trait t : cfg.traits) {
      const auto* p = find_probe(in, t);
      if (p == nullptr) continue;
      const double norm = std::sqrt(dot(p->probe.w, p->probe.w));
      if (!(norm > 0.0)) continue;
      const auto curve = concentration(p->probe.w);
      std::vector<std::string> row{trait_display(t), sae_display_name(p->sae_id)};
      for (std::size_t i = 0; i < curve.thresholds.size(); ++i) {
        row.push_back(fmt::format("{} ({:.1f}%)", curve.features_needed[i], 100.0 * curve.fractions_of_dict[i]));
        csv.add({std::string(trait_name(t)), num(curve.thresholds[i]), fmt::format("{}", curve.features_needed[i]),
                 num(curve.fractions_of_dict[i])});
      }
      md.add(std::move(row));
    }
    text += "### Probe-weight concentration\n\nFeatures needed to explain each fraction of ‖w‖² (share of the "
            "dictionary in parentheses).\n\n" + md.render();
    files.push_back({"reports/concentration.csv", csv.text()});
  }
  files.push_back({"reports/geometry.md", text});
  combined += text + "\n";
}

}  // namespace

std::filesystem::path vector_file(Trait trait) {
  return std::filesystem::path("vectors") / fmt::format("{}.qstv", trait_name(trait));
}

ReportInputs load_report_inputs(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  const auto expected = fmt::format("expected {}, {}, {} and vectors/<trait>.qstv for every configured trait",
                                    kRunConfigFile, kProbesFile, kTrajectoriesFile);
  std::vector<std::string> missing;
  for (std::string_view rel : {kRunConfigFile, kProbesFile, kTrajectoriesFile}) {
    if (!fs::is_regular_file(dir / rel)) missing.emplace_back(rel);
  }
  if (!missing.empty() && fs::is_regular_file(dir / kRunConfigFile) == false) {
    missing.emplace_back("vectors/<trait>.qstv");
  }
  ReportInputs in;
  if (fs::is_regular_file(dir / kRunConfigFile)) {
    in.config = load_run_config(dir / kRunConfigFile);
    for (Trait t : in.config.traits) {
      if (!fs::is_regular_file(dir / vector_file(t))) missing.push_back(vector_file(t).generic_string());
    }
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw IoError(fmt::format("{}: missing report inputs: {} ({})", dir.string(), list, expected));
  }
  in.config.output_dir = dir;
  in.rollouts = read_trajectories(dir / kTrajectoriesFile);
  in.probes = read_probes(dir / kProbesFile);
  for (Trait t : in.config.traits) in.vectors.push_back(load_steering_vector(dir / vector_file(t)));
  return in;
}

std::vector<double> pro_samples(std::span<const RolloutResult> results) {
  std::vector<double> out;
  out.reserve(results.size());
  for (const auto& r : results) out.push_back(static_cast<double>(r.proxies.tool_count));
  return out;
}

std::vector<double> ask_samples(std::span<const RolloutResult> results) {
  std::vector<double> out;
  out.reserve(results.size());
  for (const auto& r : results) out.push_back(static_cast<double>(ask_user_count(r.trajectory)));
  return out;
}

ProxySamples proxy_samples(std::span<const RolloutResult> results) {
  ProxySamples s;
  for (Trait t : kAllTraits) s.by_proxy[trait_index(t)] = proxy_column(results, t);
  return s;
}

ConditionSummary summarize_condition(const ConditionKey& key, std::span<const RolloutResult> steered,
                                     std::span<const RolloutResult> baseline, const BootstrapOptions* bootstrap) {
  ConditionSummary s;
  s.trait = key.trait;
  s.mode = key.mode;
  s.multiplier = key.multiplier;
  const auto ask_a = ask_samples(steered);
  const auto ask_b = ask_samples(baseline);
  const auto pro_a = pro_samples(steered);
  const auto pro_b = pro_samples(baseline);
  if (bootstrap != nullptr) {
    BootstrapOptions ask_opt = *bootstrap;
    ask_opt.seed = derive_seed(bootstrap->seed, "ask");
    BootstrapOptions pro_opt = *bootstrap;
    pro_opt.seed = derive_seed(bootstrap->seed, "pro");
    s.d_ask = effect_report(ask_a, ask_b, ask_opt);
    s.d_pro = effect_report(pro_a, pro_b, pro_opt);
  } else {
    s.d_ask = effect_report_no_ci(ask_a, ask_b);
    s.d_pro = effect_report_no_ci(pro_a, pro_b);
  }
  s.zero_tc = zero_tool_call_rate(steered);
  return s;
}

std::string assign_tier(const EffectReport& d_pro, const TierThresholds& tiers, double bonferroni) {
  if (d_pro.d >= tiers.tier1_d && d_pro.p < bonferroni) return "1";
  if (d_pro.d >= tiers.tier2_d && d_pro.p < bonferroni) return "2";
  if (d_pro.d >= tiers.tier3_d && d_pro.p < tiers.tier3_p) return "3";
  return "fail";
}

RunAnalysis analyze_run(const ReportInputs& in) {
  const auto& cfg = in.config;
  std::map<std::string, std::vector<RolloutResult>> groups;
  for (const auto& r : in.rollouts) groups[r.trajectory.condition].push_back(r);
  for (auto& [label, g] : groups) {
    std::stable_sort(g.begin(), g.end(), [](const RolloutResult& a, const RolloutResult& b) {
      return a.trajectory.scenario_id < b.trajectory.scenario_id;
    });
  }
  const auto base_it = groups.find(std::string(kBaselineCondition));
  if (base_it == groups.end() || base_it->second.size() < 2) {
    throw IoError("trajectories contain fewer than two baseline rollouts");
  }
  const auto& baseline = base_it->second;

  RunAnalysis a;
  a.baseline = group_means(baseline);
  a.baseline_tools = tool_type_breakdown(std::span<const RolloutResult>(baseline));
  a.baseline_n = baseline.size();

  for (Trait t : cfg.traits) {
    for (SteeringMode mode : cfg.modes) {
      for (double m : cfg.multipliers) {
        const ConditionKey key{t, mode, m};
        const auto it = groups.find(condition_label(key));
        if (it == groups.end()) continue;
        const auto boot = bootstrap_for(cfg, condition_label(key));
        ConditionAnalysis c;
        c.key = key;
        c.summary = summarize_condition(key, it->second, baseline, &boot);
        c.means = group_means(it->second);
        c.tools = tool_type_breakdown(std::span<const RolloutResult>(it->second));
        a.conditions.push_back(std::move(c));
      }
    }
  }

  for (Trait t : cfg.traits) {
    MainRow row;
    row.trait = t;
    if (const auto* p = find_probe(in, t)) {
      row.sae = sae_display_name(p->sae_id);
      row.layer = p->hook.layer_index;
      row.r2 = p->probe.r2_holdout;
    }
    const ConditionAnalysis* best = nullptr;
    for (SteeringMode mode : cfg.modes) {
      for (double m : cfg.table_multipliers) {
        const auto* c = find_condition(a, {t, mode, m});
        if (c != nullptr && (best == nullptr || c->summary.d_pro.d > best->summary.d_pro.d)) best = c;
      }
    }
    if (best != nullptr) {
      row.best = best->key;
      row.d_ask = best->summary.d_ask;
      row.d_pro = best->summary.d_pro;
      row.zero_tc = best->summary.zero_tc;
      row.tier = assign_tier(row.d_pro, cfg.tiers, cfg.bonferroni());
    } else {
      row.tier = "fail";
    }
    a.main.push_back(std::move(row));
  }

  std::vector<std::optional<ProxySamples>> steered(kTraitCount);
  bool complete = true;
  for (Trait t : kAllTraits) {
    const auto it = groups.find(condition_label({t, cfg.cross_trait_mode, cfg.cross_trait_multiplier}));
    if (it == groups.end()) {
      complete = false;
      break;
    }
    steered[trait_index(t)] = proxy_samples(it->second);
  }
  if (complete) {
    const auto boot = bootstrap_for(cfg, "cross_trait");
    a.cross = build_cross_trait_matrix(steered, proxy_samples(baseline), &boot);
  }
  return a;
}

std::vector<ReportFile> render_report(const ReportInputs& in) {
  const auto a = analyze_run(in);
  std::vector<ReportFile> files;
  std::string combined = "# Steering report\n\n";
  combined += fmt::format("Seed {}, {} scenarios, planted mixing {}.\n\n", in.config.seed, a.baseline_n,
                          num(in.config.model.mix_weight));
  render_main(in, a, files, combined);
  render_conditions(a, files);
  render_decode_only(in, a, files, combined);
  render_dose(in, a, files, combined);
  render_cross(in, a, files, combined);
  render_tools(in, a, files, combined);
  render_geometry(in, files, combined);
  files.push_back({"reports/report.md", combined});
  std::sort(files.begin(), files.end(), [](const ReportFile& x, const ReportFile& y) { return x.path < y.path; });
  return files;
}

void write_report(const std::filesystem::path& dir, std::span<const ReportFile> files) {
  for (const auto& f : files) {
    const auto path = dir / f.path;
    ensure_directory(path.parent_path());
    write_text(path, f.content);
  }
}

std::string format_signed(double x, int decimals) {
  auto s = fmt::format("{:+.{}f}", x, decimals);
  if (s[0] == '-' && s.find_first_not_of("-0.") == std::string::npos) s[0] = '+';
  return s;
}

std::string format_p(double p) {
  if (p < 0.0001) return "<0.0001";
  if (p < 0.01) return fmt::format("{:.4f}", p);
  return fmt::format("{:.3f}", p);
}

std::string format_percent(double fraction) {
  const double pct = 100.0 * fraction;
  if (pct > 0.0 && pct < 0.5) return "<1%";
  return fmt::format("{:.0f}%", pct);
}

std::string significance_stars(double p) {
  if (p < 0.001) return "***";
  if (p < 0.01) return "**";
  if (p < 0.05) return "*";
  return "";
}

std::string condition_display(const ConditionKey& key) {
  return fmt::format("{}, α={}", mode_short(key.mode), format_multiplier(key.multiplier));
}

}  // namespace saesteer
