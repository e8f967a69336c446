#include "saesteer/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>
#include <sstream>
#include <utility>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "saesteer/error.hpp"
#include "saesteer/io.hpp"

namespace saesteer {

namespace {

namespace pt = boost::property_tree;

using KeyValues = std::vector<std::pair<std::string, std::string>>;

struct Section {
  std::string name;
  KeyValues entries;
};

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const auto end = comma == std::string_view::npos ? s.size() : comma;
    auto item = trim(s.substr(start, end - start));
    if (!item.empty()) out.push_back(std::move(item));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

[[noreturn]] void bad_value(std::string_view where, std::string_view value, std::string_view what) {
  throw ConfigError(fmt::format("{}: cannot parse '{}' as {}", where, value, what));
}

double to_double(std::string_view where, std::string_view text) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  const auto r = std::from_chars(text.data(), end, v);
  if (r.ec != std::errc() || r.ptr != end || !std::isfinite(v)) bad_value(where, text, "a number");
  return v;
}

std::uint64_t to_u64(std::string_view where, std::string_view text) {
  std::uint64_t v = 0;
  const auto* end = text.data() + text.size();
  const auto r = std::from_chars(text.data(), end, v);
  if (r.ec != std::errc() || r.ptr != end) bad_value(where, text, "a non-negative integer");
  return v;
}

bool to_bool(std::string_view where, std::string_view text) {
  if (text == "true" || text == "yes" || text == "1") return true;
  if (text == "false" || text == "no" || text == "0") return false;
  bad_value(where, text, "a boolean");
}

std::string fmt_double(double v) { return fmt::format("{}", v); }

template <typename T, typename F>
std::string join(const std::vector<T>& items, F&& render) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) out += ",";
    out += render(items[i]);
  }
  return out;
}

// Reads keys from one section, tracking which ones were consumed so leftovers
// can be reported.
class SectionReader {
 public:
  SectionReader(std::string name, const pt::ptree& tree) : name_(std::move(name)) {
    for (const auto& [key, child] : tree) {
      if (!child.empty()) throw ConfigError(fmt::format("[{}] {}: nested keys are not allowed", name_, key));
      values_.emplace(key, trim(child.data()));
    }
  }

  std::optional<std::string> raw(const std::string& key) {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    used_.insert(key);
    return it->second;
  }

  std::string where(const std::string& key) const { return fmt::format("[{}] {}", name_, key); }

  void read(const std::string& key, double& out) {
    if (auto v = raw(key)) out = to_double(where(key), *v);
  }
  void read(const std::string& key, std::size_t& out) {
    if (auto v = raw(key)) out = static_cast<std::size_t>(to_u64(where(key), *v));
  }
  void read_u64(const std::string& key, std::uint64_t& out) {
    if (auto v = raw(key)) out = to_u64(where(key), *v);
  }
  void read(const std::string& key, bool& out) {
    if (auto v = raw(key)) out = to_bool(where(key), *v);
  }
  void read(const std::string& key, std::vector<double>& out) {
    if (auto v = raw(key)) {
      out.clear();
      for (const auto& item : split_list(*v)) out.push_back(to_double(where(key), item));
    }
  }
  void read(const std::string& key, TraitIntensity& out) {
    if (auto v = raw(key)) {
      const auto items = split_list(*v);
      if (items.size() == 1) {
        out.fill(to_double(where(key), items[0]));
      } else if (items.size() == kTraitCount) {
        for (std::size_t i = 0; i < kTraitCount; ++i) out[i] = to_double(where(key), items[i]);
      } else {
        throw ConfigError(fmt::format("{}: expected 1 or {} values, got {}", where(key), kTraitCount,
                                      items.size()));
      }
    }
  }

  template <typename F>
  void read_with(const std::string& key, F&& parse) {
    if (auto v = raw(key)) {
      try {
        parse(*v);
      } catch (const ConfigError&) {
        throw;
      } catch (const Error& e) {
        throw ConfigError(fmt::format("{}: {}", where(key), e.what()));
      }
    }
  }

  void finish() const {
    for (const auto& [key, value] : values_) {
      if (!used_.contains(key)) throw ConfigError(fmt::format("[{}]: unknown key '{}'", name_, key));
    }
  }

 private:
  std::string name_;
  std::map<std::string, std::string> values_;
  std::set<std::string> used_;
};

void read_sae_keys(SectionReader& r, SaeConfig& c, bool allow_seed) {
  r.read("dict_size", c.dict_size);
  r.read("k", c.k);
  r.read("base_lr", c.base_lr);
  r.read("warmup_steps", c.warmup_steps);
  r.read("decay_fraction", c.decay_fraction);
  r.read("total_steps", c.total_steps);
  r.read("aux_k", c.aux_k);
  r.read("aux_coeff", c.aux_coeff);
  r.read("resample_interval", c.resample_interval);
  r.read("dead_window", c.dead_window);
  r.read("buffer_capacity", c.buffer_capacity);
  r.read("batch_size", c.batch_size);
  if (allow_seed) r.read_u64("seed", c.seed);
}

KeyValues sae_entries(const SaeConfig& c) {
  return {{"dict_size", fmt::format("{}", c.dict_size)},
          {"k", fmt::format("{}", c.k)},
          {"base_lr", fmt_double(c.base_lr)},
          {"warmup_steps", fmt::format("{}", c.warmup_steps)},
          {"decay_fraction", fmt_double(c.decay_fraction)},
          {"total_steps", fmt::format("{}", c.total_steps)},
          {"aux_k", fmt::format("{}", c.aux_k)},
          {"aux_coeff", fmt_double(c.aux_coeff)},
          {"resample_interval", fmt::format("{}", c.resample_interval)},
          {"dead_window", fmt::format("{}", c.dead_window)},
          {"buffer_capacity", fmt::format("{}", c.buffer_capacity)},
          {"batch_size", fmt::format("{}", c.batch_size)}};
}

SaeConfig derived_sae(const RunConfig& config, const HookPoint& hook) {
  SaeConfig c = config.sae;
  c.input_dim = config.model.hidden_dim;
  c.seed = derive_seed(config.seed_for("sae"), hook_label(hook));
  return c;
}

std::string intensity_text(const TraitIntensity& v) {
  if (std::all_of(v.begin(), v.end(), [&](double x) { return x == v[0]; })) return fmt_double(v[0]);
  std::vector<double> items(v.begin(), v.end());
  return join(items, fmt_double);
}

std::vector<Section> render_sections(const RunConfig& c, bool full_sae_sections) {
  std::vector<Section> out;
  out.push_back({"run",
                 {{"seed", fmt::format("{}", c.seed)},
                  {"traits", join(c.traits, [](Trait t) { return std::string(trait_name(t)); })},
                  {"multipliers", join(c.multipliers, fmt_double)},
                  {"modes", join(c.modes, [](SteeringMode m) { return std::string(steering_mode_name(m)); })},
                  {"scenario_count", fmt::format("{}", c.scenario_count)},
                  {"independent_rollout_seeds", c.independent_rollout_seeds ? "true" : "false"}}});
  const auto& m = c.model;
  out.push_back({"model",
                 {{"n_blocks", fmt::format("{}", m.n_blocks)},
                  {"hidden_dim", fmt::format("{}", m.hidden_dim)},
                  {"vocab_size", fmt::format("{}", m.vocab_size)},
                  {"mix_weight", fmt_double(m.mix_weight)},
                  {"injection_layer", fmt::format("{}", m.injection_layer)},
                  {"embedding_scale", fmt_double(m.embedding_scale)},
                  {"output_scale", fmt_double(m.output_scale)}}});
  out.push_back({"hooks", {{"points", join(c.hooks, [](const HookPoint& h) { return hook_label(h); })}}});
  auto sae = sae_entries(c.sae);
  sae.emplace_back("log_every", fmt::format("{}", c.sae_log_every));
  out.push_back({"sae", std::move(sae)});
  for (std::size_t i = 0; i < c.hooks.size() && i < c.sae_per_hook.size(); ++i) {
    const auto& actual = c.sae_per_hook[i];
    const auto base = derived_sae(c, c.hooks[i]);
    KeyValues entries;
    const auto a = sae_entries(actual);
    const auto b = sae_entries(base);
    for (std::size_t k = 0; k < a.size(); ++k) {
      if (full_sae_sections || a[k].second != b[k].second) entries.push_back(a[k]);
    }
    if (full_sae_sections || actual.seed != base.seed) {
      entries.emplace_back("seed", fmt::format("{}", actual.seed));
    }
    if (!entries.empty()) out.push_back({"sae:" + hook_label(c.hooks[i]), std::move(entries)});
  }
  const auto& co = c.corpus;
  out.push_back({"corpus",
                 {{"sequences", fmt::format("{}", co.sequences)},
                  {"length", fmt::format("{}", co.length)},
                  {"active_probability", fmt_double(co.active_probability)},
                  {"min_magnitude", fmt_double(co.min_magnitude)},
                  {"max_magnitude", fmt_double(co.max_magnitude)}}});
  const auto& p = c.pairs;
  out.push_back({"pairs",
                 {{"templates", fmt::format("{}", p.templates)},
                  {"variations", fmt::format("{}", p.variations)},
                  {"domains", fmt::format("{}", p.domains)},
                  {"sub_templates", fmt::format("{}", p.sub_templates)},
                  {"sub_variations", fmt::format("{}", p.sub_variations)},
                  {"background_spread", fmt_double(p.background_spread)}}});
  out.push_back({"probe",
                 {{"lambda_grid", join(c.lambda_grid, fmt_double)},
                  {"holdout_fraction", fmt_double(c.holdout_fraction)}}});
  const auto& s = c.scenarios;
  out.push_back({"scenarios",
                 {{"disposition_mean", intensity_text(s.mean)},
                  {"disposition_spread", intensity_text(s.spread)},
                  {"prompt_min", fmt::format("{}", s.prompt_min)},
                  {"prompt_max", fmt::format("{}", s.prompt_max)},
                  {"response_length", fmt::format("{}", s.response_length)}}});
  out.push_back({"stats",
                 {{"alpha", fmt_double(c.alpha)},
                  {"bonferroni_m", fmt::format("{}", c.bonferroni_m)},
                  {"bootstrap_resamples", fmt::format("{}", c.bootstrap_resamples)}}});
  out.push_back({"tiers",
                 {{"tier1_d", fmt_double(c.tiers.tier1_d)},
                  {"tier2_d", fmt_double(c.tiers.tier2_d)},
                  {"tier3_d", fmt_double(c.tiers.tier3_d)},
                  {"tier3_p", fmt_double(c.tiers.tier3_p)}}});
  const auto& d = c.dose;
  out.push_back({"dose",
                 {{"suppression_max_d", fmt_double(d.suppression_max_d)},
                  {"effect_d", fmt_double(d.effect_d)},
                  {"collapse_zero_tc", fmt_double(d.collapse_zero_tc)},
                  {"transition_margin", fmt_double(d.transition_margin)},
                  {"transition_final_d", fmt_double(d.transition_final_d)}}});
  out.push_back({"report",
                 {{"table_multipliers", join(c.table_multipliers, fmt_double)},
                  {"cross_trait_multiplier", fmt_double(c.cross_trait_multiplier)},
                  {"cross_trait_mode", std::string(steering_mode_name(c.cross_trait_mode))}}});
  KeyValues seeds;
  for (const auto& [stage, value] : c.seed_overrides) seeds.emplace_back(stage, fmt::format("{}", value));
  if (!seeds.empty()) out.push_back({"seeds", std::move(seeds)});
  return out;
}

std::string section_text(const Section& s) {
  std::string out = fmt::format("[{}]\n", s.name);
  for (const auto& [k, v] : s.entries) out += fmt::format("{} = {}\n", k, v);
  return out;
}

bool is_known_seed_stage(std::string_view stage) {
  return std::find(std::begin(kSeedStages), std::end(kSeedStages), stage) != std::end(kSeedStages);
}

}  // namespace

ToyModelConfig RunConfig::default_model_config() {
  ToyModelConfig m;
  m.n_blocks = 4;
  return m;
}

std::vector<HookPoint> RunConfig::default_hooks() {
  std::vector<HookPoint> hooks;
  for (std::size_t layer : {2, 3, 6, 7, 9, 10, 11, 14, 15}) {
    hooks.push_back({layer, layer % 4 == 3 ? SublayerKind::attention : SublayerKind::delta});
  }
  return hooks;
}

std::uint64_t RunConfig::seed_for(std::string_view stage) const {
  if (auto it = seed_overrides.find(stage); it != seed_overrides.end()) return it->second;
  return derive_seed(seed, stage);
}

const SaeConfig& RunConfig::sae_for(const HookPoint& hook) const {
  if (sae_per_hook.size() != hooks.size()) throw ConfigError("per-hook SAE configs are not resolved");
  for (std::size_t i = 0; i < hooks.size(); ++i) {
    if (hooks[i] == hook) return sae_per_hook[i];
  }
  throw ConfigError(fmt::format("hook {} is not configured", hook_label(hook)));
}

void RunConfig::resolve_sae_configs() {
  sae_per_hook.clear();
  for (const auto& h : hooks) sae_per_hook.push_back(derived_sae(*this, h));
}

void RunConfig::validate() const {
  model.validate();
  if (workers == 0) throw ConfigError("workers must be at least 1");
  if (hooks.empty()) throw ConfigError("at least one hook is required");
  std::set<HookPoint> seen;
  for (const auto& h : hooks) {
    if (h.layer_index >= model.n_layers()) {
      throw ConfigError(fmt::format("hook {} does not exist in a {}-layer model", hook_label(h),
                                    model.n_layers()));
    }
    const auto kind = h.layer_index % 4 == 3 ? SublayerKind::attention : SublayerKind::delta;
    if (kind != h.kind) {
      throw ConfigError(fmt::format("hook {} names the wrong sublayer kind for layer {}", hook_label(h),
                                    h.layer_index));
    }
    if (!seen.insert(h).second) throw ConfigError(fmt::format("hook {} listed twice", hook_label(h)));
  }
  if (sae_per_hook.size() != hooks.size()) throw ConfigError("per-hook SAE configs are not resolved");
  for (const auto& s : sae_per_hook) {
    if (s.input_dim != model.hidden_dim) throw ConfigError("SAE input_dim must equal the model hidden_dim");
    s.validate();
  }
  if (sae_log_every == 0) throw ConfigError("sae log_every must be positive");
  try {
    corpus.validate();
    pairs.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  if (pairs.domains > kDomainCount) throw ConfigError("pairs domains exceeds the number of domains");
  if (lambda_grid.empty()) throw ConfigError("lambda_grid must not be empty");
  for (double l : lambda_grid) {
    if (!(l > 0.0)) throw ConfigError("lambda_grid values must be positive");
  }
  if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) {
    throw ConfigError("holdout_fraction must lie in (0, 1)");
  }
  if (traits.empty()) throw ConfigError("at least one trait is required");
  if (std::set<Trait>(traits.begin(), traits.end()).size() != traits.size()) {
    throw ConfigError("traits listed twice");
  }
  if (multipliers.empty()) throw ConfigError("multiplier grid must not be empty");
  for (double a : multipliers) {
    if (!(a > 0.0)) throw ConfigError("multipliers must be positive");
  }
  if (std::set<double>(multipliers.begin(), multipliers.end()).size() != multipliers.size()) {
    throw ConfigError("multipliers listed twice");
  }
  if (modes.empty()) throw ConfigError("at least one steering mode is required");
  if (std::set<SteeringMode>(modes.begin(), modes.end()).size() != modes.size()) {
    throw ConfigError("modes listed twice");
  }
  if (scenario_count < 2) throw ConfigError("scenario_count must be at least 2");
  if (scenarios.prompt_min < 2 || scenarios.prompt_max < scenarios.prompt_min) {
    throw ConfigError("scenario prompt lengths must satisfy 2 <= prompt_min <= prompt_max");
  }
  for (double s : scenarios.spread) {
    if (s < 0.0) throw ConfigError("disposition_spread must be non-negative");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  if (bonferroni_m == 0) throw ConfigError("bonferroni_m must be positive");
  if (bootstrap_resamples < 1000) throw ConfigError("bootstrap_resamples must be at least 1000");
  if (!(tiers.tier1_d >= tiers.tier2_d && tiers.tier2_d >= tiers.tier3_d)) {
    throw ConfigError("tier thresholds must satisfy tier1_d >= tier2_d >= tier3_d");
  }
  if (!(tiers.tier3_p > 0.0 && tiers.tier3_p <= 1.0)) throw ConfigError("tier3_p must lie in (0, 1]");
  if (table_multipliers.empty()) throw ConfigError("table_multipliers must not be empty");
  for (double m : table_multipliers) {
    if (std::find(multipliers.begin(), multipliers.end(), m) == multipliers.end()) {
      throw ConfigError(fmt::format("table multiplier {} is not in the multiplier grid", m));
    }
  }
  if (std::find(multipliers.begin(), multipliers.end(), cross_trait_multiplier) == multipliers.end()) {
    throw ConfigError("cross_trait_multiplier is not in the multiplier grid");
  }
  if (std::find(modes.begin(), modes.end(), cross_trait_mode) == modes.end()) {
    throw ConfigError("cross_trait_mode is not in the mode list");
  }
  for (const auto& [stage, value] : seed_overrides) {
    if (!is_known_seed_stage(stage)) throw ConfigError(fmt::format("unknown seed stage '{}'", stage));
  }
}

namespace {

void apply_overrides(RunConfig& c, const ConfigOverrides& o) {
  if (o.seed) c.seed = *o.seed;
  if (o.workers) c.workers = *o.workers;
  if (o.output_dir) c.output_dir = *o.output_dir;
}

}  // namespace

RunConfig default_run_config(const ConfigOverrides& overrides) {
  RunConfig c;
  apply_overrides(c, overrides);
  c.resolve_sae_configs();
  c.validate();
  return c;
}

RunConfig parse_run_config(std::string_view text, const ConfigOverrides& overrides) {
  pt::ptree tree;
  try {
    std::istringstream in{std::string(text)};
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(fmt::format("config line {}: {}", e.line(), e.message()));
  }

  RunConfig c;
  std::vector<std::pair<HookPoint, const pt::ptree*>> sae_sections;
  // Sections are processed in a fixed order so per-hook overrides see the
  // final base values regardless of where they appear in the file.
  static const std::vector<std::string> order{"run",  "model", "hooks", "sae",   "corpus", "pairs", "probe",
                                              "scenarios", "stats", "tiers", "dose", "report", "seeds"};
  for (const auto& [name, child] : tree) {
    if (!child.data().empty() && child.empty()) {
      throw ConfigError(fmt::format("key '{}' appears outside any section", name));
    }
    if (name.rfind("sae:", 0) == 0) {
      HookPoint hook;
      try {
        hook = parse_hook_label(name.substr(4));
      } catch (const Error& e) {
        throw ConfigError(fmt::format("[{}]: {}", name, e.what()));
      }
      sae_sections.emplace_back(hook, &child);
    } else if (std::find(order.begin(), order.end(), name) == order.end()) {
      throw ConfigError(fmt::format("unknown section [{}]", name));
    }
  }

  for (const auto& name : order) {
    const auto found = tree.find(name);
    if (found == tree.not_found()) continue;
    SectionReader r(name, found->second);
    if (name == "run") {
      r.read_u64("seed", c.seed);
      r.read("workers", c.workers);
      r.read_with("output_dir", [&](const std::string& v) { c.output_dir = v; });
      r.read_with("traits", [&](const std::string& v) {
        c.traits.clear();
        for (const auto& item : split_list(v)) c.traits.push_back(parse_trait(item));
      });
      r.read("multipliers", c.multipliers);
      r.read_with("modes", [&](const std::string& v) {
        c.modes.clear();
        for (const auto& item : split_list(v)) c.modes.push_back(parse_steering_mode(item));
      });
      r.read("scenario_count", c.scenario_count);
      r.read("independent_rollout_seeds", c.independent_rollout_seeds);
    } else if (name == "model") {
      r.read("n_blocks", c.model.n_blocks);
      r.read("hidden_dim", c.model.hidden_dim);
      r.read("vocab_size", c.model.vocab_size);
      r.read("mix_weight", c.model.mix_weight);
      r.read("injection_layer", c.model.injection_layer);
      r.read("embedding_scale", c.model.embedding_scale);
      r.read("output_scale", c.model.output_scale);
    } else if (name == "hooks") {
      r.read_with("points", [&](const std::string& v) {
        c.hooks.clear();
        for (const auto& item : split_list(v)) c.hooks.push_back(parse_hook_label(item));
      });
    } else if (name == "sae") {
      read_sae_keys(r, c.sae, false);
      r.read("log_every", c.sae_log_every);
    } else if (name == "corpus") {
      r.read("sequences", c.corpus.sequences);
      r.read("length", c.corpus.length);
      r.read("active_probability", c.corpus.active_probability);
      r.read("min_magnitude", c.corpus.min_magnitude);
      r.read("max_magnitude", c.corpus.max_magnitude);
    } else if (name == "pairs") {
      r.read("templates", c.pairs.templates);
      r.read("variations", c.pairs.variations);
      r.read("domains", c.pairs.domains);
      r.read("sub_templates", c.pairs.sub_templates);
      r.read("sub_variations", c.pairs.sub_variations);
      r.read("background_spread", c.pairs.background_spread);
    } else if (name == "probe") {
      r.read("lambda_grid", c.lambda_grid);
      r.read("holdout_fraction", c.holdout_fraction);
    } else if (name == "scenarios") {
      r.read("disposition_mean", c.scenarios.mean);
      r.read("disposition_spread", c.scenarios.spread);
      r.read("prompt_min", c.scenarios.prompt_min);
      r.read("prompt_max", c.scenarios.prompt_max);
      r.read("response_length", c.scenarios.response_length);
    } else if (name == "stats") {
      r.read("alpha", c.alpha);
      r.read("bonferroni_m", c.bonferroni_m);
      r.read("bootstrap_resamples", c.bootstrap_resamples);
    } else if (name == "tiers") {
      r.read("tier1_d", c.tiers.tier1_d);
      r.read("tier2_d", c.tiers.tier2_d);
      r.read("tier3_d", c.tiers.tier3_d);
      r.read("tier3_p", c.tiers.tier3_p);
    } else if (name == "dose") {
      r.read("suppression_max_d", c.dose.suppression_max_d);
      r.read("effect_d", c.dose.effect_d);
      r.read("collapse_zero_tc", c.dose.collapse_zero_tc);
      r.read("transition_margin", c.dose.transition_margin);
      r.read("transition_final_d", c.dose.transition_final_d);
    } else if (name == "report") {
      r.read("table_multipliers", c.table_multipliers);
      r.read("cross_trait_multiplier", c.cross_trait_multiplier);
      r.read_with("cross_trait_mode", [&](const std::string& v) { c.cross_trait_mode = parse_steering_mode(v); });
    } else if (name == "seeds") {
      for (const auto& [stage, child] : found->second) {
        if (!is_known_seed_stage(stage)) throw ConfigError(fmt::format("[seeds]: unknown stage '{}'", stage));
        std::uint64_t v = 0;
        r.read_u64(stage, v);
        c.seed_overrides[stage] = v;
      }
    }
    r.finish();
  }

  apply_overrides(c, overrides);
  c.resolve_sae_configs();
  for (const auto& [hook, child] : sae_sections) {
    const auto it = std::find(c.hooks.begin(), c.hooks.end(), hook);
    if (it == c.hooks.end()) {
      throw ConfigError(fmt::format("[sae:{}]: hook is not listed in [hooks]", hook_label(hook)));
    }
    SectionReader r("sae:" + hook_label(hook), *child);
    read_sae_keys(r, c.sae_per_hook[static_cast<std::size_t>(it - c.hooks.begin())], true);
    r.finish();
  }
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path, const ConfigOverrides& overrides) {
  const std::string text = read_text(path);
  try {
    return parse_run_config(text, overrides);
  } catch (const ConfigError& e) {
    throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

std::string render_run_config(const RunConfig& config) {
  std::string out;
  const auto sections = render_sections(config, false);
  for (std::size_t i = 0; i < sections.size(); ++i) {
    if (i > 0) out += "\n";
    out += section_text(sections[i]);
  }
  return out;
}

std::string config_section_text(const RunConfig& config, std::string_view section) {
  for (const auto& s : render_sections(config, true)) {
    if (s.name == section) return section_text(s);
  }
  throw ConfigError(fmt::format("no config section named [{}]", section));
}

}  // namespace saesteer
