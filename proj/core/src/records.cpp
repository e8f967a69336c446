#include "saesteer/records.hpp"

#include <charconv>
#include <cmath>
#include <functional>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "saesteer/error.hpp"
#include "saesteer/hash.hpp"
#include "saesteer/io.hpp"

namespace saesteer {

namespace {

using json = nlohmann::ordered_json;

json tokens_json(const TokenSequence& seq) {
  json ids = json::array();
  json intensities = json::array();
  for (const auto& t : seq) {
    ids.push_back(t.id);
    intensities.push_back(json(std::vector<double>(t.intensity.begin(), t.intensity.end())));
  }
  return json{{"ids", ids}, {"intensity", intensities}};
}

TokenSequence tokens_from_json(const json& j) {
  const auto& ids = j.at("ids");
  const auto& intensities = j.at("intensity");
  if (ids.size() != intensities.size()) throw ArgumentError("ids and intensity lengths differ");
  TokenSequence seq(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    seq[i].id = ids[i].get<TokenId>();
    const auto v = intensities[i].get<std::vector<double>>();
    if (v.size() != kTraitCount) throw ArgumentError("token intensity must have one value per trait");
    std::copy(v.begin(), v.end(), seq[i].intensity.begin());
  }
  return seq;
}

std::string_view pair_kind_name(PairKind k) {
  return k == PairKind::composite ? "composite" : "sub_behavior";
}

PairKind parse_pair_kind(std::string_view s) {
  if (s == "composite") return PairKind::composite;
  if (s == "sub_behavior") return PairKind::sub_behavior;
  throw ArgumentError(fmt::format("unknown pair kind '{}'", s));
}

json hook_json(const HookPoint& h) { return hook_label(h); }

json pair_json(const ContrastivePair& p) {
  json j;
  j["trait"] = trait_name(p.trait);
  j["kind"] = pair_kind_name(p.kind);
  j["template_id"] = p.template_id;
  j["variation_id"] = p.variation_id;
  j["domain"] = domain_name(p.domain);
  j["sub_behavior"] = p.sub_behavior ? json(*p.sub_behavior) : json(nullptr);
  j["high"] = tokens_json(p.high);
  j["low"] = tokens_json(p.low);
  return j;
}

ContrastivePair pair_from_json(const json& j) {
  ContrastivePair p;
  p.trait = parse_trait(j.at("trait").get<std::string>());
  p.kind = parse_pair_kind(j.at("kind").get<std::string>());
  p.template_id = j.at("template_id").get<std::size_t>();
  p.variation_id = j.at("variation_id").get<std::size_t>();
  p.domain = parse_domain(j.at("domain").get<std::string>());
  if (!j.at("sub_behavior").is_null()) p.sub_behavior = j.at("sub_behavior").get<std::size_t>();
  p.high = tokens_from_json(j.at("high"));
  p.low = tokens_from_json(j.at("low"));
  return p;
}

json proxies_json(const ProxyVector& p) {
  return json{{"autonomy", p.autonomy},
              {"tool_count", p.tool_count},
              {"persistence_turns", p.persistence_turns},
              {"risk_fraction", p.risk_fraction},
              {"deference", p.deference}};
}

json rollout_json(const RolloutResult& r) {
  const auto& t = r.trajectory;
  json calls = json::array();
  for (const auto& c : t.calls) calls.push_back(json{{"name", tool_name(c.name)}, {"turn", c.turn_index}});
  json j;
  j["scenario_id"] = t.scenario_id;
  j["condition"] = t.condition;
  j["calls"] = calls;
  j["turns"] = t.turns_used;
  j["termination"] = termination_name(t.terminated);
  j["proxies"] = proxies_json(r.proxies);
  return j;
}

RolloutResult rollout_from_json(const json& j) {
  RolloutResult r;
  auto& t = r.trajectory;
  t.scenario_id = j.at("scenario_id").get<std::size_t>();
  t.condition = j.at("condition").get<std::string>();
  for (const auto& c : j.at("calls")) {
    t.calls.push_back({parse_tool(c.at("name").get<std::string>()), c.at("turn").get<std::size_t>()});
  }
  t.turns_used = j.at("turns").get<std::size_t>();
  t.terminated = parse_termination(j.at("termination").get<std::string>());
  r.proxies = extract_proxies(t);
  if (j.contains("proxies") && j.at("proxies") != proxies_json(r.proxies)) {
    throw ArgumentError("stored proxies do not match the trajectory");
  }
  return r;
}

json stats_json(const TrainStats& s) {
  return json{{"step", s.step},
              {"mse", s.mse},
              {"aux_loss", s.aux_loss},
              {"dead_count", s.dead_count},
              {"lr", s.lr}};
}

TrainStats stats_from_json(const json& j) {
  TrainStats s;
  s.step = j.at("step").get<std::size_t>();
  s.mse = j.at("mse").get<double>();
  s.aux_loss = j.at("aux_loss").get<double>();
  s.dead_count = j.at("dead_count").get<std::size_t>();
  s.lr = j.at("lr").get<double>();
  return s;
}

json tas_json(const TasRecord& r) {
  json top = json::array();
  for (const auto& [index, value] : r.top_features) top.push_back(json{{"feature", index}, {"tas", value}});
  return json{{"trait", trait_name(r.trait)},   {"hook", hook_json(r.hook)},
              {"sae_id", r.sae_id},             {"mean_abs_tas", r.mean_abs_tas},
              {"selected", r.selected},         {"top_features", top}};
}

TasRecord tas_from_json(const json& j) {
  TasRecord r;
  r.trait = parse_trait(j.at("trait").get<std::string>());
  r.hook = parse_hook_label(j.at("hook").get<std::string>());
  r.sae_id = j.at("sae_id").get<std::string>();
  r.mean_abs_tas = j.at("mean_abs_tas").get<double>();
  r.selected = j.at("selected").get<bool>();
  for (const auto& f : j.at("top_features")) {
    r.top_features.emplace_back(f.at("feature").get<std::size_t>(), f.at("tas").get<double>());
  }
  return r;
}

json probe_json(const ProbeRecord& r) {
  json scores = json::array();
  for (const auto& s : r.scores) scores.push_back(json{{"lambda", s.ridge_lambda}, {"r2_holdout", s.r2_holdout}});
  return json{{"trait", trait_name(r.trait)},
              {"hook", hook_json(r.hook)},
              {"sae_id", r.sae_id},
              {"lambda", r.probe.ridge_lambda},
              {"r2_holdout", r.probe.r2_holdout},
              {"bias", r.probe.bias},
              {"scores", scores},
              {"w", r.probe.w}};
}

ProbeRecord probe_from_json(const json& j) {
  ProbeRecord r;
  r.trait = parse_trait(j.at("trait").get<std::string>());
  r.hook = parse_hook_label(j.at("hook").get<std::string>());
  r.sae_id = j.at("sae_id").get<std::string>();
  r.probe.ridge_lambda = j.at("lambda").get<double>();
  r.probe.r2_holdout = j.at("r2_holdout").get<double>();
  r.probe.bias = j.at("bias").get<double>();
  for (const auto& s : j.at("scores")) {
    r.scores.push_back({s.at("lambda").get<double>(), s.at("r2_holdout").get<double>()});
  }
  r.probe.w = j.at("w").get<std::vector<double>>();
  return r;
}

template <typename T>
void write_records(const std::filesystem::path& path, std::span<const T> items,
                   const std::function<json(const T&)>& to_json) {
  std::string text;
  for (const auto& item : items) {
    text += to_json(item).dump();
    text += '\n';
  }
  write_text(path, text);
}

template <typename T>
std::vector<T> read_records(const std::filesystem::path& path, const std::function<T(const json&)>& from_json) {
  const auto text = read_text(path);
  std::vector<T> out;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    ++line_no;
    const std::string_view line(text.data() + start, end - start);
    start = end + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      out.push_back(from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw IoError(fmt::format("{}:{}: malformed record: {}", path.string(), line_no, e.what()));
    } catch (const Error& e) {
      throw IoError(fmt::format("{}:{}: malformed record: {}", path.string(), line_no, e.what()));
    }
  }
  return out;
}

}  // namespace

std::string format_multiplier(double multiplier) { return fmt::format("{}", multiplier); }

std::string condition_label(const ConditionKey& key) {
  return fmt::format("{}/{}/{}", trait_name(key.trait), steering_mode_name(key.mode),
                     format_multiplier(key.multiplier));
}

std::optional<ConditionKey> parse_condition_label(std::string_view label) {
  if (label == kBaselineCondition) return std::nullopt;
  const auto a = label.find('/');
  const auto b = a == std::string_view::npos ? a : label.find('/', a + 1);
  if (b == std::string_view::npos) throw ArgumentError(fmt::format("malformed condition label '{}'", label));
  ConditionKey key;
  key.trait = parse_trait(label.substr(0, a));
  key.mode = parse_steering_mode(label.substr(a + 1, b - a - 1));
  const auto num = label.substr(b + 1);
  const auto r = std::from_chars(num.data(), num.data() + num.size(), key.multiplier);
  if (r.ec != std::errc() || r.ptr != num.data() + num.size() || !std::isfinite(key.multiplier)) {
    throw ArgumentError(fmt::format("malformed multiplier in condition label '{}'", label));
  }
  return key;
}

std::string to_jsonl(const ContrastivePair& pair) { return pair_json(pair).dump(); }
std::string to_jsonl(const RolloutResult& result) { return rollout_json(result).dump(); }
std::string to_jsonl(const TrainStats& stats) { return stats_json(stats).dump(); }

void write_pairs(const std::filesystem::path& path, std::span<const ContrastivePair> pairs) {
  write_records<ContrastivePair>(path, pairs, pair_json);
}

std::vector<ContrastivePair> read_pairs(const std::filesystem::path& path) {
  return read_records<ContrastivePair>(path, pair_from_json);
}

void write_trajectories(const std::filesystem::path& path, std::span<const RolloutResult> results) {
  write_records<RolloutResult>(path, results, rollout_json);
}

std::vector<RolloutResult> read_trajectories(const std::filesystem::path& path) {
  return read_records<RolloutResult>(path, rollout_from_json);
}

void write_training_log(const std::filesystem::path& path, std::span<const TrainStats> log) {
  write_records<TrainStats>(path, log, stats_json);
}

std::vector<TrainStats> read_training_log(const std::filesystem::path& path) {
  return read_records<TrainStats>(path, stats_from_json);
}

void write_tas(const std::filesystem::path& path, std::span<const TasRecord> records) {
  write_records<TasRecord>(path, records, tas_json);
}

std::vector<TasRecord> read_tas(const std::filesystem::path& path) {
  return read_records<TasRecord>(path, tas_from_json);
}

void write_probes(const std::filesystem::path& path, std::span<const ProbeRecord> records) {
  write_records<ProbeRecord>(path, records, probe_json);
}

std::vector<ProbeRecord> read_probes(const std::filesystem::path& path) {
  return read_records<ProbeRecord>(path, probe_from_json);
}

std::string sae_id(const HookPoint& hook, std::span<const std::uint8_t> checkpoint_bytes) {
  Fnv1a64 h;
  h.update(checkpoint_bytes);
  return fmt::format("sae_{}@{}", hook_label(hook), h.hex());
}

std::string sae_display_name(std::string_view id) {
  const auto at = id.find('@');
  return std::string(id.substr(0, at));
}

}  // namespace saesteer
