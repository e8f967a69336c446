#include "saesteer/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "saesteer/contrastive.hpp"
#include "saesteer/harness.hpp"
#include "saesteer/hash.hpp"
#include "saesteer/io.hpp"
#include "saesteer/parallel.hpp"
#include "saesteer/probe.hpp"
#include "saesteer/records.hpp"
#include "saesteer/report.hpp"
#include "saesteer/sae.hpp"
#include "saesteer/steering_vector.hpp"

namespace saesteer {

namespace fs = std::filesystem;

namespace {

constexpr std::size_t kTopFeatures = 10;

std::string combine_key(std::initializer_list<std::string_view> parts) {
  Fnv1a64 h;
  for (auto p : parts) {
    h.update(p);
    h.update(std::string_view("\x1f", 1));
  }
  return h.hex();
}

std::string file_hash(const fs::path& path) {
  Fnv1a64 h;
  h.update(read_bytes(path));
  return h.hex();
}

std::string key_file_name(const std::string& stage) {
  std::string out = stage;
  std::replace(out.begin(), out.end(), ':', '_');
  return out + ".key";
}

int exit_code_for(const std::exception_ptr& e) {
  try {
    std::rethrow_exception(e);
  } catch (const StageFailure& f) {
    return f.exit_code();
  } catch (const IoError&) {
    return 2;
  } catch (...) {
    return 1;
  }
}

struct EncodedPair {
  // [hook] -> code
  std::vector<Vector> high;
  std::vector<Vector> low;
};

std::vector<EncodedPair> encode_pairs(const ToyModel& model, std::span<const ContrastivePair> pairs,
                                      std::span<const HookPoint> hooks, std::span<const SaeCheckpoint> saes,
                                      std::size_t workers) {
  std::vector<EncodedPair> out(pairs.size());
  parallel_for(pairs.size(), workers, [&](std::size_t i) {
    const auto pooled = harvest(model, pairs[i], hooks);
    auto& e = out[i];
    for (std::size_t h = 0; h < hooks.size(); ++h) {
      e.high.push_back(encode(saes[h].params, pooled[h].x_high, saes[h].k));
      e.low.push_back(encode(saes[h].params, pooled[h].x_low, saes[h].k));
    }
  });
  return out;
}

}  // namespace

StageFailure::StageFailure(std::string stage, const std::string& cause, int exit_code)
    : Error(fmt::format("stage {} failed: {}", stage, cause)), stage_(std::move(stage)), exit_code_(exit_code) {}

ToyModelConfig resolved_model_config(const RunConfig& config) {
  ToyModelConfig m = config.model;
  m.seed = config.seed_for("model");
  return m;
}

Pipeline::Pipeline(RunConfig config, std::ostream& log)
    : config_(std::move(config)), log_(log), model_(resolved_model_config(config_)), root_(config_.output_dir) {
  config_.validate();
  for (const auto& h : config_.hooks) model_.validate_hook(h);
}

fs::path Pipeline::sae_path(const HookPoint& hook) const {
  return root_ / "sae" / fmt::format("sae_{}.qsae", hook_label(hook));
}

std::string Pipeline::model_key() const {
  return combine_key({config_section_text(config_, "model"), fmt::format("{}", config_.seed_for("model"))});
}

std::string Pipeline::sae_hashes() const {
  std::string out;
  for (const auto& h : config_.hooks) out += hook_label(h) + "=" + file_hash(sae_path(h)) + ";";
  return out;
}

std::string Pipeline::vector_hashes() const {
  std::string out;
  for (Trait t : config_.traits) out += std::string(trait_name(t)) + "=" + file_hash(root_ / vector_file(t)) + ";";
  return out;
}

void Pipeline::stage(const std::string& name, const std::string& key, const std::vector<fs::path>& outputs,
                     const std::function<void()>& body) {
  if (std::find(done_.begin(), done_.end(), name) != done_.end()) return;
  try {
    ensure_directory(root_ / "stages");
    const auto config_path = root_ / kRunConfigFile;
    const auto rendered = render_run_config(config_);
    if (!fs::is_regular_file(config_path) || read_text(config_path) != rendered) write_text(config_path, rendered);

    const auto key_path = root_ / "stages" / key_file_name(name);
    bool cached = fs::is_regular_file(key_path) && read_text(key_path) == key;
    for (const auto& o : outputs) cached = cached && fs::is_regular_file(o);
    if (cached) {
      fmt::print(log_, "stage {}: cached\n", name);
    } else {
      if (fs::exists(key_path)) fs::remove(key_path);
      const auto start = std::chrono::steady_clock::now();
      body();
      write_text(key_path, key);
      const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
      fmt::print(log_, "stage {}: done in {:.1f}s\n", name, elapsed.count());
    }
    stages_.push_back({name, cached});
    done_.push_back(name);
  } catch (const StageFailure&) {
    throw;
  } catch (const std::exception& e) {
    throw StageFailure(name, e.what(), exit_code_for(std::current_exception()));
  }
}

void Pipeline::train_saes(std::optional<HookPoint> only) {
  std::vector<HookPoint> hooks = config_.hooks;
  if (only) {
    if (std::find(hooks.begin(), hooks.end(), *only) == hooks.end()) {
      throw ConfigError(fmt::format("hook {} is not listed in the configuration", hook_label(*only)));
    }
    hooks = {*only};
  }
  const std::string corpus_key =
      config_section_text(config_, "corpus") + fmt::format("{}", config_.seed_for("corpus"));

  // Harvest once for every hook that needs training, then train them.
  std::vector<HookPoint> pending;
  std::vector<std::string> keys;
  for (const auto& h : hooks) {
    const auto key = combine_key({"train-sae", model_key(), corpus_key,
                                  config_section_text(config_, "sae:" + hook_label(h)),
                                  fmt::format("log_every={}", config_.sae_log_every)});
    keys.push_back(key);
    const auto name = "train-sae:" + hook_label(h);
    const auto key_path = root_ / "stages" / key_file_name(name);
    auto ckpt = sae_path(h);
    auto stats = ckpt;
    stats.replace_extension(".stats.jsonl");
    const bool fresh = fs::is_regular_file(key_path) && read_text(key_path) == key && fs::is_regular_file(ckpt) &&
                       fs::is_regular_file(stats);
    if (!fresh && std::find(done_.begin(), done_.end(), name) == done_.end()) pending.push_back(h);
  }

  std::vector<SaeCheckpoint> trained(pending.size());
  std::vector<std::vector<TrainStats>> logs(pending.size());
  if (!pending.empty()) {
    // One corpus pass serves every pending hook; hooks then train
    // independently, so results do not depend on the worker count.
    try {
      ensure_directory(root_ / "stages");
      const auto start = std::chrono::steady_clock::now();
      auto corpus = harvest_corpus(model_, pending, config_.corpus, config_.seed_for("corpus"), config_.workers);
      parallel_for(pending.size(), config_.workers, [&](std::size_t i) {
        const auto& sc = config_.sae_for(pending[i]);
        auto result = train_sae(sc, corpus[i], config_.sae_log_every);
        trained[i] = {std::move(result.params), sc.k};
        logs[i] = std::move(result.log);
      });
      const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
      fmt::print(log_, "trained {} SAE(s) in {:.1f}s\n", pending.size(), elapsed.count());
    } catch (const std::exception& e) {
      throw StageFailure("train-sae", e.what(), exit_code_for(std::current_exception()));
    }
  }

  for (std::size_t i = 0; i < hooks.size(); ++i) {
    const auto& h = hooks[i];
    auto ckpt = sae_path(h);
    auto stats = ckpt;
    stats.replace_extension(".stats.jsonl");
    const auto it = std::find(pending.begin(), pending.end(), h);
    stage("train-sae:" + hook_label(h), keys[i], {ckpt, stats}, [&] {
      const auto j = static_cast<std::size_t>(it - pending.begin());
      ensure_directory(ckpt.parent_path());
      save_checkpoint(ckpt, trained[j].params, trained[j].k);
      write_training_log(stats, logs[j]);
      const auto& last = logs[j].empty() ? TrainStats{} : logs[j].back();
      fmt::print(log_, "  {}: step {} mse {:.5f} dead {}\n", hook_label(h), last.step, last.mse, last.dead_count);
    });
  }
}

void Pipeline::gen_pairs() {
  const auto out = root_ / "pairs" / "pairs.jsonl";
  std::string traits;
  for (Trait t : config_.traits) traits += std::string(trait_name(t)) + ",";
  const auto key = combine_key({"gen-pairs", config_section_text(config_, "pairs"), traits,
                                fmt::format("{}:{}", config_.model.vocab_size, config_.seed_for("pairs"))});
  stage("gen-pairs", key, {out}, [&] {
    const auto pairs = generate_pair_set(config_.traits, config_.pairs, config_.seed_for("pairs"),
                                         config_.model.vocab_size);
    ensure_directory(out.parent_path());
    write_pairs(out, pairs);
    fmt::print(log_, "  {} pairs\n", pairs.size());
  });
}

void Pipeline::score_tas() {
  train_saes();
  gen_pairs();
  const auto pairs_path = root_ / "pairs" / "pairs.jsonl";
  const auto out = root_ / "tas" / "tas.jsonl";
  const auto key = combine_key({"tas", model_key(), file_hash(pairs_path), sae_hashes()});
  stage("tas", key, {out}, [&] {
    const auto pairs = read_pairs(pairs_path);
    std::vector<SaeCheckpoint> saes;
    std::vector<std::string> ids;
    for (const auto& h : config_.hooks) {
      const auto bytes = read_bytes(sae_path(h));
      saes.push_back(deserialize_checkpoint(bytes));
      ids.push_back(sae_id(h, bytes));
    }
    const auto encoded = encode_pairs(model_, pairs, config_.hooks, saes, config_.workers);
    std::vector<TasRecord> records;
    for (Trait t : config_.traits) {
      std::vector<TasResult> results;
      for (std::size_t h = 0; h < config_.hooks.size(); ++h) {
        std::vector<Vector> zh;
        std::vector<Vector> zl;
        for (std::size_t i = 0; i < pairs.size(); ++i) {
          if (pairs[i].trait != t) continue;
          zh.push_back(encoded[i].high[h]);
          zl.push_back(encoded[i].low[h]);
        }
        auto r = compute_tas(zh, zl);
        r.hook = config_.hooks[h];
        results.push_back(std::move(r));
      }
      const HookPoint best = select_best_sae(results);
      for (std::size_t h = 0; h < results.size(); ++h) {
        TasRecord rec;
        rec.trait = t;
        rec.hook = results[h].hook;
        rec.sae_id = ids[h];
        rec.mean_abs_tas = results[h].mean_abs_tas;
        rec.selected = results[h].hook == best;
        std::vector<std::size_t> order(results[h].tas.size());
        for (std::size_t j = 0; j < order.size(); ++j) order[j] = j;
        const auto& tas = results[h].tas;
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return std::abs(tas[a]) > std::abs(tas[b]); });
        for (std::size_t j = 0; j < std::min(kTopFeatures, order.size()); ++j) {
          rec.top_features.emplace_back(order[j], tas[order[j]]);
        }
        records.push_back(std::move(rec));
      }
      fmt::print(log_, "  {}: selected {}\n", trait_name(t), hook_label(best));
    }
    ensure_directory(out.parent_path());
    write_tas(out, records);
  });
}

void Pipeline::fit_probes() {
  score_tas();
  const auto pairs_path = root_ / "pairs" / "pairs.jsonl";
  const auto tas_path = root_ / "tas" / "tas.jsonl";
  const auto out = root_ / kProbesFile;
  const auto key = combine_key({"fit-probe", model_key(), file_hash(pairs_path), file_hash(tas_path), sae_hashes(),
                                config_section_text(config_, "probe"), fmt::format("{}", config_.seed_for("probe"))});
  stage("fit-probe", key, {out}, [&] {
    const auto pairs = read_pairs(pairs_path);
    const auto tas = read_tas(tas_path);
    std::vector<ProbeRecord> records;
    for (Trait t : config_.traits) {
      const auto sel = std::find_if(tas.begin(), tas.end(), [&](const TasRecord& r) { return r.trait == t && r.selected; });
      if (sel == tas.end()) throw IoError(fmt::format("{} has no selected hook for {}", tas_path.string(), trait_name(t)));
      const auto bytes = read_bytes(sae_path(sel->hook));
      const auto ckpt = deserialize_checkpoint(bytes);
      if (sae_id(sel->hook, bytes) != sel->sae_id) {
        throw IoError(fmt::format("checkpoint for {} changed since TAS scoring", hook_label(sel->hook)));
      }
      std::vector<ContrastivePair> mine;
      for (const auto& p : pairs) {
        if (p.trait == t) mine.push_back(p);
      }
      const std::vector<HookPoint> hook{sel->hook};
      const std::vector<SaeCheckpoint> sae{ckpt};
      const auto encoded = encode_pairs(model_, mine, hook, sae, config_.workers);
      ProbeDataset data;
      data.holdout_fraction = config_.holdout_fraction;
      data.x = DenseMatrix(2 * mine.size(), ckpt.params.dict_size());
      data.y.resize(2 * mine.size());
      for (std::size_t i = 0; i < mine.size(); ++i) {
        std::copy(encoded[i].high[0].begin(), encoded[i].high[0].end(), data.x.row(2 * i).begin());
        std::copy(encoded[i].low[0].begin(), encoded[i].low[0].end(), data.x.row(2 * i + 1).begin());
        data.y[2 * i] = 1.0;
        data.y[2 * i + 1] = 0.0;
      }
      const auto sweep = sweep_lambda(data, config_.lambda_grid, derive_seed(config_.seed_for("probe"), trait_name(t)));
      records.push_back({t, sel->hook, sel->sae_id, sweep.best, sweep.scores});
      fmt::print(log_, "  {}: lambda {} holdout R² {:.3f}\n", trait_name(t), sweep.best.ridge_lambda,
                 sweep.best.r2_holdout);
    }
    ensure_directory(out.parent_path());
    write_probes(out, records);
  });
}

void Pipeline::build_vectors() {
  fit_probes();
  const auto probes_path = root_ / kProbesFile;
  std::vector<fs::path> outputs;
  for (Trait t : config_.traits) outputs.push_back(root_ / vector_file(t));
  const auto key = combine_key({"build-vector", file_hash(probes_path), sae_hashes()});
  stage("build-vector", key, outputs, [&] {
    const auto probes = read_probes(probes_path);
    for (Trait t : config_.traits) {
      const auto rec = std::find_if(probes.begin(), probes.end(), [&](const ProbeRecord& r) { return r.trait == t; });
      if (rec == probes.end()) throw IoError(fmt::format("{} has no probe for {}", probes_path.string(), trait_name(t)));
      const auto ckpt = load_checkpoint(sae_path(rec->hook));
      const auto sv = project_decoder(ckpt.params, rec->probe, rec->hook.layer_index, t, rec->sae_id);
      const auto path = root_ / vector_file(t);
      ensure_directory(path.parent_path());
      save_steering_vector(path, sv);
      fmt::print(log_, "  {}: layer {} norm {:.3f}\n", trait_name(t), sv.layer, load_steering_vector(path).norm);
    }
  });
}

void Pipeline::evaluate() {
  build_vectors();
  const auto out = root_ / kTrajectoriesFile;
  const auto key = combine_key({"evaluate", model_key(), vector_hashes(), config_section_text(config_, "run"),
                                config_section_text(config_, "scenarios"),
                                fmt::format("{}:{}", config_.seed_for("scenarios"), config_.seed_for("rollouts"))});
  stage("evaluate", key, {out}, [&] {
    const auto scenarios = make_scenarios(config_.scenario_count, config_.seed_for("scenarios"),
                                          config_.model.vocab_size, config_.scenarios);
    const auto rollout_seed = config_.seed_for("rollouts");
    std::vector<RolloutResult> all =
        run_condition(model_, scenarios, nullptr, rollout_seed, std::string(kBaselineCondition), config_.workers);
    for (Trait t : config_.traits) {
      const auto sv = load_steering_vector(root_ / vector_file(t));
      for (SteeringMode mode : config_.modes) {
        for (double m : config_.multipliers) {
          const auto label = condition_label({t, mode, m});
          const SteeringConfig steering{sv, m, mode};
          const auto seed = config_.independent_rollout_seeds ? derive_seed(rollout_seed, label) : rollout_seed;
          auto results = run_condition(model_, scenarios, &steering, seed, label, config_.workers);
          std::move(results.begin(), results.end(), std::back_inserter(all));
        }
      }
    }
    ensure_directory(out.parent_path());
    write_trajectories(out, all);
    fmt::print(log_, "  {} rollouts\n", all.size());
  });
}

void Pipeline::report() {
  evaluate();
  const auto manifest = root_ / "reports" / "manifest.txt";
  std::vector<fs::path> outputs{manifest};
  if (fs::is_regular_file(manifest)) {
    const auto text = read_text(manifest);
    std::size_t start = 0;
    while (start < text.size()) {
      auto end = text.find('\n', start);
      if (end == std::string::npos) end = text.size();
      if (end > start) outputs.push_back(root_ / text.substr(start, end - start));
      start = end + 1;
    }
  }
  const auto key = combine_key({"report", file_hash(root_ / kRunConfigFile), file_hash(root_ / kTrajectoriesFile),
                                file_hash(root_ / kProbesFile), vector_hashes()});
  stage("report", key, outputs, [&] {
    const auto files = render_report(load_report_inputs(root_));
    write_report(root_, files);
    std::string list;
    for (const auto& f : files) list += f.path + "\n";
    write_text(manifest, list);
    fmt::print(log_, "  {} report files\n", files.size());
  });
}

int run_guarded(const std::function<void()>& body, std::ostream& err) {
  try {
    body();
    return 0;
  } catch (const std::exception& e) {
    fmt::print(err, "error: {}\n", e.what());
    return exit_code_for(std::current_exception());
  }
}

namespace {

int with_pipeline(const RunConfig& config, std::ostream& out, std::ostream& err,
                  const std::function<void(Pipeline&)>& body) {
  return run_guarded(
      [&] {
        Pipeline p(config, out);
        body(p);
      },
      err);
}

}  // namespace

int cmd_train_sae(const RunConfig& config, std::optional<HookPoint> hook, std::ostream& out, std::ostream& err) {
  return with_pipeline(config, out, err, [&](Pipeline& p) { p.train_saes(hook); });
}

int cmd_gen_pairs(const RunConfig& config, std::ostream& out, std::ostream& err) {
  return with_pipeline(config, out, err, [](Pipeline& p) { p.gen_pairs(); });
}

int cmd_tas(const RunConfig& config, std::ostream& out, std::ostream& err) {
  return with_pipeline(config, out, err, [](Pipeline& p) { p.score_tas(); });
}

int cmd_fit_probe(const RunConfig& config, std::ostream& out, std::ostream& err) {
  return with_pipeline(config, out, err, [](Pipeline& p) { p.fit_probes(); });
}

int cmd_build_vector(const RunConfig& config, std::ostream& out, std::ostream& err) {
  return with_pipeline(config, out, err, [](Pipeline& p) { p.build_vectors(); });
}

int cmd_evaluate(const RunConfig& config, std::ostream& out, std::ostream& err) {
  return with_pipeline(config, out, err, [](Pipeline& p) { p.evaluate(); });
}

int cmd_pipeline(const RunConfig& config, std::ostream& out, std::ostream& err) {
  return with_pipeline(config, out, err, [](Pipeline& p) { p.run_all(); });
}

int cmd_report(const fs::path& results_dir, std::ostream& out, std::ostream& err) {
  return run_guarded(
      [&] {
        if (!fs::is_directory(results_dir)) {
          throw IoError(fmt::format("{}: results directory does not exist (expected {}, {}, {} and vectors/<trait>.qstv)",
                                    results_dir.string(), kRunConfigFile, kProbesFile, kTrajectoriesFile));
        }
        const auto files = render_report(load_report_inputs(results_dir));
        write_report(results_dir, files);
        for (const auto& f : files) fmt::print(out, "wrote {}\n", (results_dir / f.path).string());
      },
      err);
}

}  // namespace saesteer
