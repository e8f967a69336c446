#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "saesteer/config.hpp"
#include "saesteer/pipeline.hpp"

namespace {

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::string out;
};

void add_common(CLI::App& cmd, CommonFlags& flags) {
  cmd.add_option("--config", flags.config_path, "INI run configuration (defaults apply when omitted)");
  cmd.add_option("--seed", flags.seed, "Master seed; per-stage seeds derive from it");
  cmd.add_option("--workers", flags.workers, "Worker threads for rollouts, harvesting and bootstrap")
      ->check(CLI::PositiveNumber);
  cmd.add_option("--out", flags.out, "Output directory (default: [run] output_dir)");
}

saesteer::RunConfig load(const CommonFlags& flags) {
  saesteer::ConfigOverrides o;
  o.seed = flags.seed;
  o.workers = flags.workers;
  if (!flags.out.empty()) o.output_dir = flags.out;
  return flags.config_path.empty() ? saesteer::default_run_config(o)
                                   : saesteer::load_run_config(flags.config_path, o);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SAE-decoded probe steering on a toy hybrid model with planted traits"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::string hook;
  std::string results_dir;

  auto* train = app.add_subcommand("train-sae", "Train SAE checkpoints (all hooks, or one with --hook)");
  train->add_option("--hook", hook, "Hook label such as delta_L2 or attn_L3");
  auto* pairs = app.add_subcommand("gen-pairs", "Generate contrastive pairs");
  auto* tas = app.add_subcommand("tas", "Score trait association and select an SAE per trait");
  auto* probe = app.add_subcommand("fit-probe", "Fit ridge probes with a lambda sweep");
  auto* vector = app.add_subcommand("build-vector", "Project probes through SAE decoders into steering vectors");
  auto* evaluate = app.add_subcommand("evaluate", "Run the baseline and every steering condition");
  auto* report = app.add_subcommand("report", "Render reports from an existing results directory");
  auto* pipeline = app.add_subcommand("pipeline", "Run every stage, reusing cached artifacts");
  for (auto* cmd : {train, pairs, tas, probe, vector, evaluate, pipeline}) add_common(*cmd, flags);
  report->add_option("--out,results_dir", results_dir, "Results directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  if (report->parsed()) return saesteer::cmd_report(results_dir, std::cout, std::cerr);

  saesteer::RunConfig config;
  if (const int rc = saesteer::run_guarded([&] { config = load(flags); }, std::cerr); rc != 0) return rc;

  if (train->parsed()) {
    std::optional<saesteer::HookPoint> only;
    if (!hook.empty()) {
      if (const int rc = saesteer::run_guarded([&] { only = saesteer::parse_hook_label(hook); }, std::cerr); rc != 0) {
        return rc;
      }
    }
    return saesteer::cmd_train_sae(config, only, std::cout, std::cerr);
  }
  if (pairs->parsed()) return saesteer::cmd_gen_pairs(config, std::cout, std::cerr);
  if (tas->parsed()) return saesteer::cmd_tas(config, std::cout, std::cerr);
  if (probe->parsed()) return saesteer::cmd_fit_probe(config, std::cout, std::cerr);
  if (vector->parsed()) return saesteer::cmd_build_vector(config, std::cout, std::cerr);
  if (evaluate->parsed()) return saesteer::cmd_evaluate(config, std::cout, std::cerr);
  return saesteer::cmd_pipeline(config, std::cout, std::cerr);
}
