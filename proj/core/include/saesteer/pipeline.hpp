#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "saesteer/config.hpp"
#include "saesteer/error.hpp"
#include "saesteer/toymodel.hpp"

namespace saesteer {

// Raised when a pipeline stage fails; carries the stage name and the exit
// code implied by the underlying error (2 for I/O, 1 otherwise).
class StageFailure : public Error {
 public:
  StageFailure(std::string stage, const std::string& cause, int exit_code);
  const std::string& stage() const noexcept { return stage_; }
  int exit_code() const noexcept { return exit_code_; }

 private:
  std::string stage_;
  int exit_code_;
};

struct StageStatus {
  std::string stage;
  bool cached = false;
};

// Runs the stages against config.output_dir. Every stage first runs its
// prerequisites; a stage whose content-hash key matches the key stored
// next to its outputs is skipped and reported as cached.
//
// Layout under the output directory:
//   run_config.ini                 resolved configuration
//   stages/<stage>.key             cache keys
//   sae/sae_<hook>.qsae            checkpoints, plus .stats.jsonl logs
//   pairs/pairs.jsonl
//   tas/tas.jsonl
//   probes/probes.jsonl
//   vectors/<trait>.qstv
//   trajectories/trajectories.jsonl
//   reports/...
class Pipeline {
 public:
  Pipeline(RunConfig config, std::ostream& log);

  void train_saes(std::optional<HookPoint> only = std::nullopt);
  void gen_pairs();
  void score_tas();
  void fit_probes();
  void build_vectors();
  void evaluate();
  void report();
  void run_all() { report(); }

  const std::vector<StageStatus>& stages() const noexcept { return stages_; }
  const RunConfig& config() const noexcept { return config_; }
  const ToyModel& model() const noexcept { return model_; }

  std::filesystem::path sae_path(const HookPoint& hook) const;

 private:
  // Runs body unless the key matches; records the outcome.
  void stage(const std::string& name, const std::string& key, const std::vector<std::filesystem::path>& outputs,
             const std::function<void()>& body);
  std::string model_key() const;
  std::string sae_hashes() const;
  std::string vector_hashes() const;

  RunConfig config_;
  std::ostream& log_;
  ToyModel model_;
  std::filesystem::path root_;
  std::vector<StageStatus> stages_;
  std::vector<std::string> done_;
};

// The model a run uses: config.model with its seed taken from the run.
ToyModelConfig resolved_model_config(const RunConfig& config);

// Runs body, mapping failures onto exit codes: 0 ok, 1 validation, 2 I/O.
// The message goes to err.
int run_guarded(const std::function<void()>& body, std::ostream& err);

int cmd_train_sae(const RunConfig& config, std::optional<HookPoint> hook, std::ostream& out, std::ostream& err);
int cmd_gen_pairs(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_tas(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_fit_probe(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_build_vector(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_evaluate(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_pipeline(const RunConfig& config, std::ostream& out, std::ostream& err);
// Renders reports from an existing results directory.
int cmd_report(const std::filesystem::path& results_dir, std::ostream& out, std::ostream& err);

}  // namespace saesteer
