#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "prefixevo/config.hpp"
#include "prefixevo/dataset.hpp"
#include "prefixevo/gateway.hpp"
#include "prefixevo/genome.hpp"
#include "prefixevo/templates.hpp"

namespace prefixevo {

struct Backends {
  std::shared_ptr<Gateway> target;
  std::shared_ptr<Gateway> op;
  std::shared_ptr<Gateway> judge;  ///< may be null
};

/// Builds gateways for the configured backends. Mock-only setups never sleep between retries.
Backends make_backends(const RunConfig& config);

/// Everything the evaluation of one prefix depends on.
struct EvalContext {
  const RunConfig* config = nullptr;
  Gateway* target = nullptr;
  Gateway* judge = nullptr;
  const TemplateSet* templates = nullptr;
  std::int64_t eval_seed = 0;
};

/// Scores one prefix on `items`. Failed requests count against the member; more than
/// `max_failed_fraction` of them excludes it.
FitnessRecord evaluate_prefix(const ThinkPrefix& prefix, const std::vector<TaskItem>& items,
                              Split split, const EvalContext& ctx);

std::string eval_cache_key(std::string_view prefix_text, std::string_view dataset_id, Split split,
                           const PrefixInjection& injection, const DecodingParams& decoding,
                           std::string_view model_id);

enum class RunStatus { Running, Converged, Exhausted };
std::string_view to_string(RunStatus s);

struct ConvergenceState {
  RunStatus status = RunStatus::Running;
  std::string reason;  ///< "threshold", "patience" or "max_iterations"
};

/// `bests[i]` is the best fitness after iteration i+1; `baseline` the best seed fitness.
ConvergenceState check_convergence(std::span<const double> bests, const ConvergenceConfig& conv,
                                   int max_iterations, std::optional<double> baseline = std::nullopt);

struct FinalReport {
  std::string run_id;
  Member winner;
  std::string selection;  ///< "frontier" or "argmax"
  FitnessRecord validation;
  FitnessRecord test;
  int iterations = 0;
  ConvergenceState convergence;
};

void to_json(nlohmann::json& j, const FinalReport& r);

/// One evolution run rooted at `run_dir` (config.json, log.jsonl, checkpoint.json,
/// report.json).
class Orchestrator {
 public:
  Orchestrator(RunConfig config, Backends backends, std::filesystem::path run_dir);

  /// Reloads the latest checkpoint in `run_dir`; the log is cut back to match it.
  static Orchestrator resume(const std::filesystem::path& run_dir, Backends backends);
  static Orchestrator resume(const std::filesystem::path& run_dir, bool force_mock = false);

  /// Writes the run skeleton, scores the seed population (iteration 0) and checkpoints.
  void start();
  bool started() const { return !populations_.empty(); }
  /// One evolutionary iteration followed by a convergence check and a checkpoint.
  void step();
  /// start() if needed, iterate until converged, then finalize().
  FinalReport run();
  /// Evaluates the winner once on the test split. A second call on the same run throws
  /// TestAlreadyConsumed.
  FinalReport finalize();

  /// Scores every unscored member on the validation split, reusing cached records.
  Population evaluate_population(Population pop);

  const RunConfig& config() const { return config_; }
  const std::string& run_id() const { return run_id_; }
  const std::filesystem::path& run_dir() const { return run_dir_; }
  const std::vector<Population>& populations() const { return populations_; }
  std::span<const double> bests() const { return bests_; }
  std::optional<double> seed_best() const { return seed_best_; }
  const std::optional<Member>& best() const { return best_; }
  ConvergenceState convergence() const { return convergence_; }
  bool finalized() const { return finalized_; }
  const Backends& backends() const { return backends_; }
  std::size_t log_events() const { return log_events_; }
  std::uint64_t test_requests_before_finalize() const { return early_test_requests_; }

  /// Called with every iteration_summary event as it is logged.
  void on_summary(std::function<void(const nlohmann::json&)> fn) { summary_cb_ = std::move(fn); }

 private:
  void log(nlohmann::json event);
  void checkpoint() const;
  void load_checkpoint();
  void install_observer();
  std::vector<ThinkPrefix> crossover_children(const std::vector<Member>& survivors, int iteration);
  std::vector<ThinkPrefix> mutation_children(const std::vector<Member>& parents, int iteration,
                                             std::mt19937_64& rng);
  std::optional<std::string> call_operator(const std::string& op_name, const std::string& prompt,
                                           int iteration, std::uint64_t salt, int attempt);
  std::vector<Member> all_candidates() const;
  void summarize(const Population& pop, std::size_t children);

  RunConfig config_;
  Backends backends_;
  std::filesystem::path run_dir_;
  std::string run_id_;
  TemplateSet templates_;
  MarkerLexicon lexicon_;
  Dataset validation_;
  std::int64_t eval_seed_ = 0;

  std::vector<Population> populations_;
  std::vector<double> bests_;
  std::optional<double> seed_best_;
  std::optional<Member> best_;
  ConvergenceState convergence_;
  std::map<std::string, FitnessRecord> cache_;
  bool finalized_ = false;
  std::size_t log_events_ = 0;

  std::shared_ptr<std::atomic<bool>> finalizing_ = std::make_shared<std::atomic<bool>>(false);
  std::shared_ptr<std::atomic<std::uint64_t>> early_test_ =
      std::make_shared<std::atomic<std::uint64_t>>(0);
  std::uint64_t early_test_requests_ = 0;
  std::function<void(const nlohmann::json&)> summary_cb_;
};

/// Log lines with volatile fields (timestamps) removed, one JSON document per line.
std::string transcript_of(const std::filesystem::path& log_path);

struct ReplayResult {
  bool identical = false;
  std::size_t original_events = 0;
  std::size_t replayed_events = 0;
  std::optional<std::size_t> first_difference;  ///< 1-based line number
};

/// Re-runs a mock-backed run from its saved config in a scratch directory and compares
/// transcripts byte for byte.
ReplayResult replay_run(const std::filesystem::path& run_dir);

}  // namespace prefixevo
