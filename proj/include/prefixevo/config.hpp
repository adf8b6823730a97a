#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "prefixevo/evaluators.hpp"
#include "prefixevo/gateway.hpp"
#include "prefixevo/genome.hpp"
#include "prefixevo/operators.hpp"
#include "prefixevo/taxonomy.hpp"

namespace prefixevo {

enum class GuidanceMode { AllBehaviors, NoBehaviors, PreferredOnly, NonPreferredOnly };
std::string_view to_string(GuidanceMode m);
GuidanceMode parse_guidance_mode(std::string_view s);

struct Guidance {
  GuidanceMode mode = GuidanceMode::AllBehaviors;
  std::vector<Behavior> behaviors;  ///< used by PreferredOnly / NonPreferredOnly

  /// Behaviors mutation may target; empty for NoBehaviors.
  std::vector<Behavior> mutation_pool() const;
  /// Behaviors listed in the crossover prompt's category block.
  std::vector<Behavior> crossover_taxonomy() const;
  void validate() const;
};

struct ConvergenceConfig {
  int patience = 2;
  std::optional<double> threshold;
};

enum class ParentPool { Survivors, Population };

struct BackendConfig {
  std::string kind = "mock";  ///< "mock" or "http"
  std::string base_url;
  std::string model;
  std::string api_key;  ///< usually left empty and read from the environment
  double timeout_seconds = 600.0;
  std::uint64_t mock_seed = 0;
};

struct RunConfig {
  std::string run_id;  ///< empty: derived from the config contents
  TaskKind task_kind = TaskKind::EfficientReasoning;
  int seed_count = 10;
  int top_n = 5;
  int mutation_parents = 3;
  int max_iterations = 6;
  ConvergenceConfig convergence;
  Guidance guidance;
  MutationMode mutation_mode = MutationMode::Nine;
  /// Name the drawn categories in the mutation prompt so child origins are exact.
  bool announce_mutation_categories = true;
  ParentPool mutation_parent_pool = ParentPool::Survivors;
  std::uint64_t rng_seed = 0;
  int concurrency = 4;
  std::filesystem::path validation_path;
  std::filesystem::path test_path;
  PrefixInjection injection;
  DecodingParams decoding;
  DecodingParams operator_decoding{1.0, 0.95, 4096, {}};
  DecodingParams judge_decoding{0.0, 1.0, 512, {}};
  BackendConfig target;
  BackendConfig op{"mock", "", "mock-llm", "", 600.0, 0};
  std::optional<BackendConfig> judge;
  RetryPolicy retry;
  double model_size_b = 7.0;
  SafetyWeights safety_weights;
  /// Members with a larger share of failed items are excluded from selection.
  double max_failed_fraction = 0.2;
  double frontier_epsilon = 0.01;
  int operator_parse_retries = 2;
  /// Explicit seed prefixes; when empty the operator model writes them.
  std::vector<std::string> seeds;
  std::optional<std::filesystem::path> templates_dir;
  std::optional<std::filesystem::path> lexicon_path;

  void validate() const;
  /// Forces every backend to its mock, keeping models and seeds.
  void force_mock();
  bool all_mock() const;
};

void to_json(nlohmann::json& j, const RunConfig& c);
/// Relative paths are resolved against `base_dir` by `load_config`, not here.
void from_json(const nlohmann::json& j, RunConfig& c);

RunConfig load_config(const std::filesystem::path& path);
/// Stable run id: the configured one, or a digest of the resolved config.
std::string derive_run_id(const RunConfig& c);

}  // namespace prefixevo
