#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "prefixevo/gateway.hpp"
#include "prefixevo/genome.hpp"
#include "prefixevo/taxonomy.hpp"
#include "prefixevo/templates.hpp"

namespace prefixevo {

/// Items x categories; counts[i][j] = raters that put item i in category j.
struct RatingMatrix {
  std::vector<std::vector<int>> counts;

  /// Validates shape: >= 1 item, >= 2 categories, >= 2 raters, equal non-negative row sums.
  static RatingMatrix make(std::vector<std::vector<int>> counts);
  std::size_t n_items() const { return counts.size(); }
  std::size_t n_categories() const { return counts.empty() ? 0 : counts.front().size(); }
  int n_raters() const;
};

double fleiss_kappa(const RatingMatrix& m);

struct FrontierPoint {
  std::string prefix_id;
  double accuracy = 0.0;
  double mean_tokens = 0.0;
};

/// Cheapest point within `epsilon` of the best accuracy. Ties: fewer tokens, then higher
/// accuracy, then id.
FrontierPoint select_on_frontier(std::span<const FrontierPoint> points, double epsilon = 0.01);

enum class Outcome { Success, Failure };
std::string_view to_string(Outcome o);

struct Verdict {
  std::string judge_id;
  Outcome outcome = Outcome::Failure;
  std::string reasoning;
};

/// Outcome from the first line that starts with "Analysis Conclusion:".
Outcome parse_judge_verdict(std::string_view raw);
Verdict parse_verdict(std::string_view raw, std::string judge_id);

enum class Direction { Positive, Negative };
std::string_view to_string(Direction d);

struct ControlCase {
  std::string id;
  std::string baseline;
  std::string intervened;
  Behavior target = Behavior::TaskInitialization;
  Direction direction = Direction::Positive;
};

std::string build_control_prompt(const ControlCase& c,
                                 const TemplateSet& templates = TemplateSet::builtin());

struct ControlOptions {
  /// Extra attempts for a judge whose reply has no verdict line.
  int retries = 2;
  DecodingParams params{0.0, 1.0, 512, {}};
};

struct CaseResult {
  std::string case_id;
  Behavior target = Behavior::TaskInitialization;
  Direction direction = Direction::Positive;
  std::vector<std::optional<Verdict>> votes;  ///< per judge; absent = abstained
  std::optional<Outcome> outcome;            ///< absent when every judge abstained
};

struct RateCell {
  int successes = 0;
  int cases = 0;
  double rate() const { return cases == 0 ? 0.0 : static_cast<double>(successes) / cases; }
};

struct ControlReport {
  std::vector<CaseResult> cases;
  std::map<Behavior, RateCell> per_behavior;
  std::vector<std::string> dropped;
  /// {Success, Failure} votes for the cases every judge decided; needs >= 2 judges.
  std::optional<RatingMatrix> agreement;
  std::optional<double> kappa;
};

/// Majority over the judges that returned a verdict; a tie counts as Failure.
ControlReport control_success(std::span<const ControlCase> cases, std::span<Gateway* const> judges,
                              const ControlOptions& options = {},
                              const TemplateSet& templates = TemplateSet::builtin());

struct ScoredPrefix {
  ThinkPrefix prefix;
  FitnessRecord record;
};

/// Pooled behavior profile of the top ceil(N/10) records (selection order).
BehaviorProfile top_decile_distribution(std::span<const ScoredPrefix> records);

std::string frontier_csv(std::span<const FrontierPoint> points, const FrontierPoint* chosen = nullptr);
std::string behaviors_csv(const BehaviorProfile& profile);
std::string control_csv(const ControlReport& report);

}  // namespace prefixevo
