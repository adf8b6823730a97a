#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace prefixevo {

/// The six reasoning behaviors. Declaration order is the reporting and tie-break order.
enum class Behavior : std::uint8_t {
  TaskInitialization,
  StrategicPlanning,
  KnowledgeRetrieval,
  StepwiseReasoning,
  UncertaintyManagement,
  FinalConclusion,
};

inline constexpr std::size_t kBehaviorCount = 6;

inline constexpr std::array<Behavior, kBehaviorCount> kAllBehaviors = {
    Behavior::TaskInitialization,    Behavior::StrategicPlanning,
    Behavior::KnowledgeRetrieval,    Behavior::StepwiseReasoning,
    Behavior::UncertaintyManagement, Behavior::FinalConclusion,
};

struct BehaviorInfo {
  Behavior kind;
  std::string_view id;            ///< identifier used in files, e.g. "StepwiseReasoning"
  std::string_view display_name;  ///< "Stepwise Reasoning"
  std::string_view definition;
  /// Wording used inside the operator prompts, which differs slightly from `definition`.
  std::string_view prompt_definition;
  std::span<const std::string_view> episodes;
};

const BehaviorInfo& behavior_info(Behavior b);
constexpr std::size_t index_of(Behavior b) { return static_cast<std::size_t>(b); }
std::string_view to_string(Behavior b);
/// Accepts the identifier or the display name, case-insensitively.
std::optional<Behavior> parse_behavior(std::string_view s);

struct MarkerEntry {
  std::string pattern;
  Behavior behavior;
  double weight = 1.0;
};

/// Phrase lexicon mapping literal markers to behaviors. Matching is case-insensitive,
/// anchored on word boundaries, non-overlapping and leftmost-longest.
class MarkerLexicon {
 public:
  explicit MarkerLexicon(std::vector<MarkerEntry> entries);

  /// The lexicon compiled into the library.
  static const MarkerLexicon& builtin();
  /// Parses `pattern<TAB>behavior[<TAB>weight]` lines; `#` starts a comment line.
  static MarkerLexicon parse(std::string_view tsv);
  static MarkerLexicon load(const std::filesystem::path& path);

  const std::vector<MarkerEntry>& entries() const noexcept { return entries_; }

  struct Match {
    std::size_t offset;
    std::size_t length;
    std::size_t entry;
  };
  std::vector<Match> find_all(std::string_view text) const;

 private:
  std::vector<MarkerEntry> entries_;
  std::vector<std::string> folded_;      // lowercased patterns, parallel to entries_
  std::vector<std::size_t> by_length_;  // entry indices, longest pattern first
};

struct BehaviorProfile {
  std::array<double, kBehaviorCount> counts{};
  std::array<double, kBehaviorCount> proportions{};

  static BehaviorProfile from_counts(const std::array<double, kBehaviorCount>& counts);

  double total() const;
  double count(Behavior b) const { return counts[index_of(b)]; }
  double proportion(Behavior b) const { return proportions[index_of(b)]; }

  friend bool operator==(const BehaviorProfile&, const BehaviorProfile&) = default;
};

BehaviorProfile annotate_text(std::string_view text,
                              const MarkerLexicon& lexicon = MarkerLexicon::builtin());

/// Kind with the largest proportion; ties go to the earlier kind. Absent for an all-zero profile.
std::optional<Behavior> dominant_behavior(const BehaviorProfile& profile);

/// Counts word-bounded, case-insensitive, non-overlapping occurrences of any phrase.
std::size_t count_phrases(std::string_view text, std::span<const std::string_view> phrases);

}  // namespace prefixevo
