#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "prefixevo/taxonomy.hpp"

namespace prefixevo {

inline constexpr std::string_view kThinkOpen = "<think>";
inline constexpr std::string_view kThinkClose = "</think>";

enum class TaskKind { EfficientReasoning, Safety, InstructionFollowing, Logic };

std::string_view to_string(TaskKind t);
TaskKind parse_task_kind(std::string_view s);

enum class OriginKind {
  Seed,
  Crossover,
  MutationEnhanced,
  MutationWeakened,
  StyleDetailed,
  StyleConcise,
  StyleParaphrased,
};

std::string_view to_string(OriginKind k);
OriginKind parse_origin_kind(std::string_view s);

struct Origin {
  OriginKind kind = OriginKind::Seed;
  std::vector<std::string> parents;
  std::optional<Behavior> behavior;  ///< set for MutationEnhanced / MutationWeakened

  bool is_style() const;
  bool is_behavior_targeted() const;

  friend bool operator==(const Origin&, const Origin&) = default;
};

/// A candidate genome. `text` is what goes between the think delimiters.
struct ThinkPrefix {
  std::string id;
  std::string text;
  Origin origin;
  int generation = 0;
  BehaviorProfile profile;

  /// Validates the text, derives the id from it and annotates it with `lexicon`.
  static ThinkPrefix make(std::string_view text, Origin origin, int generation,
                          const MarkerLexicon& lexicon = MarkerLexicon::builtin());
};

/// Throws InvalidPrefix for blank text or text carrying a think delimiter.
void validate_prefix_text(std::string_view text);

/// Content-derived id: identical text (up to case and whitespace runs) gives the same id.
std::string prefix_id_for(std::string_view text);

struct FitnessRecord {
  std::string prefix_id;
  TaskKind task_kind = TaskKind::Logic;
  double accuracy = 0.0;
  double mean_tokens = 0.0;
  std::map<std::string, double> task_scores;
  double fitness = 0.0;
  int n_samples = 0;
  std::int64_t eval_seed = 0;
  int n_failed = 0;
  /// More than the allowed fraction of items failed; the member never enters selection.
  bool excluded = false;

  friend bool operator==(const FitnessRecord&, const FitnessRecord&) = default;
};

struct Member {
  ThinkPrefix prefix;
  std::optional<FitnessRecord> record;
};

struct Population {
  std::vector<Member> members;
  int iteration = 0;

  std::size_t size() const noexcept { return members.size(); }
  const Member* find(std::string_view id) const;
  bool contains(std::string_view id) const { return find(id) != nullptr; }
  /// Appends unless a member with the same id already exists. Returns whether it was added.
  bool add(Member m);
  bool fully_evaluated() const;
};

/// Selection order: fitness descending, then mean_tokens ascending, then id ascending.
bool ranks_before(const Member& a, const Member& b);

/// The `n` best eligible members, best first. Excluded members are skipped, so the result
/// may be shorter than `n` when the population holds failed candidates.
std::vector<Member> select_top_n(const Population& pop, std::size_t n);

/// Re-inserts `prev_best` when no member of `next` reaches its fitness.
Population elite_floor(const Member& prev_best, Population next);

/// Best eligible member, if any.
std::optional<Member> best_member(const Population& pop);

void to_json(nlohmann::json& j, const BehaviorProfile& p);
void from_json(const nlohmann::json& j, BehaviorProfile& p);
void to_json(nlohmann::json& j, const Origin& o);
void from_json(const nlohmann::json& j, Origin& o);
void to_json(nlohmann::json& j, const ThinkPrefix& p);
void from_json(const nlohmann::json& j, ThinkPrefix& p);
void to_json(nlohmann::json& j, const FitnessRecord& r);
void from_json(const nlohmann::json& j, FitnessRecord& r);
void to_json(nlohmann::json& j, const Member& m);
void from_json(const nlohmann::json& j, Member& m);
void to_json(nlohmann::json& j, const Population& p);
void from_json(const nlohmann::json& j, Population& p);

}  // namespace prefixevo
