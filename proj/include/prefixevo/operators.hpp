#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "prefixevo/gateway.hpp"
#include "prefixevo/genome.hpp"
#include "prefixevo/taxonomy.hpp"
#include "prefixevo/templates.hpp"

namespace prefixevo {

inline constexpr int kCrossoverParents = 5;
inline constexpr int kCrossoverChildren = 5;
inline constexpr int kMutationBehaviors = 3;

/// Numbered category definitions as they appear in the operator prompts, preceded by
/// `header` and followed by a blank line. Numbers follow the fixed behavior order even
/// when only a subset is listed. Empty `behaviors` renders nothing.
std::string render_taxonomy_block(std::string_view header, std::span<const Behavior> behaviors);

struct CrossoverSpec {
  std::vector<ThinkPrefix> parents;  ///< best first
  int children = kCrossoverChildren;
  std::string taxonomy_text;

  /// Validates parent count and uniqueness and renders the full taxonomy block.
  static CrossoverSpec make(std::vector<ThinkPrefix> parents_best_first,
                            const TemplateSet& templates = TemplateSet::builtin());
  /// Same, with the taxonomy block restricted to `behaviors` (empty: no block).
  static CrossoverSpec make(std::vector<ThinkPrefix> parents_best_first,
                            std::span<const Behavior> behaviors,
                            const TemplateSet& templates = TemplateSet::builtin());
};

std::string build_crossover_prompt(const CrossoverSpec& spec,
                                   const TemplateSet& templates = TemplateSet::builtin());

struct ParseReport {
  int expected = 0;
  int found = 0;
};

struct OperatorOutput {
  std::vector<ThinkPrefix> children;
  std::string raw_llm_text;
  ParseReport report;
};

/// Removes the guidance labels the templates show in brackets ("[More Concise]",
/// "[Category 2 - Positive Intervention]", ...). Other bracketed text is kept.
std::string strip_bracket_labels(std::string_view block);

/// Contents of every `<think>...</think>` block in order after label stripping and
/// trimming; blocks that end up empty are dropped.
std::vector<std::string> extract_think_blocks(std::string_view raw);

OperatorOutput parse_crossover_output(std::string_view raw, const CrossoverSpec& spec,
                                      const MarkerLexicon& lexicon = MarkerLexicon::builtin());

enum class TaskContext { Safety, InstructionFollowing, EfficientReasoning };

/// Logic tasks borrow the efficient-reasoning context block.
TaskContext context_for(TaskKind task);
const std::string& context_text(TaskContext ctx, const TemplateSet& templates);

enum class MutationMode {
  Nine,  ///< three behaviors x {negative, positive} plus three style variations
  Pair,  ///< one behavior, {negative, positive}
};

struct MutationSpec {
  ThinkPrefix parent;
  std::vector<Behavior> selected;
  TaskContext context = TaskContext::EfficientReasoning;
  MutationMode mode = MutationMode::Nine;
  /// Name the selected categories in the prompt instead of letting the model pick them.
  bool announce_selection = false;

  int expected_children() const { return mode == MutationMode::Nine ? 9 : 2; }
  int behavior_slots() const { return mode == MutationMode::Nine ? kMutationBehaviors : 1; }
  void validate() const;
};

/// Draws `count` behaviors from `pool`. Distinct when the pool is large enough; smaller
/// pools are cycled in a shuffled order.
std::vector<Behavior> draw_behaviors(std::mt19937_64& rng, std::span<const Behavior> pool,
                                     std::size_t count);

std::string build_mutation_prompt(const MutationSpec& spec,
                                  const TemplateSet& templates = TemplateSet::builtin());

OperatorOutput parse_mutation_output(std::string_view raw, const MutationSpec& spec,
                                     const MarkerLexicon& lexicon = MarkerLexicon::builtin());

std::string build_seed_prompt(TaskKind task, std::size_t count,
                              const TemplateSet& templates = TemplateSet::builtin());

/// Built-in first-person prefixes used to pad a short seed set.
std::span<const std::string_view> seed_bank(TaskKind task);

struct SeedOptions {
  int attempts = 3;
  DecodingParams params{1.0, 0.95, 4096, {}};
  std::uint64_t rng_seed = 0;
};

/// Asks the operator model for `count` seeds, removing case-insensitive duplicates and
/// re-prompting up to `attempts` times before padding from the seed bank.
std::vector<ThinkPrefix> generate_seeds(TaskKind task, std::size_t count, Gateway& op,
                                        const SeedOptions& options = {},
                                        const TemplateSet& templates = TemplateSet::builtin(),
                                        const MarkerLexicon& lexicon = MarkerLexicon::builtin());

}  // namespace prefixevo
