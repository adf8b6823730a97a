#pragma once

#include <filesystem>
#include <string>

namespace prefixevo {

/// Prompt assets. The built-in set is compiled from assets/templates; a directory
/// override replaces any file it contains (same file names) and keeps the rest.
struct TemplateSet {
  std::string crossover;
  std::string mutation;
  std::string mutation_pair;
  std::string selection_random;
  std::string selection_assigned;
  std::string taxonomy_header_crossover;
  std::string taxonomy_header_mutation;
  std::string context_safety;
  std::string context_instruction_following;
  std::string context_efficient_reasoning;
  std::string judge_control;
  std::string judge_harm;
  std::string seeds;

  static const TemplateSet& builtin();
  static TemplateSet with_overrides(const std::filesystem::path& dir);
};

}  // namespace prefixevo
