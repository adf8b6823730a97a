#include "prefixevo/templates.hpp"

#include <fstream>
#include <sstream>
#include <string_view>

#include "prefixevo/error.hpp"

namespace prefixevo {

namespace assets {
extern const std::string_view crossover;
extern const std::string_view mutation;
extern const std::string_view mutation_pair;
extern const std::string_view selection_random;
extern const std::string_view selection_assigned;
extern const std::string_view taxonomy_header_crossover;
extern const std::string_view taxonomy_header_mutation;
extern const std::string_view context_safety;
extern const std::string_view context_instruction_following;
extern const std::string_view context_efficient_reasoning;
extern const std::string_view judge_control;
extern const std::string_view judge_harm;
extern const std::string_view seeds;
}  // namespace assets

namespace {

struct Slot {
  std::string TemplateSet::*field;
  const char* file;
};

constexpr Slot kSlots[] = {
    {&TemplateSet::crossover, "crossover.txt"},
    {&TemplateSet::mutation, "mutation.txt"},
    {&TemplateSet::mutation_pair, "mutation_pair.txt"},
    {&TemplateSet::selection_random, "selection_random.txt"},
    {&TemplateSet::selection_assigned, "selection_assigned.txt"},
    {&TemplateSet::taxonomy_header_crossover, "taxonomy_header_crossover.txt"},
    {&TemplateSet::taxonomy_header_mutation, "taxonomy_header_mutation.txt"},
    {&TemplateSet::context_safety, "context_safety.txt"},
    {&TemplateSet::context_instruction_following, "context_instruction_following.txt"},
    {&TemplateSet::context_efficient_reasoning, "context_efficient_reasoning.txt"},
    {&TemplateSet::judge_control, "judge_control.txt"},
    {&TemplateSet::judge_harm, "judge_harm.txt"},
    {&TemplateSet::seeds, "seeds.txt"},
};

}  // namespace

const TemplateSet& TemplateSet::builtin() {
  static const TemplateSet set{
      std::string(assets::crossover),
      std::string(assets::mutation),
      std::string(assets::mutation_pair),
      std::string(assets::selection_random),
      std::string(assets::selection_assigned),
      std::string(assets::taxonomy_header_crossover),
      std::string(assets::taxonomy_header_mutation),
      std::string(assets::context_safety),
      std::string(assets::context_instruction_following),
      std::string(assets::context_efficient_reasoning),
      std::string(assets::judge_control),
      std::string(assets::judge_harm),
      std::string(assets::seeds),
  };
  return set;
}

TemplateSet TemplateSet::with_overrides(const std::filesystem::path& dir) {
  TemplateSet set = builtin();
  if (!std::filesystem::is_directory(dir)) {
    fail(ErrorCode::ConfigError, "template directory not found: " + dir.string());
  }
  for (const auto& slot : kSlots) {
    auto path = dir / slot.file;
    if (!std::filesystem::exists(path)) continue;
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::IoError, "cannot read template " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    std::string content = buf.str();
    if (!content.empty() && content.back() == '\n') content.pop_back();
    set.*slot.field = std::move(content);
  }
  return set;
}

}  // namespace prefixevo
