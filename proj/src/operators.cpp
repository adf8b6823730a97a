#include "prefixevo/operators.hpp"

#include <algorithm>
#include <regex>
#include <set>
#include <unordered_set>

#include "prefixevo/error.hpp"
#include "prefixevo/text.hpp"

namespace prefixevo {

std::string render_taxonomy_block(std::string_view header, std::span<const Behavior> behaviors) {
  if (behaviors.empty()) return {};
  std::vector<Behavior> sorted(behaviors.begin(), behaviors.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  std::string out(header);
  out += "\n\n";
  for (Behavior b : sorted) {
    const auto& info = behavior_info(b);
    out += std::to_string(index_of(b) + 1);
    out += ". ";
    out += info.display_name;
    out += ": ";
    out += info.prompt_definition;
    out += "\n\n";
  }
  return out;
}

CrossoverSpec CrossoverSpec::make(std::vector<ThinkPrefix> parents, const TemplateSet& templates) {
  return make(std::move(parents), kAllBehaviors, templates);
}

CrossoverSpec CrossoverSpec::make(std::vector<ThinkPrefix> parents,
                                  std::span<const Behavior> behaviors,
                                  const TemplateSet& templates) {
  if (parents.size() != static_cast<std::size_t>(kCrossoverParents)) {
    fail(ErrorCode::InvalidSpec, "crossover needs exactly " + std::to_string(kCrossoverParents) +
                                     " parents, got " + std::to_string(parents.size()));
  }
  std::set<std::string> ids;
  for (const auto& p : parents) {
    validate_prefix_text(p.text);
    if (!ids.insert(p.id).second) fail(ErrorCode::InvalidSpec, "crossover parents repeat " + p.id);
  }
  CrossoverSpec spec;
  spec.parents = std::move(parents);
  spec.taxonomy_text = render_taxonomy_block(templates.taxonomy_header_crossover, behaviors);
  return spec;
}

std::string build_crossover_prompt(const CrossoverSpec& spec, const TemplateSet& templates) {
  if (spec.parents.size() != static_cast<std::size_t>(kCrossoverParents)) {
    fail(ErrorCode::InvalidSpec, "crossover spec must hold exactly 5 parents");
  }
  std::map<std::string, std::string, std::less<>> values{{"taxonomy", spec.taxonomy_text}};
  for (std::size_t i = 0; i < spec.parents.size(); ++i) {
    values["case_vals[" + std::to_string(i) + "]"] = spec.parents[i].text;
  }
  return text::render_placeholders(templates.crossover, values);
}

std::string strip_bracket_labels(std::string_view block) {
  static const std::regex kLabel(
      R"(\[\s*(?:category\s*\d+\s*-\s*(?:negative|positive)\s+intervention|more\s+detailed|more\s+concise|paraphrased|(?:new\s+)?prefix\s*\d+[^\]]*)\s*\](?:\s*:)?)",
      std::regex::icase);
  return std::regex_replace(std::string(block), kLabel, "");
}

std::vector<std::string> extract_think_blocks(std::string_view raw) {
  std::vector<std::string> blocks;
  std::size_t pos = 0;
  while (true) {
    auto open = raw.find(kThinkOpen, pos);
    if (open == std::string_view::npos) break;
    auto body = open + kThinkOpen.size();
    auto close = raw.find(kThinkClose, body);
    if (close == std::string_view::npos) break;
    auto inner = raw.substr(body, close - body);
    // A stray opener inside the block means the previous one was never closed.
    if (auto nested = inner.rfind(kThinkOpen); nested != std::string_view::npos) {
      inner = inner.substr(nested + kThinkOpen.size());
    }
    auto cleaned = text::trim_copy(strip_bracket_labels(inner));
    if (!cleaned.empty()) blocks.push_back(std::move(cleaned));
    pos = close + kThinkClose.size();
  }
  return blocks;
}

namespace {

int next_generation(std::span<const ThinkPrefix> parents) {
  int g = 0;
  for (const auto& p : parents) g = std::max(g, p.generation);
  return g + 1;
}

}  // namespace

OperatorOutput parse_crossover_output(std::string_view raw, const CrossoverSpec& spec,
                                      const MarkerLexicon& lexicon) {
  auto blocks = extract_think_blocks(raw);
  OperatorOutput out;
  out.raw_llm_text = std::string(raw);
  out.report = {spec.children, static_cast<int>(blocks.size())};
  if (static_cast<int>(blocks.size()) != spec.children) {
    throw WrongChildCount(spec.children, static_cast<int>(blocks.size()));
  }
  const int generation = next_generation(spec.parents);
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    Origin origin{OriginKind::Crossover, {}, std::nullopt};
    // The child keeps the style of parent i and borrows from the rest.
    const std::size_t primary = i % spec.parents.size();
    origin.parents.push_back(spec.parents[primary].id);
    for (std::size_t k = 0; k < spec.parents.size(); ++k) {
      if (k != primary) origin.parents.push_back(spec.parents[k].id);
    }
    out.children.push_back(ThinkPrefix::make(blocks[i], std::move(origin), generation, lexicon));
  }
  return out;
}

TaskContext context_for(TaskKind task) {
  switch (task) {
    case TaskKind::Safety: return TaskContext::Safety;
    case TaskKind::InstructionFollowing: return TaskContext::InstructionFollowing;
    case TaskKind::EfficientReasoning:
    case TaskKind::Logic: return TaskContext::EfficientReasoning;
  }
  return TaskContext::EfficientReasoning;
}

const std::string& context_text(TaskContext ctx, const TemplateSet& templates) {
  switch (ctx) {
    case TaskContext::Safety: return templates.context_safety;
    case TaskContext::InstructionFollowing: return templates.context_instruction_following;
    case TaskContext::EfficientReasoning: return templates.context_efficient_reasoning;
  }
  return templates.context_efficient_reasoning;
}

void MutationSpec::validate() const {
  validate_prefix_text(parent.text);
  const auto slots = static_cast<std::size_t>(behavior_slots());
  if (selected.size() != slots) {
    fail(ErrorCode::InvalidSpec, "mutation needs " + std::to_string(slots) +
                                     " selected behaviors, got " +
                                     std::to_string(selected.size()));
  }
}

std::vector<Behavior> draw_behaviors(std::mt19937_64& rng, std::span<const Behavior> pool,
                                     std::size_t count) {
  if (pool.empty()) fail(ErrorCode::InvalidSpec, "behavior pool is empty");
  std::vector<Behavior> order(pool.begin(), pool.end());
  std::sort(order.begin(), order.end());
  order.erase(std::unique(order.begin(), order.end()), order.end());
  text::shuffle(order, rng);
  std::vector<Behavior> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(order[i % order.size()]);
  return out;
}

std::string build_mutation_prompt(const MutationSpec& spec, const TemplateSet& templates) {
  spec.validate();
  std::map<std::string, std::string, std::less<>> values{
      {"prefix", spec.parent.text},
      {"taxonomy", render_taxonomy_block(templates.taxonomy_header_mutation, kAllBehaviors)},
      {"task_context", context_text(spec.context, templates)},
  };
  if (spec.mode == MutationMode::Pair) {
    values["category"] = std::string(behavior_info(spec.selected.front()).display_name);
    return text::render_placeholders(templates.mutation_pair, values);
  }
  if (spec.announce_selection) {
    std::vector<std::string> names;
    for (Behavior b : spec.selected) names.emplace_back(behavior_info(b).display_name);
    values["selection_rule"] = text::render_placeholders(templates.selection_assigned,
                                                         {{"categories", text::join(names, ", ")}});
  } else {
    values["selection_rule"] = templates.selection_random;
  }
  return text::render_placeholders(templates.mutation, values);
}

OperatorOutput parse_mutation_output(std::string_view raw, const MutationSpec& spec,
                                     const MarkerLexicon& lexicon) {
  spec.validate();
  auto blocks = extract_think_blocks(raw);
  const int expected = spec.expected_children();
  OperatorOutput out;
  out.raw_llm_text = std::string(raw);
  out.report = {expected, static_cast<int>(blocks.size())};
  if (static_cast<int>(blocks.size()) != expected) {
    throw WrongChildCount(expected, static_cast<int>(blocks.size()));
  }
  const int generation = spec.parent.generation + 1;
  const std::vector<std::string> parent{spec.parent.id};
  for (int i = 0; i < expected; ++i) {
    Origin origin{OriginKind::Seed, parent, std::nullopt};
    const int behavior_blocks = 2 * spec.behavior_slots();
    if (i < behavior_blocks) {
      origin.kind = (i % 2 == 0) ? OriginKind::MutationWeakened : OriginKind::MutationEnhanced;
      origin.behavior = spec.selected[static_cast<std::size_t>(i / 2)];
    } else {
      static constexpr OriginKind kStyles[] = {OriginKind::StyleDetailed, OriginKind::StyleConcise,
                                               OriginKind::StyleParaphrased};
      origin.kind = kStyles[i - behavior_blocks];
    }
    out.children.push_back(ThinkPrefix::make(blocks[static_cast<std::size_t>(i)],
                                             std::move(origin), generation, lexicon));
  }
  return out;
}

std::string build_seed_prompt(TaskKind task, std::size_t count, const TemplateSet& templates) {
  return text::render_placeholders(
      templates.seeds,
      {{"task_context", context_text(context_for(task), templates)}, {"count", std::to_string(count)}});
}

namespace {

constexpr std::string_view kBankEfficient[] = {
    "Okay, let me keep this short and get straight to the answer.",
    "I need to solve this efficiently. So I'll do the key computation and stop.",
    "Let me think concisely and skip anything that does not move me toward the result.",
    "Alright, first I'll pin down what is asked, then compute it directly.",
    "I will first write the core equation, then solve it without detours.",
    "Hmm, this looks familiar. I recall a standard method, so I'll apply it.",
    "Let me work step by step, but keep every step brief.",
    "My task is to find the answer with as few steps as possible.",
    "Okay, I need to be direct here. No second-guessing, just solve it.",
    "Let me note the given values, then calculate. Therefore I can answer quickly.",
    "I should avoid re-checking everything. One clean pass is enough.",
    "To solve this, I'll pick the simplest approach that works and commit to it.",
};

constexpr std::string_view kBankSafety[] = {
    "Okay, I need to check whether this request is safe before I answer.",
    "My task is to help, but first I should see if anything here could cause harm.",
    "Let me first decide if this is a legitimate request, then respond accordingly.",
    "I am a careful assistant. If the request is harmful I will decline and say why.",
    "Hmm, I should think about who could be hurt by an answer to this.",
    "I need to figure out the intent behind this question before helping.",
    "Let me read the request closely. Safe questions get a full answer; unsafe ones get a clear refusal.",
    "I will first look for legal or ethical red flags, then answer or refuse politely.",
    "Okay, I need to be helpful without giving dangerous details.",
    "Wait, let me make sure this does not ask for something prohibited.",
    "My job here is to respond courteously and keep firm boundaries.",
    "The task is to answer safe questions well and refuse harmful ones briefly.",
};

constexpr std::string_view kBankInstruction[] = {
    "Okay, I need to follow every instruction in this request exactly.",
    "So I need to do what is asked and also respect each formatting rule.",
    "Let me first list the constraints, then write a response that meets all of them.",
    "Hmm, I need to carefully consider all requirements and execute the task step by step.",
    "My task is to satisfy each requirement; I'll check them one by one as I write.",
    "I will first identify the main points, then plan the format.",
    "Okay, I need to notice specific requirements like length, case and keywords.",
    "Let me keep the response simple while meeting every constraint.",
    "I should balance being concise with covering everything that was asked.",
    "The task is to write exactly what the user specified, nothing more.",
    "Let me plan the structure before writing so no rule gets missed.",
    "I need to figure out what the output must look like, then produce it.",
};

}  // namespace

std::span<const std::string_view> seed_bank(TaskKind task) {
  switch (task) {
    case TaskKind::Safety: return kBankSafety;
    case TaskKind::InstructionFollowing: return kBankInstruction;
    case TaskKind::EfficientReasoning:
    case TaskKind::Logic: return kBankEfficient;
  }
  return kBankEfficient;
}

std::vector<ThinkPrefix> generate_seeds(TaskKind task, std::size_t count, Gateway& op,
                                        const SeedOptions& options, const TemplateSet& templates,
                                        const MarkerLexicon& lexicon) {
  if (count == 0) fail(ErrorCode::InvalidSpec, "seed count must be >= 1");
  std::vector<ThinkPrefix> seeds;
  std::unordered_set<std::string> seen;
  auto accept = [&](std::string_view t) {
    if (seeds.size() >= count) return;
    auto key = text::dedup_key(t);
    if (key.empty() || !seen.insert(key).second) return;
    try {
      seeds.push_back(ThinkPrefix::make(t, Origin{}, 0, lexicon));
    } catch (const Error&) {
      seen.erase(key);
    }
  };

  for (int attempt = 0; attempt < options.attempts && seeds.size() < count; ++attempt) {
    auto prompt = build_seed_prompt(task, count - seeds.size(), templates);
    auto seed = static_cast<std::int64_t>(
        text::mix_seed(options.rng_seed, 0x5eedULL, static_cast<std::uint64_t>(attempt)) >> 1);
    auto req = render_chat_request(prompt, options.params, op.model_id(), seed);
    req.provenance.role = "operator";
    auto result = op.generate(req);
    for (const auto& block : extract_think_blocks(result.reply.content)) {
      accept(block);
    }
  }
  for (auto t : seed_bank(task)) accept(t);
  if (seeds.size() < count) {
    fail(ErrorCode::SeedShortfall, "only " + std::to_string(seeds.size()) + " unique seeds for " +
                                       std::to_string(count) + " requested");
  }
  return seeds;
}

}  // namespace prefixevo
