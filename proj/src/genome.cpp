#include "prefixevo/genome.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "prefixevo/error.hpp"
#include "prefixevo/text.hpp"

namespace prefixevo {

std::string_view to_string(TaskKind t) {
  switch (t) {
    case TaskKind::EfficientReasoning: return "EfficientReasoning";
    case TaskKind::Safety: return "Safety";
    case TaskKind::InstructionFollowing: return "InstructionFollowing";
    case TaskKind::Logic: return "Logic";
  }
  return "Logic";
}

TaskKind parse_task_kind(std::string_view s) {
  for (auto t : {TaskKind::EfficientReasoning, TaskKind::Safety, TaskKind::InstructionFollowing,
                 TaskKind::Logic}) {
    if (text::iequals(s, to_string(t))) return t;
  }
  if (text::iequals(s, "efficient") || text::iequals(s, "efficient_reasoning")) {
    return TaskKind::EfficientReasoning;
  }
  if (text::iequals(s, "instruction_following") || text::iequals(s, "if")) {
    return TaskKind::InstructionFollowing;
  }
  fail(ErrorCode::ConfigError, "unknown task kind '" + std::string(s) + "'");
}

namespace {
constexpr std::pair<OriginKind, std::string_view> kOriginNames[] = {
    {OriginKind::Seed, "Seed"},
    {OriginKind::Crossover, "Crossover"},
    {OriginKind::MutationEnhanced, "MutationEnhanced"},
    {OriginKind::MutationWeakened, "MutationWeakened"},
    {OriginKind::StyleDetailed, "StyleDetailed"},
    {OriginKind::StyleConcise, "StyleConcise"},
    {OriginKind::StyleParaphrased, "StyleParaphrased"},
};
}  // namespace

std::string_view to_string(OriginKind k) {
  for (auto [kind, name] : kOriginNames) {
    if (kind == k) return name;
  }
  return "Seed";
}

OriginKind parse_origin_kind(std::string_view s) {
  for (auto [kind, name] : kOriginNames) {
    if (name == s) return kind;
  }
  fail(ErrorCode::ConfigError, "unknown origin kind '" + std::string(s) + "'");
}

bool Origin::is_style() const {
  return kind == OriginKind::StyleDetailed || kind == OriginKind::StyleConcise ||
         kind == OriginKind::StyleParaphrased;
}

bool Origin::is_behavior_targeted() const {
  return kind == OriginKind::MutationEnhanced || kind == OriginKind::MutationWeakened;
}

void validate_prefix_text(std::string_view t) {
  if (text::trim(t).empty()) fail(ErrorCode::InvalidPrefix, "think-prefix text is blank");
  if (t.find(kThinkOpen) != std::string_view::npos ||
      t.find(kThinkClose) != std::string_view::npos) {
    fail(ErrorCode::InvalidPrefix, "think-prefix text contains a think delimiter");
  }
}

std::string prefix_id_for(std::string_view t) {
  return "tp-" + text::sha256_hex(text::dedup_key(t)).substr(0, 16);
}

ThinkPrefix ThinkPrefix::make(std::string_view t, Origin origin, int generation,
                              const MarkerLexicon& lexicon) {
  validate_prefix_text(t);
  ThinkPrefix p;
  p.text = text::trim_copy(t);
  p.id = prefix_id_for(p.text);
  p.origin = std::move(origin);
  p.generation = generation;
  p.profile = annotate_text(p.text, lexicon);
  return p;
}

const Member* Population::find(std::string_view id) const {
  for (const auto& m : members) {
    if (m.prefix.id == id) return &m;
  }
  return nullptr;
}

bool Population::add(Member m) {
  if (contains(m.prefix.id)) return false;
  members.push_back(std::move(m));
  return true;
}

bool Population::fully_evaluated() const {
  return std::all_of(members.begin(), members.end(),
                     [](const Member& m) { return m.record.has_value(); });
}

bool ranks_before(const Member& a, const Member& b) {
  const auto& ra = *a.record;
  const auto& rb = *b.record;
  if (ra.excluded != rb.excluded) return !ra.excluded;
  if (ra.fitness != rb.fitness) return ra.fitness > rb.fitness;
  if (ra.mean_tokens != rb.mean_tokens) return ra.mean_tokens < rb.mean_tokens;
  return a.prefix.id < b.prefix.id;
}

std::vector<Member> select_top_n(const Population& pop, std::size_t n) {
  if (n == 0) fail(ErrorCode::InvalidSpec, "select_top_n needs n >= 1");
  if (n > pop.size()) {
    fail(ErrorCode::NTooLarge, "cannot select " + std::to_string(n) + " from a population of " +
                                   std::to_string(pop.size()));
  }
  std::vector<Member> eligible;
  eligible.reserve(pop.size());
  for (const auto& m : pop.members) {
    if (!m.record) fail(ErrorCode::UnevaluatedMember, "member " + m.prefix.id + " has no fitness");
    if (!m.record->excluded) eligible.push_back(m);
  }
  std::sort(eligible.begin(), eligible.end(), ranks_before);
  if (eligible.size() > n) eligible.resize(n);
  return eligible;
}

Population elite_floor(const Member& prev_best, Population next) {
  if (!prev_best.record) fail(ErrorCode::UnevaluatedMember, "previous best has no fitness");
  bool kept = std::any_of(next.members.begin(), next.members.end(), [&](const Member& m) {
    return m.record && !m.record->excluded && m.record->fitness >= prev_best.record->fitness;
  });
  if (kept) return next;
  auto same = std::find_if(next.members.begin(), next.members.end(),
                           [&](const Member& m) { return m.prefix.id == prev_best.prefix.id; });
  if (same != next.members.end()) {
    *same = prev_best;
  } else {
    next.members.push_back(prev_best);
  }
  return next;
}

std::optional<Member> best_member(const Population& pop) {
  const Member* best = nullptr;
  for (const auto& m : pop.members) {
    if (!m.record || m.record->excluded) continue;
    if (!best || ranks_before(m, *best)) best = &m;
  }
  if (!best) return std::nullopt;
  return *best;
}

// --- serialization ---

void to_json(nlohmann::json& j, const BehaviorProfile& p) {
  j = nlohmann::json::object();
  for (Behavior b : kAllBehaviors) {
    if (p.count(b) != 0.0) j[std::string(to_string(b))] = p.count(b);
  }
}

void from_json(const nlohmann::json& j, BehaviorProfile& p) {
  std::array<double, kBehaviorCount> counts{};
  for (const auto& [key, value] : j.items()) {
    auto b = parse_behavior(key);
    if (!b) fail(ErrorCode::ConfigError, "unknown behavior in profile: " + key);
    counts[index_of(*b)] = value.get<double>();
  }
  p = BehaviorProfile::from_counts(counts);
}

void to_json(nlohmann::json& j, const Origin& o) {
  j = {{"kind", to_string(o.kind)}, {"parents", o.parents}};
  if (o.behavior) j["behavior"] = to_string(*o.behavior);
}

void from_json(const nlohmann::json& j, Origin& o) {
  o.kind = parse_origin_kind(j.at("kind").get<std::string>());
  o.parents = j.value("parents", std::vector<std::string>{});
  o.behavior.reset();
  if (j.contains("behavior")) {
    o.behavior = parse_behavior(j.at("behavior").get<std::string>());
  }
}

void to_json(nlohmann::json& j, const ThinkPrefix& p) {
  j = {{"id", p.id},
       {"text", p.text},
       {"origin", p.origin},
       {"generation", p.generation},
       {"profile", p.profile}};
}

void from_json(const nlohmann::json& j, ThinkPrefix& p) {
  p.id = j.at("id").get<std::string>();
  p.text = j.at("text").get<std::string>();
  p.origin = j.at("origin").get<Origin>();
  p.generation = j.at("generation").get<int>();
  p.profile = j.at("profile").get<BehaviorProfile>();
}

void to_json(nlohmann::json& j, const FitnessRecord& r) {
  j = {{"prefix_id", r.prefix_id},
       {"task_kind", to_string(r.task_kind)},
       {"accuracy", r.accuracy},
       {"mean_tokens", r.mean_tokens},
       {"task_scores", r.task_scores},
       {"n_samples", r.n_samples},
       {"eval_seed", r.eval_seed},
       {"n_failed", r.n_failed},
       {"excluded", r.excluded}};
  // Excluded members carry -inf, which JSON cannot represent.
  j["fitness"] = r.excluded ? nlohmann::json(nullptr) : nlohmann::json(r.fitness);
}

void from_json(const nlohmann::json& j, FitnessRecord& r) {
  r.prefix_id = j.at("prefix_id").get<std::string>();
  r.task_kind = parse_task_kind(j.at("task_kind").get<std::string>());
  r.accuracy = j.at("accuracy").get<double>();
  r.mean_tokens = j.at("mean_tokens").get<double>();
  r.task_scores = j.at("task_scores").get<std::map<std::string, double>>();
  r.n_samples = j.at("n_samples").get<int>();
  r.eval_seed = j.at("eval_seed").get<std::int64_t>();
  r.n_failed = j.value("n_failed", 0);
  r.excluded = j.value("excluded", false);
  r.fitness = r.excluded || j.at("fitness").is_null() ? -std::numeric_limits<double>::infinity()
                                                      : j.at("fitness").get<double>();
}

void to_json(nlohmann::json& j, const Member& m) {
  j = {{"prefix", m.prefix}};
  j["record"] = m.record ? nlohmann::json(*m.record) : nlohmann::json(nullptr);
}

void from_json(const nlohmann::json& j, Member& m) {
  m.prefix = j.at("prefix").get<ThinkPrefix>();
  if (j.contains("record") && !j.at("record").is_null()) {
    m.record = j.at("record").get<FitnessRecord>();
  } else {
    m.record.reset();
  }
}

void to_json(nlohmann::json& j, const Population& p) {
  j = {{"iteration", p.iteration}, {"members", p.members}};
}

void from_json(const nlohmann::json& j, Population& p) {
  p.iteration = j.at("iteration").get<int>();
  p.members = j.at("members").get<std::vector<Member>>();
}

}  // namespace prefixevo
