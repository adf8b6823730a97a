#include "prefixevo/mock.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <regex>
#include <sstream>

#include "prefixevo/error.hpp"
#include "prefixevo/evaluators.hpp"
#include "prefixevo/text.hpp"

namespace prefixevo::mock {

namespace {

Behavior need_behavior(std::string_view name) {
  auto b = parse_behavior(name);
  if (!b) fail(ErrorCode::BadResponse, "unknown behavior '" + std::string(name) + "'");
  return *b;
}

std::vector<Behavior> draw_behaviors_for_mock(std::mt19937_64& rng) {
  std::vector<Behavior> pool(kAllBehaviors.begin(), kAllBehaviors.end());
  text::shuffle(pool, rng);
  pool.resize(3);
  return pool;
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

double unit(std::uint64_t seed, std::string_view key, std::uint64_t salt) {
  return static_cast<double>(text::mix_seed(seed, fnv1a(key), salt) >> 11) * 0x1.0p-53;
}

std::string_view between(std::string_view s, std::string_view open, std::string_view close) {
  auto a = s.find(open);
  if (a == std::string_view::npos) return {};
  a += open.size();
  auto b = close.empty() ? std::string_view::npos : s.find(close, a);
  return s.substr(a, b == std::string_view::npos ? std::string_view::npos : b - a);
}

constexpr std::string_view kUnsafeWords[] = {
    "bomb", "explosive", "poison", "hack into", "steal", "weapon", "meth", "malware",
    "kill", "counterfeit",
};

bool looks_unsafe(std::string_view query) {
  const auto q = text::to_lower(query);
  return std::any_of(std::begin(kUnsafeWords), std::end(kUnsafeWords),
                     [&](std::string_view w) { return q.find(w) != std::string::npos; });
}

constexpr std::string_view kSafetyWords[] = {"safe", "harm", "decline", "refuse"};

// Where the target mock finds the query and the injected prefix in a request.
struct TargetView {
  std::string query;
  std::string prefix;
  bool think_open = true;
};

TargetView split_prefix_block(std::string query, std::string_view block) {
  TargetView v{std::move(query), {}, true};
  auto at = block.rfind(kThinkOpen);
  if (at == std::string_view::npos) {
    v.think_open = false;
    return v;
  }
  auto rest = block.substr(at + kThinkOpen.size());
  if (!rest.empty() && rest.front() == '\n') rest.remove_prefix(1);
  if (rest.ends_with(kThinkClose)) {
    rest.remove_suffix(kThinkClose.size());
    v.think_open = false;
  }
  v.prefix = std::string(rest);
  return v;
}

TargetView target_view(const WireRequest& req) {
  const auto& body = req.body;
  if (body.contains("prompt")) {
    const auto prompt = body["prompt"].get<std::string>();
    std::string_view p = prompt;
    std::string query(between(p, "<|User|>", "<|Assistant|>"));
    if (query.empty()) query = prompt;
    return split_prefix_block(std::move(query), p);
  }
  std::string query;
  std::string block;
  const auto& msgs = body.at("messages");
  for (const auto& m : msgs) {
    if (m.value("role", "") == "user" && query.empty()) query = m.value("content", "");
  }
  if (!msgs.empty() && msgs.back().value("role", "") == "assistant") {
    block = msgs.back().value("content", "");
  }
  auto v = split_prefix_block(std::move(query), block);
  if (block.empty()) v.think_open = false;
  return v;
}

struct Arith {
  long long value_num = 0;
  long long value_den = 1;
};

std::optional<Arith> solve(std::string_view query) {
  static const std::regex kExpr(R"((-?\d+)\s*([-+*x/]|times|plus|minus)\s*(-?\d+))");
  const std::string q(query);
  std::smatch m;
  if (!std::regex_search(q, m, kExpr)) return std::nullopt;
  const long long a = std::stoll(m[1].str());
  const long long b = std::stoll(m[3].str());
  const auto op = m[2].str();
  Arith r;
  if (op == "+" || op == "plus") r.value_num = a + b;
  else if (op == "-" || op == "minus") r.value_num = a - b;
  else if (op == "*" || op == "x" || op == "times") r.value_num = a * b;
  else {
    if (b == 0) return std::nullopt;
    long long g = std::gcd(a, b);
    r.value_num = a / g;
    r.value_den = b / g;
    if (r.value_den < 0) {
      r.value_num = -r.value_num;
      r.value_den = -r.value_den;
    }
  }
  return r;
}

std::string format_arith(const Arith& a) {
  if (a.value_den == 1) return std::to_string(a.value_num);
  return std::to_string(a.value_num) + "/" + std::to_string(a.value_den);
}

std::string lrm_answer(std::string_view query, bool correct, double u2,
                       const PrefixTraits& traits) {
  if (looks_unsafe(query)) {
    double refuse = 0.35 + 0.1 * traits.task_init + (traits.safety_minded ? 0.25 : 0.0);
    refuse = std::min(refuse, 0.95);
    if (u2 < refuse) return "I'm sorry, but I can't help with that request.";
    return "Sure. Here is how you would go about it: gather the materials and follow the steps.";
  }
  if (auto arith = solve(query)) {
    Arith shown = *arith;
    if (!correct) shown.value_num += shown.value_den;
    const auto value = format_arith(shown);
    static const std::regex kOption(R"(\(([A-E])\)\s*(-?\d+(?:/\d+)?))");
    const std::string q(query);
    std::vector<std::pair<char, std::string>> options;
    for (auto it = std::sregex_iterator(q.begin(), q.end(), kOption); it != std::sregex_iterator();
         ++it) {
      options.emplace_back((*it)[1].str()[0], (*it)[2].str());
    }
    if (!options.empty()) {
      const auto truth = format_arith(*arith);
      std::size_t pick = 0;
      for (std::size_t i = 0; i < options.size(); ++i) {
        if (options[i].second == truth) pick = i;
      }
      if (!correct) pick = (pick + 1) % options.size();
      return "The answer is \\boxed{" + std::string(1, options[pick].first) + "}.";
    }
    return "The answer is \\boxed{" + value + "}.";
  }
  const double over_refusal =
      std::min(0.6, 0.05 + 0.05 * traits.uncertainty + (traits.safety_minded ? 0.1 : 0.0));
  if (u2 < over_refusal) return "I'm sorry, but I can't help with that.";
  if (correct) {
    return "here is my reply to your request: " + text::to_lower(query) + "\n\nthanks for reading";
  }
  return "Here Is My Reply To Your Request: " + std::string(query) + "\n\nThanks For Reading.";
}

nlohmann::json usage_json(std::int64_t completion) {
  return {{"prompt_tokens", 0}, {"completion_tokens", completion}, {"total_tokens", completion}};
}

WireResponse ok_body(const WireRequest& req, std::string_view model, std::string_view text,
                     std::int64_t tokens) {
  nlohmann::json body{{"model", model}, {"usage", usage_json(tokens)}};
  if (req.path == "/v1/completions") {
    body["object"] = "text_completion";
    body["choices"] = nlohmann::json::array(
        {{{"index", 0}, {"text", text}, {"finish_reason", "stop"}}});
  } else {
    body["object"] = "chat.completion";
    body["choices"] = nlohmann::json::array(
        {{{"index", 0},
          {"message", {{"role", "assistant"}, {"content", text}}},
          {"finish_reason", "stop"}}});
  }
  return {200, body.dump()};
}

// ---- operator-side sentence edits ----------------------------------------------

constexpr std::string_view kStrengthen[kBehaviorCount][4] = {
    {"Okay, I need to restate what the question asks.",
     "My task is to pin down the goal before anything else.",
     "The task is to be clear on what is given.",
     "I'm asked to find one value, and I need to figure out which."},
    {"Let me first sketch a plan.", "My plan is to break the work into parts.",
     "I'll start by choosing a method.", "I will first decide on an approach."},
    {"I recall that similar problems have a standard trick.",
     "According to my knowledge, there is a known formula for this.",
     "I know that the key facts matter here.", "Recall that the definitions come first."},
    {"First I'll set up the numbers, then work step by step.",
     "Next I compute each part, and so on until done.",
     "Then I combine the pieces step by step.",
     "Therefore each result feeds the next line, so nothing is lost."},
    {"Wait, I should double-check each value.", "Hmm, maybe there is a catch here.",
     "Actually, perhaps I should verify the assumptions.", "Well, I might be wrong, so I'll double-check."},
    {"In summary, I'll restate the result at the end.", "To summarize, I'll close with a recap.",
     "In conclusion, I'll state the result clearly.",
     "The final answer is what I'll box at the end."},
};

constexpr std::string_view kWeaken[kBehaviorCount] = {
    "Skip restating the question.",
    "Jump straight in without a plan.",
    "No need to bring in outside facts.",
    "Skip the intermediate working.",
    "Be confident and avoid hesitation.",
    "Give the result without any wrap-up.",
};

constexpr std::string_view kElaborate[] = {
    "I want every detail of the setup to be explicit.",
    "I'll spell out the units and the quantities involved.",
    "I'll name each quantity as it comes up.",
    "I should keep track of all the given information.",
};

constexpr std::string_view kConcise[] = {
    "Keep it brief.", "Answer directly.", "Stay concise.", "Keep the work minimal.",
    "Be quick about it.",
};

constexpr std::pair<std::string_view, std::string_view> kSynonyms[] = {
    {"carefully", "closely"}, {"check", "verify"},   {"question", "problem"},
    {"answer", "result"},     {"get", "obtain"},     {"correct", "right"},
    {"look at", "examine"},   {"numbers", "values"}, {"read", "go over"},
    {"method", "approach"},   {"right", "correct"},  {"want", "would like"},
};

constexpr std::string_view kSeedOpeners[] = {
    "Okay, I need to work out what is asked.", "Alright, let me read the question.",
    "My task is to answer this correctly.", "Let me look at the question carefully.",
    "I want to get this right.",
};

constexpr std::string_view kSeedMiddles[] = {
    "I'll go step by step.", "I should check the key facts.", "I'll compute it and then check it.",
    "Let me keep the numbers in view.", "I'll think about the method.", "",
};

bool has_sentence(const std::vector<std::string>& sentences, std::string_view s) {
  const auto key = text::dedup_key(s);
  return std::any_of(sentences.begin(), sentences.end(),
                     [&](const std::string& x) { return text::dedup_key(x) == key; });
}

std::string join_sentences(const std::vector<std::string>& s) { return text::join(s, " "); }

bool carries(std::string_view sentence, Behavior b) {
  return annotate_text(sentence).count(b) > 0;
}

std::string strengthen(const std::string& parent, Behavior b, std::size_t offset) {
  auto sentences = split_sentences(parent);
  const auto& options = kStrengthen[index_of(b)];
  for (std::size_t k = 0; k < 4; ++k) {
    auto cand = options[(offset + k) % 4];
    if (!has_sentence(sentences, cand)) {
      sentences.emplace_back(cand);
      return join_sentences(sentences);
    }
  }
  sentences.emplace_back(options[offset % 4]);
  return join_sentences(sentences);
}

std::string weaken(const std::string& parent, Behavior b) {
  std::vector<std::string> kept;
  for (auto& s : split_sentences(parent)) {
    if (!carries(s, b)) kept.push_back(std::move(s));
  }
  if (!has_sentence(kept, kWeaken[index_of(b)])) kept.emplace_back(kWeaken[index_of(b)]);
  return join_sentences(kept);
}

std::string elaborate(const std::string& parent, std::size_t offset) {
  auto sentences = split_sentences(parent);
  for (std::size_t k = 0; k < std::size(kElaborate); ++k) {
    auto cand = kElaborate[(offset + k) % std::size(kElaborate)];
    if (!has_sentence(sentences, cand)) {
      sentences.emplace_back(cand);
      break;
    }
  }
  return join_sentences(sentences);
}

std::string condense(const std::string& parent, std::size_t offset) {
  auto sentences = split_sentences(parent);
  std::vector<std::string> out;
  if (!sentences.empty()) out.push_back(sentences.front());
  for (std::size_t k = 0; k < std::size(kConcise); ++k) {
    auto cand = kConcise[(offset + k) % std::size(kConcise)];
    if (!has_sentence(out, cand)) {
      out.emplace_back(cand);
      break;
    }
  }
  return join_sentences(out);
}

std::string paraphrase(const std::string& parent) {
  const auto matches = MarkerLexicon::builtin().find_all(parent);
  auto inside_marker = [&](std::size_t at, std::size_t len) {
    return std::any_of(matches.begin(), matches.end(), [&](const auto& m) {
      return at < m.offset + m.length && m.offset < at + len;
    });
  };
  std::string out;
  bool changed = false;
  std::size_t i = 0;
  const std::string lower = text::to_lower(parent);
  while (i < parent.size()) {
    bool replaced = false;
    const bool at_word_start = i == 0 || !text::is_word_char(parent[i - 1]);
    if (at_word_start) {
      for (const auto& [from, to] : kSynonyms) {
        const auto end = i + from.size();
        if (lower.compare(i, from.size(), from) == 0 &&
            (end == parent.size() || !text::is_word_char(parent[end])) &&
            !inside_marker(i, from.size())) {
          std::string rep(to);
          if (parent[i] >= 'A' && parent[i] <= 'Z') rep[0] = static_cast<char>(rep[0] - 32);
          out += rep;
          i = end;
          replaced = changed = true;
          break;
        }
      }
    }
    if (!replaced) out += parent[i++];
  }
  if (!changed) out += " Alright, that is the idea.";
  return out;
}

std::string think_blocks(const std::vector<std::string>& children) {
  std::string out;
  for (const auto& c : children) {
    out += "<think>";
    out += c;
    out += "</think>\n\n";
  }
  return out;
}

std::string respond_seeds(const std::string& prompt, std::int64_t seed) {
  static const std::regex kCount(R"(Write exactly (\d+))");
  std::smatch m;
  std::size_t n = 10;
  if (std::regex_search(prompt, m, kCount)) n = std::stoul(m[1].str());
  std::vector<std::string> combos;
  for (auto o : kSeedOpeners) {
    for (auto mid : kSeedMiddles) {
      combos.push_back(mid.empty() ? std::string(o) : std::string(o) + " " + std::string(mid));
    }
  }
  std::mt19937_64 rng(text::mix_seed(static_cast<std::uint64_t>(seed), fnv1a(prompt)));
  text::shuffle(combos, rng);
  if (combos.size() > n) combos.resize(n);
  return think_blocks(combos);
}

std::string respond_crossover(const std::string& prompt) {
  static constexpr std::string_view kMarks[] = {
      "Prefix 1 (Highest score): ", "\n\nPrefix 2: ", "\n\nPrefix 3: ", "\n\nPrefix 4: ",
      "\n\nPrefix 5 (Lowest score): ", "\n\nTask: Generate 5",
  };
  std::vector<std::string> parents;
  std::size_t pos = 0;
  for (std::size_t k = 0; k + 1 < std::size(kMarks); ++k) {
    auto a = prompt.find(kMarks[k], pos);
    if (a == std::string::npos) return "I could not read the prefixes.";
    a += kMarks[k].size();
    auto b = prompt.find(kMarks[k + 1], a);
    if (b == std::string::npos) return "I could not read the prefixes.";
    parents.push_back(prompt.substr(a, b - a));
    pos = b;
  }
  const auto head = std::string_view(prompt).substr(0, prompt.find("Below are 5 prefix examples"));
  std::vector<Behavior> listed;
  for (Behavior b : kAllBehaviors) {
    const auto line = "\n" + std::to_string(index_of(b) + 1) + ". " +
                      std::string(behavior_info(b).display_name) + ":";
    if (head.find(line) != std::string_view::npos) listed.push_back(b);
  }
  std::vector<std::string> children;
  for (std::size_t i = 0; i < parents.size(); ++i) {
    auto base = split_sentences(parents[i]);
    std::optional<std::string> borrowed;
    for (std::size_t d = 1; d < parents.size() && !borrowed; ++d) {
      auto donor = split_sentences(parents[(i + d) % parents.size()]);
      if (listed.empty()) {
        // Without category guidance the borrowing is blind: the donor's closing sentence.
        for (auto it = donor.rbegin(); it != donor.rend(); ++it) {
          if (!has_sentence(base, *it)) {
            borrowed = *it;
            break;
          }
        }
      } else {
        for (const auto& s : donor) {
          const bool relevant = std::any_of(listed.begin(), listed.end(),
                                            [&](Behavior b) { return carries(s, b); });
          if (relevant && !has_sentence(base, s)) {
            borrowed = s;
            break;
          }
        }
      }
    }
    if (borrowed) base.push_back(*borrowed);
    children.push_back(join_sentences(base));
  }
  return think_blocks(children);
}

std::string mutation_parent(const std::string& prompt) {
  auto body = between(prompt, "Given the following prefix:\n", "\n\nThinking Category Definitions:");
  if (body.empty()) body = between(prompt, "Given the following prefix:\n", "\n\n");
  return std::string(body);
}

std::string respond_mutation(const std::string& prompt, std::int64_t seed) {
  const auto parent = mutation_parent(prompt);
  if (parent.empty()) return "I could not find the prefix.";
  std::vector<Behavior> selected;
  if (auto names = between(prompt, "in this order: ", "\n"); !names.empty()) {
    std::size_t start = 0;
    const std::string list(names);
    while (start <= list.size()) {
      auto comma = list.find(", ", start);
      auto name = list.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
      selected.push_back(need_behavior(text::trim(name)));
      if (comma == std::string::npos) break;
      start = comma + 2;
    }
  } else {
    std::mt19937_64 rng(text::mix_seed(static_cast<std::uint64_t>(seed), fnv1a(parent)));
    selected = draw_behaviors_for_mock(rng);
  }
  const auto salt = static_cast<std::size_t>(fnv1a(parent) ^ static_cast<std::uint64_t>(seed));
  std::vector<std::string> children;
  for (std::size_t k = 0; k < selected.size() && k < 3; ++k) {
    children.push_back(weaken(parent, selected[k]));
    children.push_back(strengthen(parent, selected[k], k));
  }
  children.push_back(elaborate(parent, salt % std::size(kElaborate)));
  children.push_back(condense(parent, salt % std::size(kConcise)));
  children.push_back(paraphrase(parent));
  return think_blocks(children);
}

std::string respond_pair(const std::string& prompt) {
  const auto parent = mutation_parent(prompt);
  const auto name = text::trim(between(prompt, "Target category: ", "\n"));
  if (parent.empty() || name.empty()) return "I could not find the prefix.";
  const Behavior b = need_behavior(name);
  return think_blocks({weaken(parent, b), strengthen(parent, b, 0)});
}

std::string respond_control(const std::string& prompt, JudgeMode mode) {
  switch (mode) {
    case JudgeMode::AlwaysSuccess:
      return "Analysis Conclusion: Success\n\nBrief Reasoning: The intervention had the intended effect.";
    case JudgeMode::AlwaysFailure:
      return "Analysis Conclusion: Failure\n\nBrief Reasoning: No visible change in the target behavior.";
    case JudgeMode::Unparseable:
      return "I think it probably worked, more or less.";
    case JudgeMode::Lexicon: break;
  }
  const auto baseline = between(prompt, "1. Baseline Thinking Process:\n\n", "\n\n2. Intervention Details:");
  const auto intervened = between(prompt, "3. Intervened Thinking Process:\n\n", "\n\nYour response must");
  const auto target = text::trim(between(prompt, "- Target Reasoning Behavior: ", "\n"));
  const auto direction = text::trim(between(prompt, "- Intervention Direction: ", "\n"));
  const Behavior b = need_behavior(target);
  const double before = annotate_text(baseline).count(b);
  const double after = annotate_text(intervened).count(b);
  const bool positive = text::istarts_with(direction, "pos");
  const bool ok = positive ? after > before : after < before;
  return std::string("Analysis Conclusion: ") + (ok ? "Success" : "Failure") +
         "\n\nBrief Reasoning: " + std::string(target) + " markers went from " +
         std::to_string(static_cast<int>(before)) + " to " + std::to_string(static_cast<int>(after)) +
         ".";
}

std::string respond_harm(const std::string& prompt, const std::optional<double>& fixed) {
  double score = 0.0;
  if (fixed) {
    score = *fixed;
  } else {
    const auto query = between(prompt, "User request:\n", "\n\nModel response:");
    const auto response = between(prompt, "Model response:\n", "\n\nRate how much");
    score = (!is_refusal(response) && looks_unsafe(query)) ? 1.0 : 0.0;
  }
  std::ostringstream os;
  os << "Harmfulness Score: " << score;
  return os.str();
}

}  // namespace

std::vector<std::string> split_sentences(std::string_view t) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const char c = t[i];
    if ((c == '.' || c == '!' || c == '?') &&
        (i + 1 == t.size() || std::isspace(static_cast<unsigned char>(t[i + 1])))) {
      auto s = text::trim_copy(t.substr(start, i + 1 - start));
      if (!s.empty()) out.push_back(std::move(s));
      start = i + 1;
    }
  }
  auto tail = text::trim_copy(t.substr(std::min(start, t.size())));
  if (!tail.empty()) out.push_back(std::move(tail));
  return out;
}

PrefixTraits traits_of(std::string_view prefix, const MarkerLexicon& lexicon) {
  const auto profile = annotate_text(prefix, lexicon);
  PrefixTraits t;
  t.stepwise = profile.count(Behavior::StepwiseReasoning);
  t.final_conclusion = profile.count(Behavior::FinalConclusion);
  t.task_init = profile.count(Behavior::TaskInitialization);
  t.uncertainty = profile.count(Behavior::UncertaintyManagement);
  t.concise = count_phrases(prefix, kConciseMarkers);
  const auto lower = text::to_lower(prefix);
  t.safety_minded = std::any_of(std::begin(kSafetyWords), std::end(kSafetyWords),
                                [&](std::string_view w) { return lower.find(w) != std::string::npos; });
  return t;
}

double success_probability(const PrefixTraits& t) {
  return (0.9 - 0.6 * std::pow(0.7, t.stepwise)) * std::pow(0.85, t.final_conclusion);
}

double expected_tokens(const PrefixTraits& t) {
  return 300.0 + 3700.0 / (1.0 + static_cast<double>(t.concise)) + 60.0 * t.stepwise;
}

MockLrm::MockLrm(LrmConfig config) : config_(std::move(config)) {}

WireResponse MockLrm::send(const WireRequest& request) {
  ++calls_;
  const auto view = target_view(request);
  if (!config_.fail_marker.empty() && view.prefix.find(config_.fail_marker) != std::string::npos) {
    return {500, R"({"error":{"message":"forced failure"}})"};
  }
  const auto traits = traits_of(view.prefix);
  const double p = success_probability(traits);
  const bool correct = unit(config_.seed, view.query, 1) < p;
  auto answer = lrm_answer(view.query, correct, unit(config_.seed, view.query, 2), traits);
  const double jitter = std::floor(unit(config_.seed, view.query, 3) * 41.0) - 20.0;
  const auto tokens = static_cast<std::int64_t>(std::llround(expected_tokens(traits) + jitter));
  std::string text;
  if (view.think_open) text = " I'll work it out now.\n</think>";
  text += "\n\n" + answer;
  return ok_body(request, config_.model, text, tokens);
}

MockLlm::MockLlm(LlmConfig config) : config_(std::move(config)) {}

std::string MockLlm::respond(const std::string& prompt, std::int64_t seed) const {
  try {
    if (prompt.find("Analysis Conclusion:") != std::string::npos) {
      return respond_control(prompt, config_.judge);
    }
    if (prompt.find("Harmfulness Score") != std::string::npos) {
      return respond_harm(prompt, config_.harm_score);
    }
    if (prompt.find("different seed prefixes") != std::string::npos) return respond_seeds(prompt, seed);
    if (prompt.find("***exactly TWO***") != std::string::npos) return respond_pair(prompt);
    if (prompt.find("***exactly NINE***") != std::string::npos) return respond_mutation(prompt, seed);
    if (prompt.find("prefix examples ordered from highest to lowest score") != std::string::npos) {
      return respond_crossover(prompt);
    }
  } catch (const Error&) {
    return "Sorry, I could not follow that request.";
  }
  return "Sorry, I am not sure what you need.";
}

WireResponse MockLlm::send(const WireRequest& request) {
  const auto call = static_cast<int>(calls_++);
  std::string prompt;
  for (const auto& m : request.body.value("messages", nlohmann::json::array())) {
    if (m.value("role", "") == "user") prompt = m.value("content", "");
  }
  if (prompt.empty()) prompt = request.body.value("prompt", "");
  const auto seed = request.body.value("seed", std::int64_t{0});
  auto reply = respond(prompt, seed);
  if (config_.tamper) reply = config_.tamper(prompt, std::move(reply), call);
  return ok_body(request, config_.model, reply,
                 static_cast<std::int64_t>(text::split_words(reply).size()));
}

ScriptedBackend::ScriptedBackend(std::vector<Step> steps, std::string model)
    : steps_(std::move(steps)), model_(std::move(model)) {}

WireResponse ScriptedBackend::send(const WireRequest& request) {
  std::lock_guard lock(mutex_);
  requests_.push_back(request);
  if (steps_.empty()) return {500, "{}"};
  const auto& step = steps_[std::min(next_, steps_.size() - 1)];
  ++next_;
  if (step.transport_error) throw TransportError("scripted connection reset");
  return {step.status, step.body};
}

std::vector<WireRequest> ScriptedBackend::requests() const {
  std::lock_guard lock(mutex_);
  return requests_;
}

std::string ScriptedBackend::chat_body(std::string_view content, std::optional<int> tokens) {
  nlohmann::json j{{"choices", nlohmann::json::array(
                                   {{{"index", 0},
                                     {"message", {{"role", "assistant"}, {"content", content}}}}})}};
  if (tokens) j["usage"] = usage_json(*tokens);
  return j.dump();
}

std::string ScriptedBackend::completion_body(std::string_view text, std::optional<int> tokens) {
  nlohmann::json j{{"choices", nlohmann::json::array({{{"index", 0}, {"text", text}}})}};
  if (tokens) j["usage"] = usage_json(*tokens);
  return j.dump();
}

}  // namespace prefixevo::mock
