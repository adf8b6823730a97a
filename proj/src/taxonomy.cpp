#include "prefixevo/taxonomy.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "prefixevo/error.hpp"
#include "prefixevo/text.hpp"

namespace prefixevo {

namespace assets {
extern const std::string_view lexicon_default;
}

namespace {

constexpr std::string_view kEpReadingAnalyzing[] = {"Reading", "Analyzing"};
constexpr std::string_view kEpPlanning[] = {"Planning"};
constexpr std::string_view kEpAnalyzingPlanning[] = {"Analyzing", "Planning"};
constexpr std::string_view kEpExecuting[] = {"Executing"};
constexpr std::string_view kEpMonitoringEvaluating[] = {"Monitoring", "Evaluating"};
constexpr std::string_view kEpEvaluatingSummarizing[] = {"Evaluating", "Summarizing"};

const std::array<BehaviorInfo, kBehaviorCount> kInfo = {{
    {Behavior::TaskInitialization, "TaskInitialization", "Task Initialization",
     "In the initial reasoning phase, the model identifies its task objectives, constraints, "
     "and inputs.",
     "In the initial reasoning phase, the model identifies its task objectives, constraints, "
     "and inputs.",
     kEpReadingAnalyzing},
    {Behavior::StrategicPlanning, "StrategicPlanning", "Strategic Planning",
     "Before execution, explicitly state or determine a structured action plan or strategic "
     "blueprint.",
     "Before formal execution, explicitly state or determine a structured action plan or "
     "strategic blueprint.",
     kEpPlanning},
    {Behavior::KnowledgeRetrieval, "KnowledgeRetrieval", "Knowledge Retrieval",
     "Review relevant knowledge for problem-solving.",
     "Review relevant knowledge for problem-solving.", kEpAnalyzingPlanning},
    {Behavior::StepwiseReasoning, "StepwiseReasoning", "Stepwise Reasoning",
     "Execute independent reasoning or computation steps based on the planned logic.",
     "Execute specific, independent reasoning or computational steps following the "
     "established plan or logical sequence.",
     kEpExecuting},
    {Behavior::UncertaintyManagement, "UncertaintyManagement", "Uncertainty Management",
     "The model pauses and flags confusion or uncertainty when encountering ambiguity.",
     "When encountering ambiguity, contradictions, or difficulties, the model pauses execution "
     "and explicitly expresses its confusion, uncertainty, or reassessment.",
     kEpMonitoringEvaluating},
    {Behavior::FinalConclusion, "FinalConclusion", "Final Conclusion",
     "Present the final conclusion.", "Present the final conclusion",
     kEpEvaluatingSummarizing},
}};

bool boundary_before(std::string_view text, std::size_t offset, char first) {
  if (!text::is_word_char(first)) return true;
  return offset == 0 || !text::is_word_char(text[offset - 1]);
}

bool boundary_after(std::string_view text, std::size_t end, char last) {
  if (!text::is_word_char(last)) return true;
  return end >= text.size() || !text::is_word_char(text[end]);
}

}  // namespace

const BehaviorInfo& behavior_info(Behavior b) { return kInfo[index_of(b)]; }

std::string_view to_string(Behavior b) { return behavior_info(b).id; }

std::optional<Behavior> parse_behavior(std::string_view s) {
  s = text::trim(s);
  for (const auto& info : kInfo) {
    if (text::iequals(s, info.id) || text::iequals(s, info.display_name)) return info.kind;
  }
  return std::nullopt;
}

MarkerLexicon::MarkerLexicon(std::vector<MarkerEntry> entries) : entries_(std::move(entries)) {
  if (entries_.empty()) fail(ErrorCode::ConfigError, "marker lexicon is empty");
  std::unordered_set<std::string> seen;
  folded_.reserve(entries_.size());
  for (const auto& e : entries_) {
    auto folded = text::to_lower(text::trim(e.pattern));
    if (folded.empty()) fail(ErrorCode::ConfigError, "marker lexicon has an empty pattern");
    if (!(e.weight > 0.0) || !std::isfinite(e.weight)) {
      fail(ErrorCode::ConfigError, "marker weight must be positive: " + e.pattern);
    }
    if (!seen.insert(folded).second) {
      fail(ErrorCode::ConfigError, "marker pattern listed twice: " + e.pattern);
    }
    folded_.push_back(std::move(folded));
  }
  by_length_.resize(entries_.size());
  for (std::size_t i = 0; i < by_length_.size(); ++i) by_length_[i] = i;
  std::stable_sort(by_length_.begin(), by_length_.end(), [&](std::size_t a, std::size_t b) {
    return folded_[a].size() > folded_[b].size();
  });
}

const MarkerLexicon& MarkerLexicon::builtin() {
  static const MarkerLexicon lexicon = parse(assets::lexicon_default);
  return lexicon;
}

MarkerLexicon MarkerLexicon::parse(std::string_view tsv) {
  std::vector<MarkerEntry> entries;
  int line_no = 0;
  for (auto raw : text::split_lines(tsv)) {
    ++line_no;
    auto line = text::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
      auto tab = raw.find('\t', start);
      fields.push_back(raw.substr(start, tab == std::string_view::npos ? tab : tab - start));
      if (tab == std::string_view::npos) break;
      start = tab + 1;
    }
    if (fields.size() < 2 || fields.size() > 3) {
      fail(ErrorCode::ConfigError,
           "lexicon line " + std::to_string(line_no) + ": expected pattern<TAB>behavior[<TAB>weight]");
    }
    auto behavior = parse_behavior(fields[1]);
    if (!behavior) {
      fail(ErrorCode::ConfigError, "lexicon line " + std::to_string(line_no) +
                                       ": unknown behavior '" + std::string(fields[1]) + "'");
    }
    double weight = 1.0;
    if (fields.size() == 3 && !text::trim(fields[2]).empty()) {
      auto w = text::trim(fields[2]);
      auto [ptr, ec] = std::from_chars(w.data(), w.data() + w.size(), weight);
      if (ec != std::errc{} || ptr != w.data() + w.size()) {
        fail(ErrorCode::ConfigError, "lexicon line " + std::to_string(line_no) + ": bad weight");
      }
    }
    entries.push_back({std::string(text::trim(fields[0])), *behavior, weight});
  }
  return MarkerLexicon(std::move(entries));
}

MarkerLexicon MarkerLexicon::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open lexicon file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

std::vector<MarkerLexicon::Match> MarkerLexicon::find_all(std::string_view input) const {
  const std::string folded = text::to_lower(input);
  std::string_view s = folded;
  std::vector<Match> matches;
  std::size_t i = 0;
  while (i < s.size()) {
    bool found = false;
    for (std::size_t idx : by_length_) {
      const auto& pat = folded_[idx];
      if (pat.size() > s.size() - i) continue;
      if (s.compare(i, pat.size(), pat) != 0) continue;
      if (!boundary_before(s, i, pat.front()) || !boundary_after(s, i + pat.size(), pat.back())) {
        continue;
      }
      matches.push_back({i, pat.size(), idx});
      i += pat.size();
      found = true;
      break;
    }
    if (!found) ++i;
  }
  return matches;
}

BehaviorProfile BehaviorProfile::from_counts(const std::array<double, kBehaviorCount>& counts) {
  BehaviorProfile p;
  p.counts = counts;
  double total = p.total();
  if (total > 0.0) {
    for (std::size_t k = 0; k < kBehaviorCount; ++k) p.proportions[k] = counts[k] / total;
  }
  return p;
}

double BehaviorProfile::total() const {
  double t = 0.0;
  for (double c : counts) t += c;
  return t;
}

BehaviorProfile annotate_text(std::string_view text, const MarkerLexicon& lexicon) {
  std::array<double, kBehaviorCount> counts{};
  for (const auto& m : lexicon.find_all(text)) {
    const auto& e = lexicon.entries()[m.entry];
    counts[index_of(e.behavior)] += e.weight;
  }
  return BehaviorProfile::from_counts(counts);
}

std::optional<Behavior> dominant_behavior(const BehaviorProfile& profile) {
  std::optional<Behavior> best;
  double best_value = 0.0;
  for (Behavior b : kAllBehaviors) {
    double v = profile.proportion(b);
    if (v > best_value) {
      best_value = v;
      best = b;
    }
  }
  return best;
}

std::size_t count_phrases(std::string_view input, std::span<const std::string_view> phrases) {
  std::vector<MarkerEntry> entries;
  entries.reserve(phrases.size());
  for (auto p : phrases) entries.push_back({std::string(p), Behavior::TaskInitialization, 1.0});
  return MarkerLexicon(std::move(entries)).find_all(input).size();
}

}  // namespace prefixevo
