#include "prefixevo/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <sstream>

#include "prefixevo/error.hpp"
#include "prefixevo/text.hpp"

namespace prefixevo {

RatingMatrix RatingMatrix::make(std::vector<std::vector<int>> counts) {
  if (counts.empty()) fail(ErrorCode::InvalidSpec, "rating matrix needs at least one item");
  const auto k = counts.front().size();
  if (k < 2) fail(ErrorCode::InvalidSpec, "rating matrix needs at least two categories");
  int n = -1;
  for (const auto& row : counts) {
    if (row.size() != k) fail(ErrorCode::InvalidSpec, "rating matrix rows differ in length");
    int sum = 0;
    for (int v : row) {
      if (v < 0) fail(ErrorCode::InvalidSpec, "rating counts must be non-negative");
      sum += v;
    }
    if (n < 0) n = sum;
    if (sum != n) fail(ErrorCode::InvalidSpec, "every item needs the same number of raters");
  }
  if (n < 2) fail(ErrorCode::InvalidSpec, "rating matrix needs at least two raters");
  return RatingMatrix{std::move(counts)};
}

int RatingMatrix::n_raters() const {
  int sum = 0;
  for (int v : counts.front()) sum += v;
  return sum;
}

double fleiss_kappa(const RatingMatrix& m) {
  const auto items = static_cast<double>(m.n_items());
  const double n = m.n_raters();
  std::vector<double> column(m.n_categories(), 0.0);
  double p_bar = 0.0;
  for (const auto& row : m.counts) {
    double sq = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) {
      sq += static_cast<double>(row[j]) * row[j];
      column[j] += row[j];
    }
    p_bar += (sq - n) / (n * (n - 1.0));
  }
  p_bar /= items;
  double p_e = 0.0;
  for (double c : column) {
    const double p = c / (items * n);
    p_e += p * p;
  }
  if (std::abs(1.0 - p_e) <= 1e-12) {
    fail(ErrorCode::DegenerateAgreement, "every rating falls in one category; kappa is undefined");
  }
  return (p_bar - p_e) / (1.0 - p_e);
}

FrontierPoint select_on_frontier(std::span<const FrontierPoint> points, double epsilon) {
  if (points.empty()) fail(ErrorCode::InvalidSpec, "frontier selection needs at least one point");
  if (!(epsilon >= 0.0)) fail(ErrorCode::InvalidSpec, "epsilon must be >= 0");
  double best = -1.0;
  for (const auto& p : points) best = std::max(best, p.accuracy);
  // Slack keeps 0.89 admissible against 0.90 - 0.01 despite binary rounding.
  const double floor = best - epsilon - 1e-12;
  const FrontierPoint* pick = nullptr;
  for (const auto& p : points) {
    if (p.accuracy < floor) continue;
    if (pick == nullptr || p.mean_tokens < pick->mean_tokens ||
        (p.mean_tokens == pick->mean_tokens &&
         (p.accuracy > pick->accuracy ||
          (p.accuracy == pick->accuracy && p.prefix_id < pick->prefix_id)))) {
      pick = &p;
    }
  }
  return *pick;
}

std::string_view to_string(Outcome o) { return o == Outcome::Success ? "Success" : "Failure"; }
std::string_view to_string(Direction d) { return d == Direction::Positive ? "Positive" : "Negative"; }

namespace {

constexpr std::string_view kConclusion = "analysis conclusion:";

}  // namespace

Outcome parse_judge_verdict(std::string_view raw) {
  for (auto line : text::split_lines(raw)) {
    // Markdown emphasis or a heading marker may wrap the label.
    std::string l;
    for (char c : line) {
      if (c != '*' && c != '_') l += c;
    }
    auto head = text::trim(l);
    while (!head.empty() && head.front() == '#') head.remove_prefix(1);
    head = text::trim(head);
    if (!text::istarts_with(head, kConclusion)) continue;
    auto value = text::to_lower(text::trim(head.substr(kConclusion.size())));
    // Tolerate the template's brackets and quotes around the value.
    std::erase_if(value, [](char c) { return c == '[' || c == ']' || c == '"' || c == '*' || c == '.'; });
    value = text::trim_copy(value);
    if (value == "success") return Outcome::Success;
    if (value == "failure") return Outcome::Failure;
    fail(ErrorCode::UnparseableVerdict, "verdict line holds '" + value + "'");
  }
  fail(ErrorCode::UnparseableVerdict, "no 'Analysis Conclusion:' line in judge reply");
}

Verdict parse_verdict(std::string_view raw, std::string judge_id) {
  Verdict v{std::move(judge_id), parse_judge_verdict(raw), {}};
  constexpr std::string_view kReason = "brief reasoning:";
  for (auto line : text::split_lines(raw)) {
    auto l = text::trim(line);
    if (text::istarts_with(l, kReason)) {
      v.reasoning = text::trim_copy(l.substr(kReason.size()));
      break;
    }
  }
  return v;
}

std::string build_control_prompt(const ControlCase& c, const TemplateSet& templates) {
  return text::render_placeholders(templates.judge_control,
                                   {{"baseline_record", c.baseline},
                                    {"target_behavior", std::string(behavior_info(c.target).display_name)},
                                    {"direction", std::string(to_string(c.direction))},
                                    {"intervened_record", c.intervened}});
}

namespace {

std::optional<Verdict> ask_judge(Gateway& judge, const std::string& prompt, const std::string& case_id,
                                 const ControlOptions& options) {
  for (int attempt = 0; attempt <= options.retries; ++attempt) {
    auto req = render_chat_request(prompt, options.params, judge.model_id(), attempt);
    req.provenance = {"judge", Split::None, case_id, {}};
    const auto raw = judge.generate(req).reply.content;
    try {
      return parse_verdict(raw, judge.model_id());
    } catch (const Error& e) {
      if (e.code() != ErrorCode::UnparseableVerdict) throw;
    }
  }
  return std::nullopt;
}

}  // namespace

ControlReport control_success(std::span<const ControlCase> cases, std::span<Gateway* const> judges,
                              const ControlOptions& options, const TemplateSet& templates) {
  if (judges.empty()) fail(ErrorCode::MissingJudge, "control evaluation needs at least one judge");
  ControlReport report;
  std::vector<std::vector<int>> rows;
  for (const auto& c : cases) {
    const auto prompt = build_control_prompt(c, templates);
    std::vector<std::future<std::optional<Verdict>>> pending;
    for (Gateway* judge : judges) {
      pending.push_back(std::async(std::launch::async, [&, judge] {
        return ask_judge(*judge, prompt, c.id, options);
      }));
    }
    CaseResult result{c.id, c.target, c.direction, {}, std::nullopt};
    int yes = 0, no = 0;
    for (auto& f : pending) {
      auto v = f.get();
      if (v) (v->outcome == Outcome::Success ? yes : no)++;
      result.votes.push_back(std::move(v));
    }
    if (yes + no == 0) {
      report.dropped.push_back(c.id);
    } else {
      result.outcome = yes > no ? Outcome::Success : Outcome::Failure;
      auto& cell = report.per_behavior[c.target];
      ++cell.cases;
      cell.successes += *result.outcome == Outcome::Success ? 1 : 0;
      if (yes + no == static_cast<int>(judges.size())) rows.push_back({yes, no});
    }
    report.cases.push_back(std::move(result));
  }
  if (judges.size() >= 2 && !rows.empty()) {
    report.agreement = RatingMatrix::make(rows);
    try {
      report.kappa = fleiss_kappa(*report.agreement);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DegenerateAgreement) throw;
    }
  }
  return report;
}

BehaviorProfile top_decile_distribution(std::span<const ScoredPrefix> records) {
  if (records.size() < 10) {
    fail(ErrorCode::TooFewRecords, "top-decile analysis needs at least 10 records, got " +
                                       std::to_string(records.size()));
  }
  std::vector<Member> members;
  members.reserve(records.size());
  for (const auto& r : records) members.push_back({r.prefix, r.record});
  std::sort(members.begin(), members.end(), ranks_before);
  const auto take = (records.size() + 9) / 10;
  std::array<double, kBehaviorCount> sum{};
  for (std::size_t i = 0; i < take; ++i) {
    for (std::size_t k = 0; k < kBehaviorCount; ++k) sum[k] += members[i].prefix.profile.counts[k];
  }
  return BehaviorProfile::from_counts(sum);
}

namespace {

std::string num(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

}  // namespace

std::string frontier_csv(std::span<const FrontierPoint> points, const FrontierPoint* chosen) {
  std::string out = "prefix_id,accuracy,mean_tokens,selected\n";
  for (const auto& p : points) {
    out += p.prefix_id + "," + num(p.accuracy) + "," + num(p.mean_tokens) + "," +
           (chosen != nullptr && chosen->prefix_id == p.prefix_id ? "1" : "0") + "\n";
  }
  return out;
}

std::string behaviors_csv(const BehaviorProfile& profile) {
  std::string out = "behavior,count,proportion\n";
  for (Behavior b : kAllBehaviors) {
    out += std::string(behavior_info(b).id) + "," + num(profile.count(b)) + "," +
           num(profile.proportion(b)) + "\n";
  }
  return out;
}

std::string control_csv(const ControlReport& report) {
  std::string out = "behavior,successes,cases,rate\n";
  for (const auto& [b, cell] : report.per_behavior) {
    out += std::string(behavior_info(b).id) + "," + std::to_string(cell.successes) + "," +
           std::to_string(cell.cases) + "," + num(cell.rate()) + "\n";
  }
  return out;
}

}  // namespace prefixevo
