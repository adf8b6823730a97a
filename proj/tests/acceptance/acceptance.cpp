// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "kappa_oracle.hpp"
#include "prefixevo/analysis.hpp"
#include "prefixevo/dataset.hpp"
#include "prefixevo/error.hpp"
#include "prefixevo/evaluators.hpp"
#include "prefixevo/mock.hpp"
#include "prefixevo/operators.hpp"
#include "prefixevo/orchestrator.hpp"
#include "prefixevo/text.hpp"
#include "test_support.hpp"

using namespace prefixevo;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances.
constexpr double kAcuRelTol = 1e-12;
constexpr double kKappaTol = 1e-9;
constexpr double kPermutationTol = 1e-12;

struct Check {
  bool pass;
  std::string detail;
};

Check verdict(bool ok, std::string detail) { return {ok, std::move(detail)}; }

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

std::vector<nlohmann::json> events(const fs::path& run_dir) {
  std::vector<nlohmann::json> out;
  std::istringstream in(testing::slurp(run_dir / "log.jsonl"));
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(nlohmann::json::parse(line));
  }
  return out;
}

// 1. Elitism and strict improvement over the best seed.
Check elitism(const fs::path& scratch) {
  auto cfg = testing::mock_config(TaskKind::EfficientReasoning);
  cfg.max_iterations = 4;
  Orchestrator o(cfg, make_backends(cfg), scratch / "elitism");
  o.start();
  const double seed = *o.seed_best();
  double prev = seed;
  bool monotone = true;
  while (o.convergence().status == RunStatus::Running) {
    o.step();
    monotone = monotone && o.bests().back() >= prev;
    prev = o.bests().back();
  }
  const bool four = o.bests().size() == 4;
  const bool improved = o.bests().back() > seed;
  return verdict(four && monotone && improved,
                 "iterations=" + std::to_string(o.bests().size()) + " seed_best=" + fmt(seed) +
                     " final_best=" + fmt(o.bests().back()) + (monotone ? " monotone" : " NOT monotone"));
}

// 2. Prompt builders against the frozen instantiated templates.
Check template_fidelity() {
  const std::vector<std::string> texts{
      "Okay, so I need to figure out what the question asks first.",
      "Let me plan this: set up the numbers, then compute step by step.",
      "Hmm, I recall the relevant formula, so I'll apply it directly.",
      "I should be careful. Wait, maybe I should double-check each value.",
      "Alright, I'll work it out and then state the final answer clearly.",
  };
  std::vector<ThinkPrefix> parents;
  for (const auto& t : texts) parents.push_back(ThinkPrefix::make(t, Origin{}, 0));
  int ok = 0, total = 0;
  std::string bad;
  auto compare = [&](const std::string& got, const std::string& file) {
    ++total;
    if (got == testing::slurp(testing::golden(file))) {
      ++ok;
    } else {
      bad += " " + file;
    }
  };
  compare(build_crossover_prompt(CrossoverSpec::make(parents)), "crossover_prompt.txt");
  const std::pair<TaskContext, const char*> contexts[] = {
      {TaskContext::Safety, "mutation_prompt_safety.txt"},
      {TaskContext::InstructionFollowing, "mutation_prompt_instruction_following.txt"},
      {TaskContext::EfficientReasoning, "mutation_prompt_efficient_reasoning.txt"},
  };
  for (const auto& [ctx, file] : contexts) {
    MutationSpec spec;
    spec.parent = parents[1];
    spec.selected = {Behavior::TaskInitialization, Behavior::StepwiseReasoning, Behavior::FinalConclusion};
    spec.context = ctx;
    compare(build_mutation_prompt(spec), file);
  }
  return verdict(ok == total, std::to_string(ok) + "/" + std::to_string(total) + " byte-identical" + bad);
}

// 3. Parser corpus.
Check parser_contracts() {
  auto corpus = nlohmann::json::parse(testing::slurp(testing::fixture("parser_corpus.json")));
  std::vector<ThinkPrefix> parents;
  for (int i = 1; i <= 5; ++i) {
    parents.push_back(ThinkPrefix::make("Corpus parent " + std::to_string(i) + ".", Origin{}, 1));
  }
  const auto cross = CrossoverSpec::make(parents);
  MutationSpec nine;
  nine.parent = parents[0];
  nine.selected = {Behavior::StrategicPlanning, Behavior::KnowledgeRetrieval, Behavior::FinalConclusion};
  MutationSpec pair;
  pair.parent = parents[0];
  pair.selected = {Behavior::StrategicPlanning};
  pair.mode = MutationMode::Pair;

  int ok = 0;
  std::string bad;
  for (const auto& c : corpus) {
    const auto op = c["operator"].get<std::string>();
    const auto raw = c["raw"].get<std::string>();
    bool good = false;
    try {
      OperatorOutput out = op == "crossover" ? parse_crossover_output(raw, cross)
                           : op == "mutation" ? parse_mutation_output(raw, nine)
                                              : parse_mutation_output(raw, pair);
      if (c["expect"] == "ok") {
        const auto want = c["children"].get<std::vector<std::string>>();
        good = out.children.size() == want.size();
        for (std::size_t i = 0; good && i < want.size(); ++i) {
          const auto& child = out.children[i];
          good = child.text == want[i];
          if (op == "crossover") {
            good = good && child.origin.kind == OriginKind::Crossover &&
                   child.origin.parents.front() == parents[i].id;
          } else {
            const auto& spec = op == "mutation" ? nine : pair;
            const std::size_t slots = 2 * static_cast<std::size_t>(spec.behavior_slots());
            if (i < slots) {
              const auto kind = i % 2 == 0 ? OriginKind::MutationWeakened : OriginKind::MutationEnhanced;
              good = good && child.origin.kind == kind && child.origin.behavior == spec.selected[i / 2];
            } else {
              const OriginKind styles[] = {OriginKind::StyleDetailed, OriginKind::StyleConcise,
                                           OriginKind::StyleParaphrased};
              good = good && child.origin.kind == styles[i - slots];
            }
          }
        }
      }
    } catch (const WrongChildCount& e) {
      good = c["expect"] == "wrong_count" && e.found() == c["found"].get<int>();
    }
    if (good) {
      ++ok;
    } else {
      bad += " " + c["name"].get<std::string>();
    }
  }
  return verdict(ok == static_cast<int>(corpus.size()) && corpus.size() == 30,
                 std::to_string(ok) + "/" + std::to_string(corpus.size()) + " fixtures" + bad);
}

// 4. ACU against a long-double evaluation of acc / (size * tokens), plus monotonicity.
Check acu_oracle() {
  std::mt19937_64 rng(20240611);
  std::uniform_real_distribution<double> acc(0.0, 1.0), size(0.5, 72.0), tokens(50.0, 32768.0);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const double a = acc(rng), s = size(rng), t = tokens(rng);
    const long double denom = static_cast<long double>(s) * static_cast<long double>(t);
    const long double want = static_cast<long double>(a) / denom;
    const long double got = compute_acu({a, s, t});
    const long double rel = want == 0 ? std::fabs(got) : std::fabs(got - want) / want;
    worst = std::max(worst, static_cast<double>(rel));
  }
  int violations = 0;
  for (int i = 0; i < 1000; ++i) {
    double a1 = acc(rng), a2 = acc(rng), t1 = tokens(rng), t2 = tokens(rng);
    const double s = size(rng);
    if (a1 > a2) std::swap(a1, a2);
    if (t1 > t2) std::swap(t1, t2);
    if (compute_acu({a1, s, t1}) > compute_acu({a2, s, t1})) ++violations;
    if (compute_acu({a1, s, t1}) < compute_acu({a1, s, t2})) ++violations;
  }
  return verdict(worst <= kAcuRelTol && violations == 0,
                 "max_rel_err=" + fmt(worst) + " (tol 1e-12) monotonicity_violations=" + std::to_string(violations));
}

// 5. Fleiss' kappa.
Check kappa_oracle_check() {
  const bool perfect = fleiss_kappa(RatingMatrix::make({{3, 0}, {0, 3}})) == 1.0 &&
                       fleiss_kappa(RatingMatrix::make({{5, 0, 0}, {0, 5, 0}, {0, 0, 5}, {0, 5, 0}})) == 1.0;
  double worst = 0.0;
  bool negative_seen = false;
  for (const auto& c : kappa_oracle()) {
    const double want = static_cast<double>(c.num) / static_cast<double>(c.den);
    negative_seen = negative_seen || want < 0;
    worst = std::max(worst, std::fabs(fleiss_kappa(RatingMatrix::make(c.counts)) - want));
  }
  std::mt19937_64 rng(77);
  double perm_worst = 0.0;
  int tested = 0;
  while (tested < 100) {
    const int items = 2 + static_cast<int>(rng() % 9), cats = 2 + static_cast<int>(rng() % 4);
    const int raters = 2 + static_cast<int>(rng() % 6);
    std::vector<std::vector<int>> m(items, std::vector<int>(cats, 0));
    for (auto& row : m) {
      for (int r = 0; r < raters; ++r) ++row[rng() % cats];
    }
    double base;
    try {
      base = fleiss_kappa(RatingMatrix::make(m));
    } catch (const Error&) {
      continue;  // degenerate draw
    }
    std::vector<int> col(cats);
    std::iota(col.begin(), col.end(), 0);
    text::shuffle(m, rng);
    text::shuffle(col, rng);
    auto p = m;
    for (std::size_t i = 0; i < m.size(); ++i) {
      for (int j = 0; j < cats; ++j) p[i][j] = m[i][col[j]];
    }
    perm_worst = std::max(perm_worst, std::fabs(fleiss_kappa(RatingMatrix::make(p)) - base));
    ++tested;
  }
  return verdict(perfect && negative_seen && worst <= kKappaTol && perm_worst <= kPermutationTol,
                 std::string(perfect ? "perfect=1.0" : "perfect!=1.0") + " oracle_max_err=" + fmt(worst) +
                     " permutation_max_err=" + fmt(perm_worst) + " over " + std::to_string(tested));
}

// Exhaustive reference: scan every point, keep the admissible ones, order them.
FrontierPoint frontier_scan(const std::vector<FrontierPoint>& pts, double eps) {
  double best = -1;
  for (const auto& p : pts) best = std::max(best, p.accuracy);
  const FrontierPoint* pick = nullptr;
  for (const auto& p : pts) {
    if (p.accuracy < best - eps - 1e-12) continue;
    if (pick == nullptr || p.mean_tokens < pick->mean_tokens ||
        (p.mean_tokens == pick->mean_tokens &&
         (p.accuracy > pick->accuracy || (p.accuracy == pick->accuracy && p.prefix_id < pick->prefix_id)))) {
      pick = &p;
    }
  }
  return *pick;
}

// 6. Frontier selection.
Check frontier() {
  std::vector<FrontierPoint> fixture{{"p9000", 0.90, 9000}, {"p6400", 0.89, 6400}, {"p3000", 0.80, 3000}};
  const bool fixed = select_on_frontier(fixture, 0.01).prefix_id == "p6400";
  std::mt19937_64 rng(4242);
  int agree = 0;
  for (int t = 0; t < 200; ++t) {
    std::vector<FrontierPoint> pts;
    const int n = 1 + static_cast<int>(rng() % 25);
    for (int i = 0; i < n; ++i) {
      // Coarse grids force accuracy and token ties.
      pts.push_back({"c" + std::to_string(i), static_cast<double>(rng() % 21) / 20.0,
                     static_cast<double>(500 * (1 + rng() % 12))});
    }
    const double eps = static_cast<double>(rng() % 4) * 0.025;
    if (select_on_frontier(pts, eps).prefix_id == frontier_scan(pts, eps).prefix_id) ++agree;
  }
  return verdict(fixed && agree == 200, std::string("fixture->") + (fixed ? "6400" : "wrong") +
                                            " oracle_agreement=" + std::to_string(agree) + "/200");
}

// 7. Split reproducibility on the 100-item fixture with the shipped seeds 1 and 2.
Check split_repro() {
  const auto items = load_dataset(testing::fixture("math_100.jsonl")).items;
  auto a = split_dataset(items, 0.2, 1), b = split_dataset(items, 0.2, 1), c = split_dataset(items, 0.2, 2);
  std::set<std::string> va, ta, vc;
  for (const auto& i : a.validation) va.insert(i.id);
  for (const auto& i : a.test) ta.insert(i.id);
  for (const auto& i : c.validation) vc.insert(i.id);
  bool disjoint = true;
  for (const auto& id : va) disjoint = disjoint && ta.count(id) == 0;
  const bool sizes = a.validation.size() == 20 && a.test.size() == 80 && va.size() + ta.size() == 100;
  const bool same = dump_jsonl(a.validation) == dump_jsonl(b.validation) && dump_jsonl(a.test) == dump_jsonl(b.test);
  const bool differ = va != vc;
  return verdict(disjoint && sizes && same && differ,
                 "sizes=" + std::to_string(a.validation.size()) + "/" + std::to_string(a.test.size()) +
                     (disjoint ? " disjoint" : " OVERLAP") + (same ? " reproducible" : " NOT reproducible") +
                     (differ ? " seeds-differ" : " seeds-identical"));
}

// 8. Cache reuse and single use of the test split.
Check hygiene(const fs::path& scratch) {
  auto cfg = testing::mock_config(TaskKind::EfficientReasoning);
  cfg.max_iterations = 2;
  auto backends = make_backends(cfg);
  auto& lrm = dynamic_cast<mock::MockLrm&>(backends.target->backend());
  Orchestrator o(cfg, backends, scratch / "hygiene");
  o.start();
  o.step();
  Population copy;
  for (const auto& m : o.populations().back().members) copy.add({m.prefix, std::nullopt});
  const auto before = lrm.calls();
  o.evaluate_population(copy);
  const auto extra = lrm.calls() - before;
  while (o.convergence().status == RunStatus::Running) o.step();
  o.finalize();
  bool early_test = false, finalized = false;
  for (const auto& e : events(scratch / "hygiene")) {
    if (e["event"] == "finalized") finalized = true;
    if (!finalized && e.contains("split") && e["split"] == "test") early_test = true;
  }
  bool second = false;
  try {
    o.finalize();
  } catch (const Error& e) {
    second = e.code() == ErrorCode::TestAlreadyConsumed;
  }
  const bool ok = extra == 0 && !early_test && finalized && o.test_requests_before_finalize() == 0 && second;
  return verdict(ok, "cached_rerun_calls=" + std::to_string(extra) +
                         " test_requests_before_finalized=" + std::to_string(o.test_requests_before_finalize()) +
                         (early_test ? " early-test-event" : "") +
                         (second ? " double_finalize=TestAlreadyConsumed" : " double_finalize=allowed"));
}

// 9. Guidance-mode ordering on the Logic fixture where reward loads on stepwise reasoning.
Check guidance(const fs::path& scratch) {
  auto run = [&](GuidanceMode mode, std::vector<Behavior> behaviors, const std::string& tag) {
    auto cfg = testing::mock_config(TaskKind::Logic);
    cfg.run_id = "guidance-" + tag;
    cfg.max_iterations = 4;
    cfg.rng_seed = 3;
    cfg.guidance.mode = mode;
    cfg.guidance.behaviors = std::move(behaviors);
    Orchestrator o(cfg, make_backends(cfg), scratch / cfg.run_id);
    o.start();
    while (o.convergence().status == RunStatus::Running) o.step();
    return o.bests().back();
  };
  const double pref = run(GuidanceMode::PreferredOnly, {Behavior::StepwiseReasoning}, "preferred");
  const double all = run(GuidanceMode::AllBehaviors, {}, "all");
  const double none = run(GuidanceMode::NoBehaviors, {}, "none");
  const double nonpref = run(GuidanceMode::NonPreferredOnly, {Behavior::FinalConclusion}, "non-preferred");
  return verdict(pref >= all && all > none && none > nonpref,
                 "preferred=" + fmt(pref) + " all=" + fmt(all) + " none=" + fmt(none) +
                     " non_preferred=" + fmt(nonpref));
}

// 10. Constraint table.
Check constraints() {
  auto cases = nlohmann::json::parse(testing::slurp(testing::fixture("constraint_cases.json")));
  std::set<std::string> kinds;
  int ok = 0;
  bool exemplar = false;
  std::string bad;
  for (const auto& c : cases) {
    auto set = c["constraints"].get<ConstraintSet>();
    for (const auto& k : set) kinds.insert(std::string(to_string(k.kind)));
    auto r = check_constraints(c["response"].get<std::string>(), set);
    if (r.pass == c["pass"].get<bool>() && r.per_constraint == c["per"].get<std::vector<bool>>()) {
      ++ok;
    } else {
      bad += " " + c["name"].get<std::string>();
    }
    if (c.contains("query") && c["query"].get<std::string>().find("all lowercase letters") != std::string::npos) {
      exemplar = true;
    }
  }
  return verdict(ok == 25 && cases.size() == 25 && kinds.size() == 8 && exemplar,
                 std::to_string(ok) + "/" + std::to_string(cases.size()) + " verdicts over " +
                     std::to_string(kinds.size()) + " kinds" + bad);
}

// 11. Replay of finished mock runs.
Check replay(const fs::path& scratch) {
  int ok = 0, total = 0;
  std::string bad;
  std::size_t events_checked = 0;
  // The hygiene run is left out: its extra evaluate_population call is logged but is not
  // part of what the saved config drives.
  for (const char* run : {"elitism", "guidance-preferred", "guidance-all", "guidance-none"}) {
    if (!fs::exists(scratch / run / "log.jsonl")) continue;
    ++total;
    auto r = replay_run(scratch / run);
    if (r.identical) {
      ++ok;
    } else {
      bad += std::string(" ") + run + "@" + std::to_string(r.first_difference.value_or(0));
    }
    events_checked += r.original_events;
  }
  auto cfg = testing::mock_config(TaskKind::Safety);
  cfg.run_id = "replay-safety";
  cfg.max_iterations = 2;
  Orchestrator(cfg, make_backends(cfg), scratch / cfg.run_id).run();
  ++total;
  auto r = replay_run(scratch / cfg.run_id);
  if (r.identical) {
    ++ok;
  } else {
    bad += " " + cfg.run_id + "@" + std::to_string(r.first_difference.value_or(0));
  }
  events_checked += r.original_events;
  return verdict(ok == total && total >= 3, std::to_string(ok) + "/" + std::to_string(total) +
                                                " runs byte-identical, " + std::to_string(events_checked) +
                                                " events" + bad);
}

}  // namespace

int main() {
  testing::TempDir scratch("acceptance");
  const std::vector<std::pair<std::string, std::function<Check()>>> criteria = {
      {"elitism and improvement", [&] { return elitism(scratch.path()); }},
      {"template fidelity", template_fidelity},
      {"parser contracts", parser_contracts},
      {"ACU oracle", acu_oracle},
      {"Fleiss' kappa oracle", kappa_oracle_check},
      {"frontier selection", frontier},
      {"split reproducibility", split_repro},
      {"cache and test hygiene", [&] { return hygiene(scratch.path()); }},
      {"guidance-mode ablation", [&] { return guidance(scratch.path()); }},
      {"constraint checker", constraints},
      {"determinism replay", [&] { return replay(scratch.path()); }},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Check o{false, ""};
    try {
      o = criteria[i].second();
    } catch (const Error& e) {
      o = {false, std::string("error ") + std::string(code_name(e.code())) + ": " + e.what()};
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << (i + 1 < 10 ? " " : "") << (i + 1) << ". "
              << criteria[i].first << ": " << o.detail << std::endl;
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
