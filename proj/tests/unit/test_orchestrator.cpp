#include <doctest.h>

#include <cmath>
#include <sstream>
#include <set>

#include "prefixevo/analysis.hpp"
#include "prefixevo/dataset.hpp"
#include "prefixevo/error.hpp"
#include "prefixevo/mock.hpp"
#include "prefixevo/orchestrator.hpp"
#include "test_support.hpp"

using namespace prefixevo;

namespace {

mock::MockLrm& lrm_of(const Backends& b) { return dynamic_cast<mock::MockLrm&>(b.target->backend()); }

std::vector<nlohmann::json> events(const std::filesystem::path& run_dir) {
  std::vector<nlohmann::json> out;
  std::istringstream in(testing::slurp(run_dir / "log.jsonl"));
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(nlohmann::json::parse(line));
  }
  return out;
}

Population unscored_copy(const Population& p) {
  Population out;
  out.iteration = p.iteration;
  for (const auto& m : p.members) out.add({m.prefix, std::nullopt});
  return out;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::DomainError;
}

}  // namespace

TEST_CASE("convergence rules") {
  ConvergenceConfig p2{2, std::nullopt};
  std::vector<double> plateau{0.70, 0.80, 0.80, 0.80};
  auto c = check_convergence(plateau, p2, 10);
  CHECK(c.status == RunStatus::Converged);
  CHECK(c.reason == "patience");
  std::vector<double> early{0.70, 0.80, 0.80};
  CHECK(check_convergence(early, p2, 10).status == RunStatus::Running);

  ConvergenceConfig thr{5, 0.75};
  std::vector<double> hit{0.70, 0.78};
  auto t = check_convergence(hit, thr, 10);
  CHECK(t.status == RunStatus::Converged);
  CHECK(t.reason == "threshold");

  std::vector<double> rising{0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
  auto e = check_convergence(rising, p2, 6);
  CHECK(e.status == RunStatus::Exhausted);
  CHECK(e.reason == "max_iterations");
  CHECK(check_convergence(std::span<const double>(rising.data(), 5), p2, 6).status == RunStatus::Running);

  std::vector<double> flat_from_seed{0.5, 0.5};
  CHECK(check_convergence(flat_from_seed, p2, 10, 0.5).status == RunStatus::Converged);
}

TEST_CASE("cache key covers its inputs") {
  PrefixInjection inj;
  DecodingParams dec;
  auto base = eval_cache_key("p", "d", Split::Validation, inj, dec, "m");
  CHECK(base == eval_cache_key("p", "d", Split::Validation, inj, dec, "m"));
  CHECK(base != eval_cache_key("q", "d", Split::Validation, inj, dec, "m"));
  CHECK(base != eval_cache_key("p", "e", Split::Validation, inj, dec, "m"));
  CHECK(base != eval_cache_key("p", "d", Split::Test, inj, dec, "m"));
  CHECK(base != eval_cache_key("p", "d", Split::Validation, inj, dec, "m2"));
  dec.temperature = 0.7;
  CHECK(base != eval_cache_key("p", "d", Split::Validation, inj, dec, "m"));
}

TEST_CASE("evaluate_prefix scores follow the mock's closed form") {
  auto cfg = testing::mock_config(TaskKind::Logic);
  auto backends = make_backends(cfg);
  auto ds = load_dataset(cfg.validation_path);
  const auto& tpl = TemplateSet::builtin();
  EvalContext ctx{&cfg, backends.target.get(), nullptr, &tpl, 99};
  auto weak = ThinkPrefix::make("Okay, I need to answer.", Origin{}, 0);
  auto strong = ThinkPrefix::make("So first, then next, step by step. Therefore done.", Origin{}, 0);
  CHECK(mock::success_probability(mock::traits_of(weak.text)) <
        mock::success_probability(mock::traits_of(strong.text)));
  auto rw = evaluate_prefix(weak, ds.items, Split::Validation, ctx);
  auto rs = evaluate_prefix(strong, ds.items, Split::Validation, ctx);
  CHECK(rw.fitness < rs.fitness);
  CHECK(rw.fitness == rw.accuracy);
  CHECK(rw.n_samples == static_cast<int>(ds.items.size()));
  CHECK(rw.mean_tokens > 0);
  CHECK(evaluate_prefix(weak, ds.items, Split::Validation, ctx) == rw);
}

TEST_CASE("failing members are excluded") {
  auto cfg = testing::mock_config(TaskKind::Logic);
  auto backends = make_backends(cfg);
  auto ds = load_dataset(cfg.validation_path);
  const auto& tpl = TemplateSet::builtin();
  EvalContext ctx{&cfg, backends.target.get(), nullptr, &tpl, 1};
  auto broken = ThinkPrefix::make("So first [[mock-fail]]", Origin{}, 0);
  auto r = evaluate_prefix(broken, ds.items, Split::Validation, ctx);
  CHECK(r.excluded);
  CHECK(r.n_failed == static_cast<int>(ds.items.size()));
  CHECK(std::isinf(r.fitness));
  CHECK(r.fitness < 0);

  Population pop;
  pop.add({broken, r});
  auto fine = ThinkPrefix::make("Okay.", Origin{}, 0);
  pop.add({fine, evaluate_prefix(fine, ds.items, Split::Validation, ctx)});
  auto top = select_top_n(pop, 1);
  CHECK(top[0].prefix.id == fine.id);
}

TEST_CASE("re-evaluating an unchanged population hits the cache") {
  testing::TempDir dir("cache");
  auto cfg = testing::mock_config();
  auto backends = make_backends(cfg);
  Orchestrator o(cfg, backends, dir / "run");
  o.start();
  const auto& seeds = o.populations().front();
  auto& lrm = lrm_of(backends);
  const auto before = lrm.calls();
  auto again = o.evaluate_population(unscored_copy(seeds));
  CHECK(lrm.calls() == before);
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    CHECK(*again.members[i].record == *seeds.members[i].record);
  }
}

TEST_CASE("one iteration builds the documented candidate pool") {
  testing::TempDir dir("pool");
  auto cfg = testing::mock_config();
  Orchestrator o(cfg, make_backends(cfg), dir / "run");
  o.start();
  o.step();
  std::size_t crossover = 0, mutation = 0, survivors = 0;
  for (const auto& m : o.populations()[1].members) {
    if (m.prefix.origin.kind == OriginKind::Crossover) {
      ++crossover;
    } else if (m.prefix.origin.kind == OriginKind::Seed) {
      ++survivors;
    } else {
      ++mutation;
    }
  }
  CHECK(survivors == 5);
  CHECK(crossover + mutation <= 32);
  CHECK(crossover + mutation + survivors == o.populations()[1].size());
  int calls = 0;
  for (const auto& e : events(dir / "run")) calls += e["event"] == "operator_called" ? 1 : 0;
  CHECK(calls == 1 + 3);
}

TEST_CASE("guidance restricts mutation children") {
  SUBCASE("no behaviors: only style children") {
    testing::TempDir dir("none");
    auto cfg = testing::mock_config();
    cfg.guidance.mode = GuidanceMode::NoBehaviors;
    Orchestrator o(cfg, make_backends(cfg), dir / "run");
    o.start();
    o.step();
    for (const auto& m : o.populations()[1].members) {
      CHECK_FALSE(m.prefix.origin.is_behavior_targeted());
    }
  }
  SUBCASE("preferred stepwise") {
    testing::TempDir dir("pref");
    auto cfg = testing::mock_config();
    cfg.guidance.mode = GuidanceMode::PreferredOnly;
    cfg.guidance.behaviors = {Behavior::StepwiseReasoning};
    Orchestrator o(cfg, make_backends(cfg), dir / "run");
    o.start();
    o.step();
    int targeted = 0;
    for (const auto& m : o.populations()[1].members) {
      if (!m.prefix.origin.is_behavior_targeted()) continue;
      ++targeted;
      CHECK(m.prefix.origin.behavior == Behavior::StepwiseReasoning);
    }
    CHECK(targeted > 0);
  }
}

TEST_CASE("best fitness never drops") {
  testing::TempDir dir("mono");
  auto cfg = testing::mock_config(TaskKind::Logic);
  Orchestrator o(cfg, make_backends(cfg), dir / "run");
  o.start();
  double prev = *o.seed_best();
  while (o.convergence().status == RunStatus::Running) {
    o.step();
    CHECK(o.bests().back() >= prev);
    prev = o.bests().back();
  }
}

TEST_CASE("finalize consumes the test split once") {
  testing::TempDir dir("final");
  auto cfg = testing::mock_config();
  cfg.max_iterations = 2;
  Orchestrator o(cfg, make_backends(cfg), dir / "run");
  CHECK(code_of([&] { o.finalize(); }) == ErrorCode::InvalidSpec);
  auto report = o.run();
  CHECK(report.selection == "frontier");
  CHECK(o.test_requests_before_finalize() == 0);
  CHECK(code_of([&] { o.finalize(); }) == ErrorCode::TestAlreadyConsumed);
  CHECK(code_of([&] { o.step(); }) == ErrorCode::TestAlreadyConsumed);
  CHECK(std::filesystem::exists(dir / "run" / "report.json"));

  auto resumed = Orchestrator::resume(dir / "run");
  CHECK(code_of([&] { resumed.finalize(); }) == ErrorCode::TestAlreadyConsumed);

  bool seen_final = false;
  for (const auto& e : events(dir / "run")) {
    if (e["event"] == "finalized") seen_final = true;
    if (e.contains("split") && e["split"] == "test") CHECK(seen_final);
  }
  CHECK(seen_final);
}

TEST_CASE("frontier winner for efficient runs, argmax otherwise") {
  testing::TempDir dir("winner");
  auto ecfg = testing::mock_config();
  ecfg.max_iterations = 2;
  Orchestrator e(ecfg, make_backends(ecfg), dir / "e");
  auto er = e.run();
  std::vector<FrontierPoint> pts;
  std::set<std::string> seen;
  for (const auto& pop : e.populations()) {
    for (const auto& m : pop.members) {
      if (m.record && !m.record->excluded && seen.insert(m.prefix.id).second) {
        pts.push_back({m.prefix.id, m.record->accuracy, m.record->mean_tokens});
      }
    }
  }
  CHECK(er.winner.prefix.id == select_on_frontier(pts, ecfg.frontier_epsilon).prefix_id);

  auto icfg = testing::mock_config(TaskKind::InstructionFollowing);
  icfg.max_iterations = 2;
  Orchestrator i(icfg, make_backends(icfg), dir / "i");
  auto ir = i.run();
  CHECK(ir.selection == "argmax");
  CHECK(ir.winner.prefix.id == i.best()->prefix.id);
  CHECK(ir.validation.task_scores.count("strict_accuracy") == 1);
}

TEST_CASE("safety runs score spc and upr") {
  testing::TempDir dir("safety");
  auto cfg = testing::mock_config(TaskKind::Safety);
  cfg.max_iterations = 1;
  Orchestrator o(cfg, make_backends(cfg), dir / "run");
  auto r = o.run();
  CHECK(r.validation.task_scores.count("spc") == 1);
  CHECK(r.validation.task_scores.count("upr") == 1);
  CHECK(r.validation.fitness <= 0.8 + 1e-12);
}

TEST_CASE("resume continues to the same transcript") {
  testing::TempDir dir("resume");
  auto cfg = testing::mock_config(TaskKind::Logic);
  cfg.max_iterations = 3;
  {
    Orchestrator full(cfg, make_backends(cfg), dir / "full");
    full.run();
  }
  {
    Orchestrator part(cfg, make_backends(cfg), dir / "part");
    part.start();
    part.step();
  }
  // Simulate a crash that left a half-written event after the last checkpoint.
  {
    std::ofstream log(dir / "part" / "log.jsonl", std::ios::app);
    log << R"({"event":"iteration_started","iteration":2})" << '\n';
  }
  auto resumed = Orchestrator::resume(dir / "part");
  CHECK(resumed.populations().size() == 2);
  resumed.run();
  CHECK(transcript_of(dir / "part" / "log.jsonl") == transcript_of(dir / "full" / "log.jsonl"));
}

TEST_CASE("replay verifies a mock run and catches tampering") {
  testing::TempDir dir("replay");
  auto cfg = testing::mock_config(TaskKind::Logic);
  cfg.max_iterations = 2;
  Orchestrator o(cfg, make_backends(cfg), dir / "run");
  o.run();
  auto ok = replay_run(dir / "run");
  CHECK(ok.identical);
  CHECK(ok.original_events == ok.replayed_events);

  auto log = testing::slurp(dir / "run" / "log.jsonl");
  auto pos = log.find("\"candidate_evaluated\"");
  REQUIRE(pos != std::string::npos);
  log.replace(pos, 21, "\"candidate_evaluatex\"");
  testing::spit(dir / "run" / "log.jsonl", log);
  auto bad = replay_run(dir / "run");
  CHECK_FALSE(bad.identical);
  REQUIRE(bad.first_difference);
}

TEST_CASE("explicit seeds replace operator seeding") {
  testing::TempDir dir("seeds");
  auto cfg = testing::mock_config(TaskKind::Logic);
  cfg.seeds = {"Okay, I need to answer.", "So first I compute.", "Let me first plan.",
               "Hmm, maybe check.", "In summary, done."};
  cfg.seed_count = 5;
  cfg.max_iterations = 1;
  Orchestrator o(cfg, make_backends(cfg), dir / "run");
  o.start();
  CHECK(o.populations().front().size() == 5);
  o.step();
  CHECK(o.bests().back() >= *o.seed_best());
}
