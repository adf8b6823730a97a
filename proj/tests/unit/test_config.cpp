#include <doctest.h>

#include "prefixevo/config.hpp"
#include "prefixevo/error.hpp"
#include "test_support.hpp"

using namespace prefixevo;

TEST_CASE("fixture config loads with resolved paths") {
  auto c = load_config(testing::fixture("evolve_efficient.json"));
  CHECK(c.run_id == "efficient-demo");
  CHECK(c.task_kind == TaskKind::EfficientReasoning);
  CHECK(c.max_iterations == 4);
  CHECK(c.validation_path.is_absolute());
  CHECK(std::filesystem::exists(c.validation_path));
  CHECK(c.all_mock());
}

TEST_CASE("defaults") {
  RunConfig c;
  CHECK(c.seed_count == 10);
  CHECK(c.top_n == 5);
  CHECK(c.mutation_parents == 3);
  CHECK(c.decoding.temperature == 0.6);
  CHECK(c.decoding.top_p == 0.95);
  CHECK(c.decoding.max_tokens == 32768);
  CHECK(c.guidance.mode == GuidanceMode::AllBehaviors);
}

TEST_CASE("json round trip") {
  auto c = testing::mock_config();
  c.guidance.mode = GuidanceMode::PreferredOnly;
  c.guidance.behaviors = {Behavior::StepwiseReasoning};
  c.convergence.threshold = 0.5;
  nlohmann::json j = c;
  auto back = j.get<RunConfig>();
  CHECK(nlohmann::json(back) == j);
  CHECK(back.guidance.behaviors == c.guidance.behaviors);
}

TEST_CASE("api keys are never serialized") {
  auto c = testing::mock_config();
  c.target.kind = "http";
  c.target.base_url = "http://localhost:8000";
  c.target.api_key = "sk-secret";
  CHECK(nlohmann::json(c).dump().find("sk-secret") == std::string::npos);
}

TEST_CASE("config errors") {
  auto bad = [](const std::string& patch) {
    nlohmann::json j = testing::mock_config();
    j.merge_patch(nlohmann::json::parse(patch));
    try {
      j.get<RunConfig>().validate();
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::DomainError;
  };
  CHECK(bad(R"({"unknown_key": 1})") == ErrorCode::ConfigError);
  CHECK(bad(R"({"task": "poetry"})") == ErrorCode::ConfigError);
  CHECK(bad(R"({"top_n": 0})") == ErrorCode::ConfigError);
  CHECK(bad(R"({"guidance": {"mode": "preferred"}})") == ErrorCode::ConfigError);
  CHECK(bad(R"({"backends": {"target": {"kind": "grpc"}}})") == ErrorCode::ConfigError);
}

TEST_CASE("run id derivation is stable") {
  auto c = testing::mock_config();
  c.run_id.clear();
  auto a = derive_run_id(c);
  CHECK(a.rfind("run-", 0) == 0);
  CHECK(derive_run_id(c) == a);
  c.rng_seed += 1;
  CHECK(derive_run_id(c) != a);
}

TEST_CASE("guidance pools") {
  Guidance g;
  CHECK(g.mutation_pool().size() == kBehaviorCount);
  g.mode = GuidanceMode::NonPreferredOnly;
  g.behaviors = {Behavior::FinalConclusion};
  CHECK(g.mutation_pool() == std::vector<Behavior>{Behavior::FinalConclusion});
  g.mode = GuidanceMode::NoBehaviors;
  CHECK(g.crossover_taxonomy().empty());
}

TEST_CASE("force_mock") {
  auto c = testing::mock_config();
  c.target.kind = "http";
  c.target.base_url = "http://x";
  CHECK_FALSE(c.all_mock());
  c.force_mock();
  CHECK(c.all_mock());
}
