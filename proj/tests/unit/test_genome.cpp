#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "prefixevo/error.hpp"
#include "prefixevo/genome.hpp"

using namespace prefixevo;

namespace {

Member scored(const std::string& text, double fitness, double tokens = 1000, bool excluded = false) {
  Member m{ThinkPrefix::make(text, Origin{}, 0), FitnessRecord{}};
  m.record->prefix_id = m.prefix.id;
  m.record->fitness = excluded ? -std::numeric_limits<double>::infinity() : fitness;
  m.record->mean_tokens = tokens;
  m.record->excluded = excluded;
  return m;
}

Population pop_of(std::vector<Member> ms) {
  Population p;
  for (auto& m : ms) p.add(std::move(m));
  return p;
}

}  // namespace

TEST_CASE("prefix ids are content derived") {
  auto a = ThinkPrefix::make("Okay, so  let me think.", Origin{}, 0);
  auto b = ThinkPrefix::make("okay, so let me THINK.", Origin{}, 3);
  CHECK(a.id == b.id);
  CHECK(a.id.rfind("tp-", 0) == 0);
  CHECK(a.id.size() == 19);
  CHECK(a.id != ThinkPrefix::make("Something else.", Origin{}, 0).id);
}

TEST_CASE("invalid prefix text") {
  CHECK_THROWS_AS(validate_prefix_text("   "), Error);
  CHECK_THROWS_AS(validate_prefix_text("a <think> b"), Error);
  CHECK_THROWS_AS(validate_prefix_text("a </think>"), Error);
  CHECK_NOTHROW(validate_prefix_text("fine"));
}

TEST_CASE("population add rejects duplicates") {
  Population p;
  CHECK(p.add(scored("one", 0.1)));
  CHECK_FALSE(p.add(scored("ONE", 0.9)));
  CHECK(p.size() == 1);
}

TEST_CASE("select_top_n orders by fitness") {
  auto p = pop_of({scored("a", 0.9), scored("b", 0.7), scored("c", 0.8)});
  auto top = select_top_n(p, 2);
  REQUIRE(top.size() == 2);
  CHECK(top[0].record->fitness == 0.9);
  CHECK(top[1].record->fitness == 0.8);
  auto all = select_top_n(p, 3);
  CHECK(all[2].record->fitness == 0.7);
}

TEST_CASE("ties prefer fewer tokens") {
  auto p = pop_of({scored("long", 0.5, 800), scored("short", 0.5, 400)});
  auto top = select_top_n(p, 1);
  CHECK(top[0].prefix.text == "short");
}

TEST_CASE("select_top_n errors") {
  auto p = pop_of({scored("a", 0.9)});
  CHECK_THROWS_AS(select_top_n(p, 2), Error);
  Population unscored;
  unscored.add(Member{ThinkPrefix::make("x", Origin{}, 0), std::nullopt});
  CHECK_THROWS_AS(select_top_n(unscored, 1), Error);
}

TEST_CASE("excluded members never rank") {
  auto p = pop_of({scored("a", 0.9, 100, true), scored("b", 0.2)});
  auto top = select_top_n(p, 1);
  CHECK(top[0].prefix.text == "b");
  CHECK(best_member(p)->prefix.text == "b");
}

TEST_CASE("elite floor") {
  auto prev = scored("prev", 0.9);
  SUBCASE("re-inserted when the new max is lower") {
    auto out = elite_floor(prev, pop_of({scored("x", 0.8)}));
    CHECK(out.contains(prev.prefix.id));
  }
  SUBCASE("unchanged when beaten") {
    auto next = pop_of({scored("x", 0.95)});
    auto out = elite_floor(prev, next);
    CHECK(out.size() == 1);
    CHECK_FALSE(out.contains(prev.prefix.id));
  }
  SUBCASE("unchanged on a tie") {
    auto out = elite_floor(prev, pop_of({scored("x", 0.9)}));
    CHECK(out.size() == 1);
  }
}

TEST_CASE("property: elite floor keeps best fitness monotone") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0, 1);
  Member best = scored("seed", 0.3);
  for (int gen = 0; gen < 100; ++gen) {
    std::vector<Member> ms;
    for (int i = 0; i < 5; ++i) ms.push_back(scored("g" + std::to_string(gen) + "-" + std::to_string(i), u(rng)));
    auto out = elite_floor(best, pop_of(ms));
    auto nb = best_member(out);
    REQUIRE(nb);
    CHECK(nb->record->fitness >= best.record->fitness);
    best = *nb;
  }
}

TEST_CASE("json round trip, excluded fitness as null") {
  auto m = scored("Okay, so I will first plan.", 0.0, 10, true);
  m.prefix.origin = Origin{OriginKind::MutationEnhanced, {"tp-parent"}, Behavior::StrategicPlanning};
  nlohmann::json j = m;
  CHECK(j["record"]["fitness"].is_null());
  auto back = j.get<Member>();
  CHECK(back.prefix.id == m.prefix.id);
  CHECK(back.prefix.origin == m.prefix.origin);
  CHECK(std::isinf(back.record->fitness));
  CHECK(back.record->excluded);
  CHECK(back.prefix.profile == m.prefix.profile);
}
