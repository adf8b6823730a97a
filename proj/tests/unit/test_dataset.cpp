#include <doctest.h>

#include <set>

#include "prefixevo/dataset.hpp"
#include "prefixevo/error.hpp"
#include "test_support.hpp"

using namespace prefixevo;

namespace {

std::set<std::string> ids_of(const std::vector<TaskItem>& items) {
  std::set<std::string> s;
  for (const auto& i : items) s.insert(i.id);
  return s;
}

}  // namespace

TEST_CASE("fixtures load and fit their task") {
  auto m = load_dataset(testing::fixture("math_10.jsonl"));
  CHECK(m.items.size() == 10);
  CHECK(m.id.size() == 16);
  CHECK_NOTHROW(check_dataset_task(m, TaskKind::EfficientReasoning));
  CHECK_THROWS_AS(check_dataset_task(m, TaskKind::Safety), Error);
  CHECK_NOTHROW(check_dataset_task(load_dataset(testing::fixture("if_validation.jsonl")),
                                   TaskKind::InstructionFollowing));
  CHECK_NOTHROW(check_dataset_task(load_dataset(testing::fixture("safety_validation.jsonl")), TaskKind::Safety));
  CHECK_NOTHROW(check_dataset_task(load_dataset(testing::fixture("logic_validation.jsonl")), TaskKind::Logic));
}

TEST_CASE("round trip through jsonl") {
  auto m = load_dataset(testing::fixture("if_validation.jsonl"));
  auto again = parse_dataset(dump_jsonl(m.items));
  REQUIRE(again.items.size() == m.items.size());
  for (std::size_t i = 0; i < m.items.size(); ++i) {
    CHECK(again.items[i].id == m.items[i].id);
    CHECK(std::get<ConstraintSet>(again.items[i].gold) == std::get<ConstraintSet>(m.items[i].gold));
  }
}

TEST_CASE("malformed datasets") {
  CHECK_THROWS_AS(parse_dataset("{not json}\n"), Error);
  CHECK_THROWS_AS(parse_dataset(R"({"id":"a","task":"exact","query":"q","answer":"1"}
{"id":"a","task":"exact","query":"q","answer":"2"})"),
                  Error);
  CHECK_THROWS_AS(parse_dataset(R"({"id":"a","task":"choice","query":"q","answer":"Z"})"), Error);
  CHECK_THROWS_AS(parse_dataset(R"({"id":"a","task":"poetry","query":"q"})"), Error);
  CHECK_THROWS_AS(load_dataset("/nonexistent/file.jsonl"), Error);
  auto numeric = parse_dataset(R"({"id":7,"task":"exact","query":"q","answer":12})");
  CHECK(numeric.items[0].id == "7");
  CHECK(std::get<ExactAnswer>(numeric.items[0].gold).value == "12");
}

TEST_CASE("split sizes and disjointness") {
  auto items = load_dataset(testing::fixture("math_10.jsonl")).items;
  auto s = split_dataset(items, 0.2, 0);
  CHECK(s.validation.size() == 2);
  CHECK(s.test.size() == 8);
  auto v = ids_of(s.validation), t = ids_of(s.test);
  for (const auto& id : v) CHECK_FALSE(t.count(id));
  CHECK(v.size() + t.size() == 10);
}

TEST_CASE("split is seeded") {
  auto items = load_dataset(testing::fixture("math_100.jsonl")).items;
  auto a = split_dataset(items, 0.2, 1), b = split_dataset(items, 0.2, 1), c = split_dataset(items, 0.2, 2);
  CHECK(dump_jsonl(a.validation) == dump_jsonl(b.validation));
  CHECK(dump_jsonl(a.test) == dump_jsonl(b.test));
  CHECK(ids_of(a.validation) != ids_of(c.validation));
}

TEST_CASE("split domain") {
  auto items = load_dataset(testing::fixture("math_10.jsonl")).items;
  CHECK_THROWS_AS(split_dataset(items, 0.0, 0), Error);
  CHECK_THROWS_AS(split_dataset(items, 1.0, 0), Error);
  CHECK_THROWS_AS(split_dataset({items[0]}, 0.5, 0), Error);
  auto tiny = split_dataset(items, 0.01, 0);
  CHECK(tiny.validation.size() == 1);
  auto huge = split_dataset(items, 0.99, 0);
  CHECK(huge.test.size() == 1);
}
