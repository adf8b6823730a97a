#include <doctest.h>

#include <set>

#include "prefixevo/text.hpp"

using namespace prefixevo;

TEST_CASE("case folding leaves non-ASCII bytes alone") {
  CHECK(text::to_lower("ÄbC") == "Äbc");
  CHECK(text::to_upper("straße") == "STRAßE");
  CHECK(text::iequals("Hello", "hELLO"));
  CHECK_FALSE(text::iequals("Hello", "Hell"));
}

TEST_CASE("trim, split and join") {
  CHECK(text::trim("  a b \n") == "a b");
  CHECK(text::trim("   ").empty());
  auto lines = text::split_lines("a\r\nb\n\nc");
  REQUIRE(lines.size() == 4);
  CHECK(lines[0] == "a");
  CHECK(lines[2].empty());
  CHECK(text::split_words("  one two\tthree\n").size() == 3);
  CHECK(text::join({"a", "b", "c"}, ", ") == "a, b, c");
}

TEST_CASE("placeholders are substituted once and unknown braces survive") {
  std::map<std::string, std::string, std::less<>> v{{"a", "{b}"}, {"b", "B"}};
  CHECK(text::render_placeholders("x{a}y{b}{c}{{z}}", v) == "x{b}yB{c}{{z}}");
}

TEST_CASE("dedup key ignores case and whitespace runs") {
  CHECK(text::dedup_key("  Okay,   so\nI ") == text::dedup_key("okay, so i"));
  CHECK(text::dedup_key("a b") != text::dedup_key("ab"));
}

TEST_CASE("sha256 of known vectors") {
  CHECK(text::sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(text::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("rng_below stays in range and covers it") {
  std::mt19937_64 rng(1);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 2000; ++i) {
    auto x = text::rng_below(rng, 7);
    CHECK(x < 7);
    seen.insert(x);
  }
  CHECK(seen.size() == 7);
}

TEST_CASE("shuffle is a seeded permutation") {
  std::vector<int> a(50), b;
  for (int i = 0; i < 50; ++i) a[i] = i;
  b = a;
  std::mt19937_64 r1(9), r2(9);
  text::shuffle(a, r1);
  text::shuffle(b, r2);
  CHECK(a == b);
  auto sorted = a;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 50; ++i) CHECK(sorted[i] == i);
}

TEST_CASE("mix_seed separates streams") {
  CHECK(text::mix_seed(1, 2) != text::mix_seed(2, 1));
  CHECK(text::mix_seed(1, 2, 3) == text::mix_seed(1, 2, 3));
  CHECK(text::mix_seed(1, 2, 0) != text::mix_seed(1, 2, 1));
}
