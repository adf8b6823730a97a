#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <string_view>
#include <vector>

// Small string and RNG helpers shared by the modules. ASCII-only case folding:
// bytes >= 0x80 pass through unchanged, so UTF-8 text stays intact.
namespace prefixevo::text {

std::string to_lower(std::string_view s);
std::string to_upper(std::string_view s);
std::string_view trim(std::string_view s);
std::string trim_copy(std::string_view s);
bool iequals(std::string_view a, std::string_view b);
bool istarts_with(std::string_view s, std::string_view prefix);
bool is_word_char(char c);

std::vector<std::string_view> split_lines(std::string_view s);
std::vector<std::string_view> split_words(std::string_view s);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
std::string replace_all(std::string s, std::string_view from, std::string_view to);

/// Substitutes `{name}` tokens in one left-to-right pass. Values are never rescanned,
/// and braces that do not form a known token are copied verbatim.
std::string render_placeholders(std::string_view tpl,
                                const std::map<std::string, std::string, std::less<>>& values);

/// Collapses runs of whitespace and case-folds; used for duplicate detection.
std::string dedup_key(std::string_view s);

/// Uniform integer in [0, bound) via rejection sampling. Unlike
/// std::uniform_int_distribution the sequence is identical on every standard library.
std::uint64_t rng_below(std::mt19937_64& rng, std::uint64_t bound);

template <typename T>
void shuffle(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng_below(rng, i));
    std::swap(v[i - 1], v[j]);
  }
}

/// Deterministic 64-bit mix used to derive sub-seeds (splitmix64 finalizer).
std::uint64_t mix64(std::uint64_t x);
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

/// Lowercase hex SHA-256 of the input bytes.
std::string sha256_hex(std::string_view data);

}  // namespace prefixevo::text
