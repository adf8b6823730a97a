#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "prefixevo/gateway.hpp"
#include "prefixevo/taxonomy.hpp"

// Offline stand-ins for the three model roles. Both mocks are pure functions of the
// request body (plus a fixed seed), so runs against them are byte-reproducible.
namespace prefixevo::mock {

// Markers the target mock reads as a request for short reasoning.
inline constexpr std::string_view kConciseMarkers[] = {
    "concise", "concisely", "brief", "briefly", "directly", "quick", "quickly", "minimal", "short",
};

struct LrmConfig {
  std::string model = "mock-lrm";
  std::uint64_t seed = 0;
  /// Any prefix containing this string makes every request fail with HTTP 500.
  std::string fail_marker = "[[mock-fail]]";
};

/// Features the target mock derives from a prefix.
struct PrefixTraits {
  double stepwise = 0;
  double final_conclusion = 0;
  double task_init = 0;
  double uncertainty = 0;
  std::size_t concise = 0;
  bool safety_minded = false;
};

PrefixTraits traits_of(std::string_view prefix, const MarkerLexicon& lexicon = MarkerLexicon::builtin());

/// Probability of a correct reply: rises with stepwise markers, falls with summary markers.
double success_probability(const PrefixTraits& t);
/// Expected completion length: falls with concise markers, grows slowly with stepwise ones.
double expected_tokens(const PrefixTraits& t);

/// Reasoning-model mock. Solves "a op b" arithmetic (also inside multiple-choice
/// questions), answers instruction-following and safety prompts, and gets each item
/// right with a probability driven by the prefix's behavior markers.
class MockLrm final : public Backend {
 public:
  explicit MockLrm(LrmConfig config = {});
  WireResponse send(const WireRequest& request) override;
  std::string model_id() const override { return config_.model; }

  std::uint64_t calls() const { return calls_.load(); }
  void reset_calls() { calls_ = 0; }

 private:
  LrmConfig config_;
  std::atomic<std::uint64_t> calls_{0};
};

enum class JudgeMode { Lexicon, AlwaysSuccess, AlwaysFailure, Unparseable };

struct LlmConfig {
  std::string model = "mock-llm";
  JudgeMode judge = JudgeMode::Lexicon;
  /// Fixed harmfulness score; otherwise 0 for refusals and 1 for compliance with an unsafe ask.
  std::optional<double> harm_score;
  /// Rewrites the reply before it is sent, for fault injection.
  std::function<std::string(const std::string& prompt, std::string reply, int call)> tamper;
};

/// Operator and judge mock: recognizes the seed, crossover, mutation and judging prompts
/// and answers them with rule-based edits over marker sentences.
class MockLlm final : public Backend {
 public:
  explicit MockLlm(LlmConfig config = {});
  WireResponse send(const WireRequest& request) override;
  std::string model_id() const override { return config_.model; }

  std::uint64_t calls() const { return calls_.load(); }
  /// Answer text for a prompt, as placed in the chat reply.
  std::string respond(const std::string& prompt, std::int64_t seed) const;

 private:
  LlmConfig config_;
  std::atomic<std::uint64_t> calls_{0};
};

/// Plays back a fixed sequence of outcomes; used to exercise retry handling.
class ScriptedBackend final : public Backend {
 public:
  struct Step {
    int status = 200;
    std::string body;
    bool transport_error = false;
  };
  explicit ScriptedBackend(std::vector<Step> steps, std::string model = "scripted");
  WireResponse send(const WireRequest& request) override;
  std::string model_id() const override { return model_; }

  std::vector<WireRequest> requests() const;

  static std::string chat_body(std::string_view content, std::optional<int> tokens = std::nullopt);
  static std::string completion_body(std::string_view text, std::optional<int> tokens = std::nullopt);

 private:
  std::vector<Step> steps_;
  std::string model_;
  mutable std::mutex mutex_;
  std::size_t next_ = 0;
  std::vector<WireRequest> requests_;
};

/// Sentence split used by the mocks: terminators . ! ? followed by whitespace.
std::vector<std::string> split_sentences(std::string_view text);

}  // namespace prefixevo::mock
