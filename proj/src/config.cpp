#include "prefixevo/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "prefixevo/error.hpp"
#include "prefixevo/text.hpp"

namespace prefixevo {

namespace {

constexpr std::pair<GuidanceMode, std::string_view> kGuidanceNames[] = {
    {GuidanceMode::AllBehaviors, "all"},
    {GuidanceMode::NoBehaviors, "none"},
    {GuidanceMode::PreferredOnly, "preferred"},
    {GuidanceMode::NonPreferredOnly, "non_preferred"},
};

Behavior behavior_or_fail(const std::string& name) {
  auto b = parse_behavior(name);
  if (!b) fail(ErrorCode::ConfigError, "unknown behavior '" + name + "'");
  return *b;
}

nlohmann::json decoding_json(const DecodingParams& d) {
  return {{"temperature", d.temperature}, {"top_p", d.top_p}, {"max_tokens", d.max_tokens},
          {"stop", d.stop}};
}

DecodingParams decoding_from(const nlohmann::json& j, DecodingParams d) {
  d.temperature = j.value("temperature", d.temperature);
  d.top_p = j.value("top_p", d.top_p);
  d.max_tokens = j.value("max_tokens", d.max_tokens);
  d.stop = j.value("stop", d.stop);
  return d;
}

nlohmann::json backend_json(const BackendConfig& b) {
  nlohmann::json j{{"kind", b.kind}, {"model", b.model}};
  if (b.kind == "http") {
    j["base_url"] = b.base_url;
    j["timeout_seconds"] = b.timeout_seconds;
  } else {
    j["mock_seed"] = b.mock_seed;
  }
  // The API key never goes into the resolved config written next to a run.
  return j;
}

BackendConfig backend_from(const nlohmann::json& j, BackendConfig b) {
  b.kind = j.value("kind", b.kind);
  if (b.kind != "mock" && b.kind != "http") {
    fail(ErrorCode::ConfigError, "backend kind must be 'mock' or 'http', got '" + b.kind + "'");
  }
  b.base_url = j.value("base_url", b.base_url);
  b.model = j.value("model", b.model);
  b.api_key = j.value("api_key", b.api_key);
  b.timeout_seconds = j.value("timeout_seconds", b.timeout_seconds);
  b.mock_seed = j.value("mock_seed", b.mock_seed);
  return b;
}

}  // namespace

std::string_view to_string(GuidanceMode m) {
  for (const auto& [mode, name] : kGuidanceNames) {
    if (mode == m) return name;
  }
  return "all";
}

GuidanceMode parse_guidance_mode(std::string_view s) {
  for (const auto& [mode, name] : kGuidanceNames) {
    if (text::iequals(name, s)) return mode;
  }
  fail(ErrorCode::ConfigError, "unknown guidance mode '" + std::string(s) + "'");
}

std::vector<Behavior> Guidance::mutation_pool() const {
  switch (mode) {
    case GuidanceMode::AllBehaviors: return {kAllBehaviors.begin(), kAllBehaviors.end()};
    case GuidanceMode::NoBehaviors: return {};
    case GuidanceMode::PreferredOnly:
    case GuidanceMode::NonPreferredOnly: return behaviors;
  }
  return {};
}

std::vector<Behavior> Guidance::crossover_taxonomy() const { return mutation_pool(); }

void Guidance::validate() const {
  const bool listed = mode == GuidanceMode::PreferredOnly || mode == GuidanceMode::NonPreferredOnly;
  if (listed && behaviors.empty()) {
    fail(ErrorCode::ConfigError, std::string(to_string(mode)) + " guidance needs a behavior list");
  }
}

void RunConfig::validate() const {
  if (seed_count < 1) fail(ErrorCode::ConfigError, "seed_count must be >= 1");
  if (top_n < 1) fail(ErrorCode::ConfigError, "top_n must be >= 1");
  if (top_n > seed_count) fail(ErrorCode::ConfigError, "top_n cannot exceed seed_count");
  if (mutation_parents < 0) fail(ErrorCode::ConfigError, "mutation_parents must be >= 0");
  if (max_iterations < 1) fail(ErrorCode::ConfigError, "max_iterations must be >= 1");
  if (convergence.patience < 1) fail(ErrorCode::ConfigError, "patience must be >= 1");
  if (concurrency < 1 || concurrency > Gateway::kMaxConcurrency) {
    fail(ErrorCode::ConfigError, "concurrency must lie in [1, 256]");
  }
  if (!(model_size_b > 0.0)) fail(ErrorCode::ConfigError, "model_size_b must be positive");
  if (!(max_failed_fraction >= 0.0 && max_failed_fraction < 1.0)) {
    fail(ErrorCode::ConfigError, "max_failed_fraction must lie in [0, 1)");
  }
  if (!(frontier_epsilon >= 0.0)) fail(ErrorCode::ConfigError, "frontier_epsilon must be >= 0");
  if (operator_parse_retries < 0) fail(ErrorCode::ConfigError, "operator_parse_retries must be >= 0");
  if (validation_path.empty()) fail(ErrorCode::ConfigError, "datasets.validation is required");
  if (test_path.empty()) fail(ErrorCode::ConfigError, "datasets.test is required");
  guidance.validate();
  injection.validate();
  decoding.validate();
  operator_decoding.validate();
  judge_decoding.validate();
  for (const auto* b : {&target, &op}) {
    if (b->kind == "http" && b->base_url.empty() && std::getenv("PREFIXEVO_BASE_URL") == nullptr) {
      fail(ErrorCode::ConfigError, "http backend needs base_url or PREFIXEVO_BASE_URL");
    }
  }
}

void RunConfig::force_mock() {
  target.kind = "mock";
  op.kind = "mock";
  if (judge) judge->kind = "mock";
}

bool RunConfig::all_mock() const {
  return target.kind == "mock" && op.kind == "mock" && (!judge || judge->kind == "mock");
}

void to_json(nlohmann::json& j, const RunConfig& c) {
  nlohmann::json guidance{{"mode", to_string(c.guidance.mode)}};
  if (!c.guidance.behaviors.empty()) {
    auto& list = guidance["behaviors"] = nlohmann::json::array();
    for (Behavior b : c.guidance.behaviors) list.push_back(behavior_info(b).id);
  }
  j = nlohmann::json{
      {"run_id", c.run_id},
      {"task", to_string(c.task_kind)},
      {"seed_count", c.seed_count},
      {"top_n", c.top_n},
      {"mutation_parents", c.mutation_parents},
      {"max_iterations", c.max_iterations},
      {"convergence",
       {{"patience", c.convergence.patience},
        {"threshold", c.convergence.threshold ? nlohmann::json(*c.convergence.threshold)
                                              : nlohmann::json(nullptr)}}},
      {"guidance", guidance},
      {"mutation_mode", c.mutation_mode == MutationMode::Nine ? "nine" : "pair"},
      {"announce_mutation_categories", c.announce_mutation_categories},
      {"mutation_parent_pool",
       c.mutation_parent_pool == ParentPool::Survivors ? "survivors" : "population"},
      {"rng_seed", c.rng_seed},
      {"concurrency", c.concurrency},
      {"datasets",
       {{"validation", c.validation_path.generic_string()}, {"test", c.test_path.generic_string()}}},
      {"injection",
       {{"mode", c.injection.mode == InjectionMode::RawCompletionTemplate ? "raw" : "prefill"},
        {"template", c.injection.tmpl},
        {"close_think", c.injection.close_think},
        {"extra_body", c.injection.extra_body}}},
      {"decoding", decoding_json(c.decoding)},
      {"operator_decoding", decoding_json(c.operator_decoding)},
      {"judge_decoding", decoding_json(c.judge_decoding)},
      {"backends", {{"target", backend_json(c.target)}, {"operator", backend_json(c.op)}}},
      {"retry",
       {{"retries", c.retry.retries},
        {"base_seconds", c.retry.base_seconds},
        {"factor", c.retry.factor},
        {"jitter", c.retry.jitter},
        {"cap_seconds", c.retry.cap_seconds}}},
      {"model_size_b", c.model_size_b},
      {"safety_weights",
       {{"upr", c.safety_weights.upr}, {"spc", c.safety_weights.spc}, {"srej", c.safety_weights.srej}}},
      {"max_failed_fraction", c.max_failed_fraction},
      {"frontier_epsilon", c.frontier_epsilon},
      {"operator_parse_retries", c.operator_parse_retries},
      {"seeds", c.seeds},
  };
  if (c.judge) j["backends"]["judge"] = backend_json(*c.judge);
  if (c.templates_dir) j["templates_dir"] = c.templates_dir->generic_string();
  if (c.lexicon_path) j["lexicon"] = c.lexicon_path->generic_string();
}

void from_json(const nlohmann::json& j, RunConfig& c) {
  static const std::set<std::string> kKnown = {
      "run_id", "task", "seed_count", "top_n", "mutation_parents", "max_iterations",
      "convergence", "guidance", "mutation_mode", "announce_mutation_categories",
      "mutation_parent_pool", "rng_seed", "concurrency", "datasets", "injection", "decoding",
      "operator_decoding", "judge_decoding", "backends", "retry", "model_size_b",
      "safety_weights", "max_failed_fraction", "frontier_epsilon", "operator_parse_retries",
      "seeds", "templates_dir", "lexicon"};
  if (!j.is_object()) fail(ErrorCode::ConfigError, "config must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!kKnown.contains(key)) fail(ErrorCode::ConfigError, "unknown config key '" + key + "'");
  }
  c.run_id = j.value("run_id", c.run_id);
  if (j.contains("task")) {
    try {
      c.task_kind = parse_task_kind(j["task"].get<std::string>());
    } catch (const Error& e) {
      fail(ErrorCode::ConfigError, e.what());
    }
  }
  c.seed_count = j.value("seed_count", c.seed_count);
  c.top_n = j.value("top_n", c.top_n);
  c.mutation_parents = j.value("mutation_parents", c.mutation_parents);
  c.max_iterations = j.value("max_iterations", c.max_iterations);
  if (auto it = j.find("convergence"); it != j.end()) {
    c.convergence.patience = it->value("patience", c.convergence.patience);
    if (auto t = it->find("threshold"); t != it->end() && !t->is_null()) {
      c.convergence.threshold = t->get<double>();
    }
  }
  if (auto it = j.find("guidance"); it != j.end()) {
    c.guidance.mode = parse_guidance_mode(it->value("mode", std::string("all")));
    c.guidance.behaviors.clear();
    for (const auto& b : it->value("behaviors", nlohmann::json::array())) {
      c.guidance.behaviors.push_back(behavior_or_fail(b.get<std::string>()));
    }
  }
  if (j.contains("mutation_mode")) {
    const auto m = text::to_lower(j["mutation_mode"].get<std::string>());
    if (m != "nine" && m != "pair") fail(ErrorCode::ConfigError, "mutation_mode must be nine or pair");
    c.mutation_mode = m == "nine" ? MutationMode::Nine : MutationMode::Pair;
  }
  c.announce_mutation_categories =
      j.value("announce_mutation_categories", c.announce_mutation_categories);
  if (j.contains("mutation_parent_pool")) {
    const auto m = text::to_lower(j["mutation_parent_pool"].get<std::string>());
    if (m != "survivors" && m != "population") {
      fail(ErrorCode::ConfigError, "mutation_parent_pool must be survivors or population");
    }
    c.mutation_parent_pool = m == "survivors" ? ParentPool::Survivors : ParentPool::Population;
  }
  c.rng_seed = j.value("rng_seed", c.rng_seed);
  c.concurrency = j.value("concurrency", c.concurrency);
  if (auto it = j.find("datasets"); it != j.end()) {
    c.validation_path = it->value("validation", c.validation_path.string());
    c.test_path = it->value("test", c.test_path.string());
  }
  if (auto it = j.find("injection"); it != j.end()) {
    const auto mode = text::to_lower(it->value("mode", std::string("raw")));
    if (mode != "raw" && mode != "prefill") fail(ErrorCode::ConfigError, "injection.mode must be raw or prefill");
    c.injection.mode = mode == "raw" ? InjectionMode::RawCompletionTemplate : InjectionMode::AssistantPrefill;
    c.injection.tmpl = it->value("template", c.injection.tmpl);
    c.injection.close_think = it->value("close_think", c.injection.close_think);
    if (it->contains("extra_body")) c.injection.extra_body = (*it)["extra_body"];
  }
  if (j.contains("decoding")) c.decoding = decoding_from(j["decoding"], c.decoding);
  if (j.contains("operator_decoding")) c.operator_decoding = decoding_from(j["operator_decoding"], c.operator_decoding);
  if (j.contains("judge_decoding")) c.judge_decoding = decoding_from(j["judge_decoding"], c.judge_decoding);
  if (auto it = j.find("backends"); it != j.end()) {
    if (it->contains("target")) c.target = backend_from((*it)["target"], c.target);
    if (it->contains("operator")) c.op = backend_from((*it)["operator"], c.op);
    if (it->contains("judge") && !(*it)["judge"].is_null()) {
      c.judge = backend_from((*it)["judge"], c.judge.value_or(BackendConfig{"mock", "", "mock-judge", "", 600.0, 0}));
    }
  }
  if (auto it = j.find("retry"); it != j.end()) {
    c.retry.retries = it->value("retries", c.retry.retries);
    c.retry.base_seconds = it->value("base_seconds", c.retry.base_seconds);
    c.retry.factor = it->value("factor", c.retry.factor);
    c.retry.jitter = it->value("jitter", c.retry.jitter);
    c.retry.cap_seconds = it->value("cap_seconds", c.retry.cap_seconds);
  }
  c.model_size_b = j.value("model_size_b", c.model_size_b);
  if (auto it = j.find("safety_weights"); it != j.end()) {
    c.safety_weights.upr = it->value("upr", c.safety_weights.upr);
    c.safety_weights.spc = it->value("spc", c.safety_weights.spc);
    c.safety_weights.srej = it->value("srej", c.safety_weights.srej);
  }
  c.max_failed_fraction = j.value("max_failed_fraction", c.max_failed_fraction);
  c.frontier_epsilon = j.value("frontier_epsilon", c.frontier_epsilon);
  c.operator_parse_retries = j.value("operator_parse_retries", c.operator_parse_retries);
  c.seeds = j.value("seeds", c.seeds);
  if (j.contains("templates_dir")) c.templates_dir = j["templates_dir"].get<std::string>();
  if (j.contains("lexicon")) c.lexicon_path = j["lexicon"].get<std::string>();
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot read config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  auto j = nlohmann::json::parse(buf.str(), nullptr, false, /*ignore_comments=*/true);
  if (j.is_discarded()) fail(ErrorCode::ConfigError, path.string() + " is not valid JSON");
  RunConfig c;
  try {
    c = j.get<RunConfig>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ConfigError, path.string() + ": " + e.what());
  }
  const auto base = path.parent_path();
  auto resolve = [&](std::filesystem::path& p) {
    if (!p.empty() && p.is_relative()) p = (base / p).lexically_normal();
  };
  resolve(c.validation_path);
  resolve(c.test_path);
  if (c.templates_dir) resolve(*c.templates_dir);
  if (c.lexicon_path) resolve(*c.lexicon_path);
  c.validate();
  return c;
}

std::string derive_run_id(const RunConfig& c) {
  if (!c.run_id.empty()) return c.run_id;
  nlohmann::json j = c;
  j.erase("run_id");
  return "run-" + text::sha256_hex(j.dump()).substr(0, 12);
}

}  // namespace prefixevo
