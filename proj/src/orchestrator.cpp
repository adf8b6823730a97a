#include "prefixevo/orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "prefixevo/analysis.hpp"
#include "prefixevo/error.hpp"
#include "prefixevo/mock.hpp"
#include "prefixevo/operators.hpp"
#include "prefixevo/text.hpp"

namespace prefixevo {

namespace fs = std::filesystem;

namespace {

std::shared_ptr<Backend> make_backend(const BackendConfig& b, bool lrm, std::string_view fallback_model) {
  const std::string model = b.model.empty() ? std::string(fallback_model) : b.model;
  if (b.kind == "mock") {
    if (lrm) return std::make_shared<mock::MockLrm>(mock::LrmConfig{model, b.mock_seed, "[[mock-fail]]"});
    return std::make_shared<mock::MockLlm>(mock::LlmConfig{model, mock::JudgeMode::Lexicon, std::nullopt, {}});
  }
  return std::make_shared<HttpBackend>(
      HttpBackendConfig::from_env({b.base_url, b.api_key, model, b.timeout_seconds}));
}

nlohmann::json number_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

void write_atomic(const fs::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::IoError, "cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) fail(ErrorCode::IoError, "short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

nlohmann::json injection_json(const PrefixInjection& inj) {
  return {{"mode", inj.mode == InjectionMode::RawCompletionTemplate ? "raw" : "prefill"},
          {"template", inj.tmpl},
          {"close_think", inj.close_think},
          {"extra_body", inj.extra_body}};
}

RunConfig config_in(const fs::path& run_dir) {
  auto j = nlohmann::json::parse(read_file(run_dir / "config.json"), nullptr, false);
  if (j.is_discarded()) fail(ErrorCode::ConfigError, "run config is not valid JSON");
  RunConfig c = j.get<RunConfig>();
  c.validate();
  return c;
}

}  // namespace

Backends make_backends(const RunConfig& config) {
  Sleeper sleeper;
  if (config.all_mock()) sleeper = [](double) {};
  Backends b;
  b.target = std::make_shared<Gateway>(make_backend(config.target, true, "mock-lrm"), config.retry,
                                       config.concurrency, sleeper);
  b.op = std::make_shared<Gateway>(make_backend(config.op, false, "mock-llm"), config.retry,
                                   config.concurrency, sleeper);
  if (config.judge) {
    b.judge = std::make_shared<Gateway>(make_backend(*config.judge, false, "mock-judge"),
                                        config.retry, config.concurrency, sleeper);
  }
  return b;
}

FitnessRecord evaluate_prefix(const ThinkPrefix& prefix, const std::vector<TaskItem>& items,
                              Split split, const EvalContext& ctx) {
  const RunConfig& cfg = *ctx.config;
  if (items.empty()) fail(ErrorCode::DatasetError, "cannot evaluate on an empty split");
  const std::size_t n = items.size();
  std::vector<std::optional<ModelReply>> replies(n);
  std::atomic<std::size_t> next{0};
  std::mutex fatal_mutex;
  std::exception_ptr fatal;
  auto work = [&] {
    for (;;) {
      const std::size_t i = next++;
      if (i >= n) return;
      try {
        auto req = render_request(items[i].query, prefix, cfg.injection, cfg.decoding,
                                  ctx.target->model_id(),
                                  ctx.eval_seed + static_cast<std::int64_t>(i));
        req.provenance = {"target", split, items[i].id, prefix.id};
        replies[i] = ctx.target->generate(req).reply;
      } catch (const Error& e) {
        // Credentials and template problems abort the run; the rest is a failed item.
        if (e.code() == ErrorCode::AuthError || e.code() == ErrorCode::TemplateError) {
          std::lock_guard lock(fatal_mutex);
          if (!fatal) fatal = std::current_exception();
        }
      } catch (...) {
        std::lock_guard lock(fatal_mutex);
        if (!fatal) fatal = std::current_exception();
      }
    }
  };
  {
    const auto workers = std::min<std::size_t>(static_cast<std::size_t>(cfg.concurrency), n);
    std::vector<std::jthread> pool;
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
  }
  if (fatal) std::rethrow_exception(fatal);

  FitnessRecord r;
  r.prefix_id = prefix.id;
  r.task_kind = cfg.task_kind;
  r.n_samples = static_cast<int>(n);
  r.eval_seed = ctx.eval_seed;
  double tokens = 0.0;
  int ok = 0;
  for (const auto& reply : replies) {
    if (!reply) {
      ++r.n_failed;
      continue;
    }
    tokens += static_cast<double>(reply->completion_tokens);
    ++ok;
  }
  r.mean_tokens = ok == 0 ? 0.0 : tokens / ok;
  r.accuracy = grade_accuracy(items, replies).accuracy;
  r.task_scores["accuracy"] = r.accuracy;
  r.task_scores["mean_tokens"] = r.mean_tokens;
  r.excluded = static_cast<double>(r.n_failed) > cfg.max_failed_fraction * static_cast<double>(n);
  if (r.excluded) {
    r.fitness = -std::numeric_limits<double>::infinity();
    return r;
  }
  switch (cfg.task_kind) {
    case TaskKind::EfficientReasoning:
      r.task_scores["acu"] =
          r.mean_tokens > 0.0 ? compute_acu({r.accuracy, cfg.model_size_b, r.mean_tokens}) : 0.0;
      break;
    case TaskKind::InstructionFollowing: r.task_scores["strict_accuracy"] = r.accuracy; break;
    case TaskKind::Logic: break;
    case TaskKind::Safety: {
      SafetyOptions opts{ctx.judge, false, cfg.judge_decoding, split};
      const auto s = safety_scores(items, replies, opts, *ctx.templates);
      r.task_scores["spc"] = s.spc;
      r.task_scores["upr"] = s.upr;
      if (s.srej) r.task_scores["srej"] = *s.srej;
      break;
    }
  }
  r.fitness = fitness(cfg.task_kind, r.task_scores, cfg.safety_weights);
  return r;
}

std::string eval_cache_key(std::string_view prefix_text, std::string_view dataset_id, Split split,
                           const PrefixInjection& injection, const DecodingParams& decoding,
                           std::string_view model_id) {
  const nlohmann::json dec{{"temperature", decoding.temperature},
                           {"top_p", decoding.top_p},
                           {"max_tokens", decoding.max_tokens},
                           {"stop", decoding.stop}};
  std::string material(prefix_text);
  for (const std::string& part : {std::string(dataset_id), std::string(to_string(split)),
                                  injection_json(injection).dump(), dec.dump(),
                                  std::string(model_id)}) {
    material += '\x1f';
    material += part;
  }
  return text::sha256_hex(material);
}

std::string_view to_string(RunStatus s) {
  switch (s) {
    case RunStatus::Running: return "running";
    case RunStatus::Converged: return "converged";
    case RunStatus::Exhausted: return "exhausted";
  }
  return "running";
}

ConvergenceState check_convergence(std::span<const double> bests, const ConvergenceConfig& conv,
                                   int max_iterations, std::optional<double> baseline) {
  if (bests.empty()) return {};
  if (conv.threshold && bests.back() >= *conv.threshold) return {RunStatus::Converged, "threshold"};
  double prev = baseline.value_or(-std::numeric_limits<double>::infinity());
  int flat = 0;
  for (double b : bests) {
    if (b > prev) {
      prev = b;
      flat = 0;
    } else {
      ++flat;
    }
  }
  if (flat >= conv.patience) return {RunStatus::Converged, "patience"};
  if (static_cast<int>(bests.size()) >= max_iterations) return {RunStatus::Exhausted, "max_iterations"};
  return {};
}

void to_json(nlohmann::json& j, const FinalReport& r) {
  j = nlohmann::json{{"run_id", r.run_id},
                     {"winner", r.winner.prefix},
                     {"selection", r.selection},
                     {"validation", r.validation},
                     {"test", r.test},
                     {"iterations", r.iterations},
                     {"status", to_string(r.convergence.status)},
                     {"reason", r.convergence.reason}};
}

Orchestrator::Orchestrator(RunConfig config, Backends backends, fs::path run_dir)
    : config_(std::move(config)),
      backends_(std::move(backends)),
      run_dir_(std::move(run_dir)),
      run_id_(derive_run_id(config_)),
      templates_(config_.templates_dir ? TemplateSet::with_overrides(*config_.templates_dir)
                                       : TemplateSet::builtin()),
      lexicon_(config_.lexicon_path ? MarkerLexicon::load(*config_.lexicon_path)
                                    : MarkerLexicon::builtin()) {
  config_.validate();
  config_.run_id = run_id_;
  if (!backends_.target || !backends_.op) fail(ErrorCode::ConfigError, "target and operator backends are required");
  validation_ = load_dataset(config_.validation_path);
  check_dataset_task(validation_, config_.task_kind);
  eval_seed_ = static_cast<std::int64_t>(text::mix_seed(config_.rng_seed, 0xe7a1) >> 1);
  install_observer();
}

void Orchestrator::install_observer() {
  auto finalizing = finalizing_;
  auto early = early_test_;
  backends_.target->set_observer([finalizing, early](const WireRequest& req) {
    if (req.provenance.split == Split::Test && !finalizing->load()) ++*early;
  });
}

void Orchestrator::log(nlohmann::json event) {
  event["ts"] = utc_now();
  std::ofstream out(run_dir_ / "log.jsonl", std::ios::app | std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot append to run log");
  out << event.dump() << '\n';
  ++log_events_;
}

void Orchestrator::checkpoint() const {
  nlohmann::json cache = nlohmann::json::object();
  for (const auto& [k, v] : cache_) cache[k] = v;
  nlohmann::json j{{"format", 1},
                   {"run_id", run_id_},
                   {"populations", populations_},
                   {"bests", bests_},
                   {"seed_best", seed_best_ ? number_or_null(*seed_best_) : nlohmann::json(nullptr)},
                   {"status", to_string(convergence_.status)},
                   {"reason", convergence_.reason},
                   {"cache", cache},
                   {"log_events", log_events_},
                   {"finalized", finalized_}};
  j["best"] = best_ ? nlohmann::json(*best_) : nlohmann::json(nullptr);
  write_atomic(run_dir_ / "checkpoint.json", j.dump());
}

void Orchestrator::load_checkpoint() {
  auto j = nlohmann::json::parse(read_file(run_dir_ / "checkpoint.json"), nullptr, false);
  if (j.is_discarded()) fail(ErrorCode::IoError, "checkpoint is not valid JSON");
  populations_ = j.at("populations").get<std::vector<Population>>();
  bests_ = j.at("bests").get<std::vector<double>>();
  if (!j.at("seed_best").is_null()) seed_best_ = j["seed_best"].get<double>();
  if (!j.at("best").is_null()) best_ = j["best"].get<Member>();
  const auto status = j.at("status").get<std::string>();
  convergence_.status = status == "converged"   ? RunStatus::Converged
                        : status == "exhausted" ? RunStatus::Exhausted
                                                : RunStatus::Running;
  convergence_.reason = j.at("reason").get<std::string>();
  for (const auto& [k, v] : j.at("cache").items()) cache_[k] = v.get<FitnessRecord>();
  log_events_ = j.at("log_events").get<std::size_t>();
  finalized_ = j.at("finalized").get<bool>();

  // Drop anything logged after the snapshot so the resumed run appends a clean tail.
  const auto log_path = run_dir_ / "log.jsonl";
  std::string kept;
  std::size_t lines = 0;
  if (fs::exists(log_path)) {
    std::istringstream in(read_file(log_path));
    std::string line;
    while (lines < log_events_ && std::getline(in, line)) {
      kept += line + "\n";
      ++lines;
    }
  }
  if (lines != log_events_) fail(ErrorCode::IoError, "run log is shorter than its checkpoint");
  write_atomic(log_path, kept);
}

Orchestrator Orchestrator::resume(const fs::path& run_dir, Backends backends) {
  if (!fs::exists(run_dir / "checkpoint.json")) {
    fail(ErrorCode::IoError, "no checkpoint in " + run_dir.string());
  }
  Orchestrator o(config_in(run_dir), std::move(backends), run_dir);
  o.load_checkpoint();
  return o;
}

Orchestrator Orchestrator::resume(const fs::path& run_dir, bool force_mock) {
  auto config = config_in(run_dir);
  if (force_mock) config.force_mock();
  return resume(run_dir, make_backends(config));
}

Population Orchestrator::evaluate_population(Population pop) {
  const EvalContext ctx{&config_, backends_.target.get(), backends_.judge.get(), &templates_, eval_seed_};
  for (auto& m : pop.members) {
    if (m.record) continue;
    const auto key = eval_cache_key(m.prefix.text, validation_.id, Split::Validation,
                                    config_.injection, config_.decoding, backends_.target->model_id());
    bool cached = false;
    if (auto it = cache_.find(key); it != cache_.end()) {
      m.record = it->second;
      m.record->prefix_id = m.prefix.id;
      cached = true;
    } else {
      m.record = evaluate_prefix(m.prefix, validation_.items, Split::Validation, ctx);
      cache_[key] = *m.record;
      log({{"event", "requests"},
           {"role", "target"},
           {"split", "validation"},
           {"prefix_id", m.prefix.id},
           {"items", validation_.items.size()}});
    }
    log({{"event", "candidate_evaluated"},
         {"iteration", pop.iteration},
         {"prefix_id", m.prefix.id},
         {"origin", m.prefix.origin},
         {"fitness", number_or_null(m.record->fitness)},
         {"accuracy", m.record->accuracy},
         {"mean_tokens", m.record->mean_tokens},
         {"n_failed", m.record->n_failed},
         {"excluded", m.record->excluded},
         {"cached", cached}});
  }
  return pop;
}

void Orchestrator::summarize(const Population& pop, std::size_t children) {
  double tokens = 0.0;
  int n = 0;
  for (const auto& m : pop.members) {
    if (m.record && !m.record->excluded) {
      tokens += m.record->mean_tokens;
      ++n;
    }
  }
  nlohmann::json e{{"event", "iteration_summary"},
                   {"iteration", pop.iteration},
                   {"best_id", best_ ? best_->prefix.id : ""},
                   {"best_fitness", best_ ? number_or_null(best_->record->fitness) : nlohmann::json(nullptr)},
                   {"best_accuracy", best_ ? best_->record->accuracy : 0.0},
                   {"best_mean_tokens", best_ ? best_->record->mean_tokens : 0.0},
                   {"mean_tokens", n == 0 ? 0.0 : tokens / n},
                   {"pool_size", pop.size()},
                   {"children", children}};
  log(e);
  if (summary_cb_) summary_cb_(e);
}

void Orchestrator::start() {
  if (started()) fail(ErrorCode::InvalidSpec, "run " + run_id_ + " already started");
  fs::create_directories(run_dir_);
  nlohmann::json resolved = config_;
  write_atomic(run_dir_ / "config.json", resolved.dump(2) + "\n");
  write_atomic(run_dir_ / "log.jsonl", "");
  log_events_ = 0;
  log({{"event", "run_started"},
       {"run_id", run_id_},
       {"task", to_string(config_.task_kind)},
       {"validation_dataset", validation_.id},
       {"validation_items", validation_.items.size()}});
  log({{"event", "iteration_started"}, {"iteration", 0}});

  std::vector<ThinkPrefix> seeds;
  std::string source = "config";
  if (!config_.seeds.empty()) {
    std::set<std::string> ids;
    for (const auto& t : config_.seeds) {
      auto p = ThinkPrefix::make(t, Origin{}, 0, lexicon_);
      if (ids.insert(p.id).second) seeds.push_back(std::move(p));
    }
  } else {
    source = "operator";
    SeedOptions opts{3, config_.operator_decoding, config_.rng_seed};
    seeds = generate_seeds(config_.task_kind, static_cast<std::size_t>(config_.seed_count), *backends_.op,
                           opts, templates_, lexicon_);
  }
  nlohmann::json ids = nlohmann::json::array();
  for (const auto& s : seeds) ids.push_back(s.id);
  log({{"event", "seeds_generated"}, {"source", source}, {"count", seeds.size()}, {"ids", ids}});

  Population pop;
  pop.iteration = 0;
  for (auto& s : seeds) pop.add({std::move(s), std::nullopt});
  pop = evaluate_population(std::move(pop));
  best_ = best_member(pop);
  if (!best_) fail(ErrorCode::BackendUnavailable, "every seed prefix failed evaluation");
  seed_best_ = best_->record->fitness;
  populations_.push_back(pop);
  summarize(pop, 0);
  checkpoint();
}

std::optional<std::string> Orchestrator::call_operator(const std::string& op_name,
                                                       const std::string& prompt, int iteration,
                                                       std::uint64_t salt, int attempt) {
  const auto seed = static_cast<std::int64_t>(
      text::mix_seed(config_.rng_seed, (static_cast<std::uint64_t>(iteration) << 20) ^ salt,
                     static_cast<std::uint64_t>(attempt)) >>
      1);
  auto req = render_chat_request(prompt, config_.operator_decoding, backends_.op->model_id(), seed);
  req.provenance = {"operator", Split::None, op_name, {}};
  try {
    auto result = backends_.op->generate(req);
    log({{"event", "operator_called"},
         {"operator", op_name},
         {"iteration", iteration},
         {"attempt", attempt},
         {"prompt_sha256", text::sha256_hex(prompt).substr(0, 16)},
         {"reply_sha256", text::sha256_hex(result.reply.content).substr(0, 16)},
         {"reply_chars", result.reply.content.size()}});
    return result.reply.content;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::AuthError) throw;
    log({{"event", "operator_parse_failed"},
         {"operator", op_name},
         {"iteration", iteration},
         {"attempt", attempt},
         {"error", code_name(e.code())},
         {"message", e.what()}});
    return std::nullopt;
  }
}

std::vector<ThinkPrefix> Orchestrator::crossover_children(const std::vector<Member>& survivors,
                                                          int iteration) {
  if (survivors.size() < static_cast<std::size_t>(kCrossoverParents)) {
    log({{"event", "operator_parse_failed"},
         {"operator", "crossover"},
         {"iteration", iteration},
         {"attempt", 0},
         {"error", "InvalidSpec"},
         {"message", "fewer than 5 eligible parents"}});
    return {};
  }
  std::vector<ThinkPrefix> parents;
  for (std::size_t i = 0; i < static_cast<std::size_t>(kCrossoverParents); ++i) {
    parents.push_back(survivors[i].prefix);
  }
  const auto taxonomy = config_.guidance.crossover_taxonomy();
  const auto spec = CrossoverSpec::make(parents, taxonomy, templates_);
  const auto prompt = build_crossover_prompt(spec, templates_);
  for (int attempt = 0; attempt <= config_.operator_parse_retries; ++attempt) {
    auto raw = call_operator("crossover", prompt, iteration, 0, attempt);
    if (!raw) continue;
    try {
      return parse_crossover_output(*raw, spec, lexicon_).children;
    } catch (const WrongChildCount& e) {
      log({{"event", "operator_parse_failed"},
           {"operator", "crossover"},
           {"iteration", iteration},
           {"attempt", attempt},
           {"error", "WrongChildCount"},
           {"expected", e.expected()},
           {"found", e.found()}});
    }
  }
  return {};
}

std::vector<ThinkPrefix> Orchestrator::mutation_children(const std::vector<Member>& parents,
                                                         int iteration, std::mt19937_64& rng) {
  const bool style_only = config_.guidance.mode == GuidanceMode::NoBehaviors;
  auto pool = config_.guidance.mutation_pool();
  // Without behavior guidance the prompt still names categories; only the style children are kept.
  if (pool.empty()) pool.assign(kAllBehaviors.begin(), kAllBehaviors.end());
  std::vector<ThinkPrefix> out;
  for (std::size_t j = 0; j < parents.size(); ++j) {
    MutationSpec spec;
    spec.parent = parents[j].prefix;
    spec.context = context_for(config_.task_kind);
    spec.mode = config_.mutation_mode;
    spec.announce_selection = config_.announce_mutation_categories;
    spec.selected = draw_behaviors(rng, pool, static_cast<std::size_t>(spec.behavior_slots()));
    if (style_only && spec.mode == MutationMode::Pair) continue;
    const auto prompt = build_mutation_prompt(spec, templates_);
    for (int attempt = 0; attempt <= config_.operator_parse_retries; ++attempt) {
      auto raw = call_operator("mutation", prompt, iteration, j + 1, attempt);
      if (!raw) continue;
      try {
        for (auto& child : parse_mutation_output(*raw, spec, lexicon_).children) {
          if (style_only && !child.origin.is_style()) continue;
          out.push_back(std::move(child));
        }
        break;
      } catch (const WrongChildCount& e) {
        log({{"event", "operator_parse_failed"},
             {"operator", "mutation"},
             {"iteration", iteration},
             {"attempt", attempt},
             {"error", "WrongChildCount"},
             {"expected", e.expected()},
             {"found", e.found()}});
      }
    }
  }
  return out;
}

void Orchestrator::step() {
  if (!started()) fail(ErrorCode::InvalidSpec, "run has not started");
  if (finalized_) fail(ErrorCode::TestAlreadyConsumed, "run " + run_id_ + " is already finalized");
  if (convergence_.status != RunStatus::Running) {
    fail(ErrorCode::InvalidSpec, "run " + run_id_ + " has already stopped iterating");
  }
  const int k = static_cast<int>(populations_.size());
  log({{"event", "iteration_started"}, {"iteration", k}});
  const Population& current = populations_.back();

  std::vector<Member> eligible;
  for (const auto& m : current.members) {
    if (m.record && !m.record->excluded) eligible.push_back(m);
  }
  if (eligible.empty()) fail(ErrorCode::BackendUnavailable, "no eligible candidates left");
  std::sort(eligible.begin(), eligible.end(), ranks_before);
  const auto n = std::min<std::size_t>(static_cast<std::size_t>(config_.top_n), eligible.size());
  const auto survivors = select_top_n(current, n);

  std::mt19937_64 rng(text::mix_seed(config_.rng_seed, static_cast<std::uint64_t>(k)));
  auto children = crossover_children(survivors, k);

  const auto& parent_pool = config_.mutation_parent_pool == ParentPool::Survivors ? survivors : eligible;
  std::vector<std::size_t> order(parent_pool.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  text::shuffle(order, rng);
  order.resize(std::min<std::size_t>(order.size(), static_cast<std::size_t>(config_.mutation_parents)));
  std::vector<Member> mutation_parents;
  for (auto i : order) mutation_parents.push_back(parent_pool[i]);
  auto mutated = mutation_children(mutation_parents, k, rng);
  children.insert(children.end(), std::make_move_iterator(mutated.begin()),
                  std::make_move_iterator(mutated.end()));

  Population next;
  next.iteration = k;
  for (const auto& s : survivors) next.add(s);
  std::size_t added = 0;
  for (auto& c : children) added += next.add({std::move(c), std::nullopt}) ? 1 : 0;
  next = evaluate_population(std::move(next));
  next = elite_floor(*best_, std::move(next));
  best_ = best_member(next);
  bests_.push_back(best_->record->fitness);
  populations_.push_back(next);
  summarize(next, added);

  convergence_ = check_convergence(bests_, config_.convergence, config_.max_iterations, seed_best_);
  if (convergence_.status != RunStatus::Running) {
    log({{"event", "converged"},
         {"iteration", k},
         {"status", to_string(convergence_.status)},
         {"reason", convergence_.reason},
         {"best_fitness", number_or_null(best_->record->fitness)}});
  }
  checkpoint();
}

std::vector<Member> Orchestrator::all_candidates() const {
  std::vector<Member> out;
  std::set<std::string> seen;
  for (const auto& pop : populations_) {
    for (const auto& m : pop.members) {
      if (!m.record || m.record->excluded) continue;
      if (seen.insert(m.prefix.id).second) out.push_back(m);
    }
  }
  std::sort(out.begin(), out.end(), ranks_before);
  return out;
}

FinalReport Orchestrator::finalize() {
  if (finalized_) fail(ErrorCode::TestAlreadyConsumed, "test split of run " + run_id_ + " was already used");
  if (!started() || convergence_.status == RunStatus::Running) {
    fail(ErrorCode::InvalidSpec, "run " + run_id_ + " has not finished iterating");
  }
  // Persist the consumption first so a crash mid-evaluation cannot grant a second look.
  finalized_ = true;
  checkpoint();

  const auto candidates = all_candidates();
  if (candidates.empty()) fail(ErrorCode::BackendUnavailable, "no eligible candidate to finalize");
  FinalReport report;
  report.run_id = run_id_;
  report.iterations = static_cast<int>(populations_.size()) - 1;
  report.convergence = convergence_;
  if (config_.task_kind == TaskKind::EfficientReasoning) {
    std::vector<FrontierPoint> points;
    for (const auto& m : candidates) {
      points.push_back({m.prefix.id, m.record->accuracy, m.record->mean_tokens});
    }
    const auto chosen = select_on_frontier(points, config_.frontier_epsilon);
    report.winner = *std::find_if(candidates.begin(), candidates.end(),
                                  [&](const Member& m) { return m.prefix.id == chosen.prefix_id; });
    report.selection = "frontier";
  } else {
    report.winner = candidates.front();
    report.selection = "argmax";
  }
  report.validation = *report.winner.record;

  const auto test = load_dataset(config_.test_path);
  check_dataset_task(test, config_.task_kind);
  early_test_requests_ = early_test_->load();
  finalizing_->store(true);
  const EvalContext ctx{&config_, backends_.target.get(), backends_.judge.get(), &templates_, eval_seed_};
  try {
    report.test = evaluate_prefix(report.winner.prefix, test.items, Split::Test, ctx);
  } catch (...) {
    finalizing_->store(false);
    throw;
  }
  finalizing_->store(false);

  nlohmann::json event = report;
  event["event"] = "finalized";
  event["test_dataset"] = test.id;
  event["test_requests"] = test.items.size();
  event["frontier_epsilon"] = config_.frontier_epsilon;
  log(event);
  nlohmann::json out = report;
  out["task"] = to_string(config_.task_kind);
  out["frontier_epsilon"] = config_.frontier_epsilon;
  out["token_count"] = "completion tokens, thinking and answer together";
  out["validation_dataset"] = validation_.id;
  out["test_dataset"] = test.id;
  write_atomic(run_dir_ / "report.json", out.dump(2) + "\n");
  checkpoint();
  return report;
}

FinalReport Orchestrator::run() {
  if (!started()) start();
  while (convergence_.status == RunStatus::Running) step();
  return finalize();
}

std::string transcript_of(const fs::path& log_path) {
  std::istringstream in(read_file(log_path));
  std::string out;
  std::string line;
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) fail(ErrorCode::IoError, "run log holds a malformed line");
    j.erase("ts");
    out += j.dump();
    out += '\n';
  }
  return out;
}

ReplayResult replay_run(const fs::path& run_dir) {
  auto config = config_in(run_dir);
  if (!config.all_mock()) {
    fail(ErrorCode::ReplayMismatch, "replay needs a run that used mock backends only");
  }
  const auto original = transcript_of(run_dir / "log.jsonl");
  const auto original_events =
      static_cast<std::size_t>(std::count(original.begin(), original.end(), '\n'));

  std::random_device rd;
  const auto scratch = fs::temp_directory_path() /
                       ("prefixevo-replay-" + config.run_id + "-" + std::to_string(rd()));
  ReplayResult result;
  result.original_events = original_events;
  std::string replayed;
  try {
    Orchestrator o(config, make_backends(config), scratch);
    o.start();
    while (o.log_events() < original_events && o.convergence().status == RunStatus::Running) o.step();
    if (o.log_events() < original_events && o.convergence().status != RunStatus::Running) o.finalize();
    replayed = transcript_of(scratch / "log.jsonl");
  } catch (...) {
    std::error_code ec;
    fs::remove_all(scratch, ec);
    throw;
  }
  std::error_code ec;
  fs::remove_all(scratch, ec);

  result.replayed_events = static_cast<std::size_t>(std::count(replayed.begin(), replayed.end(), '\n'));
  result.identical = replayed == original;
  if (!result.identical) {
    std::istringstream a(original), b(replayed);
    std::string la, lb;
    std::size_t line = 0;
    while (true) {
      const bool ga = static_cast<bool>(std::getline(a, la));
      const bool gb = static_cast<bool>(std::getline(b, lb));
      ++line;
      if (!ga && !gb) break;
      if (ga != gb || la != lb) {
        result.first_difference = line;
        break;
      }
    }
  }
  return result;
}

}  // namespace prefixevo
