#include "prefixevo/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "prefixevo/analysis.hpp"
#include "prefixevo/config.hpp"
#include "prefixevo/dataset.hpp"
#include "prefixevo/error.hpp"
#include "prefixevo/mock.hpp"
#include "prefixevo/orchestrator.hpp"
#include "prefixevo/text.hpp"

namespace prefixevo {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

void write_text(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  out << content;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

struct Options {
  std::string runs_dir = "runs";
  bool mock = false;

  std::string config;
  std::string resume;

  std::string prefix;
  std::string prefix_file;
  std::string dataset;
  std::string split = "validation";
  std::string task;

  std::string run_id;
  std::string report = "frontier";

  double fraction = 0.2;
  std::uint64_t seed = 0;
  std::string out_dir;
};

int cmd_evolve(const Options& o, std::ostream& out) {
  std::optional<Orchestrator> orch;
  if (!o.resume.empty()) {
    orch.emplace(Orchestrator::resume(fs::path(o.runs_dir) / o.resume, o.mock));
  } else {
    auto config = load_config(o.config);
    if (o.mock) config.force_mock();
    const auto run_dir = fs::path(o.runs_dir) / derive_run_id(config);
    if (fs::exists(run_dir / "checkpoint.json")) {
      fail(ErrorCode::IoError, "run directory " + run_dir.string() +
                                   " already holds a run; pass --resume " + derive_run_id(config));
    }
    orch.emplace(config, make_backends(config), run_dir);
  }
  out << "run " << orch->run_id() << " in " << orch->run_dir().string() << "\n";
  orch->on_summary([&out](const nlohmann::json& e) {
    out << "iteration " << e["iteration"].get<int>() << "  best_fitness="
        << (e["best_fitness"].is_null() ? std::string("-inf") : fmt(e["best_fitness"].get<double>()))
        << "  mean_tokens=" << fmt(e["mean_tokens"].get<double>())
        << "  pool=" << e["pool_size"].get<std::size_t>() << "\n";
  });
  const auto report = orch->run();
  out << "stopped: " << to_string(report.convergence.status) << " (" << report.convergence.reason
      << ") after " << report.iterations << " iterations\n";
  out << "winner " << report.winner.prefix.id << " (" << report.selection << ")\n";
  out << "  validation fitness=" << fmt(report.validation.fitness)
      << " accuracy=" << fmt(report.validation.accuracy)
      << " mean_tokens=" << fmt(report.validation.mean_tokens) << "\n";
  out << "  test fitness=" << fmt(report.test.fitness) << " accuracy=" << fmt(report.test.accuracy)
      << " mean_tokens=" << fmt(report.test.mean_tokens) << "\n";
  out << "  prefix: " << report.winner.prefix.text << "\n";
  return 0;
}

int cmd_evaluate(const Options& o, std::ostream& out) {
  RunConfig config;
  if (!o.config.empty()) {
    config = load_config(o.config);
  }
  if (!o.task.empty()) config.task_kind = parse_task_kind(o.task);
  if (o.mock) config.force_mock();
  std::string text = o.prefix;
  if (!o.prefix_file.empty()) text = text::trim_copy(read_text(o.prefix_file));
  if (text.empty()) fail(ErrorCode::InvalidPrefix, "pass --prefix or --prefix-file");
  const auto prefix = ThinkPrefix::make(text, Origin{}, 0);
  const auto ds = load_dataset(o.dataset);
  check_dataset_task(ds, config.task_kind);
  const auto backends = make_backends(config);
  const auto templates = config.templates_dir ? TemplateSet::with_overrides(*config.templates_dir)
                                              : TemplateSet::builtin();
  const Split split = o.split == "test" ? Split::Test : Split::Validation;
  const EvalContext ctx{&config, backends.target.get(), backends.judge.get(), &templates,
                        static_cast<std::int64_t>(text::mix_seed(config.rng_seed, 0xe7a1) >> 1)};
  const auto record = evaluate_prefix(prefix, ds.items, split, ctx);
  nlohmann::json j = record;
  j["dataset"] = ds.id;
  j["split"] = to_string(split);
  out << j.dump(2) << "\n";
  return 0;
}

std::vector<Member> candidates_of(const Orchestrator& orch) {
  std::vector<Member> out;
  std::set<std::string> seen;
  for (const auto& pop : orch.populations()) {
    for (const auto& m : pop.members) {
      if (m.record && !m.record->excluded && seen.insert(m.prefix.id).second) out.push_back(m);
    }
  }
  std::sort(out.begin(), out.end(), ranks_before);
  return out;
}

int cmd_analyze(const Options& o, std::ostream& out) {
  const auto run_dir = fs::path(o.runs_dir) / o.run_id;
  auto orch = Orchestrator::resume(run_dir, o.mock);
  const auto candidates = candidates_of(orch);
  const auto dir = run_dir / "analysis";
  std::string md = "# " + o.report + " report for " + orch.run_id() + "\n\n";
  if (o.report == "frontier") {
    std::vector<FrontierPoint> points;
    for (const auto& m : candidates) points.push_back({m.prefix.id, m.record->accuracy, m.record->mean_tokens});
    if (points.empty()) fail(ErrorCode::TooFewRecords, "run has no evaluated candidates");
    const auto chosen = select_on_frontier(points, orch.config().frontier_epsilon);
    write_text(dir / "frontier.csv", frontier_csv(points, &chosen));
    md += "Candidates: " + std::to_string(points.size()) + "; epsilon " + fmt(orch.config().frontier_epsilon) +
          " (absolute accuracy).\n\n";
    md += "Selected " + chosen.prefix_id + ": accuracy " + fmt(chosen.accuracy) + ", mean tokens " +
          fmt(chosen.mean_tokens) + ".\n";
  } else if (o.report == "behaviors") {
    std::vector<ScoredPrefix> records;
    for (const auto& m : candidates) records.push_back({m.prefix, *m.record});
    const auto profile = top_decile_distribution(records);
    write_text(dir / "behaviors.csv", behaviors_csv(profile));
    md += "Top " + std::to_string((records.size() + 9) / 10) + " of " + std::to_string(records.size()) +
          " candidates.\n\n| behavior | share |\n|---|---|\n";
    for (Behavior b : kAllBehaviors) {
      md += "| " + std::string(behavior_info(b).display_name) + " | " + fmt(profile.proportion(b)) + " |\n";
    }
  } else {
    std::map<std::string, const Member*> by_id;
    for (const auto& pop : orch.populations()) {
      for (const auto& m : pop.members) by_id.emplace(m.prefix.id, &m);
    }
    std::vector<ControlCase> cases;
    for (const auto& [id, m] : by_id) {
      const auto& origin = m->prefix.origin;
      if (!origin.is_behavior_targeted() || origin.parents.empty()) continue;
      auto parent = by_id.find(origin.parents.front());
      if (parent == by_id.end()) continue;
      cases.push_back({id, parent->second->prefix.text, m->prefix.text, *origin.behavior,
                       origin.kind == OriginKind::MutationEnhanced ? Direction::Positive
                                                                   : Direction::Negative});
    }
    if (cases.empty()) fail(ErrorCode::TooFewRecords, "run has no behavior-targeted children");
    std::shared_ptr<Gateway> judge = orch.backends().judge;
    if (!judge) {
      mock::LlmConfig jc;
      jc.model = "mock-judge";
      judge = std::make_shared<Gateway>(std::make_shared<mock::MockLlm>(jc));
    }
    std::vector<Gateway*> judges{judge.get()};
    ControlOptions copts;
    copts.params = orch.config().judge_decoding;
    const auto report = control_success(cases, judges, copts);
    write_text(dir / "control.csv", control_csv(report));
    md += "Cases: " + std::to_string(report.cases.size()) + ", dropped: " +
          std::to_string(report.dropped.size()) + ".\n\n| behavior | success rate | cases |\n|---|---|---|\n";
    for (const auto& [b, cell] : report.per_behavior) {
      md += "| " + std::string(behavior_info(b).display_name) + " | " + fmt(cell.rate()) + " | " +
            std::to_string(cell.cases) + " |\n";
    }
    if (report.kappa) md += "\nFleiss' kappa: " + fmt(*report.kappa) + "\n";
  }
  write_text(dir / (o.report + ".md"), md);
  out << md;
  return 0;
}

int cmd_replay(const Options& o, std::ostream& out, std::ostream& err) {
  const auto result = replay_run(fs::path(o.runs_dir) / o.run_id);
  if (result.identical) {
    out << "transcript verified (" << result.original_events << " events)\n";
    return 0;
  }
  err << "error: " << code_name(ErrorCode::ReplayMismatch) << ": transcript differs";
  if (result.first_difference) err << " at line " << *result.first_difference;
  err << " (" << result.original_events << " logged, " << result.replayed_events << " replayed)\n";
  return 1;
}

int cmd_split(const Options& o, std::ostream& out) {
  const auto ds = load_dataset(o.dataset);
  const auto parts = split_dataset(ds.items, o.fraction, o.seed);
  const fs::path dir = o.out_dir;
  const auto val = dir / "validation.jsonl";
  const auto test = dir / "test.jsonl";
  std::error_code ec;
  for (const auto& p : {val, test}) {
    if (fs::exists(p) && fs::equivalent(p, ds.path, ec)) {
      fail(ErrorCode::IoError, "refusing to overwrite the input dataset " + p.string());
    }
  }
  write_text(val, dump_jsonl(parts.validation));
  write_text(test, dump_jsonl(parts.test));
  out << "validation " << parts.validation.size() << " -> " << val.string() << "\n";
  out << "test " << parts.test.size() << " -> " << test.string() << "\n";
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Evolves think-prefixes that steer a reasoning model", "prefixevo"};
  app.set_help_all_flag("--help-all", "Print help for every subcommand");
  app.require_subcommand(1, 1);
  Options o;
  app.add_option("--runs-dir", o.runs_dir, "Directory holding run folders")->capture_default_str();
  app.add_flag("--mock", o.mock, "Use mock backends regardless of the config");

  auto* evolve = app.add_subcommand("evolve", "Run the evolutionary search and finalize on the test split");
  auto* cfg_opt = evolve->add_option("--config", o.config, "Run config (JSON)")->check(CLI::ExistingFile);
  auto* resume_opt = evolve->add_option("--resume", o.resume, "Continue the run with this id from its checkpoint");
  cfg_opt->excludes(resume_opt);

  auto* evaluate = app.add_subcommand("evaluate", "Score one prefix on a dataset");
  auto* p_opt = evaluate->add_option("--prefix", o.prefix, "Prefix text");
  auto* pf_opt = evaluate->add_option("--prefix-file", o.prefix_file, "File holding the prefix text")
                     ->check(CLI::ExistingFile);
  p_opt->excludes(pf_opt);
  evaluate->add_option("--dataset", o.dataset, "Dataset (JSON lines)")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--split", o.split, "Provenance tag for the requests")
      ->check(CLI::IsMember({"validation", "test"}))
      ->capture_default_str();
  evaluate->add_option("--task", o.task, "Task kind, overriding the config");
  evaluate->add_option("--config", o.config, "Config supplying backends and decoding")->check(CLI::ExistingFile);

  auto* analyze = app.add_subcommand("analyze", "Write analysis tables for a finished run");
  analyze->add_option("run-id", o.run_id, "Run id")->required();
  analyze->add_option("--report", o.report, "Report kind")
      ->check(CLI::IsMember({"frontier", "behaviors", "control"}))
      ->capture_default_str();

  auto* replay = app.add_subcommand("replay", "Re-derive a mock run and compare its transcript");
  replay->add_option("run-id", o.run_id, "Run id")->required();

  auto* split = app.add_subcommand("split", "Split a dataset into validation and test files");
  split->add_option("--dataset", o.dataset, "Dataset (JSON lines)")->required()->check(CLI::ExistingFile);
  split->add_option("--fraction", o.fraction, "Validation share")->capture_default_str();
  split->add_option("--seed", o.seed, "Shuffle seed")->capture_default_str();
  split->add_option("--out", o.out_dir, "Output directory for validation.jsonl and test.jsonl")->required();

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
    if (evolve->parsed() && o.config.empty() && o.resume.empty()) {
      throw CLI::RequiredError("--config or --resume");
    }
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    err << "run 'prefixevo --help' for usage\n";
    return 2;
  }

  try {
    if (evolve->parsed()) return cmd_evolve(o, out);
    if (evaluate->parsed()) return cmd_evaluate(o, out);
    if (analyze->parsed()) return cmd_analyze(o, out);
    if (replay->parsed()) return cmd_replay(o, out, err);
    if (split->parsed()) return cmd_split(o, out);
  } catch (const Error& e) {
    err << "error: " << code_name(e.code()) << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: Unexpected: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace prefixevo
