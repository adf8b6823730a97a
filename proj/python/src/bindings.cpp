#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "prefixevo/analysis.hpp"
#include "prefixevo/cli.hpp"
#include "prefixevo/dataset.hpp"
#include "prefixevo/error.hpp"
#include "prefixevo/evaluators.hpp"
#include "prefixevo/operators.hpp"
#include "prefixevo/taxonomy.hpp"

namespace py = pybind11;
using namespace prefixevo;

namespace {

ThinkPrefix seed_prefix(const std::string& text) { return ThinkPrefix::make(text, Origin{}, 0); }

Behavior behavior_arg(const std::string& name) {
  auto b = parse_behavior(name);
  if (!b) throw py::value_error("unknown behavior '" + name + "'");
  return *b;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "prefixevo core bindings";
  m.attr("__version__") = "0.1.0";

  static py::exception<Error> error_type(m, "Error", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(error_type, (std::string(code_name(e.code())) + ": " + e.what()).c_str());
    }
  });

  py::list behaviors;
  for (Behavior b : kAllBehaviors) behaviors.append(std::string(behavior_info(b).id));
  m.attr("BEHAVIORS") = behaviors;

  m.def("annotate", [](const std::string& text) {
    const auto p = annotate_text(text);
    py::dict counts;
    for (Behavior b : kAllBehaviors) counts[py::str(std::string(behavior_info(b).id))] = p.count(b);
    return counts;
  }, "Weighted marker counts per behavior.");

  m.def("prefix_id", [](const std::string& text) { return prefix_id_for(text); });

  m.def("compute_acu", [](double accuracy, double model_size, double mean_tokens) {
    return compute_acu({accuracy, model_size, mean_tokens});
  }, py::arg("accuracy"), py::arg("model_size"), py::arg("mean_tokens"));

  m.def("fleiss_kappa", [](std::vector<std::vector<int>> counts) {
    return fleiss_kappa(RatingMatrix::make(std::move(counts)));
  });

  m.def("select_on_frontier",
        [](const std::vector<std::tuple<std::string, double, double>>& points, double epsilon) {
          std::vector<FrontierPoint> pts;
          for (const auto& [id, acc, tok] : points) pts.push_back({id, acc, tok});
          const auto p = select_on_frontier(pts, epsilon);
          return std::make_tuple(p.prefix_id, p.accuracy, p.mean_tokens);
        },
        py::arg("points"), py::arg("epsilon") = 0.01);

  m.def("parse_judge_verdict", [](const std::string& raw) {
    return std::string(to_string(parse_judge_verdict(raw)));
  });

  m.def("check_constraints", [](const std::string& response, const std::string& constraints_json) {
    const auto set = nlohmann::json::parse(constraints_json).get<ConstraintSet>();
    const auto r = check_constraints(response, set);
    return py::make_tuple(r.pass, r.per_constraint);
  }, "Constraints are given as a JSON list, e.g. '[{\"kind\": \"lowercase_only\"}]'.");

  m.def("split_ids", [](const std::vector<std::string>& ids, double fraction, std::uint64_t seed) {
    std::vector<TaskItem> items;
    for (const auto& id : ids) items.push_back({id, id, ExactAnswer{"0"}});
    const auto parts = split_dataset(items, fraction, seed);
    std::vector<std::string> val, test;
    for (const auto& i : parts.validation) val.push_back(i.id);
    for (const auto& i : parts.test) test.push_back(i.id);
    return py::make_tuple(val, test);
  }, py::arg("ids"), py::arg("fraction") = 0.2, py::arg("seed") = 0);

  m.def("build_crossover_prompt", [](const std::vector<std::string>& parents) {
    std::vector<ThinkPrefix> ps;
    for (const auto& t : parents) ps.push_back(seed_prefix(t));
    return build_crossover_prompt(CrossoverSpec::make(ps));
  });

  m.def("build_mutation_prompt",
        [](const std::string& parent, const std::vector<std::string>& behaviors,
           const std::string& task, bool announce) {
          MutationSpec spec;
          spec.parent = seed_prefix(parent);
          for (const auto& b : behaviors) spec.selected.push_back(behavior_arg(b));
          spec.context = context_for(parse_task_kind(task));
          spec.announce_selection = announce;
          return build_mutation_prompt(spec);
        },
        py::arg("parent"), py::arg("behaviors"), py::arg("task") = "efficient_reasoning",
        py::arg("announce") = false);

  m.def("parse_crossover_output", [](const std::string& raw, const std::vector<std::string>& parents) {
    std::vector<ThinkPrefix> ps;
    for (const auto& t : parents) ps.push_back(seed_prefix(t));
    std::vector<std::string> out;
    for (const auto& c : parse_crossover_output(raw, CrossoverSpec::make(ps)).children) out.push_back(c.text);
    return out;
  });

  m.def("run_cli", [](std::vector<std::string> args) {
    args.insert(args.begin(), "prefixevo");
    std::ostringstream out, err;
    int code = 0;
    {
      py::gil_scoped_release release;
      code = run_cli(args, out, err);
    }
    return py::make_tuple(code, out.str(), err.str());
  }, "Runs the command-line tool in-process; returns (exit_code, stdout, stderr).");
}
