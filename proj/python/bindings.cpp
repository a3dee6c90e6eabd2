#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "plansmith/cli.hpp"
#include "plansmith/context.hpp"
#include "plansmith/curriculum.hpp"
#include "plansmith/error.hpp"
#include "plansmith/eval.hpp"
#include "plansmith/flywheel.hpp"
#include "plansmith/policy.hpp"
#include "plansmith/refine.hpp"
#include "plansmith/teacher.hpp"

namespace py = pybind11;
using nlohmann::json;
using namespace plansmith;

namespace {

// Structured values cross the boundary as JSON.
py::object to_py(const json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

json from_py(const py::handle& o) {
  return json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

env::TaskSpec task_of(const py::handle& o) { return from_py(o).get<env::TaskSpec>(); }

std::unique_ptr<policy::PolicyBackend> backend_named(const std::string& name) {
  if (name == "scripted") return policy::make_scripted_backend();
  if (name == "random") return policy::make_random_backend();
  throw Error(ErrorKind::config, "unknown backend: " + name + " (expected scripted or random)");
}

}  // namespace

PYBIND11_MODULE(_plansmith, m) {
  m.doc() = "Planning-trajectory synthesis and evaluation toolkit";

  static py::exception<Error> error_type(m, "PlansmithError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      error_type(e.what());
    }
  });

  // env
  m.def("generate_task", [](const std::string& difficulty, std::int64_t seed) {
    return to_py(env::generate_task(env::parse_difficulty(difficulty), seed));
  }, py::arg("difficulty"), py::arg("seed"));
  m.def("stratum_for_length", [](int n) { return std::string(env::to_string(env::stratum_for_length(n))); });

  py::class_<env::MiniWorld>(m, "MiniWorld")
      .def(py::init<>())
      .def("reset", [](env::MiniWorld& w, const py::object& task) { return w.reset(task_of(task)); })
      .def("step", [](env::MiniWorld& w, const std::string& action) {
        const auto s = w.step(action);
        py::dict d;
        d["observation"] = s.observation;
        d["reward"] = s.reward;
        d["done"] = s.done;
        d["invalid"] = s.invalid;
        return d;
      })
      .def("action_templates", &env::MiniWorld::action_templates)
      .def_property_readonly("done", &env::MiniWorld::done);

  // trajectory / flywheel
  m.def("plan_trajectory", [](const py::object& task) { return to_py(flywheel::plan_trajectory(task_of(task))); });
  m.def("token_budget", [](int long_tokens, double rho, int floor_tokens) {
    return flywheel::token_budget(long_tokens, {.rho = rho, .floor_tokens = floor_tokens});
  }, py::arg("long_tokens"), py::arg("rho") = 0.6, py::arg("floor_tokens") = 32);
  m.def("distill", [](const std::string& long_thought, std::optional<std::function<std::string(py::list)>> teacher_fn) {
    std::unique_ptr<teacher::Teacher> t;
    if (teacher_fn) {
      auto fn = *teacher_fn;
      t = std::make_unique<teacher::FunctionTeacher>([fn](const std::vector<ChatMessage>& msgs) {
        py::gil_scoped_acquire gil;
        return fn(to_py(json(msgs)).cast<py::list>());
      });
    } else {
      t = std::make_unique<teacher::HeuristicTeacher>();
    }
    const auto r = flywheel::distill(long_thought, *t);
    py::dict d;
    d["short_thought"] = r.short_thought;
    d["attempts"] = r.attempts;
    d["accepted"] = r.accepted;
    d["truncated"] = r.truncated;
    return d;
  }, py::arg("long_thought"), py::arg("teacher") = py::none(),
     "Distill a long thought; `teacher` maps a list of chat messages to a completion.");

  // context
  m.def("count_tokens", [](const std::string& s) { return context::count_tokens(s); });
  m.def("assemble_context", [](const std::string& instruction, const py::list& history, const std::string& observation,
                               const std::string& system_prompt, std::optional<int> token_budget) {
    std::vector<context::HistoryStep> steps;
    for (const auto& h : history) {
      const auto j = from_py(h);
      steps.push_back({j.at("step_index").get<int>(), j.value("observation", ""), j.value("short_thought", ""),
                       j.value("action", "")});
    }
    const auto ctx = context::assemble(instruction, steps, observation,
                                       {.system_prompt = system_prompt, .token_budget = token_budget, .counter = {}});
    py::dict d;
    d["messages"] = to_py(json(ctx.messages));
    d["total_tokens"] = ctx.total_tokens;
    d["truncated"] = ctx.truncated;
    d["dropped_steps"] = ctx.dropped_steps;
    return d;
  }, py::arg("instruction"), py::arg("history"), py::arg("observation"), py::arg("system_prompt") = "",
     py::arg("token_budget") = py::none());
  m.def("fusion_report", [](const py::object& traj) {
    return to_py(context::to_json(context::fusion_report(from_py(traj).get<Trajectory>())));
  });

  // policy
  m.def("parse_output", [](const std::string& raw) {
    const auto o = policy::parse_output(raw);
    py::dict d;
    d["long_thought"] = o.long_thought;
    d["short_thought"] = o.short_thought;
    d["action"] = o.action_raw;
    d["invalid"] = o.invalid;
    return d;
  });
  m.def("render_output", [](const std::string& l, const std::string& s, const std::string& a) {
    return policy::render_output(l, s, a);
  }, py::arg("long_thought"), py::arg("short_thought"), py::arg("action"));

  // refine / eval
  m.def("rollout", [](const std::string& backend, const py::list& tasks, int n, std::uint64_t seed) {
    std::vector<env::TaskSpec> pool;
    for (const auto& t : tasks) pool.push_back(task_of(t));
    const auto b = backend_named(backend);
    std::vector<refine::EpisodeResult> eps;
    {
      py::gil_scoped_release release;
      eps = refine::rollout(*b, pool, {.n = n, .seed = seed});
    }
    py::list out;
    for (const auto& e : eps) out.append(to_py(refine::to_json(e)));
    return out;
  }, py::arg("backend"), py::arg("tasks"), py::arg("n"), py::arg("seed") = 0);
  m.def("success_rate", [](const std::vector<int>& rewards) { return eval::success_rate(rewards); });
  m.def("percent", &eval::percent);
  m.def("render_table", [](const py::list& rows, const std::string& format) {
    std::vector<eval::TableRow> out;
    for (const auto& r : rows) {
      const auto j = from_py(r);
      out.push_back({j.at("model"), j.at("size"), j.at("tokens"), j.at("successes"), j.at("episodes")});
    }
    return eval::render_table(out, eval::parse_format(format));
  }, py::arg("rows"), py::arg("format") = "text");

  // cli
  m.def("run_cli", [](const std::vector<std::string>& args) {
    std::ostringstream out, err;
    int code;
    {
      py::gil_scoped_release release;
      code = cli::run(args, out, err);
    }
    return py::make_tuple(code, out.str(), err.str());
  }, "Run the command-line interface in-process; returns (exit_code, stdout, stderr).");
}
