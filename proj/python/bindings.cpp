#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "cgbench/analysis.hpp"
#include "cgbench/board.hpp"
#include "cgbench/catalog.hpp"
#include "cgbench/dsl.hpp"
#include "cgbench/error.hpp"
#include "cgbench/report.hpp"
#include "cgbench/selfplay.hpp"
#include "cgbench/stats.hpp"
#include "cgbench/transcript.hpp"

namespace py = pybind11;
using namespace cgbench;
using nlohmann::json;

// JSON crosses the boundary as text; the Python package decodes it.
namespace {

std::shared_ptr<const BenchConfig> bench_from(const std::string& config_path) {
  if (config_path.empty()) return std::make_shared<const BenchConfig>(default_config());
  return std::make_shared<const BenchConfig>(load_config_file(config_path));
}

std::string parse_json(const std::string& text) {
  const auto r = parse_commands(text);
  json cmds = json::array();
  for (const auto& c : r.commands) cmds.push_back(command_to_json(c));
  json errs = json::array();
  for (const auto& e : r.errors) {
    errs.push_back({{"offset", e.offset}, {"keyword", e.keyword}, {"reason", e.reason}, {"message", describe_error(e)}});
  }
  return json{{"commands", cmds}, {"errors", errs}}.dump();
}

std::string selfplay_json(const std::string& out_dir, int sessions_per_cell, std::uint64_t seed,
                          const std::string& helper, const std::string& worker, const std::vector<std::string>& views,
                          const std::vector<std::string>& roles, int jobs, const std::string& config_path) {
  SelfPlayOptions o;
  o.bench = bench_from(config_path);
  o.out_dir = out_dir;
  o.sessions_per_cell = sessions_per_cell;
  o.seed = seed;
  o.helper_spec = helper;
  o.worker_spec = worker;
  o.jobs = jobs;
  if (!views.empty()) {
    o.conditions.clear();
    for (const auto& v : views) o.conditions.push_back(view_from_string(v));
  }
  if (!roles.empty()) {
    o.participant_seats.clear();
    for (const auto& r : roles) o.participant_seats.push_back(seat_from_string(r));
  }
  SelfPlayRun run;
  {
    py::gil_scoped_release release;
    run = run_selfplay(o);
  }
  json sessions = json::array();
  for (const auto& r : run.sessions) {
    json outcomes = json::array();
    for (const auto& oc : r.outcomes) outcomes.push_back(outcome_to_json(oc));
    sessions.push_back({{"session_id", r.session_id},
                        {"view", to_string(r.view)},
                        {"participant_seat", to_string(r.participant_seat)},
                        {"log_path", r.log_path.string()},
                        {"status", r.status},
                        {"failed", r.failed},
                        {"messages", r.messages},
                        {"outcomes", outcomes}});
  }
  return json{{"exit_code", run.exit_code()}, {"sessions", sessions}}.dump();
}

std::string analyze_json(const std::string& corpus, const std::string& out_dir, std::size_t n_perm,
                         std::uint64_t seed, int jobs, const std::string& config_path) {
  AnalyzeOptions o;
  o.bench = bench_from(config_path);
  o.n_perm = n_perm;
  o.seed = seed;
  o.jobs = jobs;
  AnalysisOutput out;
  {
    py::gil_scoped_release release;
    out = analyze_corpus(corpus, o);
    if (!out_dir.empty()) write_analysis(out, out_dir);
  }
  json skipped = json::array();
  for (const auto& s : out.skipped) skipped.push_back({{"file", s.file}, {"error", s.error}});
  return json{{"exit_code", out.exit_code},
              {"analyzed", out.analyzed},
              {"skipped", skipped},
              {"report", out.report},
              {"summary", out.summary},
              {"csv", out.csv}}
      .dump();
}

std::string audit_json(const std::string& corpus, const std::string& config_path) {
  const auto bench = bench_from(config_path);
  json out = json::array();
  for (const auto& f : list_corpus(corpus)) {
    const auto a = audit_log(read_log(f, bench->catalog.ids()));
    out.push_back({{"file", f.filename().string()},
                   {"session_id", a.session_id},
                   {"view", to_string(a.view)},
                   {"snapshots", a.snapshots},
                   {"worker_messages", a.worker_messages},
                   {"worker_messages_with_actions", a.worker_messages_with_actions},
                   {"violations", a.violations}});
  }
  return out.dump();
}

std::string references_json(const std::string& text, const std::string& actor, const std::string& config_path) {
  const auto bench = bench_from(config_path);
  const auto lex = Lexicon::from_catalog(bench->catalog);
  Utterance u;
  u.text = text;
  u.actor = actor == "worker" ? Actor::Worker : Actor::Helper;
  u.word_count = word_count(text);
  json out = json::array();
  for (const auto& r : extract_references(u, lex)) {
    out.push_back({{"surface", r.surface},
                   {"definiteness", to_string(r.cls.definiteness)},
                   {"ref_type", to_string(r.cls.ref_type)}});
  }
  return out.dump();
}

std::string dialogue_act(const std::string& text, const std::string& actor, const std::string& config_path) {
  const auto bench = bench_from(config_path);
  const auto lex = Lexicon::from_catalog(bench->catalog);
  Utterance u;
  u.text = text;
  u.actor = actor == "worker" ? Actor::Worker : Actor::Helper;
  u.word_count = word_count(text);
  return std::string(to_string(rule_based_act(u, {}, lex)));
}

}  // namespace

PYBIND11_MODULE(_cgbench, m) {
  m.doc() = "Native core of the cgbench collaborative-building benchmark";
  py::register_exception<BenchError>(m, "BenchError", PyExc_RuntimeError);

  m.def("default_config", [] { return default_config_document().dump(); });
  m.def("config_hashes", [](const std::string& path) {
    const auto b = bench_from(path);
    return std::make_pair(b->catalog_hash(), b->trial_set_hash());
  }, py::arg("config_path") = "");
  m.def("canonical_dump", [](const std::string& doc) { return canonical_dump(json::parse(doc)); });

  m.def("parse_commands", &parse_json, py::arg("text"));
  m.def("format_command", [](const std::string& cmd) { return format_command(command_from_json(json::parse(cmd))); },
        py::arg("command_json"));

  m.def("word_count", [](const std::string& s) { return word_count(s); });
  m.def("references", &references_json, py::arg("text"), py::arg("actor") = "helper", py::arg("config_path") = "");
  m.def("dialogue_act", &dialogue_act, py::arg("text"), py::arg("actor") = "helper", py::arg("config_path") = "");

  m.def("mann_whitney_u", [](const std::vector<double>& x, const std::vector<double>& y) {
    return test_result_to_json(mann_whitney_u(x, y)).dump();
  });
  m.def("chi_square_2x2", [](double a, double b, double c, double d) {
    return test_result_to_json(chi_square_2x2({{{a, b}, {c, d}}})).dump();
  });
  m.def("permutation_test", [](const std::vector<double>& a, const std::vector<double>& b, std::size_t n_perm,
                               std::uint64_t seed) {
    return test_result_to_json(cluster_permutation_test(a, b, n_perm, seed)).dump();
  }, py::arg("a"), py::arg("b"), py::arg("n_perm") = 0, py::arg("seed") = 0);

  m.def("selfplay", &selfplay_json, py::arg("out_dir"), py::arg("sessions_per_cell") = 1, py::arg("seed") = 0,
        py::arg("helper") = "oracle", py::arg("worker") = "oracle", py::arg("views") = std::vector<std::string>{},
        py::arg("roles") = std::vector<std::string>{}, py::arg("jobs") = 1, py::arg("config_path") = "");
  m.def("analyze", &analyze_json, py::arg("corpus"), py::arg("out_dir") = "", py::arg("n_perm") = 10000,
        py::arg("seed") = 0, py::arg("jobs") = 1, py::arg("config_path") = "");
  m.def("audit", &audit_json, py::arg("corpus"), py::arg("config_path") = "");
}
