#include <csignal>
#include <cstdio>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>

#include "cgbench/error.hpp"
#include "cgbench/report.hpp"
#include "cgbench/selfplay.hpp"
#include "cgbench/server.hpp"
#include "cgbench/transcript.hpp"

using namespace cgbench;

namespace {

std::shared_ptr<const BenchConfig> load_bench(const std::string& path) {
  return std::make_shared<const BenchConfig>(path.empty() ? default_config() : load_config_file(path));
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

HttpServer* g_server = nullptr;

void on_signal(int) {
  if (g_server != nullptr) g_server->stop();
}

int cmd_serve(const std::string& config, const std::string& host, int port, const ServerOptions& base) {
  ServerOptions opts = base;
  opts.bench = load_bench(config);
  SessionManager manager(opts);
  HttpServer server(manager);
  const int bound = server.bind(host, port);
  std::printf("serving on http://%s:%d (corpus %s)\n", host.c_str(), bound, opts.corpus_dir.string().c_str());
  std::fflush(stdout);
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  server.serve();
  g_server = nullptr;
  server.stop();
  manager.shutdown();
  return 0;
}

int cmd_selfplay(SelfPlayOptions opts, const std::string& config, const std::string& conditions,
                 const std::string& roles) {
  opts.bench = load_bench(config);
  opts.conditions.clear();
  for (const auto& c : split_list(conditions)) opts.conditions.push_back(view_from_string(c));
  opts.participant_seats.clear();
  for (const auto& r : split_list(roles)) opts.participant_seats.push_back(seat_from_string(r));
  if (opts.conditions.empty() || opts.participant_seats.empty()) {
    throw BenchError(ErrorCode::InvalidConfig, "need at least one condition and one role");
  }
  const SelfPlayRun run =
      run_selfplay(opts, [](const SelfPlaySessionResult& r) { std::printf("%s\n", summary_line(r).c_str()); });
  std::size_t failed = 0;
  for (const auto& s : run.sessions) failed += s.failed ? 1 : 0;
  std::printf("%zu session(s) written to %s, %zu failed\n", run.sessions.size(), opts.out_dir.string().c_str(),
              failed);
  return run.exit_code();
}

int cmd_analyze(AnalyzeOptions opts, const std::string& corpus, const std::string& out, const std::string& config,
                const std::string& annotator, const std::string& endpoint) {
  opts.bench = load_bench(config);
  if (annotator == "external") {
    opts.annotator = AnnotatorKind::External;
    if (endpoint.empty()) throw BenchError(ErrorCode::InvalidConfig, "--annotator external needs --endpoint");
    opts.endpoint = load_endpoint_config(endpoint);
  }
  const AnalysisOutput result = analyze_corpus(corpus, opts);
  write_analysis(result, out);
  for (const auto& s : result.skipped) std::fprintf(stderr, "warning: skipped %s: %s\n", s.file.c_str(), s.error.c_str());
  std::printf("%s", result.summary.c_str());
  std::printf("report written to %s\n", out.c_str());
  return result.exit_code;
}

int cmd_audit(const std::string& corpus, const std::string& config) {
  const auto bench = load_bench(config);
  const auto files = list_corpus(corpus);
  if (files.empty()) throw BenchError(ErrorCode::InsufficientData, "no logs in " + corpus);
  int bad = 0;
  std::size_t shared_snaps = 0, nonshared_snaps = 0;
  for (const auto& f : files) {
    try {
      const SessionLog log = read_log(f, bench->catalog.ids());
      const AuditResult a = audit_log(log);
      const ReplayResult r = replay(log, *bench);
      (a.view == ViewCondition::Shared ? shared_snaps : nonshared_snaps) += a.snapshots;
      std::printf("%s view=%s worker_messages=%zu with_actions=%zu snapshots=%zu replayed_snapshots=%zu %s\n",
                  a.session_id.c_str(), std::string(to_string(a.view)).c_str(), a.worker_messages,
                  a.worker_messages_with_actions, a.snapshots, r.snapshots_checked, a.ok() ? "ok" : "VIOLATION");
      for (const auto& v : a.violations) std::printf("  %s\n", v.c_str());
      if (!a.ok()) ++bad;
    } catch (const BenchError& e) {
      std::printf("%s error: %s\n", f.filename().string().c_str(), e.what());
      ++bad;
    }
  }
  std::printf("%zu log(s), %d with violations; snapshots shared=%zu nonshared=%zu\n", files.size(), bad,
              shared_snaps, nonshared_snaps);
  return bad == 0 ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cgbench: common-ground puzzle benchmark"};
  app.require_subcommand(1);
  std::string config;
  app.add_option("--config", config, "catalog + trial set document (default: bundled)");

  auto* serve = app.add_subcommand("serve", "host sessions over HTTP");
  std::string host = "127.0.0.1";
  int port = 8080;
  ServerOptions server_opts;
  std::string corpus_dir = "corpus", static_dir;
  serve->add_option("--config", config, "catalog + trial set document");
  serve->add_option("--port", port, "TCP port (0 = any free port)");
  serve->add_option("--host", host, "bind address");
  serve->add_option("--corpus", corpus_dir, "directory for session logs");
  serve->add_option("--static", static_dir, "directory of UI assets to serve at /");
  serve->add_option("--helper", server_opts.default_helper, "default Helper agent spec");
  serve->add_option("--worker", server_opts.default_worker, "default Worker agent spec");
  serve->add_option("--time-limit", server_opts.trial_time_limit_s, "seconds per trial");

  auto* selfplay = app.add_subcommand("selfplay", "run programmatic agents in both seats");
  SelfPlayOptions sp;
  std::string conditions = "shared,nonshared", roles = "helper,worker", sp_out = "corpus";
  selfplay->add_option("--config", config, "catalog + trial set document");
  selfplay->add_option("--sessions", sp.sessions_per_cell, "sessions per condition cell");
  selfplay->add_option("--conditions", conditions, "comma-separated view conditions");
  selfplay->add_option("--roles", roles, "comma-separated participant seats");
  selfplay->add_option("--helper", sp.helper_spec, "Helper agent spec");
  selfplay->add_option("--worker", sp.worker_spec, "Worker agent spec");
  selfplay->add_option("--seed", sp.seed, "base seed");
  selfplay->add_option("--out", sp_out, "corpus directory");
  selfplay->add_option("--jobs", sp.jobs, "sessions run in parallel");
  selfplay->add_option("--max-messages", sp.max_messages_per_trial, "message cap per trial");
  selfplay->add_option("--time-limit", sp.trial_time_limit_s, "seconds per trial");

  auto* analyze = app.add_subcommand("analyze", "compute metrics and tests over a corpus");
  AnalyzeOptions an;
  std::string an_corpus, an_out = "report", annotator = "rule", endpoint;
  analyze->add_option("--config", config, "catalog + trial set document");
  analyze->add_option("--corpus", an_corpus, "corpus directory")->required();
  analyze->add_option("--annotator", annotator, "dialogue-act annotator")
      ->check(CLI::IsMember({"rule", "external"}));
  analyze->add_option("--endpoint", endpoint, "endpoint config for --annotator external");
  analyze->add_option("--out", an_out, "output directory");
  analyze->add_option("--seed", an.seed, "permutation seed");
  analyze->add_option("--n-perm", an.n_perm, "permutation draws (0 = exhaustive)");
  analyze->add_option("--alpha", an.alpha, "significance threshold");
  analyze->add_option("--jobs", an.jobs, "logs processed in parallel");

  auto* audit = app.add_subcommand("audit", "check snapshot discipline and replay every log");
  std::string audit_corpus;
  audit->add_option("--config", config, "catalog + trial set document");
  audit->add_option("--corpus", audit_corpus, "corpus directory")->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*serve) {
      server_opts.corpus_dir = corpus_dir;
      server_opts.static_dir = static_dir;
      return cmd_serve(config, host, port, server_opts);
    }
    if (*selfplay) {
      sp.out_dir = sp_out;
      return cmd_selfplay(sp, config, conditions, roles);
    }
    if (*analyze) return cmd_analyze(an, an_corpus, an_out, config, annotator, endpoint);
    if (*audit) return cmd_audit(audit_corpus, config);
  } catch (const BenchError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "fatal: %s\n", e.what());
    return 1;
  }
  return 1;
}
