#include "cgbench/report.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <thread>

#include "cgbench/error.hpp"
#include "cgbench/rng.hpp"

namespace cgbench {

using nlohmann::json;

namespace {

constexpr int kReportFormatVersion = 1;
constexpr std::size_t kActCount = 5;
const DialogueAct kActs[kActCount] = {DialogueAct::Presentation, DialogueAct::Clarification, DialogueAct::Repair,
                                      DialogueAct::Acceptance, DialogueAct::Other};

struct TrialRecord {
  int trial = 0;
  std::optional<bool> success;
  double words_total = 0, words_participant = 0, words_partner = 0;
  double turns_total = 0, turns_participant = 0, turns_partner = 0;
  std::array<double, kActCount> acts{};
  double refs = 0, definite = 0, indefinite = 0, bare = 0, identifier = 0, descriptive = 0;
  double vocab_human_only = 0, vocab_ai_only = 0, vocab_joint = 0;
  double ref_chars_participant = 0, refs_participant = 0, ref_chars_partner = 0, refs_partner = 0;
};

struct LogResult {
  std::string file;
  std::optional<std::string> error;
  std::string session_id;
  ViewCondition view = ViewCondition::Shared;
  Seat participant = Seat::Helper;
  json provenance;
  std::map<int, TrialRecord> trials;
  std::string annotations;
};

std::unique_ptr<DialogueActAnnotator> make_annotator(const AnalyzeOptions& o, const Lexicon& lex) {
  if (o.annotator == AnnotatorKind::External) {
    if (!o.endpoint) throw BenchError(ErrorCode::InvalidConfig, "external annotator needs an endpoint config");
    return std::make_unique<ExternalAnnotator>(*o.endpoint, lex, o.transport);
  }
  return std::make_unique<RuleBasedAnnotator>(lex);
}

LogResult process_log(const std::filesystem::path& path, const AnalyzeOptions& o, const Lexicon& lex) {
  LogResult r;
  r.file = path.filename().string();
  try {
    const SessionLog log = read_log(path, o.bench->catalog.ids());
    const ReplayResult replayed = replay(log, *o.bench);
    const SessionConfig cfg = config_from_json(log.header.config, o.bench);
    r.session_id = log.header.session_id;
    r.view = cfg.view;
    r.participant = cfg.participant_seat;
    const Actor participant = actor_of(cfg.participant_seat);

    std::string status = log.footer ? log.footer->status : "truncated";
    r.provenance = json{{"session_id", r.session_id},
                        {"file", r.file},
                        {"digest", log_digest(log)},
                        {"view", to_string(cfg.view)},
                        {"participant_seat", to_string(cfg.participant_seat)},
                        {"truncated", replayed.truncated},
                        {"status", status},
                        {"catalog_hash", log.header.catalog_hash},
                        {"trial_set_hash", log.header.trial_set_hash},
                        {"events", log.events.size()}};

    for (const auto& e : log.events) {
      if (e.as<TrialStartEvent>()) r.trials[e.trial_index].trial = e.trial_index;
    }
    for (const auto& out : replayed.outcomes) r.trials[out.trial_index].success = out.success;

    auto annotator = make_annotator(o, lex);
    const auto utts = segment_turns(log);
    std::vector<PieceReference> all_refs;
    for (std::size_t i = 0; i < utts.size(); ++i) {
      const Utterance& u = utts[i];
      std::vector<Utterance> context;
      for (std::size_t k = i; k > 0 && context.size() < kActContextWindow; --k) {
        if (utts[k - 1].trial_index != u.trial_index) break;
        context.insert(context.begin(), utts[k - 1]);
      }
      const DialogueActLabel label = annotator->annotate(u, context);
      const auto refs = extract_references(u, lex);

      TrialRecord& t = r.trials[u.trial_index];
      t.trial = u.trial_index;
      const bool is_participant = u.actor == participant;
      t.words_total += u.word_count;
      t.turns_total += 1;
      (is_participant ? t.words_participant : t.words_partner) += u.word_count;
      (is_participant ? t.turns_participant : t.turns_partner) += 1;
      t.acts[static_cast<std::size_t>(label.act)] += 1;

      json ref_json = json::array();
      for (const auto& ref : refs) {
        t.refs += 1;
        (ref.cls.definiteness == Definiteness::Definite     ? t.definite
         : ref.cls.definiteness == Definiteness::Indefinite ? t.indefinite
                                                            : t.bare) += 1;
        (ref.cls.ref_type == RefType::Identifier ? t.identifier : t.descriptive) += 1;
        if (is_participant) {
          t.ref_chars_participant += static_cast<double>(ref.surface.size());
          t.refs_participant += 1;
        } else {
          t.ref_chars_partner += static_cast<double>(ref.surface.size());
          t.refs_partner += 1;
        }
        ref_json.push_back(json{{"surface", ref.surface},
                                {"definiteness", to_string(ref.cls.definiteness)},
                                {"ref_type", to_string(ref.cls.ref_type)}});
        all_refs.push_back(ref);
      }
      r.annotations += json{{"session_id", u.session_id},
                            {"seq", u.seq},
                            {"trial", u.trial_index},
                            {"turn", u.turn_index},
                            {"actor", to_string(u.actor)},
                            {"text", u.text},
                            {"word_count", u.word_count},
                            {"act", to_string(label.act)},
                            {"annotator", label.annotator},
                            {"confidence", label.confidence},
                            {"fallback", label.fallback},
                            {"references", std::move(ref_json)}}
                           .dump() +
                       "\n";
    }
    for (const auto& [trial, v] : partition_vocabulary(all_refs, cfg.participant_seat)) {
      TrialRecord& t = r.trials[trial];
      t.vocab_human_only = static_cast<double>(v.human_only.size());
      t.vocab_ai_only = static_cast<double>(v.ai_only.size());
      t.vocab_joint = static_cast<double>(v.joint.size());
    }
  } catch (const BenchError& e) {
    r.error = e.what();
  } catch (const std::exception& e) {
    r.error = std::string("unexpected: ") + e.what();
  }
  return r;
}

double safe_div(double a, double b) { return b > 0 ? a / b : 0.0; }

json cell_metrics(const std::vector<const TrialRecord*>& recs) {
  TrialRecord sum;
  double outcomes = 0, successes = 0;
  for (const auto* t : recs) {
    if (t->success) {
      outcomes += 1;
      successes += *t->success ? 1 : 0;
    }
    sum.words_total += t->words_total;
    sum.words_participant += t->words_participant;
    sum.words_partner += t->words_partner;
    sum.turns_total += t->turns_total;
    sum.turns_participant += t->turns_participant;
    sum.turns_partner += t->turns_partner;
    for (std::size_t a = 0; a < kActCount; ++a) sum.acts[a] += t->acts[a];
    sum.refs += t->refs;
    sum.definite += t->definite;
    sum.indefinite += t->indefinite;
    sum.bare += t->bare;
    sum.identifier += t->identifier;
    sum.descriptive += t->descriptive;
    sum.vocab_human_only += t->vocab_human_only;
    sum.vocab_ai_only += t->vocab_ai_only;
    sum.vocab_joint += t->vocab_joint;
    sum.ref_chars_participant += t->ref_chars_participant;
    sum.refs_participant += t->refs_participant;
    sum.ref_chars_partner += t->ref_chars_partner;
    sum.refs_partner += t->refs_partner;
  }
  const double n = static_cast<double>(recs.size());
  json m{{"trials_observed", n},
         {"outcomes", outcomes},
         {"successes", successes},
         {"success_rate", safe_div(successes, outcomes)},
         {"mean_words", safe_div(sum.words_total, n)},
         {"mean_words_participant", safe_div(sum.words_participant, n)},
         {"mean_words_partner", safe_div(sum.words_partner, n)},
         {"mean_turns", safe_div(sum.turns_total, n)},
         {"mean_turns_participant", safe_div(sum.turns_participant, n)},
         {"mean_turns_partner", safe_div(sum.turns_partner, n)},
         {"words_per_turn", safe_div(sum.words_total, sum.turns_total)},
         {"utterances", sum.turns_total},
         {"references", sum.refs},
         {"ref_definite", sum.definite},
         {"ref_indefinite", sum.indefinite},
         {"ref_bare", sum.bare},
         {"ref_identifier", sum.identifier},
         {"ref_descriptive", sum.descriptive},
         {"mean_vocab_human_only", safe_div(sum.vocab_human_only, n)},
         {"mean_vocab_ai_only", safe_div(sum.vocab_ai_only, n)},
         {"mean_vocab_joint", safe_div(sum.vocab_joint, n)},
         {"mean_ref_length_participant", safe_div(sum.ref_chars_participant, sum.refs_participant)},
         {"mean_ref_length_partner", safe_div(sum.ref_chars_partner, sum.refs_partner)}};
  for (std::size_t a = 0; a < kActCount; ++a) m["act_" + std::string(to_string(kActs[a]))] = sum.acts[a];
  return m;
}

json test_entry(const std::string& name, const std::string& description, double alpha,
                const std::function<TestResult()>& run, bool enough) {
  json j{{"name", name}, {"description", description}};
  if (!enough) {
    j["status"] = "insufficient_n";
    return j;
  }
  try {
    const TestResult r = run();
    j["status"] = "ok";
    j["result"] = test_result_to_json(r);
    j["significant"] = r.significant(alpha);
  } catch (const BenchError& e) {
    j["status"] = e.code() == ErrorCode::InsufficientData || e.code() == ErrorCode::EmptySample ? "insufficient_n"
                                                                                                : "not_computable";
    j["reason"] = e.what();
  }
  return j;
}

double scored_sum(const LogResult& l, double TrialRecord::*field) {
  double s = 0;
  for (const auto& [trial, t] : l.trials) {
    if (trial > 0) s += t.*field;
  }
  return s;
}

std::optional<std::vector<double>> scored_series(const LogResult& l, double TrialRecord::*field) {
  std::vector<double> out;
  for (int k = 1; k <= kScoredTrials; ++k) {
    auto it = l.trials.find(k);
    if (it == l.trials.end()) return std::nullopt;
    out.push_back(it->second.*field);
  }
  return out;
}

json run_tests(const std::vector<LogResult>& logs, const AnalyzeOptions& o) {
  json tests = json::array();
  const double alpha = o.alpha;

  auto success_table = [&](auto group_of) {
    std::array<std::array<double, 2>, 2> c{};
    std::array<std::size_t, 2> sessions{};
    for (const auto& l : logs) {
      const int g = group_of(l);
      ++sessions[static_cast<std::size_t>(g)];
      for (const auto& [trial, t] : l.trials) {
        if (trial == 0 || !t.success) continue;
        c[static_cast<std::size_t>(g)][*t.success ? 0 : 1] += 1;
      }
    }
    return std::make_pair(c, sessions);
  };
  {
    auto [c, n] = success_table([](const LogResult& l) { return l.view == ViewCondition::Shared ? 0 : 1; });
    tests.push_back(test_entry("success_by_view",
                               "scored-trial exact matches, shared vs nonshared view (chi-square 2x2)", alpha,
                               [c = c] { return chi_square_2x2(c); }, n[0] >= 2 && n[1] >= 2));
  }
  {
    auto [c, n] = success_table([](const LogResult& l) { return l.participant == Seat::Helper ? 0 : 1; });
    tests.push_back(test_entry("success_by_role",
                               "scored-trial exact matches, participant as helper vs worker (chi-square 2x2)", alpha,
                               [c = c] { return chi_square_2x2(c); }, n[0] >= 2 && n[1] >= 2));
  }

  auto by_view = [&](double TrialRecord::*field) {
    std::vector<double> shared, nonshared;
    for (const auto& l : logs) {
      const double v = scored_sum(l, field) / static_cast<double>(kScoredTrials);
      (l.view == ViewCondition::Shared ? shared : nonshared).push_back(v);
    }
    return std::make_pair(shared, nonshared);
  };
  {
    auto [a, b] = by_view(&TrialRecord::words_participant);
    const bool enough = a.size() >= 2 && b.size() >= 2;
    tests.push_back(test_entry("participant_words_by_view_u",
                               "participant words per scored trial, shared vs nonshared (Mann-Whitney U)", alpha,
                               [a = a, b = b] { return mann_whitney_u(a, b); }, enough));
    tests.push_back(test_entry(
        "participant_words_by_view_perm",
        "participant words per scored trial, shared vs nonshared (permutation over participants)", alpha,
        [a = a, b = b, &o] { return cluster_permutation_test(a, b, o.n_perm, o.seed); }, enough));
  }
  {
    auto [a, b] = by_view(&TrialRecord::words_total);
    tests.push_back(test_entry(
        "pair_words_by_view_perm", "pair words per scored trial, shared vs nonshared (permutation over participants)",
        alpha, [a = a, b = b, &o] { return cluster_permutation_test(a, b, o.n_perm, derive_seed(o.seed, 1)); },
        a.size() >= 2 && b.size() >= 2));
  }
  {
    auto [a, b] = by_view(&TrialRecord::turns_total);
    tests.push_back(test_entry(
        "pair_turns_by_view_perm", "pair turns per scored trial, shared vs nonshared (permutation over participants)",
        alpha, [a = a, b = b, &o] { return cluster_permutation_test(a, b, o.n_perm, derive_seed(o.seed, 2)); },
        a.size() >= 2 && b.size() >= 2));
  }
  auto trend = [&](const std::string& name, const std::string& what, double TrialRecord::*field,
                   std::optional<ViewCondition> view) {
    std::vector<std::vector<double>> series;
    for (const auto& l : logs) {
      if (view && l.view != *view) continue;
      if (auto s = scored_series(l, field)) series.push_back(*s);
    }
    tests.push_back(test_entry(name, what, alpha, [series] { return trial_trend(series); }, series.size() >= 2));
  };
  trend("pair_words_trend", "pair words over scored trials 1-4 (per-participant slope t-test)",
        &TrialRecord::words_total, std::nullopt);
  trend("pair_words_trend_shared", "pair words over scored trials 1-4, shared view", &TrialRecord::words_total,
        ViewCondition::Shared);
  trend("pair_words_trend_nonshared", "pair words over scored trials 1-4, nonshared view",
        &TrialRecord::words_total, ViewCondition::NonShared);
  trend("pair_turns_trend", "pair turns over scored trials 1-4 (per-participant slope t-test)",
        &TrialRecord::turns_total, std::nullopt);
  return tests;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

}  // namespace

std::string format_number(double v) {
  if (!std::isfinite(v)) return "null";
  return json(v).dump();
}

AnalysisOutput analyze_corpus(const std::filesystem::path& corpus_dir, const AnalyzeOptions& o) {
  if (!o.bench) throw BenchError(ErrorCode::InvalidConfig, "analysis needs a bench configuration");
  const auto files = list_corpus(corpus_dir);
  AnalysisOutput out;
  if (files.empty()) {
    throw BenchError(ErrorCode::InsufficientData, "no " + std::string(kLogSuffix) + " logs in " + corpus_dir.string());
  }
  const Lexicon lex = Lexicon::from_catalog(o.bench->catalog);

  std::vector<LogResult> results(files.size());
  const std::size_t workers = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(1, o.jobs)), 1, files.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t k = next++; k < files.size(); k = next++) results[k] = process_log(files[k], o, lex);
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  std::vector<LogResult> good;
  for (auto& r : results) {
    if (r.error) {
      out.skipped.push_back({r.file, *r.error});
    } else {
      good.push_back(std::move(r));
    }
  }
  std::stable_sort(good.begin(), good.end(),
                   [](const LogResult& a, const LogResult& b) { return a.session_id < b.session_id; });
  for (std::size_t i = 1; i < good.size(); ++i) {
    if (good[i].session_id == good[i - 1].session_id) {
      out.skipped.push_back({good[i].file, "duplicate session id " + good[i].session_id});
    }
  }
  good.erase(std::unique(good.begin(), good.end(),
                         [](const LogResult& a, const LogResult& b) { return a.session_id == b.session_id; }),
             good.end());
  out.analyzed = good.size();

  // Cells: (condition, role, trial) for trials 0..4 plus "scored" (1..4 pooled).
  std::map<std::tuple<std::string, std::string, std::string>, std::vector<const TrialRecord*>> cells;
  std::map<std::pair<std::string, std::string>, std::size_t> sessions_per_cell;
  for (const auto& l : good) {
    const std::string cond(to_string(l.view)), role(to_string(l.participant));
    ++sessions_per_cell[{cond, role}];
    for (const auto& [trial, t] : l.trials) {
      cells[{cond, role, std::to_string(trial)}].push_back(&t);
      if (trial > 0) cells[{cond, role, "scored"}].push_back(&t);
    }
  }
  json cell_list = json::array();
  for (const auto& [key, recs] : cells) {
    const auto& [cond, role, trial] = key;
    json m = cell_metrics(recs);
    m["sessions"] = static_cast<double>(sessions_per_cell[{cond, role}]);
    cell_list.push_back(json{{"condition", cond}, {"role", role}, {"trial", trial}, {"metrics", std::move(m)}});
  }

  json logs = json::array();
  for (const auto& l : good) logs.push_back(l.provenance);
  json skipped = json::array();
  for (const auto& s : out.skipped) skipped.push_back(json{{"file", s.file}, {"error", s.error}});

  out.report = json{
      {"format_version", kReportFormatVersion},
      {"options",
       {{"annotator", o.annotator == AnnotatorKind::Rule ? "rule" : "external"},
        {"seed", o.seed},
        {"n_perm", o.n_perm},
        {"alpha", o.alpha}}},
      {"bench", {{"catalog_hash", o.bench->catalog_hash()}, {"trial_set_hash", o.bench->trial_set_hash()}}},
      {"corpus", {{"logs", std::move(logs)}, {"skipped", std::move(skipped)}}},
      {"cells", std::move(cell_list)},
      {"tests", run_tests(good, o)},
      {"method_notes",
       json::array({"condition effects on success use a 2x2 chi-square on pooled scored trials in place of a "
                    "binomial GEE",
                    "between-condition effort effects use a permutation test over participant means in place of "
                    "a linear mixed model",
                    "learning effects use a t-test of per-participant least-squares slopes over trials 1-4",
                    "a self-play session counts as one participant; role is the seat standing in for the "
                    "participant"})}};

  // CSV and summary are rendered from the report document itself.
  out.csv = "condition,role,trial,metric,value\n";
  for (const auto& c : out.report["cells"]) {
    for (const auto& [metric, value] : c["metrics"].items()) {
      out.csv += csv_escape(c["condition"].get<std::string>()) + "," + csv_escape(c["role"].get<std::string>()) +
                 "," + csv_escape(c["trial"].get<std::string>()) + "," + metric + "," +
                 format_number(value.get<double>()) + "\n";
    }
  }

  std::string s;
  s += "logs analyzed: " + std::to_string(out.report["corpus"]["logs"].size()) +
       ", skipped: " + std::to_string(out.report["corpus"]["skipped"].size()) + "\n";
  for (const auto& sk : out.report["corpus"]["skipped"]) {
    s += "  skipped " + sk["file"].get<std::string>() + ": " + sk["error"].get<std::string>() + "\n";
  }
  s += "\nper cell (condition / role / trial): sessions, success_rate, mean_words, mean_turns, words_per_turn\n";
  for (const auto& c : out.report["cells"]) {
    const auto& m = c["metrics"];
    s += "  " + c["condition"].get<std::string>() + " / " + c["role"].get<std::string>() + " / " +
         c["trial"].get<std::string>() + ": " + format_number(m["sessions"].get<double>()) + ", " +
         format_number(m["success_rate"].get<double>()) + ", " + format_number(m["mean_words"].get<double>()) +
         ", " + format_number(m["mean_turns"].get<double>()) + ", " +
         format_number(m["words_per_turn"].get<double>()) + "\n";
  }
  s += "\ntests (alpha " + format_number(o.alpha) + "):\n";
  for (const auto& t : out.report["tests"]) {
    s += "  " + t["name"].get<std::string>() + ": ";
    if (t["status"] != "ok") {
      s += t["status"].get<std::string>();
      if (t.contains("reason")) s += " (" + t["reason"].get<std::string>() + ")";
    } else {
      const auto& r = t["result"];
      auto num = [](const json& v) { return v.is_null() ? std::string("null") : format_number(v.get<double>()); };
      s += r["statistic"].get<std::string>() + "=" + num(r["value"]) + " p=" + num(r["p"]) +
           " estimate=" + num(r["estimate"]) + (t["significant"].get<bool>() ? " significant" : "");
    }
    s += "\n";
  }
  out.summary = s;

  for (const auto& l : good) out.annotations += l.annotations;
  out.exit_code = out.analyzed == 0 ? 1 : (out.skipped.empty() ? 0 : 2);
  return out;
}

void write_analysis(const AnalysisOutput& out, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto write = [&](const char* name, const std::string& text) {
    std::ofstream f(dir / name, std::ios::binary | std::ios::trunc);
    if (!f) throw BenchError(ErrorCode::Io, "cannot write " + (dir / name).string());
    f << text;
  };
  write("report.json", canonical_dump(out.report));
  write("summary.txt", out.summary);
  write("metrics.csv", out.csv);
  write("annotations.jsonl", out.annotations);
}

AuditResult audit_log(const SessionLog& log) {
  AuditResult a;
  a.session_id = log.header.session_id;
  try {
    a.view = view_from_string(log.header.config.at("view").get<std::string>());
  } catch (const std::exception&) {
    a.violations.push_back("header has no view condition");
    return a;
  }
  const auto& ev = log.events;
  std::vector<bool> accounted(ev.size(), false);
  for (std::size_t i = 0; i < ev.size(); ++i) {
    if (ev[i].actor != Actor::Worker || ev[i].as<ChatEvent>() == nullptr) continue;
    ++a.worker_messages;
    std::size_t actions = 0, snaps = 0;
    for (std::size_t k = i + 1; k < ev.size(); ++k) {
      const auto& e = ev[k];
      const bool party_chat = e.as<ChatEvent>() != nullptr && e.actor != Actor::System;
      if (party_chat || e.as<TrialStartEvent>() || e.as<TrialEndEvent>() || e.as<SessionEndEvent>()) break;
      if (const auto* act = e.as<ActionEvent>(); act && is_board_command(act->command)) ++actions;
      if (e.as<SnapshotEvent>()) {
        ++snaps;
        accounted[k] = true;
        if (e.visibility != std::set<Seat>{Seat::Helper}) {
          a.violations.push_back("seq " + std::to_string(e.seq) + ": snapshot visible beyond the helper");
        }
      }
    }
    if (actions > 0) ++a.worker_messages_with_actions;
    const std::size_t expected = (a.view == ViewCondition::Shared && actions > 0) ? 1 : 0;
    if (snaps != expected) {
      a.violations.push_back("seq " + std::to_string(ev[i].seq) + ": worker message with " +
                             std::to_string(actions) + " action(s) followed by " + std::to_string(snaps) +
                             " snapshot(s), expected " + std::to_string(expected));
    }
  }
  for (std::size_t k = 0; k < ev.size(); ++k) {
    if (ev[k].as<SnapshotEvent>()) {
      ++a.snapshots;
      if (!accounted[k]) a.violations.push_back("seq " + std::to_string(ev[k].seq) + ": snapshot without a worker message");
    }
  }
  if (a.view == ViewCondition::NonShared && a.snapshots > 0) {
    a.violations.push_back(std::to_string(a.snapshots) + " snapshot(s) in a nonshared session");
  }
  return a;
}

}  // namespace cgbench
