#include "cgbench/selfplay.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <mutex>
#include <thread>

#include "cgbench/error.hpp"
#include "cgbench/transcript.hpp"

namespace cgbench {

int SelfPlayRun::exit_code() const {
  return std::any_of(sessions.begin(), sessions.end(), [](const auto& s) { return s.failed; }) ? 2 : 0;
}

std::string selfplay_session_id(std::uint64_t seed, ViewCondition view, Seat participant, int index) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "sp-%llu-%s-%s-%03d", static_cast<unsigned long long>(seed),
                std::string(to_string(view)).c_str(), std::string(to_string(participant)).c_str(), index);
  return buf;
}

SelfPlaySessionResult run_selfplay_session(const SessionConfig& config, Agent& helper, Agent& worker,
                                           const std::filesystem::path& log_path, int max_messages_per_trial,
                                           const Clock& clock) {
  const Clock clk = clock ? clock : Clock(wall_clock_ms);
  TranscriptWriter writer(log_path, make_header(config, clk()));
  auto session = Session::start(config, [&writer](const SessionEvent& e) { writer.append(e); }, clk);

  SelfPlaySessionResult result;
  result.session_id = config.session_id;
  result.view = config.view;
  result.participant_seat = config.participant_seat;
  result.log_path = log_path;

  Seat turn = Seat::Helper;
  try {
    while (!session->ended()) {
      const int trial = session->current_trial();
      if (session->messages_in_trial(Seat::Helper) + session->messages_in_trial(Seat::Worker) >=
          max_messages_per_trial) {
        session->abort_trial("message cap of " + std::to_string(max_messages_per_trial) + " reached");
        turn = Seat::Helper;
        continue;
      }
      Agent& agent = turn == Seat::Helper ? helper : worker;
      const AgentTurn step = agent.step(view_for(*session, turn));
      if (!step.text.empty()) {
        session->submit_message(turn, step.text);
        ++result.messages;
      }
      if (!session->ended() && session->current_trial() == trial) {
        if (step.intent == CompletionIntent::Propose) {
          session->propose_complete(turn);
        } else if (step.intent == CompletionIntent::Confirm && session->pending_proposal() == other(turn)) {
          session->confirm_complete(turn);
        }
      }
      turn = (session->ended() || session->current_trial() != trial) ? Seat::Helper : other(turn);
    }
  } catch (const BenchError& e) {
    // EndpointError, ContextOverflow and friends end the session; the
    // SessionEnd reason is the marker the analysis reports.
    if (!session->ended()) session->abort(std::string(to_string(e.code())) + ": " + e.what());
    result.failed = true;
  } catch (const std::exception& e) {
    if (!session->ended()) session->abort(std::string("Internal: ") + e.what());
    result.failed = true;
  }

  result.outcomes = session->outcomes();
  const auto events = session->events();
  result.status = "completed";
  for (const auto& e : events) {
    if (const auto* end = e.as<SessionEndEvent>()) result.status = end->reason;
  }
  writer.close(LogFooter{result.outcomes, result.status});
  return result;
}

SelfPlayRun run_selfplay(const SelfPlayOptions& options,
                         const std::function<void(const SelfPlaySessionResult&)>& on_done) {
  if (!options.bench) throw BenchError(ErrorCode::InvalidConfig, "self-play needs a bench configuration");
  if (options.sessions_per_cell < 1) throw BenchError(ErrorCode::InvalidConfig, "sessions per cell must be >= 1");
  // Spec errors are configuration errors and stop the run up front.
  const AgentSpec helper_spec = parse_agent_spec(options.helper_spec, Seat::Helper);
  const AgentSpec worker_spec = parse_agent_spec(options.worker_spec, Seat::Worker);
  if (helper_spec.is_human() || worker_spec.is_human()) {
    throw BenchError(ErrorCode::InvalidConfig, "self-play cannot use human seats");
  }

  struct Job {
    SessionConfig config;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  std::uint64_t cell = 0;
  for (ViewCondition view : options.conditions) {
    for (Seat participant : options.participant_seats) {
      for (int i = 0; i < options.sessions_per_cell; ++i) {
        SessionConfig cfg;
        cfg.session_id = selfplay_session_id(options.seed, view, participant, i);
        cfg.view = view;
        cfg.participant_seat = participant;
        cfg.seats = {{Seat::Helper, helper_spec}, {Seat::Worker, worker_spec}};
        cfg.bench = options.bench;
        cfg.trial_time_limit_s = options.trial_time_limit_s;
        jobs.push_back({std::move(cfg), derive_seed(options.seed, cell * 1000003ULL + static_cast<std::uint64_t>(i))});
      }
      ++cell;
    }
  }
  std::sort(jobs.begin(), jobs.end(), [](const Job& a, const Job& b) { return a.config.session_id < b.config.session_id; });

  SelfPlayRun run;
  run.sessions.resize(jobs.size());
  std::mutex done_mutex;
  auto run_one = [&](std::size_t k) {
    const Job& job = jobs[k];
    const auto log_path = options.out_dir / (job.config.session_id + kLogSuffix);
    SelfPlaySessionResult r;
    try {
      auto helper = make_agent(helper_spec, Seat::Helper, derive_seed(job.seed, 1), options.transport);
      auto worker = make_agent(worker_spec, Seat::Worker, derive_seed(job.seed, 2), options.transport);
      r = run_selfplay_session(job.config, *helper, *worker, log_path, options.max_messages_per_trial,
                               options.clock);
    } catch (const BenchError& e) {
      // The agent could not be constructed (e.g. AgentUnavailable); no log.
      r.session_id = job.config.session_id;
      r.view = job.config.view;
      r.participant_seat = job.config.participant_seat;
      r.status = std::string("error: ") + e.what();
      r.failed = true;
    }
    std::lock_guard<std::mutex> lock(done_mutex);
    run.sessions[k] = r;
    if (on_done) on_done(r);
  };

  const std::size_t workers = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(1, options.jobs)), 1, jobs.size());
  if (workers <= 1) {
    for (std::size_t k = 0; k < jobs.size(); ++k) run_one(k);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t k = next++; k < jobs.size(); k = next++) run_one(k);
      });
    }
    for (auto& t : pool) t.join();
  }
  return run;
}

std::string summary_line(const SelfPlaySessionResult& r) {
  const auto scored = std::count_if(r.outcomes.begin(), r.outcomes.end(), [](const auto& o) { return o.trial_index > 0; });
  const auto won = std::count_if(r.outcomes.begin(), r.outcomes.end(),
                                 [](const auto& o) { return o.trial_index > 0 && o.success; });
  const auto all_won = std::count_if(r.outcomes.begin(), r.outcomes.end(), [](const auto& o) { return o.success; });
  return r.session_id + " view=" + std::string(to_string(r.view)) + " participant=" +
         std::string(to_string(r.participant_seat)) + " trials=" + std::to_string(all_won) + "/" +
         std::to_string(r.outcomes.size()) + " scored=" + std::to_string(won) + "/" + std::to_string(scored) +
         " messages=" + std::to_string(r.messages) + " status=" + r.status;
}

}  // namespace cgbench
