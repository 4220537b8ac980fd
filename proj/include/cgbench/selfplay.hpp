#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "cgbench/agents.hpp"
#include "cgbench/session.hpp"

namespace cgbench {

struct SelfPlayOptions {
  std::shared_ptr<const BenchConfig> bench;
  int sessions_per_cell = 1;
  std::vector<ViewCondition> conditions{ViewCondition::Shared, ViewCondition::NonShared};
  // Role cells: which seat stands in for the participant.
  std::vector<Seat> participant_seats{Seat::Helper, Seat::Worker};
  std::string helper_spec = "oracle";
  std::string worker_spec = "oracle";
  std::uint64_t seed = 0;
  std::filesystem::path out_dir;
  int max_messages_per_trial = 60;
  double trial_time_limit_s = 300.0;
  int jobs = 1;
  std::shared_ptr<ChatTransport> transport;  // test hook for LLM seats
  Clock clock;                               // defaults to the wall clock
};

struct SelfPlaySessionResult {
  std::string session_id;
  ViewCondition view = ViewCondition::Shared;
  Seat participant_seat = Seat::Helper;
  std::filesystem::path log_path;
  std::vector<TrialOutcome> outcomes;
  std::string status;  // footer status
  bool failed = false;
  std::size_t messages = 0;
};

struct SelfPlayRun {
  std::vector<SelfPlaySessionResult> sessions;
  int exit_code() const;
};

std::string selfplay_session_id(std::uint64_t seed, ViewCondition view, Seat participant, int index);

/// Drives one session with programmatic agents in both seats, Helper first,
/// alternating. Agent failures abort the session with the error recorded in
/// the log; they never propagate.
SelfPlaySessionResult run_selfplay_session(const SessionConfig& config, Agent& helper, Agent& worker,
                                           const std::filesystem::path& log_path, int max_messages_per_trial,
                                           const Clock& clock = {});

/// Runs sessions_per_cell sessions for every (view, participant seat) cell.
/// Results are ordered by session id whatever the parallelism.
SelfPlayRun run_selfplay(const SelfPlayOptions& options,
                         const std::function<void(const SelfPlaySessionResult&)>& on_done = {});

std::string summary_line(const SelfPlaySessionResult& r);

}  // namespace cgbench
