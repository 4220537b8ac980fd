#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cgbench/agent_spec.hpp"
#include "cgbench/board.hpp"
#include "cgbench/catalog.hpp"
#include "cgbench/events.hpp"

namespace cgbench {

struct SeatBinding {
  Seat seat = Seat::Helper;
  AgentSpec agent;
};

struct SessionConfig {
  std::string session_id;
  ViewCondition view = ViewCondition::Shared;
  // Seat occupied by the study participant. For human sessions this is the
  // human's seat; in self-play it names the seat standing in for one, so the
  // analysis can group by role exactly as for human data.
  Seat participant_seat = Seat::Helper;
  std::vector<SeatBinding> seats;
  std::shared_ptr<const BenchConfig> bench;
  double trial_time_limit_s = 300.0;

  /// Throws InvalidConfig unless there is exactly one Helper and one Worker
  /// seat, a positive time limit and a loaded bench configuration.
  void validate() const;
  const AgentSpec& agent(Seat seat) const;
  std::optional<Seat> human_seat() const;
  bool self_play() const { return !human_seat().has_value(); }
};

nlohmann::json config_to_json(const SessionConfig& cfg);
/// Rebuilds a config from its logged form; the bench configuration is supplied separately.
SessionConfig config_from_json(const nlohmann::json& j, std::shared_ptr<const BenchConfig> bench);

/// What a seat is allowed to hold besides the event stream.
struct SeatMaterials {
  Seat seat = Seat::Helper;
  int trial_index = 0;
  GridSize grid;
  bool rotation_sensitive = true;
  // Helper only: the target, with the attributes of the target pieces.
  std::optional<TargetSolution> target;
  std::vector<Piece> target_pieces;
  // Worker only: the full palette and the current work area.
  std::vector<Piece> palette;
  std::optional<BoardState> board;
};

nlohmann::json materials_to_json(const SeatMaterials& m);

struct SubmitResult {
  std::int64_t first_seq = 0;
  std::int64_t last_seq = 0;
  std::size_t actions = 0;
  std::vector<MalformedCommand> errors;
  std::optional<TrialOutcome> ended_trial;
};

struct CompletionResult {
  std::optional<TrialOutcome> outcome;  // empty while the proposal is pending
  bool pending() const { return !outcome.has_value(); }
};

using Clock = std::function<std::int64_t()>;  // milliseconds
using EventSink = std::function<void(const SessionEvent&)>;

std::int64_t wall_clock_ms();

/// One benchmark session: practice trial plus the scored trials. All state
/// changes go through one mutex, so a handle may be shared between threads.
class Session {
 public:
  /// Validates the config, emits TrialStart for the practice trial and
  /// returns the running session. The sink sees every event before the
  /// mutating call returns.
  static std::shared_ptr<Session> start(SessionConfig config, EventSink sink = {}, Clock clock = wall_clock_ms);

  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  SubmitResult submit_message(Seat seat, std::string_view text);
  CompletionResult propose_complete(Seat seat);
  CompletionResult confirm_complete(Seat seat);

  /// Applies the trial time limit. Called implicitly by every mutating call.
  void tick();
  /// Ends the current trial as Aborted and moves on to the next one.
  void abort_trial(const std::string& reason);
  /// Ends the current trial as Aborted and closes the session.
  void abort(const std::string& reason);

  std::vector<SessionEvent> observe(Seat seat, std::int64_t from_seq = 0) const;
  std::vector<SessionEvent> events() const;
  /// Blocks until an event with seq >= from_seq visible to the seat exists,
  /// the session ends, or the timeout passes. Returns true if events are ready.
  bool wait_for_events(Seat seat, std::int64_t from_seq, std::chrono::milliseconds timeout) const;

  SeatMaterials materials(Seat seat) const;
  std::optional<Seat> pending_proposal() const;
  bool ended() const;
  int current_trial() const;
  std::vector<TrialOutcome> outcomes() const;
  BoardState board() const;
  const SessionConfig& config() const { return config_; }
  std::int64_t next_seq() const;
  /// Messages sent by each seat in the current trial.
  int messages_in_trial(Seat seat) const;

 private:
  Session(SessionConfig config, EventSink sink, Clock clock);

  const TargetSolution& current_target() const;
  SessionEvent& emit(Actor actor, EventKind kind, std::set<Seat> visibility);
  void begin_trial(int index);
  TrialOutcome end_trial(EndReason reason);
  void check_timeout();
  void require_active() const;
  std::optional<TrialOutcome> handle_completion(Seat seat, bool confirm_only);
  void apply_command(const Command& cmd, bool& board_touched, bool& done_requested);

  SessionConfig config_;
  EventSink sink_;
  Clock clock_;

  mutable std::mutex mutex_;
  mutable std::condition_variable cv_;
  std::vector<SessionEvent> events_;
  std::vector<TrialOutcome> outcomes_;
  BoardState board_;
  int trial_ = 0;
  std::int64_t trial_started_ms_ = 0;
  std::optional<Seat> pending_;
  int helper_msgs_ = 0;
  int worker_msgs_ = 0;
  bool ended_ = false;
};

}  // namespace cgbench
