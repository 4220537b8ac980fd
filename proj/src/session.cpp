#include "cgbench/session.hpp"

#include <algorithm>

#include "cgbench/error.hpp"

namespace cgbench {

using nlohmann::json;

namespace {

const std::set<Seat> kBoth{Seat::Helper, Seat::Worker};

}  // namespace

std::int64_t wall_clock_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

void SessionConfig::validate() const {
  if (!bench) throw BenchError(ErrorCode::InvalidConfig, "session has no catalog/trial set");
  if (!(trial_time_limit_s > 0.0)) throw BenchError(ErrorCode::InvalidConfig, "trial_time_limit must be > 0");
  int helpers = 0;
  int workers = 0;
  int humans = 0;
  for (const auto& b : seats) {
    (b.seat == Seat::Helper ? helpers : workers)++;
    if (b.agent.is_human()) ++humans;
    if (b.agent.kind == AgentKind::NoisyOracle && !(b.agent.error_rate >= 0.0 && b.agent.error_rate <= 1.0)) {
      throw BenchError(ErrorCode::InvalidConfig, "error_rate must lie in [0,1]");
    }
  }
  if (helpers != 1 || workers != 1) {
    throw BenchError(ErrorCode::InvalidConfig, "need exactly one helper and one worker seat, got " +
                                                   std::to_string(helpers) + " helper(s) and " +
                                                   std::to_string(workers) + " worker(s)");
  }
  if (humans > 1) throw BenchError(ErrorCode::InvalidConfig, "at most one human seat per session");
  if (auto h = human_seat(); h && *h != participant_seat) {
    throw BenchError(ErrorCode::InvalidConfig, "participant_seat must be the human seat");
  }
}

const AgentSpec& SessionConfig::agent(Seat seat) const {
  for (const auto& b : seats) {
    if (b.seat == seat) return b.agent;
  }
  throw BenchError(ErrorCode::InvalidSeat, "no binding for seat " + std::string(to_string(seat)));
}

std::optional<Seat> SessionConfig::human_seat() const {
  for (const auto& b : seats) {
    if (b.agent.is_human()) return b.seat;
  }
  return std::nullopt;
}

json config_to_json(const SessionConfig& cfg) {
  json seats = json::array();
  for (const auto& b : cfg.seats) {
    seats.push_back(json{{"seat", to_string(b.seat)}, {"agent", format_agent_spec(b.agent)}});
  }
  auto human = cfg.human_seat();
  return json{{"session_id", cfg.session_id},
              {"view", to_string(cfg.view)},
              {"participant_seat", to_string(cfg.participant_seat)},
              {"human_role", human ? json(to_string(*human)) : json(nullptr)},
              {"seats", std::move(seats)},
              {"trial_time_limit_s", cfg.trial_time_limit_s}};
}

SessionConfig config_from_json(const json& j, std::shared_ptr<const BenchConfig> bench) {
  try {
    SessionConfig cfg;
    cfg.session_id = j.at("session_id").get<std::string>();
    cfg.view = view_from_string(j.at("view").get<std::string>());
    cfg.participant_seat = seat_from_string(j.at("participant_seat").get<std::string>());
    cfg.trial_time_limit_s = j.at("trial_time_limit_s").get<double>();
    for (const auto& s : j.at("seats")) {
      Seat seat = seat_from_string(s.at("seat").get<std::string>());
      cfg.seats.push_back(SeatBinding{seat, parse_agent_spec(s.at("agent").get<std::string>(), seat)});
    }
    cfg.bench = std::move(bench);
    return cfg;
  } catch (const json::exception& e) {
    throw BenchError(ErrorCode::InvalidConfig, std::string("session config: ") + e.what());
  }
}

json materials_to_json(const SeatMaterials& m) {
  json j{{"seat", to_string(m.seat)},
         {"trial", m.trial_index},
         {"grid", {{"rows", m.grid.rows}, {"cols", m.grid.cols}}},
         {"rotation_sensitive", m.rotation_sensitive}};
  auto piece_json = [](const Piece& p) {
    return json{{"id", p.id}, {"color", p.color}, {"pattern", p.pattern}, {"image_ref", p.image_ref}};
  };
  if (m.target) {
    json placements = json::array();
    for (const auto& p : m.target->placements) placements.push_back(placement_to_json(p));
    json pieces = json::array();
    for (const auto& p : m.target_pieces) pieces.push_back(piece_json(p));
    j["target"] = json{{"placements", std::move(placements)}, {"pieces", std::move(pieces)}};
  }
  if (!m.palette.empty()) {
    json palette = json::array();
    for (const auto& p : m.palette) palette.push_back(piece_json(p));
    j["palette"] = std::move(palette);
  }
  if (m.board) j["board"] = board_to_json(*m.board);
  return j;
}

Session::Session(SessionConfig config, EventSink sink, Clock clock)
    : config_(std::move(config)), sink_(std::move(sink)), clock_(std::move(clock)) {}

std::shared_ptr<Session> Session::start(SessionConfig config, EventSink sink, Clock clock) {
  config.validate();
  if (!clock) clock = wall_clock_ms;
  std::shared_ptr<Session> s(new Session(std::move(config), std::move(sink), std::move(clock)));
  std::lock_guard lock(s->mutex_);
  s->begin_trial(0);
  return s;
}

const TargetSolution& Session::current_target() const { return config_.bench->trials.trial(trial_); }

SessionEvent& Session::emit(Actor actor, EventKind kind, std::set<Seat> visibility) {
  SessionEvent e;
  e.seq = static_cast<std::int64_t>(events_.size());
  e.timestamp_ms = clock_();
  e.trial_index = trial_;
  e.actor = actor;
  e.kind = std::move(kind);
  e.visibility = std::move(visibility);
  if (sink_) sink_(e);
  events_.push_back(std::move(e));
  cv_.notify_all();
  return events_.back();
}

void Session::begin_trial(int index) {
  trial_ = index;
  board_ = BoardState::empty(config_.bench->catalog, config_.bench->trials.grid);
  pending_.reset();
  helper_msgs_ = 0;
  worker_msgs_ = 0;
  trial_started_ms_ = clock_();
  emit(Actor::System, TrialStartEvent{index == 0}, kBoth);
}

TrialOutcome Session::end_trial(EndReason reason) {
  TrialOutcome outcome;
  outcome.trial_index = trial_;
  outcome.success = exact_match(board_, current_target(), config_.bench->trials.rotation_sensitive);
  outcome.end_reason = reason;
  outcome.final_board = board_;
  emit(Actor::System, TrialEndEvent{outcome.success, reason}, kBoth);
  outcomes_.push_back(outcome);
  pending_.reset();
  if (reason != EndReason::Aborted || !ended_) {
    if (static_cast<std::size_t>(trial_ + 1) < config_.bench->trials.total_trials()) {
      begin_trial(trial_ + 1);
    } else {
      ended_ = true;
      emit(Actor::System, SessionEndEvent{"completed"}, kBoth);
    }
  }
  return outcome;
}

void Session::check_timeout() {
  if (ended_) return;
  const double elapsed_s = static_cast<double>(clock_() - trial_started_ms_) / 1000.0;
  if (elapsed_s >= config_.trial_time_limit_s) end_trial(EndReason::Timeout);
}

void Session::require_active() const {
  if (ended_) throw BenchError(ErrorCode::SessionEnded, "session " + config_.session_id + " has ended");
}

void Session::tick() {
  std::lock_guard lock(mutex_);
  check_timeout();
}

void Session::abort_trial(const std::string& reason) {
  std::lock_guard lock(mutex_);
  require_active();
  emit(Actor::System, ChatEvent{"Trial aborted: " + reason}, kBoth);
  end_trial(EndReason::Aborted);
}

void Session::abort(const std::string& reason) {
  std::lock_guard lock(mutex_);
  if (ended_) return;
  emit(Actor::System, ChatEvent{"Session aborted: " + reason}, kBoth);
  ended_ = true;
  end_trial(EndReason::Aborted);
  emit(Actor::System, SessionEndEvent{"aborted: " + reason}, kBoth);
}

void Session::apply_command(const Command& cmd, bool& board_touched, bool& done_requested) {
  std::string result = "ok";
  if (std::holds_alternative<DoneCmd>(cmd)) {
    done_requested = true;
    result = pending_ == Seat::Helper ? "confirmed" : "proposed";
  } else if (is_board_command(cmd)) {
    board_touched = true;
    try {
      if (auto* p = std::get_if<PlaceCmd>(&cmd)) {
        board_.place(p->piece, p->row, p->col);
      } else if (auto* r = std::get_if<RotateCmd>(&cmd)) {
        board_.rotate(r->piece, r->degrees);
      } else if (auto* rm = std::get_if<RemoveCmd>(&cmd)) {
        board_.remove(rm->piece);
      }
    } catch (const BenchError& e) {
      result = std::string(to_string(e.code()));
    }
  }
  emit(Actor::Worker, ActionEvent{cmd, result}, {Seat::Worker});
  if (is_board_command(cmd) && result == "ok" && pending_) {
    pending_.reset();
    emit(Actor::System, ChatEvent{"Completion proposal withdrawn: the board changed."}, kBoth);
  }
}

SubmitResult Session::submit_message(Seat seat, std::string_view text) {
  std::lock_guard lock(mutex_);
  check_timeout();
  require_active();

  int& mine = seat == Seat::Helper ? helper_msgs_ : worker_msgs_;
  const int theirs = seat == Seat::Helper ? worker_msgs_ : helper_msgs_;
  if (mine > 0 && theirs == 0) {
    throw BenchError(ErrorCode::AwaitingPartner,
                     std::string(to_string(seat)) + " must wait for the partner's first message in this trial");
  }

  SubmitResult result;
  result.first_seq = emit(actor_of(seat), ChatEvent{std::string(text)}, kBoth).seq;
  ++mine;

  if (seat == Seat::Worker) {
    ParseResult parsed = parse_commands(text);
    bool board_touched = false;
    bool done_requested = false;
    for (const auto& cmd : parsed.commands) apply_command(cmd, board_touched, done_requested);
    result.actions = parsed.commands.size();
    for (const auto& err : parsed.errors) {
      emit(Actor::System, ChatEvent{describe_error(err)}, {Seat::Worker});
    }
    result.errors = std::move(parsed.errors);

    if (board_touched && config_.view == ViewCondition::Shared) {
      emit(Actor::System, SnapshotEvent{board_to_json(board_)}, {Seat::Helper});
    }
    if (done_requested) result.ended_trial = handle_completion(Seat::Worker, false);
  }
  result.last_seq = static_cast<std::int64_t>(events_.size()) - 1;
  return result;
}

std::optional<TrialOutcome> Session::handle_completion(Seat seat, bool confirm_only) {
  if (pending_ && *pending_ == other(seat)) {
    emit(Actor::System, ChatEvent{std::string(to_string(seat)) + " confirms the puzzle is complete."}, kBoth);
    return end_trial(EndReason::AgreedComplete);
  }
  if (confirm_only) {
    throw BenchError(ErrorCode::NothingToConfirm,
                     std::string(to_string(seat)) + " has no partner proposal to confirm");
  }
  if (!pending_) {
    pending_ = seat;
    emit(Actor::System, ChatEvent{std::string(to_string(seat)) + " proposes that the puzzle is complete."}, kBoth);
  }
  return std::nullopt;
}

CompletionResult Session::propose_complete(Seat seat) {
  std::lock_guard lock(mutex_);
  check_timeout();
  require_active();
  return CompletionResult{handle_completion(seat, false)};
}

CompletionResult Session::confirm_complete(Seat seat) {
  std::lock_guard lock(mutex_);
  check_timeout();
  require_active();
  return CompletionResult{handle_completion(seat, true)};
}

std::vector<SessionEvent> Session::observe(Seat seat, std::int64_t from_seq) const {
  std::lock_guard lock(mutex_);
  std::vector<SessionEvent> out;
  for (std::size_t i = static_cast<std::size_t>(std::max<std::int64_t>(0, from_seq)); i < events_.size(); ++i) {
    if (events_[i].visible_to(seat)) out.push_back(events_[i]);
  }
  return out;
}

std::vector<SessionEvent> Session::events() const {
  std::lock_guard lock(mutex_);
  return events_;
}

bool Session::wait_for_events(Seat seat, std::int64_t from_seq, std::chrono::milliseconds timeout) const {
  std::unique_lock lock(mutex_);
  auto ready = [&] {
    for (std::size_t i = static_cast<std::size_t>(std::max<std::int64_t>(0, from_seq)); i < events_.size(); ++i) {
      if (events_[i].visible_to(seat)) return true;
    }
    return ended_;
  };
  return cv_.wait_for(lock, timeout, ready);
}

SeatMaterials Session::materials(Seat seat) const {
  std::lock_guard lock(mutex_);
  SeatMaterials m;
  m.seat = seat;
  m.trial_index = trial_;
  m.grid = config_.bench->trials.grid;
  m.rotation_sensitive = config_.bench->trials.rotation_sensitive;
  if (seat == Seat::Helper) {
    m.target = current_target();
    for (const auto& p : m.target->placements) m.target_pieces.push_back(config_.bench->catalog.at(p.piece_id));
  } else {
    m.palette = config_.bench->catalog.pieces();
    m.board = board_;
  }
  return m;
}

std::optional<Seat> Session::pending_proposal() const {
  std::lock_guard lock(mutex_);
  return pending_;
}

bool Session::ended() const {
  std::lock_guard lock(mutex_);
  return ended_;
}

int Session::current_trial() const {
  std::lock_guard lock(mutex_);
  return trial_;
}

std::vector<TrialOutcome> Session::outcomes() const {
  std::lock_guard lock(mutex_);
  return outcomes_;
}

BoardState Session::board() const {
  std::lock_guard lock(mutex_);
  return board_;
}

std::int64_t Session::next_seq() const {
  std::lock_guard lock(mutex_);
  return static_cast<std::int64_t>(events_.size());
}

int Session::messages_in_trial(Seat seat) const {
  std::lock_guard lock(mutex_);
  return seat == Seat::Helper ? helper_msgs_ : worker_msgs_;
}

}  // namespace cgbench
