#include "cgbench/events.hpp"

#include "cgbench/error.hpp"

namespace cgbench {

using nlohmann::json;

std::string_view to_string(Seat s) { return s == Seat::Helper ? "helper" : "worker"; }

std::string_view to_string(Actor a) {
  switch (a) {
    case Actor::Helper: return "helper";
    case Actor::Worker: return "worker";
    case Actor::System: return "system";
  }
  return "system";
}

std::string_view to_string(ViewCondition v) { return v == ViewCondition::Shared ? "shared" : "nonshared"; }

std::string_view to_string(EndReason r) {
  switch (r) {
    case EndReason::AgreedComplete: return "agreed_complete";
    case EndReason::Timeout: return "timeout";
    case EndReason::Aborted: return "aborted";
  }
  return "aborted";
}

Seat seat_from_string(std::string_view s) {
  if (s == "helper") return Seat::Helper;
  if (s == "worker") return Seat::Worker;
  throw BenchError(ErrorCode::InvalidSeat, "unknown seat '" + std::string(s) + "'");
}

Actor actor_from_string(std::string_view s) {
  if (s == "system") return Actor::System;
  return actor_of(seat_from_string(s));
}

ViewCondition view_from_string(std::string_view s) {
  if (s == "shared") return ViewCondition::Shared;
  if (s == "nonshared" || s == "non-shared" || s == "non_shared") return ViewCondition::NonShared;
  throw BenchError(ErrorCode::InvalidConfig, "unknown view condition '" + std::string(s) + "'");
}

EndReason end_reason_from_string(std::string_view s) {
  if (s == "agreed_complete") return EndReason::AgreedComplete;
  if (s == "timeout") return EndReason::Timeout;
  if (s == "aborted") return EndReason::Aborted;
  throw BenchError(ErrorCode::CorruptLog, "unknown end reason '" + std::string(s) + "'");
}

std::string_view kind_name(const EventKind& kind) {
  struct Visitor {
    std::string_view operator()(const ChatEvent&) const { return "chat"; }
    std::string_view operator()(const ActionEvent&) const { return "action"; }
    std::string_view operator()(const SnapshotEvent&) const { return "snapshot"; }
    std::string_view operator()(const TrialStartEvent&) const { return "trial_start"; }
    std::string_view operator()(const TrialEndEvent&) const { return "trial_end"; }
    std::string_view operator()(const SessionEndEvent&) const { return "session_end"; }
  };
  return std::visit(Visitor{}, kind);
}

json event_to_json(const SessionEvent& e, bool include_timestamp) {
  json j{{"seq", e.seq}, {"trial", e.trial_index}, {"actor", to_string(e.actor)}, {"kind", kind_name(e.kind)}};
  if (include_timestamp) j["ts"] = e.timestamp_ms;
  json vis = json::array();
  for (Seat s : e.visibility) vis.push_back(to_string(s));
  j["visibility"] = std::move(vis);

  struct Visitor {
    json& j;
    void operator()(const ChatEvent& c) const { j["text"] = c.text; }
    void operator()(const ActionEvent& a) const {
      j["command"] = command_to_json(a.command);
      j["result"] = a.result;
    }
    void operator()(const SnapshotEvent& s) const { j["board"] = s.board; }
    void operator()(const TrialStartEvent& t) const { j["practice"] = t.practice; }
    void operator()(const TrialEndEvent& t) const {
      j["success"] = t.success;
      j["end_reason"] = to_string(t.reason);
    }
    void operator()(const SessionEndEvent& s) const { j["reason"] = s.reason; }
  };
  std::visit(Visitor{j}, e.kind);
  return j;
}

SessionEvent event_from_json(const json& j) {
  try {
    SessionEvent e;
    e.seq = j.at("seq").get<std::int64_t>();
    e.timestamp_ms = j.value("ts", std::int64_t{0});
    e.trial_index = j.at("trial").get<int>();
    e.actor = actor_from_string(j.at("actor").get<std::string>());
    for (const auto& s : j.at("visibility")) e.visibility.insert(seat_from_string(s.get<std::string>()));
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "chat") {
      e.kind = ChatEvent{j.at("text").get<std::string>()};
    } else if (kind == "action") {
      e.kind = ActionEvent{command_from_json(j.at("command")), j.at("result").get<std::string>()};
    } else if (kind == "snapshot") {
      e.kind = SnapshotEvent{j.at("board")};
    } else if (kind == "trial_start") {
      e.kind = TrialStartEvent{j.at("practice").get<bool>()};
    } else if (kind == "trial_end") {
      e.kind = TrialEndEvent{j.at("success").get<bool>(), end_reason_from_string(j.at("end_reason").get<std::string>())};
    } else if (kind == "session_end") {
      e.kind = SessionEndEvent{j.at("reason").get<std::string>()};
    } else {
      throw BenchError(ErrorCode::CorruptLog, "unknown event kind '" + kind + "'");
    }
    return e;
  } catch (const json::exception& ex) {
    throw BenchError(ErrorCode::CorruptLog, std::string("event: ") + ex.what());
  } catch (const BenchError& ex) {
    if (ex.code() == ErrorCode::CorruptLog) throw;
    throw BenchError(ErrorCode::CorruptLog, ex.what());
  }
}

json outcome_to_json(const TrialOutcome& o) {
  return json{{"trial", o.trial_index},
              {"success", o.success},
              {"end_reason", to_string(o.end_reason)},
              {"final_board", board_to_json(o.final_board)}};
}

TrialOutcome outcome_from_json(const json& j, const std::set<PieceId>& universe) {
  try {
    TrialOutcome o;
    o.trial_index = j.at("trial").get<int>();
    o.success = j.at("success").get<bool>();
    o.end_reason = end_reason_from_string(j.at("end_reason").get<std::string>());
    o.final_board = board_from_json(j.at("final_board"), universe);
    return o;
  } catch (const json::exception& ex) {
    throw BenchError(ErrorCode::CorruptLog, std::string("outcome: ") + ex.what());
  }
}

}  // namespace cgbench
