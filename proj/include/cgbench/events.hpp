#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>

#include <nlohmann/json.hpp>

#include "cgbench/board.hpp"
#include "cgbench/dsl.hpp"

namespace cgbench {

enum class Seat { Helper, Worker };
enum class Actor { Helper, Worker, System };
enum class ViewCondition { Shared, NonShared };
enum class EndReason { AgreedComplete, Timeout, Aborted };

std::string_view to_string(Seat s);
std::string_view to_string(Actor a);
std::string_view to_string(ViewCondition v);
std::string_view to_string(EndReason r);
Seat seat_from_string(std::string_view s);
Actor actor_from_string(std::string_view s);
ViewCondition view_from_string(std::string_view s);
EndReason end_reason_from_string(std::string_view s);

inline Seat other(Seat s) { return s == Seat::Helper ? Seat::Worker : Seat::Helper; }
inline Actor actor_of(Seat s) { return s == Seat::Helper ? Actor::Helper : Actor::Worker; }

struct ChatEvent {
  std::string text;
  bool operator==(const ChatEvent&) const = default;
};

// result is "ok", "proposed"/"confirmed" for DONE, or the ErrorCode name of a
// rejected board operation.
struct ActionEvent {
  Command command;
  std::string result;
  bool operator==(const ActionEvent&) const = default;
};

struct SnapshotEvent {
  nlohmann::json board;
  bool operator==(const SnapshotEvent&) const = default;
};

struct TrialStartEvent {
  bool practice = false;
  bool operator==(const TrialStartEvent&) const = default;
};

struct TrialEndEvent {
  bool success = false;
  EndReason reason = EndReason::AgreedComplete;
  bool operator==(const TrialEndEvent&) const = default;
};

struct SessionEndEvent {
  std::string reason;  // "completed" or "aborted: ..."
  bool operator==(const SessionEndEvent&) const = default;
};

using EventKind =
    std::variant<ChatEvent, ActionEvent, SnapshotEvent, TrialStartEvent, TrialEndEvent, SessionEndEvent>;

struct SessionEvent {
  std::int64_t seq = 0;
  std::int64_t timestamp_ms = 0;
  int trial_index = 0;
  Actor actor = Actor::System;
  EventKind kind;
  std::set<Seat> visibility;

  bool visible_to(Seat s) const { return visibility.count(s) != 0; }

  template <typename T>
  const T* as() const {
    return std::get_if<T>(&kind);
  }
};

std::string_view kind_name(const EventKind& kind);

/// Field order is canonical (sorted keys). include_timestamp=false gives the
/// form used for determinism comparisons.
nlohmann::json event_to_json(const SessionEvent& e, bool include_timestamp = true);
SessionEvent event_from_json(const nlohmann::json& j);

struct TrialOutcome {
  int trial_index = 0;
  bool success = false;
  EndReason end_reason = EndReason::AgreedComplete;
  BoardState final_board;
};

nlohmann::json outcome_to_json(const TrialOutcome& o);
TrialOutcome outcome_from_json(const nlohmann::json& j, const std::set<PieceId>& universe);

}  // namespace cgbench
