#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cgbench {

enum class ErrorCode {
  DuplicateId,
  MissingField,
  CountMismatch,
  UnknownPiece,
  OutOfBounds,
  PieceSetMismatch,
  InvalidPlacement,
  CellOccupied,
  AlreadyPlaced,
  NotPlaced,
  InvalidAngle,
  MalformedCommand,
  InvalidConfig,
  AgentUnavailable,
  SessionEnded,
  AwaitingPartner,
  NothingToConfirm,
  InvalidSeat,
  SeqGap,
  HashMismatch,
  CorruptLog,
  EndpointError,
  ContextOverflow,
  EmptySample,
  ZeroMarginal,
  InsufficientData,
  Io,
};

std::string_view to_string(ErrorCode code);

// All recoverable failures in the library carry an ErrorCode so callers
// (session engine, protocol layer, CLI) can map them without string matching.
class BenchError : public std::runtime_error {
 public:
  BenchError(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace cgbench
