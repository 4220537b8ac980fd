#include "cgbench/error.hpp"

namespace cgbench {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::MissingField: return "MissingField";
    case ErrorCode::CountMismatch: return "CountMismatch";
    case ErrorCode::UnknownPiece: return "UnknownPiece";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::PieceSetMismatch: return "PieceSetMismatch";
    case ErrorCode::InvalidPlacement: return "InvalidPlacement";
    case ErrorCode::CellOccupied: return "CellOccupied";
    case ErrorCode::AlreadyPlaced: return "AlreadyPlaced";
    case ErrorCode::NotPlaced: return "NotPlaced";
    case ErrorCode::InvalidAngle: return "InvalidAngle";
    case ErrorCode::MalformedCommand: return "MalformedCommand";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::AgentUnavailable: return "AgentUnavailable";
    case ErrorCode::SessionEnded: return "SessionEnded";
    case ErrorCode::AwaitingPartner: return "AwaitingPartner";
    case ErrorCode::NothingToConfirm: return "NothingToConfirm";
    case ErrorCode::InvalidSeat: return "InvalidSeat";
    case ErrorCode::SeqGap: return "SeqGap";
    case ErrorCode::HashMismatch: return "HashMismatch";
    case ErrorCode::CorruptLog: return "CorruptLog";
    case ErrorCode::EndpointError: return "EndpointError";
    case ErrorCode::ContextOverflow: return "ContextOverflow";
    case ErrorCode::EmptySample: return "EmptySample";
    case ErrorCode::ZeroMarginal: return "ZeroMarginal";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace cgbench
