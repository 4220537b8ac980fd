#include "cgbench/board.hpp"

#include <string>

#include "cgbench/error.hpp"

namespace cgbench {

using nlohmann::json;

BoardState::BoardState(GridSize grid, std::set<PieceId> pieces)
    : grid_(grid), available_(pieces), universe_(std::move(pieces)) {}

BoardState BoardState::empty(const PieceCatalog& catalog, GridSize grid) {
  return BoardState(grid, catalog.ids());
}

void BoardState::place(PieceId piece, int row, int col) {
  if (universe_.count(piece) == 0) {
    throw BenchError(ErrorCode::UnknownPiece, "piece " + std::to_string(piece));
  }
  if (!grid_.contains(row, col)) {
    throw BenchError(ErrorCode::OutOfBounds,
                     "(" + std::to_string(row) + "," + std::to_string(col) + ")");
  }
  if (available_.count(piece) == 0) {
    throw BenchError(ErrorCode::AlreadyPlaced, "piece " + std::to_string(piece));
  }
  const Cell cell{row, col};
  if (cells_.count(cell) != 0) {
    throw BenchError(ErrorCode::CellOccupied,
                     "(" + std::to_string(row) + "," + std::to_string(col) + ")");
  }
  cells_.emplace(cell, PlacedPiece{piece, 0});
  available_.erase(piece);
}

void BoardState::rotate(PieceId piece, int degrees) {
  if (universe_.count(piece) == 0) {
    throw BenchError(ErrorCode::UnknownPiece, "piece " + std::to_string(piece));
  }
  if (degrees != 90 && degrees != 180 && degrees != 270) {
    throw BenchError(ErrorCode::InvalidAngle, std::to_string(degrees));
  }
  auto pos = position_of(piece);
  if (!pos) throw BenchError(ErrorCode::NotPlaced, "piece " + std::to_string(piece));
  auto& placed = cells_.at(*pos);
  placed.rotation = (placed.rotation + degrees) % 360;
}

void BoardState::remove(PieceId piece) {
  if (universe_.count(piece) == 0) {
    throw BenchError(ErrorCode::UnknownPiece, "piece " + std::to_string(piece));
  }
  auto pos = position_of(piece);
  if (!pos) throw BenchError(ErrorCode::NotPlaced, "piece " + std::to_string(piece));
  cells_.erase(*pos);
  available_.insert(piece);
}

std::optional<PlacedPiece> BoardState::at(int row, int col) const {
  auto it = cells_.find(Cell{row, col});
  if (it == cells_.end()) return std::nullopt;
  return it->second;
}

std::optional<Cell> BoardState::position_of(PieceId piece) const {
  for (const auto& [cell, placed] : cells_) {
    if (placed.piece_id == piece) return cell;
  }
  return std::nullopt;
}

std::vector<Placement> BoardState::placements() const {
  std::vector<Placement> out;
  out.reserve(cells_.size());
  for (const auto& [cell, placed] : cells_) {
    out.push_back(Placement{placed.piece_id, cell.row, cell.col, placed.rotation});
  }
  return out;
}

BoardState place(BoardState board, PieceId piece, int row, int col) {
  board.place(piece, row, col);
  return board;
}

BoardState rotate(BoardState board, PieceId piece, int degrees) {
  board.rotate(piece, degrees);
  return board;
}

BoardState remove(BoardState board, PieceId piece) {
  board.remove(piece);
  return board;
}

bool exact_match(const BoardState& board, const TargetSolution& target, bool rotation_sensitive) {
  if (board.placed_count() != target.placements.size()) return false;
  for (const auto& want : target.placements) {
    auto got = board.at(want.row, want.col);
    if (!got || got->piece_id != want.piece_id) return false;
    if (rotation_sensitive && got->rotation != want.rotation) return false;
  }
  return true;
}

json board_to_json(const BoardState& board) {
  json cells = json::array();
  for (const auto& p : board.placements()) {
    cells.push_back(json{{"row", p.row}, {"col", p.col}, {"piece_id", p.piece_id}, {"rotation", p.rotation}});
  }
  json available = json::array();
  for (PieceId id : board.available()) available.push_back(id);
  return json{{"grid", {{"rows", board.grid().rows}, {"cols", board.grid().cols}}},
              {"cells", std::move(cells)},
              {"available", std::move(available)}};
}

BoardState board_from_json(const json& j, const std::set<PieceId>& universe) {
  try {
    GridSize grid{j.at("grid").at("rows").get<int>(), j.at("grid").at("cols").get<int>()};
    BoardState board(grid, universe);
    for (const auto& c : j.at("cells")) {
      const PieceId id = c.at("piece_id").get<int>();
      board.place(id, c.at("row").get<int>(), c.at("col").get<int>());
      int rot = c.at("rotation").get<int>();
      if (rot != 0) board.rotate(id, rot);
    }
    std::set<PieceId> available;
    for (const auto& id : j.at("available")) available.insert(id.get<int>());
    if (available != board.available()) {
      throw BenchError(ErrorCode::CorruptLog, "board snapshot palette inconsistent with cells");
    }
    return board;
  } catch (const json::exception& e) {
    throw BenchError(ErrorCode::CorruptLog, std::string("board snapshot: ") + e.what());
  }
}

}  // namespace cgbench
