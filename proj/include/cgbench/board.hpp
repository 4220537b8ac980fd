#pragma once

#include <map>
#include <optional>
#include <set>
#include <utility>

#include <nlohmann/json.hpp>

#include "cgbench/catalog.hpp"

namespace cgbench {

struct Cell {
  int row = 0;
  int col = 0;
  auto operator<=>(const Cell&) const = default;
};

struct PlacedPiece {
  PieceId piece_id = 0;
  int rotation = 0;
  bool operator==(const PlacedPiece&) const = default;
};

/// The Worker's work area. Every catalog piece is either on the board
/// (exactly once) or in the available palette, never both.
class BoardState {
 public:
  BoardState() = default;
  BoardState(GridSize grid, std::set<PieceId> pieces);

  static BoardState empty(const PieceCatalog& catalog, GridSize grid);

  // Mutators keep the strong exception guarantee: on error the board is unchanged.
  void place(PieceId piece, int row, int col);
  void rotate(PieceId piece, int degrees);
  void remove(PieceId piece);

  GridSize grid() const { return grid_; }
  const std::map<Cell, PlacedPiece>& cells() const { return cells_; }
  const std::set<PieceId>& available() const { return available_; }
  std::optional<PlacedPiece> at(int row, int col) const;
  std::optional<Cell> position_of(PieceId piece) const;
  bool is_placed(PieceId piece) const { return position_of(piece).has_value(); }
  std::size_t placed_count() const { return cells_.size(); }

  /// Board contents as placements, sorted by (row, col).
  std::vector<Placement> placements() const;

  bool operator==(const BoardState&) const = default;

 private:
  GridSize grid_;
  std::map<Cell, PlacedPiece> cells_;
  std::set<PieceId> available_;
  std::set<PieceId> universe_;
};

// Value-returning forms of the board operations.
BoardState place(BoardState board, PieceId piece, int row, int col);
BoardState rotate(BoardState board, PieceId piece, int degrees);
BoardState remove(BoardState board, PieceId piece);

/// True iff the board's placements equal the target's set exactly. With
/// rotation_sensitive = false, orientation is ignored on both sides.
bool exact_match(const BoardState& board, const TargetSolution& target, bool rotation_sensitive = true);

/// Canonical snapshot: {available, cells: [{col, piece_id, row, rotation}], grid: {cols, rows}}.
nlohmann::json board_to_json(const BoardState& board);
BoardState board_from_json(const nlohmann::json& j, const std::set<PieceId>& universe);

}  // namespace cgbench
