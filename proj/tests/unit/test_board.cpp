#include <doctest.h>

#include "cgbench/board.hpp"
#include "cgbench/error.hpp"
#include "cgbench/rng.hpp"
#include "test_support.hpp"

using namespace cgbench;

namespace {

ErrorCode error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const BenchError& e) {
    return e.code();
  }
  FAIL("expected BenchError");
  return ErrorCode::Io;
}

void check_partition(const BoardState& b, const std::set<PieceId>& universe) {
  std::set<PieceId> on_board;
  for (const auto& [cell, placed] : b.cells()) {
    CHECK(b.grid().contains(cell.row, cell.col));
    CHECK(on_board.insert(placed.piece_id).second);
    CHECK(b.available().count(placed.piece_id) == 0);
  }
  std::set<PieceId> all = on_board;
  all.insert(b.available().begin(), b.available().end());
  CHECK(all == universe);
}

}  // namespace

TEST_SUITE("board") {
  TEST_CASE("place rotate remove") {
    BoardState b(GridSize{3, 3}, {0, 7, 10, 18});
    b.place(18, 0, 0);
    REQUIRE(b.at(0, 0).has_value());
    CHECK(b.at(0, 0)->piece_id == 18);
    CHECK(b.available().count(18) == 0);
    b.rotate(18, 90);
    b.rotate(18, 270);
    CHECK(b.at(0, 0)->rotation == 0);
    b.rotate(18, 180);
    CHECK(b.at(0, 0)->rotation == 180);
    b.remove(18);
    CHECK(b.placed_count() == 0);
    CHECK(b.available().count(18) == 1);
    // rotation does not survive a trip back to the palette
    b.place(18, 2, 2);
    CHECK(b.at(2, 2)->rotation == 0);
  }

  TEST_CASE("errors leave the board unchanged") {
    BoardState b(GridSize{3, 3}, {0, 7, 10, 18});
    b.place(0, 1, 1);
    b.rotate(0, 90);
    const BoardState before = b;
    CHECK(error_of([&] { b.place(99, 0, 0); }) == ErrorCode::UnknownPiece);
    CHECK(error_of([&] { b.place(7, 3, 0); }) == ErrorCode::OutOfBounds);
    CHECK(error_of([&] { b.place(7, -1, 0); }) == ErrorCode::OutOfBounds);
    CHECK(error_of([&] { b.place(0, 0, 0); }) == ErrorCode::AlreadyPlaced);
    CHECK(error_of([&] { b.place(7, 1, 1); }) == ErrorCode::CellOccupied);
    CHECK(error_of([&] { b.rotate(0, 45); }) == ErrorCode::InvalidAngle);
    CHECK(error_of([&] { b.rotate(0, 360); }) == ErrorCode::InvalidAngle);
    CHECK(error_of([&] { b.rotate(7, 90); }) == ErrorCode::NotPlaced);
    CHECK(error_of([&] { b.remove(7); }) == ErrorCode::NotPlaced);
    CHECK(error_of([&] { b.remove(42); }) == ErrorCode::UnknownPiece);
    CHECK(b == before);
  }

  TEST_CASE("value forms do not touch the argument") {
    const BoardState b(GridSize{2, 2}, {0, 1});
    const BoardState placed = place(b, 0, 1, 0);
    CHECK(b.placed_count() == 0);
    CHECK(placed.placed_count() == 1);
    CHECK(rotate(placed, 0, 90).at(1, 0)->rotation == 90);
    CHECK(remove(placed, 0) == b);
  }

  TEST_CASE("random operation sequences keep every piece in exactly one place") {
    const std::set<PieceId> universe{0, 1, 2, 3, 4};
    Rng rng(20261016);
    for (int run = 0; run < 200; ++run) {
      BoardState b(GridSize{3, 3}, universe);
      for (int step = 0; step < 40; ++step) {
        const BoardState before = b;
        const PieceId id = static_cast<PieceId>(rng.below(7));  // 5, 6 are unknown
        try {
          switch (rng.below(3)) {
            case 0: b.place(id, static_cast<int>(rng.below(4)), static_cast<int>(rng.below(4))); break;
            case 1: b.rotate(id, static_cast<int>(rng.below(5)) * 90); break;
            default: b.remove(id); break;
          }
        } catch (const BenchError&) {
          CHECK(b == before);
        }
        check_partition(b, universe);
      }
    }
  }

  TEST_CASE("exact_match against brute-force set comparison") {
    const auto configs = testing::small_configurations();
    CHECK(configs.size() == 225);
    std::size_t disagreements = 0;
    std::size_t matches = 0;
    for (const auto& board_cfg : configs) {
      const BoardState board = testing::board_with(board_cfg);
      for (const auto& target_cfg : configs) {
        TargetSolution target;
        target.placements = target_cfg;
        for (bool sensitive : {true, false}) {
          const bool got = exact_match(board, target, sensitive);
          if (got != testing::brute_force_match(board, target_cfg, sensitive)) ++disagreements;
          if (got) ++matches;
        }
      }
    }
    CHECK(disagreements == 0);
    // sensitive: 225 diagonal hits; insensitive: each board matches every
    // rotation variant of itself
    CHECK(matches > 225);
  }

  TEST_CASE("exact_match examples") {
    const auto cfg = default_config();
    const auto& target = cfg.trials.trial(1);
    BoardState b = BoardState::empty(cfg.catalog, cfg.trials.grid);
    for (const auto& p : target.placements) {
      b.place(p.piece_id, p.row, p.col);
      if (p.rotation) b.rotate(p.piece_id, p.rotation);
    }
    CHECK(exact_match(b, target));
    b.rotate(18, 90);
    CHECK_FALSE(exact_match(b, target));
    CHECK(exact_match(b, target, false));
    b.place(1, 2, 2);
    CHECK_FALSE(exact_match(b, target, false));
  }

  TEST_CASE("snapshot json round trip") {
    BoardState b(GridSize{3, 3}, {0, 7, 10, 18});
    b.place(10, 0, 2);
    b.rotate(10, 270);
    b.place(7, 2, 1);
    const auto j = board_to_json(b);
    CHECK(j["cells"].size() == 2);
    CHECK(j["available"] == nlohmann::json::array({0, 18}));
    CHECK(board_from_json(j, {0, 7, 10, 18}) == b);

    auto bad = j;
    bad["available"].push_back(10);
    CHECK_THROWS_AS(board_from_json(bad, {0, 7, 10, 18}), BenchError);
  }
}
