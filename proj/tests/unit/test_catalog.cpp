#include <doctest.h>

#include "cgbench/catalog.hpp"
#include "cgbench/error.hpp"
#include "test_support.hpp"

using namespace cgbench;
using nlohmann::json;

namespace {

ErrorCode load_error(const json& doc) {
  try {
    load_config(doc);
  } catch (const BenchError& e) {
    return e.code();
  }
  FAIL("expected load_config to throw");
  return ErrorCode::Io;
}

}  // namespace

TEST_SUITE("catalog") {
  TEST_CASE("default configuration shape") {
    const BenchConfig cfg = default_config();
    CHECK(cfg.catalog.size() == 24);
    CHECK(cfg.catalog.colors().size() == 6);
    CHECK(cfg.catalog.patterns().size() == 4);
    CHECK(cfg.trials.total_trials() == 5);
    CHECK(cfg.trials.grid == GridSize{3, 3});
    CHECK(cfg.trials.practice.piece_ids() == std::set<PieceId>{0, 7, 10, 18});
    for (int i = 0; i < 5; ++i) {
      const auto& t = cfg.trials.trial(i);
      CHECK(t.trial_index == i);
      CHECK(t.placements.size() == kPlacementsPerTarget);
      CHECK(t.piece_ids() == std::set<PieceId>{0, 7, 10, 18});
    }
    CHECK_THROWS_AS(cfg.trials.trial(5), BenchError);
    CHECK(cfg.catalog.at(18).pattern == "stripes");
  }

  TEST_CASE("lexicon is the union of colors and patterns") {
    const auto cat = default_config().catalog;
    std::set<std::string> expected = cat.colors();
    expected.insert(cat.patterns().begin(), cat.patterns().end());
    CHECK(cat.lexicon() == expected);
    CHECK(cat.lexicon().count("pink") == 1);
    CHECK(cat.lexicon().count("spiral") == 1);
  }

  TEST_CASE("canonical round trip is byte stable") {
    const BenchConfig cfg = default_config();
    const std::string first = canonical_dump(save_config(cfg.catalog, cfg.trials));
    const BenchConfig again = load_config(json::parse(first));
    const std::string second = canonical_dump(save_config(again.catalog, again.trials));
    CHECK(first == second);
    CHECK(cfg.catalog_hash() == again.catalog_hash());
    CHECK(cfg.trial_set_hash() == again.trial_set_hash());
    CHECK(cfg.catalog_hash().size() == 64);
  }

  TEST_CASE("load from file and missing file") {
    testing::TempDir dir;
    const auto p = dir / "cfg.json";
    testing::write_file(p, default_config_document().dump());
    CHECK(load_config_file(p).catalog.size() == 24);
    try {
      load_config_file(dir / "nope.json");
      FAIL("expected Io");
    } catch (const BenchError& e) {
      CHECK(e.code() == ErrorCode::Io);
    }
    testing::write_file(p, "{not json");
    CHECK_THROWS_AS(load_config_file(p), BenchError);
  }

  TEST_CASE("hash changes when the catalog changes") {
    json doc = default_config_document();
    const auto base = load_config(doc);
    doc["pieces"][3]["color"] = "purple";
    const auto altered = load_config(doc);
    CHECK(base.catalog_hash() != altered.catalog_hash());
    CHECK(base.trial_set_hash() == altered.trial_set_hash());
  }

  TEST_CASE("validation errors") {
    const json base = default_config_document();

    json dup = base;
    dup["pieces"][1]["id"] = 0;
    CHECK(load_error(dup) == ErrorCode::DuplicateId);

    json missing = base;
    missing["pieces"][2].erase("color");
    CHECK(load_error(missing) == ErrorCode::MissingField);

    json no_count = base;
    no_count.erase("count");
    CHECK(load_error(no_count) == ErrorCode::MissingField);

    json count = base;
    count["count"] = 23;
    CHECK(load_error(count) == ErrorCode::CountMismatch);

    json unknown = base;
    unknown["trials"][0][0]["piece_id"] = 99;
    CHECK(load_error(unknown) == ErrorCode::UnknownPiece);

    json oob = base;
    oob["trials"][1][0]["row"] = 3;
    CHECK(load_error(oob) == ErrorCode::OutOfBounds);

    json angle = base;
    angle["trials"][2][0]["rotation"] = 45;
    CHECK(load_error(angle) == ErrorCode::InvalidAngle);

    json mismatch = base;
    mismatch["trials"][3][0]["piece_id"] = 1;
    CHECK(load_error(mismatch) == ErrorCode::PieceSetMismatch);

    json shared_cell = base;
    shared_cell["trials"][0][1]["row"] = shared_cell["trials"][0][0]["row"];
    shared_cell["trials"][0][1]["col"] = shared_cell["trials"][0][0]["col"];
    CHECK(load_error(shared_cell) == ErrorCode::InvalidPlacement);

    json few = base;
    few["trials"][0].erase(0);
    CHECK(load_error(few) == ErrorCode::InvalidPlacement);
  }

  TEST_CASE("placement json round trip") {
    const Placement p{18, 2, 1, 270};
    CHECK(placement_from_json(placement_to_json(p)) == p);
  }
}
