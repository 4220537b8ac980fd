#include "cgbench/catalog.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "cgbench/error.hpp"
#include "cgbench/hash.hpp"

namespace cgbench {

namespace detail {
const std::string& embedded_asset(const std::string& name);
}

using nlohmann::json;

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

const json& require(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw BenchError(ErrorCode::MissingField, where + ": missing '" + key + "'");
  }
  return obj.at(key);
}

int require_int(const json& obj, const char* key, const std::string& where) {
  const json& v = require(obj, key, where);
  if (!v.is_number_integer()) {
    throw BenchError(ErrorCode::InvalidConfig, where + ": '" + key + "' must be an integer");
  }
  return v.get<int>();
}

std::string require_token(const json& obj, const char* key, const std::string& where) {
  const json& v = require(obj, key, where);
  if (!v.is_string() || v.get<std::string>().empty()) {
    throw BenchError(ErrorCode::MissingField, where + ": '" + key + "' must be a non-empty string");
  }
  return lower(v.get<std::string>());
}

bool valid_rotation(int deg) { return deg == 0 || deg == 90 || deg == 180 || deg == 270; }

TargetSolution parse_target(const json& list, int trial_index, const PieceCatalog& catalog,
                            const GridSize& grid) {
  const std::string where = "trial " + std::to_string(trial_index);
  if (!list.is_array()) {
    throw BenchError(ErrorCode::InvalidConfig, where + ": placements must be a list");
  }
  TargetSolution target;
  target.trial_index = trial_index;
  std::set<std::pair<int, int>> cells;
  std::set<PieceId> ids;
  for (const auto& item : list) {
    Placement p = placement_from_json(item);
    if (!catalog.contains(p.piece_id)) {
      throw BenchError(ErrorCode::UnknownPiece,
                       where + ": piece " + std::to_string(p.piece_id) + " not in catalog");
    }
    if (!grid.contains(p.row, p.col)) {
      throw BenchError(ErrorCode::OutOfBounds, where + ": (" + std::to_string(p.row) + "," +
                                                   std::to_string(p.col) + ") outside " +
                                                   std::to_string(grid.rows) + "x" +
                                                   std::to_string(grid.cols) + " grid");
    }
    if (!valid_rotation(p.rotation)) {
      throw BenchError(ErrorCode::InvalidAngle,
                       where + ": rotation " + std::to_string(p.rotation));
    }
    if (!cells.insert({p.row, p.col}).second) {
      throw BenchError(ErrorCode::InvalidPlacement, where + ": two placements share a cell");
    }
    if (!ids.insert(p.piece_id).second) {
      throw BenchError(ErrorCode::InvalidPlacement,
                       where + ": piece " + std::to_string(p.piece_id) + " placed twice");
    }
    target.placements.push_back(p);
  }
  if (target.placements.size() != kPlacementsPerTarget) {
    throw BenchError(ErrorCode::InvalidPlacement,
                     where + ": expected " + std::to_string(kPlacementsPerTarget) +
                         " placements, got " + std::to_string(target.placements.size()));
  }
  return target;
}

}  // namespace

PieceCatalog::PieceCatalog(std::vector<Piece> pieces) : pieces_(std::move(pieces)) {
  for (std::size_t i = 0; i < pieces_.size(); ++i) {
    const Piece& p = pieces_[i];
    if (!index_.emplace(p.id, i).second) {
      throw BenchError(ErrorCode::DuplicateId, "piece id " + std::to_string(p.id));
    }
    colors_.insert(p.color);
    patterns_.insert(p.pattern);
  }
}

const Piece& PieceCatalog::at(PieceId id) const {
  auto it = index_.find(id);
  if (it == index_.end()) {
    throw BenchError(ErrorCode::UnknownPiece, "piece " + std::to_string(id));
  }
  return pieces_[it->second];
}

std::set<PieceId> PieceCatalog::ids() const {
  std::set<PieceId> out;
  for (const auto& p : pieces_) out.insert(p.id);
  return out;
}

std::set<std::string> PieceCatalog::lexicon() const {
  std::set<std::string> out = colors_;
  out.insert(patterns_.begin(), patterns_.end());
  return out;
}

std::set<PieceId> TargetSolution::piece_ids() const {
  std::set<PieceId> out;
  for (const auto& p : placements) out.insert(p.piece_id);
  return out;
}

const TargetSolution& TrialSet::trial(int index) const {
  if (index == 0) return practice;
  if (index < 0 || static_cast<std::size_t>(index) > trials.size()) {
    throw BenchError(ErrorCode::InvalidConfig, "no trial " + std::to_string(index));
  }
  return trials[static_cast<std::size_t>(index) - 1];
}

json placement_to_json(const Placement& p) {
  return json{{"piece_id", p.piece_id}, {"row", p.row}, {"col", p.col}, {"rotation", p.rotation}};
}

Placement placement_from_json(const json& j) {
  const std::string where = "placement";
  Placement p;
  p.piece_id = require_int(j, "piece_id", where);
  p.row = require_int(j, "row", where);
  p.col = require_int(j, "col", where);
  p.rotation = j.contains("rotation") ? require_int(j, "rotation", where) : 0;
  return p;
}

PieceCatalog load_catalog(const json& doc) {
  const json& list = require(doc, "pieces", "catalog");
  if (!list.is_array()) {
    throw BenchError(ErrorCode::InvalidConfig, "catalog: 'pieces' must be a list");
  }
  const int declared = require_int(doc, "count", "catalog");
  std::vector<Piece> pieces;
  for (const auto& item : list) {
    const std::string where = "piece #" + std::to_string(pieces.size());
    Piece p;
    p.id = require_int(item, "id", where);
    if (p.id < 0) throw BenchError(ErrorCode::InvalidConfig, where + ": negative id");
    p.color = require_token(item, "color", where);
    p.pattern = require_token(item, "pattern", where);
    p.image_ref = item.contains("image_ref") && item["image_ref"].is_string()
                      ? item["image_ref"].get<std::string>()
                      : p.color + "_" + p.pattern;
    pieces.push_back(std::move(p));
  }
  if (pieces.empty()) throw BenchError(ErrorCode::InvalidConfig, "catalog: no pieces");
  if (static_cast<int>(pieces.size()) != declared) {
    throw BenchError(ErrorCode::CountMismatch, "catalog declares " + std::to_string(declared) +
                                                   " pieces, lists " +
                                                   std::to_string(pieces.size()));
  }
  return PieceCatalog(std::move(pieces));
}

TrialSet load_trial_set(const json& doc, const PieceCatalog& catalog) {
  TrialSet set;
  const json& grid = require(doc, "grid", "trial set");
  set.grid.rows = require_int(grid, "rows", "grid");
  set.grid.cols = require_int(grid, "cols", "grid");
  if (set.grid.rows < 2 || set.grid.cols < 2) {
    throw BenchError(ErrorCode::InvalidConfig, "grid must be at least 2x2");
  }
  if (doc.contains("rotation_sensitive")) set.rotation_sensitive = doc["rotation_sensitive"].get<bool>();

  set.practice = parse_target(require(doc, "practice", "trial set"), 0, catalog, set.grid);
  const json& trials = require(doc, "trials", "trial set");
  if (!trials.is_array() || trials.size() != kScoredTrials) {
    throw BenchError(ErrorCode::InvalidConfig,
                     "trial set: expected " + std::to_string(kScoredTrials) + " scored trials");
  }
  int index = 1;
  for (const auto& t : trials) set.trials.push_back(parse_target(t, index++, catalog, set.grid));

  const auto reference = set.trials.front().piece_ids();
  for (const auto& t : set.trials) {
    if (t.piece_ids() != reference) {
      throw BenchError(ErrorCode::PieceSetMismatch,
                       "trial " + std::to_string(t.trial_index) +
                           " uses a different piece set than trial 1");
    }
  }
  return set;
}

json save_catalog(const PieceCatalog& catalog) {
  json pieces = json::array();
  for (const auto& p : catalog.pieces()) {
    pieces.push_back(json{{"id", p.id}, {"color", p.color}, {"pattern", p.pattern}, {"image_ref", p.image_ref}});
  }
  return json{{"count", catalog.size()}, {"pieces", std::move(pieces)}};
}

json save_trial_set(const TrialSet& trials) {
  auto target_json = [](const TargetSolution& t) {
    json arr = json::array();
    for (const auto& p : t.placements) arr.push_back(placement_to_json(p));
    return arr;
  };
  json scored = json::array();
  for (const auto& t : trials.trials) scored.push_back(target_json(t));
  return json{{"grid", {{"rows", trials.grid.rows}, {"cols", trials.grid.cols}}},
              {"rotation_sensitive", trials.rotation_sensitive},
              {"practice", target_json(trials.practice)},
              {"trials", std::move(scored)}};
}

json save_config(const PieceCatalog& catalog, const TrialSet& trials) {
  json doc = save_catalog(catalog);
  doc.update(save_trial_set(trials));
  return doc;
}

std::string canonical_dump(const json& doc) { return doc.dump(2) + "\n"; }

std::string BenchConfig::catalog_hash() const {
  return sha256_hex(save_catalog(catalog).dump());
}

std::string BenchConfig::trial_set_hash() const {
  return sha256_hex(save_trial_set(trials).dump());
}

json default_config_document() { return json::parse(detail::embedded_asset("default_config.json")); }

BenchConfig load_config(const json& doc) {
  BenchConfig cfg;
  cfg.catalog = load_catalog(doc);
  cfg.trials = load_trial_set(doc, cfg.catalog);
  return cfg;
}

BenchConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw BenchError(ErrorCode::Io, "cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw BenchError(ErrorCode::InvalidConfig, path.string() + ": " + e.what());
  }
  return load_config(doc);
}

BenchConfig default_config() { return load_config(default_config_document()); }

}  // namespace cgbench
