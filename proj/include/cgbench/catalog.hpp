#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace cgbench {

using PieceId = int;

struct Piece {
  PieceId id = 0;
  std::string color;
  std::string pattern;
  std::string image_ref;

  bool operator==(const Piece&) const = default;
};

/// Inventory of puzzle pieces. Pieces keep their declared order; the lexicon
/// is the union of every color and pattern token.
class PieceCatalog {
 public:
  PieceCatalog() = default;
  explicit PieceCatalog(std::vector<Piece> pieces);

  const std::vector<Piece>& pieces() const { return pieces_; }
  std::size_t size() const { return pieces_.size(); }
  bool contains(PieceId id) const { return index_.count(id) != 0; }
  const Piece& at(PieceId id) const;
  std::set<PieceId> ids() const;

  const std::set<std::string>& colors() const { return colors_; }
  const std::set<std::string>& patterns() const { return patterns_; }
  std::set<std::string> lexicon() const;

 private:
  std::vector<Piece> pieces_;
  std::map<PieceId, std::size_t> index_;
  std::set<std::string> colors_;
  std::set<std::string> patterns_;
};

struct Placement {
  PieceId piece_id = 0;
  int row = 0;
  int col = 0;
  int rotation = 0;

  auto operator<=>(const Placement&) const = default;
};

struct TargetSolution {
  std::vector<Placement> placements;
  int trial_index = 0;

  std::set<PieceId> piece_ids() const;
};

struct GridSize {
  int rows = 3;
  int cols = 3;

  bool contains(int row, int col) const {
    return row >= 0 && col >= 0 && row < rows && col < cols;
  }
  bool operator==(const GridSize&) const = default;
};

/// Practice trial plus the four scored trials. Trial index 0 is the practice
/// puzzle; scored trials are 1..4.
struct TrialSet {
  TargetSolution practice;
  std::vector<TargetSolution> trials;
  GridSize grid;
  bool rotation_sensitive = true;

  std::size_t total_trials() const { return 1 + trials.size(); }
  const TargetSolution& trial(int index) const;
};

inline constexpr int kPlacementsPerTarget = 4;
inline constexpr int kScoredTrials = 4;

PieceCatalog load_catalog(const nlohmann::json& doc);
TrialSet load_trial_set(const nlohmann::json& doc, const PieceCatalog& catalog);

/// Canonical document for a catalog + trial set pair. Dumped with
/// canonical_dump() it is byte-stable.
nlohmann::json save_config(const PieceCatalog& catalog, const TrialSet& trials);
nlohmann::json save_catalog(const PieceCatalog& catalog);
nlohmann::json save_trial_set(const TrialSet& trials);

nlohmann::json placement_to_json(const Placement& p);
Placement placement_from_json(const nlohmann::json& j);

std::string canonical_dump(const nlohmann::json& doc);

/// Loaded configuration: the catalog and trial set always travel together.
struct BenchConfig {
  PieceCatalog catalog;
  TrialSet trials;

  std::string catalog_hash() const;
  std::string trial_set_hash() const;
};

nlohmann::json default_config_document();
BenchConfig load_config(const nlohmann::json& doc);
BenchConfig load_config_file(const std::filesystem::path& path);
BenchConfig default_config();

}  // namespace cgbench
