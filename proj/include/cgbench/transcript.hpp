#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cgbench/catalog.hpp"
#include "cgbench/events.hpp"
#include "cgbench/session.hpp"

namespace cgbench {

inline constexpr int kLogFormatVersion = 1;
inline constexpr const char* kLogSuffix = ".events.jsonl";

struct LogHeader {
  std::string session_id;
  nlohmann::json config;  // config_to_json() of the session
  std::string catalog_hash;
  std::string trial_set_hash;
  std::int64_t start_time_ms = 0;
  int format_version = kLogFormatVersion;
};

struct LogFooter {
  std::vector<TrialOutcome> outcomes;
  std::string status;  // "completed" | "aborted" | "error: ..."
};

/// One session's log: header record, event records, footer record, one JSON
/// object per line.
struct SessionLog {
  LogHeader header;
  std::vector<SessionEvent> events;
  std::optional<LogFooter> footer;
  bool torn_tail = false;  // last line was incomplete and ignored

  bool complete() const { return footer.has_value(); }
};

LogHeader make_header(const SessionConfig& config, std::int64_t start_time_ms);

nlohmann::json header_to_json(const LogHeader& h);
nlohmann::json footer_to_json(const LogFooter& f);

/// Append-only writer. Each record is flushed and fsync'ed before append()
/// returns, so a crash leaves a valid prefix on disk.
class TranscriptWriter {
 public:
  TranscriptWriter(const std::filesystem::path& path, const LogHeader& header);
  ~TranscriptWriter();
  TranscriptWriter(const TranscriptWriter&) = delete;
  TranscriptWriter& operator=(const TranscriptWriter&) = delete;

  /// Throws SeqGap unless event.seq == previous seq + 1 (0 for the first).
  void append(const SessionEvent& event);
  void close(const LogFooter& footer);
  const std::filesystem::path& path() const { return path_; }
  std::int64_t next_seq() const { return next_seq_; }

 private:
  void write_line(const nlohmann::json& record);

  std::filesystem::path path_;
  std::FILE* file_ = nullptr;
  std::int64_t next_seq_ = 0;
};

/// Reads a log. An unterminated final line is treated as a torn write and
/// dropped; any other malformed record throws CorruptLog.
SessionLog read_log(const std::filesystem::path& path, const std::set<PieceId>& universe);
SessionLog parse_log(const std::string& text, const std::set<PieceId>& universe);
void write_log(const std::filesystem::path& path, const SessionLog& log);
std::string serialize_log(const SessionLog& log, bool include_timestamps = true);

/// Stable digest of a log with timestamps stripped.
std::string log_digest(const SessionLog& log);

struct ReplayResult {
  std::vector<TrialOutcome> outcomes;
  bool truncated = false;  // log ended before the session did
  std::size_t snapshots_checked = 0;
  std::size_t actions_replayed = 0;
};

/// Re-runs every Action through the board engine and checks that actions,
/// snapshots, trial outcomes and the footer all agree with the log. Throws
/// HashMismatch if the log was produced with a different catalog/trial set
/// and CorruptLog on any disagreement.
ReplayResult replay(const SessionLog& log, const BenchConfig& bench);

/// Log files in a corpus directory, sorted by file name.
std::vector<std::filesystem::path> list_corpus(const std::filesystem::path& dir);

}  // namespace cgbench
