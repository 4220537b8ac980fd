#include "cgbench/transcript.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "cgbench/error.hpp"
#include "cgbench/hash.hpp"

namespace cgbench {

using nlohmann::json;

LogHeader make_header(const SessionConfig& config, std::int64_t start_time_ms) {
  LogHeader h;
  h.session_id = config.session_id;
  h.config = config_to_json(config);
  h.catalog_hash = config.bench->catalog_hash();
  h.trial_set_hash = config.bench->trial_set_hash();
  h.start_time_ms = start_time_ms;
  return h;
}

json header_to_json(const LogHeader& h) {
  return json{{"type", "header"},
              {"format_version", h.format_version},
              {"session_id", h.session_id},
              {"config", h.config},
              {"catalog_hash", h.catalog_hash},
              {"trial_set_hash", h.trial_set_hash},
              {"start_time_ms", h.start_time_ms}};
}

json footer_to_json(const LogFooter& f) {
  json outcomes = json::array();
  for (const auto& o : f.outcomes) outcomes.push_back(outcome_to_json(o));
  return json{{"type", "footer"}, {"status", f.status}, {"outcomes", std::move(outcomes)}};
}

namespace {

LogHeader header_from_json(const json& j) {
  LogHeader h;
  h.format_version = j.at("format_version").get<int>();
  if (h.format_version != kLogFormatVersion) {
    throw BenchError(ErrorCode::CorruptLog, "unsupported log format version " + std::to_string(h.format_version));
  }
  h.session_id = j.at("session_id").get<std::string>();
  h.config = j.at("config");
  h.catalog_hash = j.at("catalog_hash").get<std::string>();
  h.trial_set_hash = j.at("trial_set_hash").get<std::string>();
  h.start_time_ms = j.at("start_time_ms").get<std::int64_t>();
  return h;
}

LogFooter footer_from_json(const json& j, const std::set<PieceId>& universe) {
  LogFooter f;
  f.status = j.at("status").get<std::string>();
  for (const auto& o : j.at("outcomes")) f.outcomes.push_back(outcome_from_json(o, universe));
  return f;
}

json event_record(const SessionEvent& e, bool include_timestamp) {
  json j = event_to_json(e, include_timestamp);
  j["type"] = "event";
  return j;
}

}  // namespace

TranscriptWriter::TranscriptWriter(const std::filesystem::path& path, const LogHeader& header) : path_(path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  file_ = std::fopen(path.c_str(), "wb");
  if (file_ == nullptr) throw BenchError(ErrorCode::Io, "cannot create " + path.string());
  write_line(header_to_json(header));
}

TranscriptWriter::~TranscriptWriter() {
  if (file_ != nullptr) std::fclose(file_);
}

void TranscriptWriter::write_line(const json& record) {
  if (file_ == nullptr) throw BenchError(ErrorCode::Io, path_.string() + " is closed");
  const std::string line = record.dump() + "\n";
  if (std::fwrite(line.data(), 1, line.size(), file_) != line.size() || std::fflush(file_) != 0 ||
      ::fsync(::fileno(file_)) != 0) {
    throw BenchError(ErrorCode::Io, "write failed on " + path_.string());
  }
}

void TranscriptWriter::append(const SessionEvent& event) {
  if (event.seq != next_seq_) {
    throw BenchError(ErrorCode::SeqGap, "expected seq " + std::to_string(next_seq_) + ", got " +
                                            std::to_string(event.seq));
  }
  write_line(event_record(event, true));
  ++next_seq_;
}

void TranscriptWriter::close(const LogFooter& footer) {
  write_line(footer_to_json(footer));
  std::fclose(file_);
  file_ = nullptr;
}

SessionLog parse_log(const std::string& text, const std::set<PieceId>& universe) {
  SessionLog log;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  bool have_header = false;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string::npos) {
      log.torn_tail = true;
      break;
    }
    const std::string line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      const std::string type = j.at("type").get<std::string>();
      if (type == "header") {
        if (have_header) throw BenchError(ErrorCode::CorruptLog, "second header");
        log.header = header_from_json(j);
        have_header = true;
      } else if (!have_header) {
        throw BenchError(ErrorCode::CorruptLog, "record before header");
      } else if (log.footer) {
        throw BenchError(ErrorCode::CorruptLog, "record after footer");
      } else if (type == "event") {
        SessionEvent e = event_from_json(j);
        if (e.seq != static_cast<std::int64_t>(log.events.size())) {
          throw BenchError(ErrorCode::SeqGap, "event seq " + std::to_string(e.seq) + " at position " +
                                                  std::to_string(log.events.size()));
        }
        log.events.push_back(std::move(e));
      } else if (type == "footer") {
        log.footer = footer_from_json(j, universe);
      } else {
        throw BenchError(ErrorCode::CorruptLog, "unknown record type '" + type + "'");
      }
    } catch (const json::exception& e) {
      throw BenchError(ErrorCode::CorruptLog, "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!have_header) throw BenchError(ErrorCode::CorruptLog, "log has no header");
  return log;
}

SessionLog read_log(const std::filesystem::path& path, const std::set<PieceId>& universe) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw BenchError(ErrorCode::Io, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_log(ss.str(), universe);
  } catch (const BenchError& e) {
    throw BenchError(e.code(), path.filename().string() + ": " + e.what());
  }
}

std::string serialize_log(const SessionLog& log, bool include_timestamps) {
  std::string out;
  json header = header_to_json(log.header);
  if (!include_timestamps) header.erase("start_time_ms");
  out += header.dump() + "\n";
  for (const auto& e : log.events) out += event_record(e, include_timestamps).dump() + "\n";
  if (log.footer) out += footer_to_json(*log.footer).dump() + "\n";
  return out;
}

void write_log(const std::filesystem::path& path, const SessionLog& log) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw BenchError(ErrorCode::Io, "cannot write " + path.string());
  out << serialize_log(log);
  if (!out) throw BenchError(ErrorCode::Io, "write failed on " + path.string());
}

std::string log_digest(const SessionLog& log) { return sha256_hex(serialize_log(log, false)); }

ReplayResult replay(const SessionLog& log, const BenchConfig& bench) {
  if (log.header.catalog_hash != bench.catalog_hash()) {
    throw BenchError(ErrorCode::HashMismatch, log.header.session_id + ": catalog differs from the one logged");
  }
  if (log.header.trial_set_hash != bench.trial_set_hash()) {
    throw BenchError(ErrorCode::HashMismatch, log.header.session_id + ": trial set differs from the one logged");
  }
  auto corrupt = [&](const SessionEvent& e, const std::string& what) {
    return BenchError(ErrorCode::CorruptLog,
                      log.header.session_id + " seq " + std::to_string(e.seq) + ": " + what);
  };

  ReplayResult result;
  std::optional<BoardState> board;
  int trial = -1;
  bool session_ended = false;
  for (const auto& e : log.events) {
    if (const auto* start = e.as<TrialStartEvent>()) {
      if (board) throw corrupt(e, "trial started while another is open");
      if (e.trial_index != trial + 1) throw corrupt(e, "trial index out of sequence");
      if (start->practice != (e.trial_index == 0)) throw corrupt(e, "practice flag mismatch");
      trial = e.trial_index;
      board = BoardState::empty(bench.catalog, bench.trials.grid);
    } else if (const auto* action = e.as<ActionEvent>()) {
      if (!board || e.trial_index != trial) throw corrupt(e, "action outside a trial");
      if (!is_board_command(action->command)) continue;
      std::string got = "ok";
      try {
        if (const auto* p = std::get_if<PlaceCmd>(&action->command)) {
          board->place(p->piece, p->row, p->col);
        } else if (const auto* r = std::get_if<RotateCmd>(&action->command)) {
          board->rotate(r->piece, r->degrees);
        } else if (const auto* rm = std::get_if<RemoveCmd>(&action->command)) {
          board->remove(rm->piece);
        }
      } catch (const BenchError& err) {
        got = std::string(to_string(err.code()));
      }
      if (got != action->result) {
        throw corrupt(e, "action result '" + action->result + "' but replay gives '" + got + "'");
      }
      ++result.actions_replayed;
    } else if (const auto* snap = e.as<SnapshotEvent>()) {
      if (!board) throw corrupt(e, "snapshot outside a trial");
      if (board_to_json(*board) != snap->board) throw corrupt(e, "snapshot differs from replayed board");
      ++result.snapshots_checked;
    } else if (const auto* end = e.as<TrialEndEvent>()) {
      if (!board || e.trial_index != trial) throw corrupt(e, "trial end without start");
      TrialOutcome o;
      o.trial_index = trial;
      o.success = exact_match(*board, bench.trials.trial(trial), bench.trials.rotation_sensitive);
      o.end_reason = end->reason;
      o.final_board = *board;
      if (o.success != end->success) throw corrupt(e, "logged success disagrees with replayed board");
      result.outcomes.push_back(std::move(o));
      board.reset();
    } else if (e.as<SessionEndEvent>() != nullptr) {
      session_ended = true;
    }
  }
  result.truncated = !session_ended || !log.footer.has_value();

  if (log.footer) {
    const auto& logged = log.footer->outcomes;
    if (logged.size() != result.outcomes.size()) {
      throw BenchError(ErrorCode::CorruptLog, log.header.session_id + ": footer lists " +
                                                  std::to_string(logged.size()) + " outcomes, replay gives " +
                                                  std::to_string(result.outcomes.size()));
    }
    for (std::size_t i = 0; i < logged.size(); ++i) {
      const auto& a = logged[i];
      const auto& b = result.outcomes[i];
      if (a.trial_index != b.trial_index || a.success != b.success || a.end_reason != b.end_reason ||
          a.final_board != b.final_board) {
        throw BenchError(ErrorCode::CorruptLog,
                         log.header.session_id + ": footer outcome for trial " + std::to_string(a.trial_index) +
                             " differs from replay");
      }
    }
  }
  return result;
}

std::vector<std::filesystem::path> list_corpus(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw BenchError(ErrorCode::Io, dir.string() + " is not a directory");
  std::vector<std::filesystem::path> out;
  const std::string suffix = kLogSuffix;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && name.size() > suffix.size() &&
        name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) {
      out.push_back(entry.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace cgbench
