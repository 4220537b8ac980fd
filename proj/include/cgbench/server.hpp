#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "cgbench/agents.hpp"
#include "cgbench/session.hpp"
#include "cgbench/transcript.hpp"

namespace cgbench {

// Wire protocol. Every message is one JSON object per line.
//
// client -> server
//   {"type":"join","token":T}
//   {"type":"chat","token":T,"text":S}
//   {"type":"complete","token":T}          propose, or confirm the partner's proposal
//   {"type":"heartbeat"}
// server -> client
//   {"type":"join","seat":..,"session_id":..,"materials":{..},"next_seq":N}
//   {"type":"chat","status":"ok","first_seq":N,"last_seq":N,"actions":N,"errors":[..]}
//   {"type":"complete","status":"pending"|"ended","outcome":{..}?}
//   {"type":"event","event":{..}}          SessionEvent, filtered by seat visibility
//   {"type":"heartbeat","ts":ms,"next_seq":N,"ended":bool}
//   {"type":"error","code":..,"message":..}

struct ServerOptions {
  std::shared_ptr<const BenchConfig> bench;
  std::filesystem::path corpus_dir = "corpus";
  std::string default_helper = "human";
  std::string default_worker = "oracle";
  double trial_time_limit_s = 300.0;
  std::filesystem::path static_dir;
  std::chrono::milliseconds heartbeat{5000};
  int max_messages_per_trial = 200;
  Clock clock;                                // defaults to the wall clock
  std::shared_ptr<ChatTransport> transport;   // test hook for LLM seats
  bool drive_ai_seats = true;                 // start driver threads for AI seats
};

struct CreatedSession {
  std::string session_id;
  std::map<Seat, std::string> tokens;  // human seats only
};

/// Owns the live sessions of a server: their transcript writers, seat
/// tokens and the driver threads for AI seats.
class SessionManager {
 public:
  explicit SessionManager(ServerOptions options);
  ~SessionManager();
  SessionManager(const SessionManager&) = delete;
  SessionManager& operator=(const SessionManager&) = delete;

  /// Request: {"view", "participant_seat"?, "helper"?, "worker"?, "trial_time_limit_s"?}.
  CreatedSession create(const nlohmann::json& request);

  std::shared_ptr<Session> session(const std::string& id) const;
  /// Throws InvalidSeat for an unknown token.
  Seat authenticate(const std::string& id, const std::string& token) const;
  std::vector<std::string> session_ids() const;

  /// Applies time limits and closes the transcripts of ended sessions.
  void tick_all();
  /// Aborts unfinished sessions, stops driver threads, closes transcripts.
  void shutdown();
  bool stopping() const { return stopping_; }
  const ServerOptions& options() const { return options_; }

 private:
  struct Hosted;
  void drive(std::shared_ptr<Hosted> hosted, Seat seat);
  void finalize(Hosted& hosted);
  std::shared_ptr<Hosted> find(const std::string& id) const;

  ServerOptions options_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Hosted>> sessions_;
  std::atomic<bool> stopping_{false};
  std::uint64_t counter_ = 0;
};

/// Transport-independent handling of wire messages.
class ProtocolHandler {
 public:
  explicit ProtocolHandler(SessionManager& manager) : manager_(manager) {}

  nlohmann::json handle(const std::string& session_id, const nlohmann::json& message);
  /// Handles each non-empty line; one reply line per request line.
  std::string handle_lines(const std::string& session_id, const std::string& body);

  static nlohmann::json event_message(const SessionEvent& e);
  static nlohmann::json error_message(const std::string& code, const std::string& message);

 private:
  SessionManager& manager_;
};

/// HTTP front end:
///   POST /api/sessions                       create-session -> {session_id, tokens}
///   POST /api/sessions/{id}/send             line-delimited protocol messages
///   GET  /api/sessions/{id}/stream?token=&since=   line-delimited events + heartbeats
///   GET  /api/sessions/{id}/materials?token=
///   GET  /health
class HttpServer {
 public:
  HttpServer(SessionManager& manager);
  ~HttpServer();

  /// Binds to host:port (port 0 picks a free port) and returns the port.
  /// Throws Io on bind failure.
  int bind(const std::string& host, int port);
  /// Serves until stop(); blocks.
  void serve();
  /// bind + serve on a background thread.
  int start(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace cgbench
