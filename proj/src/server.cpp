#include "cgbench/server.hpp"

#include <cstdio>
#include <sstream>

#include <httplib.h>
#include <openssl/rand.h>

#include "cgbench/error.hpp"

namespace cgbench {

using nlohmann::json;

namespace {

std::string random_hex(std::size_t bytes) {
  std::vector<unsigned char> buf(bytes);
  if (RAND_bytes(buf.data(), static_cast<int>(buf.size())) != 1) {
    throw BenchError(ErrorCode::Io, "no randomness available for seat tokens");
  }
  std::string out;
  char hex[3];
  for (unsigned char b : buf) {
    std::snprintf(hex, sizeof hex, "%02x", b);
    out += hex;
  }
  return out;
}

// Decides whether an AI seat has something to respond to. handled is the
// last seq the seat has already reacted to.
bool should_act(const std::vector<SessionEvent>& visible, int trial, Seat seat, std::optional<Seat> pending,
                std::int64_t handled) {
  const SessionEvent* last_chat = nullptr;
  const SessionEvent* trial_start = nullptr;
  std::int64_t latest = -1;
  for (const auto& e : visible) {
    if (e.trial_index != trial) continue;
    latest = e.seq;
    if (e.as<TrialStartEvent>()) trial_start = &e;
    if (e.as<ChatEvent>() && e.actor != Actor::System) last_chat = &e;
  }
  if (pending == other(seat) && latest > handled) return true;
  if (last_chat == nullptr) return seat == Seat::Helper && trial_start != nullptr && trial_start->seq > handled;
  return last_chat->actor == actor_of(other(seat)) && last_chat->seq > handled;
}

}  // namespace

struct SessionManager::Hosted {
  std::string id;
  std::shared_ptr<Session> session;
  std::map<std::string, Seat> tokens;
  std::unique_ptr<TranscriptWriter> writer;
  std::map<Seat, std::unique_ptr<Agent>> agents;
  std::vector<std::thread> drivers;
  std::mutex finalize_mutex;
  bool finalized = false;
};

SessionManager::SessionManager(ServerOptions options) : options_(std::move(options)) {
  if (!options_.bench) throw BenchError(ErrorCode::InvalidConfig, "server needs a bench configuration");
  if (!options_.clock) options_.clock = wall_clock_ms;
}

SessionManager::~SessionManager() { shutdown(); }

CreatedSession SessionManager::create(const json& request) {
  if (stopping_) throw BenchError(ErrorCode::SessionEnded, "server is shutting down");
  if (!request.is_object()) throw BenchError(ErrorCode::InvalidConfig, "create-session body must be an object");
  auto hosted = std::make_shared<Hosted>();
  SessionConfig cfg;
  {
    std::lock_guard lock(mutex_);
    hosted->id = "web-" + std::to_string(++counter_) + "-" + random_hex(4);
  }
  cfg.session_id = hosted->id;
  try {
    cfg.view = view_from_string(request.value("view", std::string("shared")));
    const AgentSpec helper = parse_agent_spec(request.value("helper", options_.default_helper), Seat::Helper);
    const AgentSpec worker = parse_agent_spec(request.value("worker", options_.default_worker), Seat::Worker);
    cfg.seats = {{Seat::Helper, helper}, {Seat::Worker, worker}};
    cfg.trial_time_limit_s = request.value("trial_time_limit_s", options_.trial_time_limit_s);
  } catch (const json::exception& e) {
    throw BenchError(ErrorCode::InvalidConfig, std::string("create-session: ") + e.what());
  }
  if (auto human = cfg.human_seat()) {
    cfg.participant_seat = *human;
  } else if (request.contains("participant_seat")) {
    cfg.participant_seat = seat_from_string(request["participant_seat"].get<std::string>());
  }
  cfg.bench = options_.bench;
  cfg.validate();

  for (const auto& b : cfg.seats) {
    if (b.agent.is_human()) {
      hosted->tokens[random_hex(16)] = b.seat;
    } else {
      hosted->agents[b.seat] = make_agent(b.agent, b.seat, std::random_device{}(), options_.transport);
    }
  }
  hosted->writer = std::make_unique<TranscriptWriter>(options_.corpus_dir / (hosted->id + kLogSuffix),
                                                      make_header(cfg, options_.clock()));
  TranscriptWriter* writer = hosted->writer.get();
  hosted->session = Session::start(cfg, [writer](const SessionEvent& e) { writer->append(e); }, options_.clock);

  CreatedSession out;
  out.session_id = hosted->id;
  for (const auto& [token, seat] : hosted->tokens) out.tokens[seat] = token;
  {
    std::lock_guard lock(mutex_);
    sessions_[hosted->id] = hosted;
  }
  if (options_.drive_ai_seats) {
    for (const auto& [seat, agent] : hosted->agents) {
      hosted->drivers.emplace_back([this, hosted, seat = seat] { drive(hosted, seat); });
    }
  }
  return out;
}

void SessionManager::drive(std::shared_ptr<Hosted> hosted, Seat seat) {
  Session& s = *hosted->session;
  Agent& agent = *hosted->agents.at(seat);
  std::int64_t handled = -1;
  while (!stopping_ && !s.ended()) {
    const int trial = s.current_trial();
    const auto visible = s.observe(seat);
    if (!should_act(visible, trial, seat, s.pending_proposal(), handled)) {
      s.wait_for_events(seat, visible.empty() ? 0 : visible.back().seq + 1, std::chrono::milliseconds(200));
      continue;
    }
    try {
      if (s.messages_in_trial(Seat::Helper) + s.messages_in_trial(Seat::Worker) >= options_.max_messages_per_trial) {
        s.abort_trial("message cap reached");
        continue;
      }
      const AgentTurn turn = agent.step(view_for(s, seat));
      if (!turn.text.empty()) s.submit_message(seat, turn.text);
      if (!s.ended() && s.current_trial() == trial) {
        if (turn.intent == CompletionIntent::Propose) {
          s.propose_complete(seat);
        } else if (turn.intent == CompletionIntent::Confirm && s.pending_proposal() == other(seat)) {
          s.confirm_complete(seat);
        }
      }
      handled = s.next_seq() - 1;
    } catch (const BenchError& e) {
      switch (e.code()) {
        case ErrorCode::AwaitingPartner:
          handled = s.next_seq() - 1;
          break;
        case ErrorCode::SessionEnded:
          return;
        default:
          if (!s.ended()) {
            try {
              s.abort(std::string(to_string(e.code())) + ": " + e.what());
            } catch (const BenchError&) {
            }
          }
          return;
      }
    }
  }
}

void SessionManager::finalize(Hosted& h) {
  std::lock_guard lock(h.finalize_mutex);
  if (h.finalized || !h.session->ended()) return;
  std::string status = "completed";
  for (const auto& e : h.session->events()) {
    if (const auto* end = e.as<SessionEndEvent>()) status = end->reason;
  }
  h.writer->close(LogFooter{h.session->outcomes(), status});
  h.finalized = true;
}

std::shared_ptr<SessionManager::Hosted> SessionManager::find(const std::string& id) const {
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw BenchError(ErrorCode::InvalidSeat, "unknown session '" + id + "'");
  return it->second;
}

std::shared_ptr<Session> SessionManager::session(const std::string& id) const { return find(id)->session; }

Seat SessionManager::authenticate(const std::string& id, const std::string& token) const {
  auto h = find(id);
  auto it = h->tokens.find(token);
  if (it == h->tokens.end()) throw BenchError(ErrorCode::InvalidSeat, "token does not match a seat of " + id);
  return it->second;
}

std::vector<std::string> SessionManager::session_ids() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [id, h] : sessions_) out.push_back(id);
  return out;
}

void SessionManager::tick_all() {
  std::vector<std::shared_ptr<Hosted>> all;
  {
    std::lock_guard lock(mutex_);
    for (const auto& [id, h] : sessions_) all.push_back(h);
  }
  for (const auto& h : all) {
    if (!h->session->ended()) h->session->tick();
    finalize(*h);
  }
}

void SessionManager::shutdown() {
  if (stopping_.exchange(true)) return;
  std::vector<std::shared_ptr<Hosted>> all;
  {
    std::lock_guard lock(mutex_);
    for (const auto& [id, h] : sessions_) all.push_back(h);
  }
  for (const auto& h : all) {
    if (!h->session->ended()) {
      try {
        h->session->abort("server shutdown");
      } catch (const BenchError&) {
      }
    }
    for (auto& t : h->drivers) {
      if (t.joinable()) t.join();
    }
    finalize(*h);
  }
}

// ---------------------------------------------------------------------------

json ProtocolHandler::event_message(const SessionEvent& e) {
  return json{{"type", "event"}, {"event", event_to_json(e)}};
}

json ProtocolHandler::error_message(const std::string& code, const std::string& message) {
  return json{{"type", "error"}, {"code", code}, {"message", message}};
}

json ProtocolHandler::handle(const std::string& session_id, const json& msg) {
  try {
    if (!msg.is_object() || !msg.contains("type") || !msg["type"].is_string()) {
      return error_message("MalformedMessage", "message needs a string 'type'");
    }
    const std::string type = msg["type"].get<std::string>();
    auto session = manager_.session(session_id);
    if (type == "heartbeat") {
      return json{{"type", "heartbeat"},
                  {"ts", manager_.options().clock()},
                  {"next_seq", session->next_seq()},
                  {"ended", session->ended()}};
    }
    const Seat seat = manager_.authenticate(session_id, msg.value("token", std::string()));
    if (type == "join") {
      return json{{"type", "join"},
                  {"seat", to_string(seat)},
                  {"session_id", session_id},
                  {"view", to_string(session->config().view)},
                  {"materials", materials_to_json(session->materials(seat))},
                  {"next_seq", session->next_seq()}};
    }
    if (type == "chat") {
      if (!msg.contains("text") || !msg["text"].is_string()) {
        return error_message("MalformedMessage", "chat needs a string 'text'");
      }
      const SubmitResult r = session->submit_message(seat, msg["text"].get<std::string>());
      json errors = json::array();
      for (const auto& e : r.errors) errors.push_back(describe_error(e));
      return json{{"type", "chat"},      {"status", "ok"},         {"first_seq", r.first_seq},
                  {"last_seq", r.last_seq}, {"actions", r.actions}, {"errors", std::move(errors)}};
    }
    if (type == "complete") {
      const CompletionResult r = session->propose_complete(seat);
      json reply{{"type", "complete"}, {"status", r.pending() ? "pending" : "ended"}};
      if (r.outcome) reply["outcome"] = outcome_to_json(*r.outcome);
      return reply;
    }
    return error_message("MalformedMessage", "unknown message type '" + type + "'");
  } catch (const BenchError& e) {
    return error_message(std::string(to_string(e.code())), e.what());
  } catch (const json::exception& e) {
    return error_message("MalformedMessage", e.what());
  }
}

std::string ProtocolHandler::handle_lines(const std::string& session_id, const std::string& body) {
  std::string out;
  std::istringstream in(body);
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json reply;
    try {
      reply = handle(session_id, json::parse(line));
    } catch (const json::parse_error& e) {
      reply = error_message("MalformedMessage", e.what());
    }
    out += reply.dump() + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------

struct HttpServer::Impl {
  SessionManager& manager;
  ProtocolHandler protocol;
  httplib::Server server;
  std::thread thread;
  std::thread ticker;
  std::atomic<bool> running{false};

  explicit Impl(SessionManager& m) : manager(m), protocol(m) {}
};

namespace {

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidSeat: return 403;
    case ErrorCode::SessionEnded: return 409;
    default: return 400;
  }
}

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump() + "\n", "application/json");
}

}  // namespace

HttpServer::HttpServer(SessionManager& manager) : impl_(std::make_unique<Impl>(manager)) {
  auto& svr = impl_->server;
  Impl* impl = impl_.get();

  svr.Get("/health", [impl](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, json{{"status", "ok"}, {"sessions", impl->manager.session_ids().size()}});
  });

  svr.Post("/api/sessions", [impl](const httplib::Request& req, httplib::Response& res) {
    try {
      const json body = req.body.empty() ? json::object() : json::parse(req.body);
      const CreatedSession created = impl->manager.create(body);
      json tokens = json::object();
      for (const auto& [seat, token] : created.tokens) tokens[std::string(to_string(seat))] = token;
      send_json(res, 200, json{{"session_id", created.session_id}, {"tokens", std::move(tokens)}});
    } catch (const BenchError& e) {
      send_json(res, 400, ProtocolHandler::error_message(std::string(to_string(e.code())), e.what()));
    } catch (const json::exception& e) {
      send_json(res, 400, ProtocolHandler::error_message("MalformedMessage", e.what()));
    }
  });

  svr.Post(R"(/api/sessions/([^/]+)/send)", [impl](const httplib::Request& req, httplib::Response& res) {
    res.set_content(impl->protocol.handle_lines(req.matches[1], req.body), "application/x-ndjson");
  });

  svr.Get(R"(/api/sessions/([^/]+)/materials)", [impl](const httplib::Request& req, httplib::Response& res) {
    try {
      const std::string id = req.matches[1];
      const Seat seat = impl->manager.authenticate(id, req.get_param_value("token"));
      send_json(res, 200, materials_to_json(impl->manager.session(id)->materials(seat)));
    } catch (const BenchError& e) {
      send_json(res, http_status(e.code()), ProtocolHandler::error_message(std::string(to_string(e.code())), e.what()));
    }
  });

  svr.Get(R"(/api/sessions/([^/]+)/stream)", [impl](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    std::shared_ptr<Session> session;
    Seat seat;
    try {
      seat = impl->manager.authenticate(id, req.get_param_value("token"));
      session = impl->manager.session(id);
    } catch (const BenchError& e) {
      send_json(res, http_status(e.code()), ProtocolHandler::error_message(std::string(to_string(e.code())), e.what()));
      return;
    }
    std::int64_t since = 0;
    if (req.has_param("since")) {
      try {
        since = std::stoll(req.get_param_value("since"));
      } catch (const std::exception&) {
        send_json(res, 400, ProtocolHandler::error_message("MalformedMessage", "bad 'since'"));
        return;
      }
    }
    auto cursor = std::make_shared<std::int64_t>(since);
    auto last_beat = std::make_shared<std::int64_t>(0);
    res.set_chunked_content_provider(
        "application/x-ndjson", [impl, session, seat, cursor, last_beat](std::size_t, httplib::DataSink& sink) {
          const auto& opts = impl->manager.options();
          session->wait_for_events(seat, *cursor, std::chrono::milliseconds(200));
          std::string chunk;
          for (const auto& e : session->observe(seat, *cursor)) {
            chunk += ProtocolHandler::event_message(e).dump() + "\n";
            *cursor = e.seq + 1;
          }
          const std::int64_t now = opts.clock();
          const bool done = session->ended() && session->observe(seat, *cursor).empty();
          if (chunk.empty() && (now - *last_beat >= opts.heartbeat.count() || *last_beat == 0)) {
            chunk += json{{"type", "heartbeat"}, {"ts", now}, {"next_seq", *cursor}, {"ended", session->ended()}}
                         .dump() +
                     "\n";
            *last_beat = now;
          }
          if (!chunk.empty() && !sink.write(chunk.data(), chunk.size())) return false;
          if (done || impl->manager.stopping() || !impl->running) {
            sink.done();
          }
          return true;
        });
  });

  const auto& static_dir = impl_->manager.options().static_dir;
  if (!static_dir.empty() && std::filesystem::is_directory(static_dir)) {
    svr.set_mount_point("/", static_dir.string());
  } else {
    svr.Get("/", [](const httplib::Request&, httplib::Response& res) {
      res.set_content("cgbench server. POST /api/sessions to start a session.\n", "text/plain");
    });
  }
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  int bound = port;
  bool ok = false;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
    ok = bound > 0;
  } else {
    ok = impl_->server.bind_to_port(host, port);
  }
  if (!ok) throw BenchError(ErrorCode::Io, "cannot bind " + host + ":" + std::to_string(port));
  impl_->running = true;
  impl_->ticker = std::thread([impl = impl_.get()] {
    while (impl->running) {
      impl->manager.tick_all();
      std::this_thread::sleep_for(std::chrono::milliseconds(250));
    }
  });
  return bound;
}

void HttpServer::serve() { impl_->server.listen_after_bind(); }

int HttpServer::start(const std::string& host, int port) {
  const int bound = bind(host, port);
  impl_->thread = std::thread([this] { serve(); });
  impl_->server.wait_until_ready();
  return bound;
}

void HttpServer::stop() {
  if (!impl_) return;
  impl_->running = false;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
  if (impl_->ticker.joinable()) impl_->ticker.join();
}

}  // namespace cgbench
