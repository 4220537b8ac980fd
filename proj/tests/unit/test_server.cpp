#include <doctest.h>

#include <httplib.h>

#include <chrono>
#include <thread>

#include "cgbench/error.hpp"
#include "cgbench/server.hpp"
#include "cgbench/transcript.hpp"
#include "test_support.hpp"

using namespace cgbench;
using nlohmann::json;

namespace {

ServerOptions server_options(const testing::TempDir& dir, bool drive = false) {
  ServerOptions o;
  o.bench = testing::bench();
  o.corpus_dir = dir.path();
  o.drive_ai_seats = drive;
  o.heartbeat = std::chrono::milliseconds(50);
  return o;
}

template <typename Pred>
bool eventually(Pred pred, std::chrono::milliseconds limit = std::chrono::milliseconds(5000)) {
  const auto until = std::chrono::steady_clock::now() + limit;
  while (std::chrono::steady_clock::now() < until) {
    if (pred()) return true;
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  return pred();
}

}  // namespace

TEST_SUITE("server") {
  TEST_CASE("wire protocol for a human Helper") {
    testing::TempDir dir;
    SessionManager mgr(server_options(dir));
    ProtocolHandler proto(mgr);
    const auto created = mgr.create(json{{"view", "shared"}, {"helper", "human"}, {"worker", "oracle"}});
    CHECK(created.session_id.rfind("web-1-", 0) == 0);
    REQUIRE(created.tokens.size() == 1);
    const std::string token = created.tokens.at(Seat::Helper);
    CHECK(token.size() == 32);
    CHECK(mgr.authenticate(created.session_id, token) == Seat::Helper);

    const auto join = proto.handle(created.session_id, json{{"type", "join"}, {"token", token}});
    CHECK(join["type"] == "join");
    CHECK(join["seat"] == "helper");
    CHECK(join["materials"].contains("target"));
    CHECK_FALSE(join["materials"].contains("palette"));
    CHECK(join["next_seq"] == 1);

    const auto chat = proto.handle(created.session_id, json{{"type", "chat"}, {"token", token}, {"text", "PLACE 0 AT 0,0"}});
    CHECK(chat["status"] == "ok");
    CHECK(chat["actions"] == 0);
    CHECK(chat["first_seq"] == chat["last_seq"]);

    // the Worker has not answered yet
    const auto again = proto.handle(created.session_id, json{{"type", "chat"}, {"token", token}, {"text", "hello?"}});
    CHECK(again["type"] == "error");
    CHECK(again["code"] == "AwaitingPartner");

    const auto complete = proto.handle(created.session_id, json{{"type", "complete"}, {"token", token}});
    CHECK(complete["type"] == "complete");
    CHECK(complete["status"] == "pending");

    const auto beat = proto.handle(created.session_id, json{{"type", "heartbeat"}});
    CHECK(beat["type"] == "heartbeat");
    CHECK(beat["ended"] == false);
    CHECK(beat["next_seq"].get<int>() >= 3);

    CHECK(proto.handle(created.session_id, json{{"type", "chat"}, {"token", "nope"}, {"text", "x"}})["code"] == "InvalidSeat");
    CHECK(proto.handle(created.session_id, json{{"type", "dance"}, {"token", token}})["code"] == "MalformedMessage");
    CHECK(proto.handle(created.session_id, json{{"type", "chat"}, {"token", token}})["code"] == "MalformedMessage");
    CHECK(proto.handle(created.session_id, json::array())["code"] == "MalformedMessage");
    CHECK(proto.handle("web-99-0000", json{{"type", "join"}, {"token", token}})["code"] == "InvalidSeat");

    const std::string lines = proto.handle_lines(created.session_id, "{\"type\":\"heartbeat\"}\n\nnot json\n");
    std::istringstream in(lines);
    std::string l1;
    std::string l2;
    std::string l3;
    std::getline(in, l1);
    std::getline(in, l2);
    CHECK_FALSE(std::getline(in, l3));
    CHECK(json::parse(l1)["type"] == "heartbeat");
    CHECK(json::parse(l2)["code"] == "MalformedMessage");

    const auto ev = ProtocolHandler::event_message(mgr.session(created.session_id)->events().front());
    CHECK(ev["type"] == "event");
    CHECK(ev["event"]["kind"] == "trial_start");
  }

  TEST_CASE("tokens are bound to one session and one seat") {
    testing::TempDir dir;
    SessionManager mgr(server_options(dir));
    const auto a = mgr.create(json{{"view", "shared"}, {"helper", "human"}});
    const auto b = mgr.create(json{{"view", "nonshared"}, {"helper", "oracle"}, {"worker", "human"}});
    CHECK(a.session_id != b.session_id);
    CHECK(mgr.authenticate(b.session_id, b.tokens.at(Seat::Worker)) == Seat::Worker);
    CHECK_THROWS_AS(mgr.authenticate(a.session_id, b.tokens.at(Seat::Worker)), BenchError);
    CHECK_THROWS_AS(mgr.authenticate(b.session_id, a.tokens.at(Seat::Helper)), BenchError);
    CHECK(mgr.session(b.session_id)->materials(Seat::Worker).palette.size() > 0);
    CHECK(mgr.session_ids().size() == 2);
  }

  TEST_CASE("create-session validation") {
    testing::TempDir dir;
    SessionManager mgr(server_options(dir));
    CHECK_THROWS_AS(mgr.create(json{{"view", "sideways"}}), BenchError);
    CHECK_THROWS_AS(mgr.create(json{{"helper", "human"}, {"worker", "human"}}), BenchError);
    CHECK_THROWS_AS(mgr.create(json{{"helper", "noisy:0.2"}}), BenchError);
    CHECK_THROWS_AS(mgr.create(json::array()), BenchError);
    ServerOptions bad;
    CHECK_THROWS_AS(SessionManager{bad}, BenchError);
  }

  TEST_CASE("an AI Worker answers a human Helper") {
    testing::TempDir dir;
    SessionManager mgr(server_options(dir, true));
    ProtocolHandler proto(mgr);
    const auto created = mgr.create(json{{"view", "shared"}, {"helper", "human"}, {"worker", "oracle"}});
    const auto& token = created.tokens.at(Seat::Helper);
    auto s = mgr.session(created.session_id);
    proto.handle(created.session_id, json{{"type", "chat"}, {"token", token}, {"text", "Next piece: PLACE 0 AT 0,0"}});
    CHECK(eventually([&] { return s->board().at(0, 0).has_value(); }));
    bool snapshot = false;
    CHECK(eventually([&] {
      for (const auto& e : s->observe(Seat::Helper)) snapshot = snapshot || e.as<SnapshotEvent>() != nullptr;
      return snapshot;
    }));
    mgr.shutdown();
    CHECK(s->ended());
    const auto log = read_log(dir / (created.session_id + kLogSuffix), testing::bench()->catalog.ids());
    REQUIRE(log.footer);
    CHECK(log.footer->status == "aborted: server shutdown");
    CHECK_THROWS_AS(mgr.create(json{{"view", "shared"}}), BenchError);
  }

  TEST_CASE("tick_all applies time limits and closes transcripts") {
    testing::TempDir dir;
    testing::FakeClock fc;
    auto o = server_options(dir);
    o.clock = fc.clock();
    o.trial_time_limit_s = 1.0;
    SessionManager mgr(o);
    const auto created = mgr.create(json{{"view", "nonshared"}, {"helper", "human"}});
    const auto path = dir / (created.session_id + kLogSuffix);
    for (int t = 0; t < 5; ++t) {
      fc.advance_ms(1001);
      mgr.tick_all();
    }
    auto s = mgr.session(created.session_id);
    CHECK(s->ended());
    REQUIRE(s->outcomes().size() == 5);
    for (const auto& out : s->outcomes()) CHECK(out.end_reason == EndReason::Timeout);
    const auto log = read_log(path, testing::bench()->catalog.ids());
    REQUIRE(log.footer);
    CHECK(log.footer->status == "completed");
    CHECK(replay(log, *testing::bench()).outcomes.size() == 5);
  }

  TEST_CASE("HTTP front end") {
    testing::TempDir dir;
    SessionManager mgr(server_options(dir, true));
    HttpServer http(mgr);
    const int port = http.start("127.0.0.1", 0);
    REQUIRE(port > 0);
    httplib::Client cli("127.0.0.1", port);
    cli.set_read_timeout(10, 0);

    auto health = cli.Get("/health");
    REQUIRE(health);
    CHECK(health->status == 200);

    auto bad = cli.Post("/api/sessions", "{\"view\":\"upside-down\"}", "application/json");
    REQUIRE(bad);
    CHECK(bad->status == 400);
    CHECK(json::parse(bad->body)["code"] == "InvalidConfig");

    auto res = cli.Post("/api/sessions", "{\"view\":\"shared\",\"helper\":\"human\"}", "application/json");
    REQUIRE(res);
    REQUIRE(res->status == 200);
    const auto body = json::parse(res->body);
    const std::string id = body["session_id"];
    const std::string token = body["tokens"]["helper"];

    auto mat = cli.Get("/api/sessions/" + id + "/materials?token=" + token);
    REQUIRE(mat);
    CHECK(mat->status == 200);
    CHECK(json::parse(mat->body)["seat"] == "helper");
    auto forbidden = cli.Get("/api/sessions/" + id + "/materials?token=wrong");
    REQUIRE(forbidden);
    CHECK(forbidden->status == 403);

    auto sent = cli.Post("/api/sessions/" + id + "/send",
                         json{{"type", "chat"}, {"token", token}, {"text", "PLACE 0 AT 0,0"}}.dump() + "\n" +
                             json{{"type", "heartbeat"}}.dump() + "\n",
                         "application/x-ndjson");
    REQUIRE(sent);
    CHECK(sent->status == 200);
    std::istringstream replies(sent->body);
    std::string line;
    std::getline(replies, line);
    CHECK(json::parse(line)["status"] == "ok");
    std::getline(replies, line);
    CHECK(json::parse(line)["type"] == "heartbeat");

    std::vector<json> streamed;
    std::string buffer;
    bool worker_chat = false;
    bool heartbeat = false;
    auto stream = cli.Get("/api/sessions/" + id + "/stream?token=" + token + "&since=0",
                          [&](const char* data, std::size_t len) {
                            buffer.append(data, len);
                            std::size_t nl;
                            while ((nl = buffer.find('\n')) != std::string::npos) {
                              auto j = json::parse(buffer.substr(0, nl));
                              buffer.erase(0, nl + 1);
                              if (j["type"] == "heartbeat") heartbeat = true;
                              if (j["type"] == "event") {
                                if (j["event"]["kind"] == "chat" && j["event"]["actor"] == "worker") worker_chat = true;
                                streamed.push_back(j);
                              }
                            }
                            return !(worker_chat && heartbeat);
                          });
    CHECK(worker_chat);
    CHECK(heartbeat);
    REQUIRE_FALSE(streamed.empty());
    for (std::size_t i = 0; i < streamed.size(); ++i) {
      CHECK(streamed[i]["event"]["seq"].get<int>() >= 0);
      CHECK(streamed[i]["event"]["kind"] != "action");
      if (i) CHECK(streamed[i]["event"]["seq"].get<int>() > streamed[i - 1]["event"]["seq"].get<int>());
    }

    auto denied = cli.Get("/api/sessions/" + id + "/stream?token=bad");
    REQUIRE(denied);
    CHECK(denied->status == 403);
    http.stop();
    mgr.shutdown();
  }
}
