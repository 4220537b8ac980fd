#include <doctest.h>

#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "cgbench/error.hpp"
#include "cgbench/llm_client.hpp"
#include "test_support.hpp"

using namespace cgbench;
using testing::ScriptedTransport;

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

const std::vector<ChatMessage> kHello{{"system", "be brief"}, {"user", "hello"}};

}  // namespace

TEST_SUITE("llm_client") {
  TEST_CASE("request body") {
    auto ep = testing::fast_endpoint();
    ep.temperature = 0.5;
    const auto body = chat_request_body(ep, kHello);
    CHECK(body["model"] == "mock-model");
    CHECK(body["temperature"] == 0.5);
    CHECK(body["messages"].size() == 2);
    CHECK(body["messages"][1]["content"] == "hello");
  }

  TEST_CASE("success on first attempt") {
    auto t = std::make_shared<ScriptedTransport>();
    t->push(testing::completion_reply("hi there"));
    ChatClient client(testing::fast_endpoint(), t);
    CHECK(client.complete(kHello) == "hi there");
    CHECK(client.attempts_made() == 1);
    CHECK(t->requests[0].path == "/v1/chat/completions");
  }

  TEST_CASE("5xx exhausts retries with capped exponential backoff") {
    auto t = std::make_shared<ScriptedTransport>(HttpReply{502, "bad gateway", ""});
    auto ep = testing::fast_endpoint();
    ep.max_retries = 4;
    ep.backoff_initial_ms = 100;
    ep.backoff_max_ms = 300;
    std::vector<long> sleeps;
    ChatClient client(ep, t, {}, [&](std::chrono::milliseconds d) { sleeps.push_back(d.count()); });
    CHECK(error_of([&] { client.complete(kHello); }) == ErrorCode::EndpointError);
    CHECK(t->requests.size() == 5);
    CHECK(sleeps == std::vector<long>{100, 200, 300, 300});
  }

  TEST_CASE("429 and transport failures are retried") {
    auto t = std::make_shared<ScriptedTransport>();
    t->push(HttpReply{429, "slow down", ""});
    t->push(HttpReply{0, "", "connection refused"});
    t->push(testing::completion_reply("finally"));
    ChatClient client(testing::fast_endpoint(), t, {}, [](auto) {});
    CHECK(client.complete(kHello) == "finally");
    CHECK(client.attempts_made() == 3);
  }

  TEST_CASE("client errors are not retried") {
    auto t = std::make_shared<ScriptedTransport>(HttpReply{401, "unauthorized", ""});
    ChatClient client(testing::fast_endpoint(), t, {}, [](auto) {});
    CHECK(error_of([&] { client.complete(kHello); }) == ErrorCode::EndpointError);
    CHECK(t->requests.size() == 1);
  }

  TEST_CASE("context overflow is reported as such") {
    auto t = std::make_shared<ScriptedTransport>(
        HttpReply{400, R"({"error":{"code":"context_length_exceeded"}})", ""});
    ChatClient client(testing::fast_endpoint(), t, {}, [](auto) {});
    CHECK(error_of([&] { client.complete(kHello); }) == ErrorCode::ContextOverflow);
  }

  TEST_CASE("unparseable success body") {
    auto t = std::make_shared<ScriptedTransport>();
    t->push(HttpReply{200, "{\"choices\":[]}", ""});
    ChatClient client(testing::fast_endpoint(), t, {}, [](auto) {});
    CHECK(error_of([&] { client.complete(kHello); }) == ErrorCode::EndpointError);
  }

  TEST_CASE("api key goes to the header and never to the log") {
    ::setenv("CGBENCH_TEST_KEY", "sk-secret-123", 1);
    auto ep = testing::fast_endpoint();
    ep.api_key_env = "CGBENCH_TEST_KEY";
    auto t = std::make_shared<ScriptedTransport>();
    t->push(HttpReply{500, "oops", ""});
    t->push(testing::completion_reply("ok"));
    std::string log;
    ChatClient client(ep, t, [&](std::string_view line) { log += std::string(line) + "\n"; }, [](auto) {});
    CHECK(client.complete(kHello) == "ok");
    REQUIRE(t->requests.size() == 2);
    auto it = t->requests[0].headers.find("Authorization");
    REQUIRE(it != t->requests[0].headers.end());
    CHECK(it->second == "Bearer sk-secret-123");
    CHECK(log.find("sk-secret-123") == std::string::npos);
    CHECK(log.find("<redacted>") != std::string::npos);

    ep.auth_header = "api-key";
    ep.auth_scheme = "";
    auto t2 = std::make_shared<ScriptedTransport>();
    t2->push(testing::completion_reply("ok"));
    ChatClient(ep, t2).complete(kHello);
    CHECK(t2->requests[0].headers.find("api-key")->second == "sk-secret-123");
    ::unsetenv("CGBENCH_TEST_KEY");
  }

  TEST_CASE("endpoint config parsing") {
    const auto ep = endpoint_from_json(
        {{"base_url", "https://example.invalid"}, {"model", "m"}, {"max_retries", 1}, {"max_context_chars", 500}});
    CHECK(ep.base_url == "https://example.invalid");
    CHECK(ep.max_retries == 1);
    CHECK(ep.max_context_chars == 500);
    CHECK(ep.path == "/v1/chat/completions");
    CHECK(error_of([] { endpoint_from_json({{"model", "m"}}); }) == ErrorCode::InvalidConfig);
    CHECK(error_of([] { endpoint_from_json({{"base_url", "x"}, {"model", "m"}, {"max_retries", -1}}); }) ==
          ErrorCode::InvalidConfig);
    CHECK(error_of([] { load_endpoint_config("/nonexistent/e.json"); }) == ErrorCode::AgentUnavailable);
  }

  TEST_CASE("prompt profiles") {
    const auto p = PromptProfile::bundled();
    for (const char* key : {"helper_shared", "helper_nonshared", "worker_shared", "worker_nonshared", "grammar"}) {
      CHECK_FALSE(p.get(key).empty());
    }
    CHECK(p.get("grammar").find("PLACE") != std::string::npos);
    CHECK_THROWS_AS(p.get("nope"), BenchError);
    testing::TempDir dir;
    testing::write_file(dir / "grammar.txt", "custom grammar");
    const auto q = PromptProfile::load(dir.path());
    CHECK(q.get("grammar") == "custom grammar");
    CHECK(q.get("helper_shared") == p.get("helper_shared"));
    CHECK(fill_template("{{A}} and {{A}} {{B}}", {{"A", "x"}, {"B", "{{A}}"}}) == "x and x {{A}}");
  }

  TEST_CASE("real HTTP transport against a local server") {
    httplib::Server server;
    std::atomic<int> hits{0};
    server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
      ++hits;
      if (hits == 1) {
        res.status = 503;
        return;
      }
      auto body = nlohmann::json::parse(req.body);
      res.set_content(testing::completion_reply("echo " + body["messages"][1]["content"].get<std::string>()).body,
                      "application/json");
    });
    server.Post("/broken/v1/chat/completions", [](const httplib::Request&, httplib::Response& res) { res.status = 500; });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread th([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    auto ep = testing::fast_endpoint();
    ep.base_url = "http://127.0.0.1:" + std::to_string(port);
    ep.timeout_s = 5;
    ChatClient ok(ep, nullptr);
    CHECK(ok.complete(kHello) == "echo hello");
    CHECK(ok.attempts_made() == 2);

    ep.path = "/broken/v1/chat/completions";
    ChatClient down(ep, nullptr);
    CHECK(error_of([&] { down.complete(kHello); }) == ErrorCode::EndpointError);
    CHECK(down.attempts_made() == 3);

    server.stop();
    th.join();

    ep.path = "/v1/chat/completions";
    ChatClient refused(ep, nullptr);
    CHECK(error_of([&] { refused.complete(kHello); }) == ErrorCode::EndpointError);
  }
}
