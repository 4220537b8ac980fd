#include "cgbench/llm_client.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "cgbench/error.hpp"

namespace cgbench {

namespace detail {
const std::string& embedded_asset(const std::string& name);
}

using nlohmann::json;

EndpointConfig endpoint_from_json(const json& j) {
  EndpointConfig c;
  try {
    c.base_url = j.at("base_url").get<std::string>();
    c.model = j.at("model").get<std::string>();
    c.api_key_env = j.value("api_key_env", c.api_key_env);
    c.path = j.value("path", c.path);
    c.auth_header = j.value("auth_header", c.auth_header);
    c.auth_scheme = j.value("auth_scheme", c.auth_scheme);
    c.max_retries = j.value("max_retries", c.max_retries);
    c.backoff_initial_ms = j.value("backoff_initial_ms", c.backoff_initial_ms);
    c.backoff_max_ms = j.value("backoff_max_ms", c.backoff_max_ms);
    c.timeout_s = j.value("timeout_s", c.timeout_s);
    c.max_context_chars = j.value("max_context_chars", c.max_context_chars);
    c.temperature = j.value("temperature", c.temperature);
  } catch (const json::exception& e) {
    throw BenchError(ErrorCode::InvalidConfig, std::string("endpoint config: ") + e.what());
  }
  if (c.max_retries < 0) throw BenchError(ErrorCode::InvalidConfig, "max_retries must be >= 0");
  return c;
}

EndpointConfig load_endpoint_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw BenchError(ErrorCode::AgentUnavailable, "cannot open endpoint config " + path.string());
  try {
    return endpoint_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw BenchError(ErrorCode::InvalidConfig, path.string() + ": " + e.what());
  }
}

namespace {

const char* const kTemplateKeys[] = {"helper_shared", "helper_nonshared", "worker_shared", "worker_nonshared",
                                     "grammar"};

}  // namespace

PromptProfile PromptProfile::bundled() {
  PromptProfile p;
  p.name = "bundled-v1";
  for (const char* key : kTemplateKeys) p.templates[key] = detail::embedded_asset(std::string(key) + ".txt");
  return p;
}

PromptProfile PromptProfile::load(const std::filesystem::path& dir) {
  PromptProfile p = bundled();
  p.name = dir.filename().string();
  for (const char* key : kTemplateKeys) {
    std::ifstream in(dir / (std::string(key) + ".txt"));
    if (!in) continue;
    std::stringstream ss;
    ss << in.rdbuf();
    p.templates[key] = ss.str();
  }
  return p;
}

const std::string& PromptProfile::get(const std::string& key) const {
  auto it = templates.find(key);
  if (it == templates.end()) throw BenchError(ErrorCode::InvalidConfig, "prompt profile lacks '" + key + "'");
  return it->second;
}

std::string fill_template(std::string text, const std::map<std::string, std::string>& values) {
  for (const auto& [key, value] : values) {
    const std::string marker = "{{" + key + "}}";
    std::size_t pos = 0;
    while ((pos = text.find(marker, pos)) != std::string::npos) {
      text.replace(pos, marker.size(), value);
      pos += value.size();
    }
  }
  return text;
}

namespace {

class HttplibTransport : public ChatTransport {
 public:
  explicit HttplibTransport(const EndpointConfig& config) : client_(config.base_url) {
    client_.set_connection_timeout(std::chrono::seconds(std::min(config.timeout_s, 10)));
    client_.set_read_timeout(std::chrono::seconds(config.timeout_s));
    client_.set_write_timeout(std::chrono::seconds(config.timeout_s));
  }

  HttpReply post(const std::string& path, const std::string& body, const HttpHeaders& headers) override {
    httplib::Headers h(headers.begin(), headers.end());
    auto res = client_.Post(path, h, body, "application/json");
    if (!res) return HttpReply{0, "", httplib::to_string(res.error())};
    return HttpReply{res->status, res->body, ""};
  }

 private:
  httplib::Client client_;
};

bool retryable(int status) { return status == 0 || status == 408 || status == 429 || status >= 500; }

}  // namespace

std::shared_ptr<ChatTransport> make_http_transport(const EndpointConfig& config) {
  return std::make_shared<HttplibTransport>(config);
}

json chat_request_body(const EndpointConfig& config, const std::vector<ChatMessage>& messages) {
  json msgs = json::array();
  for (const auto& m : messages) msgs.push_back(json{{"role", m.role}, {"content", m.content}});
  return json{{"model", config.model}, {"messages", std::move(msgs)}, {"temperature", config.temperature}};
}

ChatClient::ChatClient(EndpointConfig config, std::shared_ptr<ChatTransport> transport, LogFn log, SleepFn sleep)
    : config_(std::move(config)), transport_(std::move(transport)), log_(std::move(log)), sleep_(std::move(sleep)) {
  if (!transport_) transport_ = make_http_transport(config_);
  if (!sleep_) sleep_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

std::string ChatClient::complete(const std::vector<ChatMessage>& messages) {
  const std::string body = chat_request_body(config_, messages).dump();
  HttpHeaders headers;
  if (!config_.api_key_env.empty()) {
    const char* key = std::getenv(config_.api_key_env.c_str());
    if (key != nullptr && *key != '\0') {
      headers.emplace(config_.auth_header,
                      config_.auth_scheme.empty() ? std::string(key) : config_.auth_scheme + " " + key);
    }
  }
  if (log_) {
    // The key only ever lives in the header map; logs show the header name.
    log_("request " + config_.base_url + config_.path + " [" + config_.auth_header + ": <redacted>] " + body);
  }

  int delay = config_.backoff_initial_ms;
  int attempts = 0;
  std::string last_error;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      sleep_(std::chrono::milliseconds(delay));
      delay = std::min(delay * 2, config_.backoff_max_ms);
    }
    ++attempts;
    ++attempts_;
    HttpReply reply = transport_->post(config_.path, body, headers);
    if (log_) log_("response status=" + std::to_string(reply.status) + " " + reply.body);
    if (reply.status >= 200 && reply.status < 300) {
      try {
        json j = json::parse(reply.body);
        return j.at("choices").at(0).at("message").at("content").get<std::string>();
      } catch (const json::exception& e) {
        throw BenchError(ErrorCode::EndpointError, std::string("unparseable completion: ") + e.what());
      }
    }
    last_error = reply.status == 0 ? reply.error : "HTTP " + std::to_string(reply.status);
    if (reply.status == 400 && reply.body.find("context_length") != std::string::npos) {
      throw BenchError(ErrorCode::ContextOverflow, reply.body);
    }
    if (!retryable(reply.status)) break;
  }
  throw BenchError(ErrorCode::EndpointError,
                   "after " + std::to_string(attempts) + " attempt(s): " + last_error);
}

}  // namespace cgbench
