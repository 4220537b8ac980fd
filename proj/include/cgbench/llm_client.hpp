#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace cgbench {

struct ChatMessage {
  std::string role;  // system | user | assistant
  std::string content;
  bool operator==(const ChatMessage&) const = default;
};

/// Chat-completion endpoint settings. The API key is read from the
/// environment variable named by api_key_env at request time.
struct EndpointConfig {
  std::string base_url;  // e.g. https://example.openai.azure.com
  std::string path = "/v1/chat/completions";
  std::string model;
  std::string api_key_env;
  std::string auth_header = "Authorization";
  std::string auth_scheme = "Bearer";  // empty: raw key (Azure "api-key" style)
  int max_retries = 3;
  int backoff_initial_ms = 250;
  int backoff_max_ms = 4000;
  int timeout_s = 60;
  std::size_t max_context_chars = 32000;
  double temperature = 0.0;
};

EndpointConfig endpoint_from_json(const nlohmann::json& j);
EndpointConfig load_endpoint_config(const std::filesystem::path& path);

/// Seat prompt templates, keyed "helper_shared", "helper_nonshared",
/// "worker_shared", "worker_nonshared". Placeholders: {{GRAMMAR}},
/// {{TARGET}}, {{PALETTE}}, {{GRID}}.
struct PromptProfile {
  std::string name;
  std::map<std::string, std::string> templates;

  static PromptProfile bundled();
  static PromptProfile load(const std::filesystem::path& dir);
  const std::string& get(const std::string& key) const;
};

std::string fill_template(std::string text, const std::map<std::string, std::string>& values);

struct HttpReply {
  int status = 0;  // 0 = transport failure
  std::string body;
  std::string error;
};

using HttpHeaders = std::multimap<std::string, std::string>;

class ChatTransport {
 public:
  virtual ~ChatTransport() = default;
  virtual HttpReply post(const std::string& path, const std::string& body, const HttpHeaders& headers) = 0;
};

/// cpp-httplib backed transport for http:// and https:// base URLs.
std::shared_ptr<ChatTransport> make_http_transport(const EndpointConfig& config);

using LogFn = std::function<void(std::string_view)>;
using SleepFn = std::function<void(std::chrono::milliseconds)>;

/// Sends chat-completion requests with capped exponential backoff on
/// transport failures, 429 and 5xx. Throws BenchError(EndpointError) once
/// retries are exhausted.
class ChatClient {
 public:
  ChatClient(EndpointConfig config, std::shared_ptr<ChatTransport> transport, LogFn log = {},
             SleepFn sleep = {});

  std::string complete(const std::vector<ChatMessage>& messages);
  int attempts_made() const { return attempts_; }

 private:
  EndpointConfig config_;
  std::shared_ptr<ChatTransport> transport_;
  LogFn log_;
  SleepFn sleep_;
  int attempts_ = 0;
};

nlohmann::json chat_request_body(const EndpointConfig& config, const std::vector<ChatMessage>& messages);

}  // namespace cgbench
