#include <cstdlib>
#include <fstream>
#include <thread>

#include <httplib.h>

#include "../json_util.hpp"
#include "plansmith/error.hpp"
#include "plansmith/policy.hpp"

namespace plansmith::policy {

using nlohmann::json;

std::string_view to_string(BackendKind k) {
  switch (k) {
    case BackendKind::remote_chat: return "remote_chat";
    case BackendKind::scripted: return "scripted";
    case BackendKind::random: return "random";
    case BackendKind::memorizing: return "memorizing";
  }
  return "scripted";
}

BackendKind parse_backend_kind(std::string_view s) {
  if (s == "remote_chat" || s == "remote") return BackendKind::remote_chat;
  if (s == "scripted") return BackendKind::scripted;
  if (s == "random") return BackendKind::random;
  if (s == "memorizing") return BackendKind::memorizing;
  throw Error(ErrorKind::config, "unknown backend kind '" + std::string(s) + "'");
}

void BackendConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& msg) {
    throw Error(ErrorKind::config, field + ": " + msg);
  };
  if (!(temperature >= 0.0 && temperature <= 2.0)) fail("temperature", "must lie in [0, 2]");
  if (max_retries < 0 || max_retries > 10) fail("max_retries", "must lie in [0, 10]");
  if (concurrency_limit < 1) fail("concurrency_limit", "must be positive");
  if (max_tokens < 1) fail("max_tokens", "must be positive");
  if (kind == BackendKind::remote_chat) {
    if (endpoint.empty()) fail("endpoint", "required for remote_chat backends");
    if (model.empty()) fail("model", "required for remote_chat backends");
  }
}

void to_json(json& j, const BackendConfig& c) {
  j = json{{"kind", to_string(c.kind)},
           {"endpoint", c.endpoint},
           {"model", c.model},
           {"credentials_env", c.credentials_env},
           {"temperature", c.temperature},
           {"max_tokens", c.max_tokens},
           {"max_retries", c.max_retries},
           {"concurrency_limit", c.concurrency_limit},
           {"backoff_initial_ms", c.backoff_initial.count()},
           {"timeout_ms", c.timeout.count()}};
}

void from_json(const json& j, BackendConfig& c) {
  using detail::optional_field;
  const BackendConfig d;
  c.kind = parse_backend_kind(optional_field<std::string>(j, "kind", std::string(to_string(d.kind))));
  c.endpoint = optional_field<std::string>(j, "endpoint", d.endpoint);
  c.model = optional_field<std::string>(j, "model", d.model);
  c.credentials_env = optional_field<std::string>(j, "credentials_env", d.credentials_env);
  c.temperature = optional_field<double>(j, "temperature", d.temperature);
  c.max_tokens = optional_field<int>(j, "max_tokens", d.max_tokens);
  c.max_retries = optional_field<int>(j, "max_retries", d.max_retries);
  c.concurrency_limit = optional_field<int>(j, "concurrency_limit", d.concurrency_limit);
  c.backoff_initial =
      std::chrono::milliseconds(optional_field<long long>(j, "backoff_initial_ms", d.backoff_initial.count()));
  c.timeout = std::chrono::milliseconds(optional_field<long long>(j, "timeout_ms", d.timeout.count()));
}

// ---------------------------------------------------------------------------

json chat_request(const BackendConfig& cfg, const std::vector<ChatMessage>& messages, double temperature) {
  return json{{"model", cfg.model}, {"messages", messages}, {"temperature", temperature}, {"max_tokens", cfg.max_tokens}};
}

std::string chat_response_body(std::string_view content, int prompt_tokens, int completion_tokens) {
  return json{{"choices", json::array({{{"index", 0},
                                         {"message", {{"role", "assistant"}, {"content", content}}},
                                         {"finish_reason", "stop"}}})},
              {"usage", {{"prompt_tokens", prompt_tokens}, {"completion_tokens", completion_tokens}}}}
      .dump();
}

HttpTransport::HttpTransport(std::string endpoint, std::string api_key, std::chrono::milliseconds timeout)
    : api_key_(std::move(api_key)), timeout_(timeout) {
  const auto scheme_end = endpoint.find("://");
  if (scheme_end == std::string::npos) throw Error(ErrorKind::config, "endpoint: expected an http(s) URL");
  const auto path_start = endpoint.find('/', scheme_end + 3);
  scheme_host_ = endpoint.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/v1/chat/completions" : endpoint.substr(path_start);
}

ChatResponse HttpTransport::post(const json& request) {
  httplib::Client client(scheme_host_);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout_).count();
  client.set_connection_timeout(static_cast<time_t>(secs), 0);
  client.set_read_timeout(static_cast<time_t>(secs), 0);
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
  auto res = client.Post(path_, headers, request.dump(), "application/json");
  if (!res) return {0, {}, httplib::to_string(res.error())};
  return {res->status, res->body, {}};
}

CannedTransport::CannedTransport(std::vector<ChatResponse> responses)
    : responses_(responses.begin(), responses.end()) {}

void CannedTransport::push(ChatResponse r) {
  std::lock_guard lock(mu_);
  responses_.push_back(std::move(r));
}

void CannedTransport::push_content(std::string_view content) { push({200, chat_response_body(content), {}}); }

ChatResponse CannedTransport::post(const json& request) {
  std::lock_guard lock(mu_);
  requests_.push_back(request);
  if (responses_.empty()) return {0, {}, "canned transport exhausted"};
  ChatResponse r = std::move(responses_.front());
  responses_.pop_front();
  return r;
}

std::vector<json> CannedTransport::requests() const {
  std::lock_guard lock(mu_);
  return requests_;
}

LoggingTransport::LoggingTransport(std::shared_ptr<ChatTransport> inner, std::filesystem::path log_path)
    : inner_(std::move(inner)), log_path_(std::move(log_path)) {}

ChatResponse LoggingTransport::post(const json& request) {
  ChatResponse r = inner_->post(request);
  std::lock_guard lock(mu_);
  std::ofstream out(log_path_, std::ios::app | std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot append to " + log_path_.string());
  out << json{{"request", request}, {"response", {{"status", r.status}, {"body", r.body}, {"error", r.error}}}}.dump()
      << '\n';
  return r;
}

ReplayTransport::ReplayTransport(const std::filesystem::path& log_path) {
  std::ifstream in(log_path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open replay log " + log_path.string());
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json rec = json::parse(line);
      const json& resp = rec.at("response");
      by_request_[rec.at("request").dump()].push_back(
          {resp.at("status").get<int>(), resp.at("body").get<std::string>(), resp.value("error", "")});
    } catch (const json::exception& e) {
      throw Error(ErrorKind::parse, log_path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

ChatResponse ReplayTransport::post(const json& request) {
  std::lock_guard lock(mu_);
  auto it = by_request_.find(request.dump());
  if (it == by_request_.end() || it->second.empty()) return {404, {}, "no recorded response for request"};
  ChatResponse r = std::move(it->second.front());
  it->second.pop_front();
  return r;
}

std::shared_ptr<ChatTransport> make_http_transport(const BackendConfig& cfg) {
  std::string key;
  if (!cfg.credentials_env.empty()) {
    const char* v = std::getenv(cfg.credentials_env.c_str());
    if (!v) throw Error(ErrorKind::config, "credentials_env: environment variable " + cfg.credentials_env + " is not set");
    key = v;
  }
  return std::make_shared<HttpTransport>(cfg.endpoint, key, cfg.timeout);
}

namespace {

bool transient(int status) { return status == 0 || status == 408 || status == 429 || status >= 500; }

std::optional<Completion> decode(const std::string& body) {
  try {
    const json j = json::parse(body);
    Completion c;
    c.content = j.at("choices").at(0).at("message").at("content").get<std::string>();
    if (j.contains("usage") && j["usage"].is_object()) {
      c.prompt_tokens = j["usage"].value("prompt_tokens", 0);
      c.completion_tokens = j["usage"].value("completion_tokens", 0);
    }
    return c;
  } catch (const json::exception&) {
    return std::nullopt;
  }
}

}  // namespace

Completion complete_with_retries(ChatTransport& transport, const BackendConfig& cfg,
                                 const std::vector<ChatMessage>& messages, double temperature, const Sleeper& sleep) {
  const json request = chat_request(cfg, messages, temperature);
  auto delay = cfg.backoff_initial;
  std::string last_error;
  for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
    if (attempt > 0) {
      if (sleep) {
        sleep(delay);
      } else {
        std::this_thread::sleep_for(delay);
      }
      delay *= 2;
    }
    const ChatResponse r = transport.post(request);
    if (r.status == 200) {
      if (auto c = decode(r.body)) {
        c->attempts = attempt + 1;
        return *c;
      }
      last_error = "malformed completion body";
      continue;
    }
    last_error = r.status == 0 ? "transport error: " + r.error : "HTTP " + std::to_string(r.status);
    if (!transient(r.status)) {
      throw Error(ErrorKind::backend, "chat completion failed permanently: " + last_error);
    }
  }
  throw Error(ErrorKind::backend, "chat completion failed after " + std::to_string(cfg.max_retries + 1) +
                                      " attempts: " + last_error);
}

}  // namespace plansmith::policy
