#pragma once

#include <chrono>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "plansmith/context.hpp"
#include "plansmith/env.hpp"
#include "plansmith/trajectory.hpp"

namespace plansmith::policy {

// ---------------------------------------------------------------------------
// Output grammar
//
//   [<reasoning> long thought </reasoning>]
//   [Thought: short thought]
//   Action: action
//
// Keywords are case-insensitive. Lines are trimmed and blank lines ignored.
// The Thought may span several lines; nothing may follow the Action line.

struct Usage {
  int prompt_tokens = 0;
  int completion_tokens = 0;
  int long_tokens = 0;
  int short_tokens = 0;
  int action_tokens = 0;
};

struct PolicyOutput {
  std::string long_thought;
  std::string short_thought;
  std::string action_raw;
  Usage usage;
  std::string backend_id;
  double temperature = 0.0;
  /// True when the raw completion did not parse; the step is then consumed
  /// as an invalid action.
  bool invalid = false;
  std::string error;
  std::string raw;
};

/// Throws Error(parse) on grammar violations.
PolicyOutput parse_output(std::string_view raw);

std::string render_output(std::string_view long_thought, std::string_view short_thought, std::string_view action);

/// Canonical textual form of a grammar-valid completion: trimmed non-blank
/// lines, markers glued to their content, one space after each keyword
/// colon, and empty Thought lines or reasoning blocks removed.
std::string normalize_output(std::string_view raw);

// ---------------------------------------------------------------------------
// Configuration

enum class BackendKind { remote_chat, scripted, random, memorizing };

std::string_view to_string(BackendKind k);
BackendKind parse_backend_kind(std::string_view s);

struct BackendConfig {
  BackendKind kind = BackendKind::scripted;
  std::string endpoint;
  std::string model;
  /// Name of the environment variable holding the API key.
  std::string credentials_env;
  double temperature = 0.0;
  int max_tokens = 1024;
  int max_retries = 3;
  int concurrency_limit = 1;
  std::chrono::milliseconds backoff_initial{200};
  std::chrono::milliseconds timeout{60000};

  /// Throws Error(config) naming the offending field.
  void validate() const;
};

void to_json(nlohmann::json& j, const BackendConfig& c);
void from_json(const nlohmann::json& j, BackendConfig& c);

// ---------------------------------------------------------------------------
// Chat-completions transport

struct ChatResponse {
  int status = 0;  // 0 means the request never reached the server
  std::string body;
  std::string error;
};

class ChatTransport {
 public:
  virtual ~ChatTransport() = default;
  virtual ChatResponse post(const nlohmann::json& request) = 0;
};

/// HTTP(S) POST to `endpoint` (full URL of the chat-completions route).
class HttpTransport final : public ChatTransport {
 public:
  HttpTransport(std::string endpoint, std::string api_key, std::chrono::milliseconds timeout);
  ChatResponse post(const nlohmann::json& request) override;

 private:
  std::string scheme_host_;
  std::string path_;
  std::string api_key_;
  std::chrono::milliseconds timeout_;
};

/// Returns queued responses in order; records every request.
class CannedTransport final : public ChatTransport {
 public:
  CannedTransport() = default;
  explicit CannedTransport(std::vector<ChatResponse> responses);
  void push(ChatResponse r);
  /// Convenience: a 200 response wrapping `content` as a chat completion.
  void push_content(std::string_view content);
  ChatResponse post(const nlohmann::json& request) override;
  std::vector<nlohmann::json> requests() const;

 private:
  mutable std::mutex mu_;
  std::deque<ChatResponse> responses_;
  std::vector<nlohmann::json> requests_;
};

/// Appends {"request", "response"} records to a JSONL file, then forwards.
class LoggingTransport final : public ChatTransport {
 public:
  LoggingTransport(std::shared_ptr<ChatTransport> inner, std::filesystem::path log_path);
  ChatResponse post(const nlohmann::json& request) override;

 private:
  std::shared_ptr<ChatTransport> inner_;
  std::filesystem::path log_path_;
  std::mutex mu_;
};

/// Serves responses recorded by LoggingTransport, keyed by request content.
class ReplayTransport final : public ChatTransport {
 public:
  explicit ReplayTransport(const std::filesystem::path& log_path);
  ChatResponse post(const nlohmann::json& request) override;

 private:
  std::map<std::string, std::deque<ChatResponse>> by_request_;
  std::mutex mu_;
};

nlohmann::json chat_request(const BackendConfig& cfg, const std::vector<ChatMessage>& messages, double temperature);
std::string chat_response_body(std::string_view content, int prompt_tokens = 0, int completion_tokens = 0);

struct Completion {
  std::string content;
  int prompt_tokens = 0;
  int completion_tokens = 0;
  int attempts = 0;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

/// Sends one request with retries on transient failures (transport errors,
/// 408, 429, 5xx, malformed bodies), doubling the delay each time. Throws
/// Error(backend) once max_retries is exhausted or on a permanent failure.
Completion complete_with_retries(ChatTransport& transport, const BackendConfig& cfg,
                                 const std::vector<ChatMessage>& messages, double temperature,
                                 const Sleeper& sleep = {});

std::shared_ptr<ChatTransport> make_http_transport(const BackendConfig& cfg);

// ---------------------------------------------------------------------------
// Backends

struct EpisodeSettings {
  std::uint64_t seed = 0;
  /// Overrides the configured temperature when set.
  std::optional<double> temperature;
};

/// Per-episode policy state (cursors, RNG). Not shared between threads.
class EpisodeAgent {
 public:
  virtual ~EpisodeAgent() = default;
  /// Throws Error(backend) on unrecoverable backend failures; grammar
  /// failures are reported through PolicyOutput::invalid.
  virtual PolicyOutput generate(const context::PromptContext& ctx) = 0;
};

class PolicyBackend {
 public:
  virtual ~PolicyBackend() = default;
  virtual std::string id() const = 0;
  virtual const BackendConfig& config() const = 0;
  /// Safe to call concurrently.
  virtual std::unique_ptr<EpisodeAgent> begin_episode(const env::TaskSpec& task, const EpisodeSettings& settings) const = 0;
};

/// Replays the planner's optimal plan for the episode's world.
std::unique_ptr<PolicyBackend> make_scripted_backend(BackendConfig cfg = {});

/// Uniform over the world's action templates (grounded vocabulary when none).
std::unique_ptr<PolicyBackend> make_random_backend(BackendConfig cfg = {});

/// Replays the first stored trajectory whose task id and instruction text
/// match the episode's task; otherwise behaves like the random backend.
std::unique_ptr<PolicyBackend> make_memorizing_backend(std::vector<Trajectory> memory, BackendConfig cfg = {});

std::unique_ptr<PolicyBackend> make_remote_backend(BackendConfig cfg, std::shared_ptr<ChatTransport> transport,
                                                   Sleeper sleep = {});

}  // namespace plansmith::policy
