#pragma once

// Chat-completion backends: the remote HTTP endpoint and the scripted mock
// used for offline, deterministic runs.

#include <chrono>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace mindcheck {

struct PromptRequest {
  /// Name of the template that produced the request; used by scripted
  /// matchers and telemetry, never sent over the wire.
  std::string template_name;
  std::string system_content;
  std::string user_content;
  double temperature = 0.7;
  std::string model_tag;
  int max_tokens = 256;

  /// Throws PreconditionError: temperature outside [0, 2], empty system content.
  void validate() const;
};

struct CompletionText {
  std::string raw;
  std::string backend_id;
  std::chrono::nanoseconds latency{0};
};

class Backend {
 public:
  virtual ~Backend() = default;
  /// Thread-safe. Throws a BackendError subclass on failure.
  virtual CompletionText complete(const PromptRequest& req) = 0;
  virtual std::string id() const = 0;
};

// ---------------------------------------------------------------------------
// Scripted backend

struct ScriptEntry {
  /// Matches when set and equal to the request's template name.
  std::optional<std::string> template_name;
  /// Matches when set and contained in the request's user content.
  std::optional<std::string> contains;
  /// `{{user_content}}` in the reply is replaced with the request's user content.
  std::string reply;
  /// Sticky entries are never consumed.
  bool sticky = false;
  /// Simulated failure instead of a reply: "transport", "timeout" or "auth".
  std::optional<std::string> fail;

  bool matches(const PromptRequest& req) const;
};

struct ScriptCall {
  std::string template_name;
  std::string user_content;
  std::string reply;
};

/// Replies from an ordered script. Each call consumes the first unconsumed
/// entry whose matcher fits; no fit (or an exhausted script) is a ScriptError.
///
/// Script file schema (JSON):
///   { "entries": [ { "template": "rv_reasoner", "contains": "...",
///                    "reply": "Decision: 0", "sticky": false } ] }
class ScriptedBackend : public Backend {
 public:
  /// Throws PreconditionError when the script is empty.
  explicit ScriptedBackend(std::vector<ScriptEntry> script, std::string id = "scripted");

  static std::shared_ptr<ScriptedBackend> from_json(const nlohmann::json& doc);
  static std::shared_ptr<ScriptedBackend> load_file(const std::filesystem::path& path);

  CompletionText complete(const PromptRequest& req) override;
  std::string id() const override { return id_; }

  std::vector<ScriptCall> calls() const;
  /// Unconsumed non-sticky entries.
  std::size_t remaining() const;

 private:
  std::string id_;
  mutable std::mutex mu_;
  std::vector<ScriptEntry> script_;
  std::vector<bool> consumed_;
  std::vector<ScriptCall> calls_;
};

nlohmann::json script_to_json(const std::vector<ScriptEntry>& script);
std::vector<ScriptEntry> script_from_json(const nlohmann::json& doc);

// ---------------------------------------------------------------------------
// Remote backend

struct RetryPolicy {
  /// Retries after the first attempt.
  int max_retries = 3;
  std::chrono::milliseconds initial_backoff{250};
  double multiplier = 2.0;
  std::chrono::milliseconds max_backoff{8000};

  /// Delay before retry number `retry` (1-based).
  std::chrono::milliseconds backoff(int retry) const;
};

struct RemoteConfig {
  /// e.g. "https://api.example.com/v1"; "/chat/completions" is appended.
  std::string base_url;
  std::string model;
  std::string api_key;
  std::chrono::milliseconds connect_timeout{5000};
  std::chrono::milliseconds read_timeout{60000};
  RetryPolicy retry;

  /// MINDCHECK_BACKEND_URL, MINDCHECK_MODEL, MINDCHECK_API_KEY.
  static RemoteConfig from_env();
};

/// Chat-completion client over HTTP(S). 408, 429, 5xx, connection failures
/// and timeouts are retried with exponential backoff; 401/403 throw AuthError
/// immediately; other statuses throw BackendError.
class RemoteBackend : public Backend {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  explicit RemoteBackend(RemoteConfig config, Sleeper sleeper = {});

  CompletionText complete(const PromptRequest& req) override;
  std::string id() const override { return "remote:" + config_.model; }

  const RemoteConfig& config() const noexcept { return config_; }

  /// Wire body for a request; exposed for tests.
  nlohmann::json request_body(const PromptRequest& req) const;
  /// Extracts choices[0].message.content; throws BackendError when absent or empty.
  static std::string extract_content(const std::string& body);

 private:
  RemoteConfig config_;
  Sleeper sleeper_;
  std::string scheme_host_port_;
  std::string path_;
};

}  // namespace mindcheck
