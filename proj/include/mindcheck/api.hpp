#pragma once

// Transport-independent API: routes structured requests to sessions, reports
// and eval runs. The HTTP and WebSocket server is a thin layer over handle().

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mindcheck/session.hpp"
#include "mindcheck/store.hpp"

namespace mindcheck {

struct ApiRequest {
  std::string method;
  /// Path without the query string.
  std::string path;
  std::map<std::string, std::string> query;
  std::string body;
  /// Value of the Authorization header, if any.
  std::string authorization;
};

struct ApiResponse {
  int status = 200;
  nlohmann::json body;
};

enum class StorageMode {
  /// Q-tables and session records live in the server's store.
  Server,
  /// The client sends its Q-table when creating a session and keeps the
  /// exported record and Q-table; the server persists nothing.
  Client,
};

struct ApiConfig {
  /// Empty disables authentication.
  std::string auth_secret;
  StorageMode storage = StorageMode::Server;
  /// A message to a session that is already handling one gets 429 instead
  /// of waiting.
  bool reject_concurrent = false;
  SessionConfig session;
  std::string model_tag;
};

/// Bearer token for a user: "<user_id>.<hex HMAC-SHA256(secret, user_id)>".
std::string user_token(const std::string& secret, const std::string& user_id);
/// The user the token belongs to, or nullopt when it does not verify.
std::optional<std::string> verify_token(const std::string& secret, const std::string& token);

/// Builds the backend a new session (or eval run) talks to.
using BackendFactory = std::function<std::shared_ptr<Backend>()>;

/// Routes:
///   GET  /health
///   GET  /catalog                      dimension screen data
///   GET  /turn-kinds                   closed set of frame kinds
///   POST /sessions                     {user_id, selected_dimensions[], qtable?}
///   GET  /sessions/{id}?since=N        phase and frames from index N
///   POST /sessions/{id}/messages       {text}
///   POST /sessions/{id}/choice         {dimension: slug | null}
///   GET  /sessions/{id}/report
///   GET  /sessions/{id}/record
///   GET  /users/{id}/qtable
///   POST /eval                         {task, dataset, backend: echo | configured, parallelism?}
/// Errors are {"error": message} with 400, 401, 403, 404, 409 or 429.
class ApiService {
 public:
  ApiService(ApiConfig config, BackendFactory backends, std::shared_ptr<TextStore> store,
             const DimensionCatalog& catalog = default_catalog(), const TemplateSet& templates = TemplateSet::defaults(),
             Clock clock = system_clock());

  ApiResponse handle(const ApiRequest& req);

  /// Frames a message produced, for pushing over a live socket. Same
  /// semantics as POST /sessions/{id}/messages.
  ApiResponse post_message(const std::string& session_id, const std::string& text, const std::string& authorization);
  ApiResponse session_frames(const std::string& session_id, std::size_t since, const std::string& authorization);

  std::size_t session_count() const;

 private:
  struct Entry {
    std::mutex mu;
    std::unique_ptr<Session> session;
    std::optional<SessionReport> report;
  };

  std::optional<ApiResponse> authorize(const std::string& authorization, const std::string& user_id) const;
  std::shared_ptr<Entry> find(const std::string& id) const;
  ApiResponse create_session(const ApiRequest& req);
  ApiResponse with_session(const std::string& id, const std::string& authorization, bool mutate,
                           const std::function<ApiResponse(Entry&)>& fn);
  ApiResponse finish_if_done(Entry& e, std::vector<Frame> frames);
  ApiResponse run_eval_request(const ApiRequest& req);
  nlohmann::json frames_json(const std::vector<Frame>& frames) const;
  std::string new_session_id();

  ApiConfig config_;
  BackendFactory backends_;
  std::shared_ptr<TextStore> store_;
  const DimensionCatalog& catalog_;
  const TemplateSet& templates_;
  Clock clock_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
};

}  // namespace mindcheck
