#include "mindcheck/api.hpp"

#include <openssl/crypto.h>
#include <openssl/evp.h>
#include <openssl/hmac.h>

#include <random>

#include "mindcheck/errors.hpp"
#include "mindcheck/eval.hpp"

namespace mindcheck {

namespace {

ApiResponse error(int status, std::string message) { return {status, {{"error", std::move(message)}}}; }

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (start <= path.size()) {
    const auto slash = path.find('/', start);
    const auto end = slash == std::string::npos ? path.size() : slash;
    if (end > start) parts.push_back(path.substr(start, end - start));
    if (slash == std::string::npos) break;
    start = slash + 1;
  }
  return parts;
}

std::string hex(const unsigned char* data, std::size_t n) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    out += digits[data[i] >> 4];
    out += digits[data[i] & 0xf];
  }
  return out;
}

std::optional<nlohmann::json> parse_body(const std::string& body) {
  try {
    auto j = nlohmann::json::parse(body.empty() ? "{}" : body);
    if (!j.is_object()) return std::nullopt;
    return j;
  } catch (const nlohmann::json::exception&) {
    return std::nullopt;
  }
}

nlohmann::json report_json(const SessionReport& r) {
  nlohmann::json j{{"session_id", r.session_id}, {"text", r.text}, {"data", r.data}};
  j["persistence_error"] = r.persistence_error ? nlohmann::json(*r.persistence_error) : nlohmann::json();
  return j;
}

}  // namespace

std::string user_token(const std::string& secret, const std::string& user_id) {
  unsigned char mac[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  HMAC(EVP_sha256(), secret.data(), static_cast<int>(secret.size()),
       reinterpret_cast<const unsigned char*>(user_id.data()), user_id.size(), mac, &len);
  return user_id + "." + hex(mac, len);
}

std::optional<std::string> verify_token(const std::string& secret, const std::string& token) {
  const auto dot = token.rfind('.');
  if (dot == std::string::npos || dot == 0) return std::nullopt;
  const auto user = token.substr(0, dot);
  const auto expected = user_token(secret, user);
  if (expected.size() != token.size() || CRYPTO_memcmp(expected.data(), token.data(), token.size()) != 0) {
    return std::nullopt;
  }
  return user;
}

ApiService::ApiService(ApiConfig config, BackendFactory backends, std::shared_ptr<TextStore> store,
                       const DimensionCatalog& catalog, const TemplateSet& templates, Clock clock)
    : config_(std::move(config)),
      backends_(std::move(backends)),
      store_(std::move(store)),
      catalog_(catalog),
      templates_(templates),
      clock_(std::move(clock)) {
  config_.session.scheduler.validate();
  if (config_.storage == StorageMode::Server && !store_) throw PreconditionError("server storage needs a store");
}

std::size_t ApiService::session_count() const {
  std::lock_guard lock(mu_);
  return sessions_.size();
}

std::optional<ApiResponse> ApiService::authorize(const std::string& authorization, const std::string& user_id) const {
  if (config_.auth_secret.empty()) return std::nullopt;
  constexpr std::string_view prefix = "Bearer ";
  if (authorization.rfind(prefix, 0) != 0) return error(401, "missing bearer token");
  const auto user = verify_token(config_.auth_secret, authorization.substr(prefix.size()));
  if (!user) return error(401, "invalid token");
  if (!user_id.empty() && *user != user_id) return error(403, "token does not belong to this user");
  return std::nullopt;
}

std::shared_ptr<ApiService::Entry> ApiService::find(const std::string& id) const {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

std::string ApiService::new_session_id() {
  std::random_device rd;
  std::string id;
  for (int i = 0; i < 4; ++i) {
    const auto v = rd();
    const unsigned char bytes[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                                    static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    id += hex(bytes, 4);
  }
  return id;
}

nlohmann::json ApiService::frames_json(const std::vector<Frame>& frames) const {
  auto arr = nlohmann::json::array();
  for (const auto& f : frames) arr.push_back(frame_to_json(f, catalog_));
  return arr;
}

ApiResponse ApiService::handle(const ApiRequest& req) {
  try {
    const auto parts = split_path(req.path);
    const auto& m = req.method;
    if (parts.size() == 1 && parts[0] == "health" && m == "GET") return {200, {{"status", "ok"}}};
    if (parts.size() == 1 && parts[0] == "catalog" && m == "GET") {
      auto dims = nlohmann::json::array();
      for (const auto& d : catalog_.dimensions())
        dims.push_back({{"index", d.id.index()}, {"slug", d.slug}, {"display_name", d.display_name}});
      return {200, {{"version", catalog_.version()}, {"dimensions", std::move(dims)}}};
    }
    if (parts.size() == 1 && parts[0] == "turn-kinds" && m == "GET") {
      auto kinds = nlohmann::json::array();
      for (auto k : kAllTurnKinds) kinds.push_back(std::string(to_string(k)));
      return {200, {{"kinds", std::move(kinds)}}};
    }
    if (parts.size() == 1 && parts[0] == "sessions" && m == "POST") return create_session(req);
    if (parts.size() == 1 && parts[0] == "eval" && m == "POST") return run_eval_request(req);
    if (parts.size() == 3 && parts[0] == "users" && parts[2] == "qtable" && m == "GET") {
      if (auto denied = authorize(req.authorization, parts[1])) return *denied;
      if (config_.storage != StorageMode::Server) return error(404, "Q-tables are held by clients");
      const auto q = load_qtable(*store_, parts[1], catalog_, default_priorities(), config_.session.scheduler);
      return {200, qtable_to_json(q, catalog_)};
    }
    if (parts.size() >= 2 && parts[0] == "sessions") {
      const auto& id = parts[1];
      if (parts.size() == 2 && m == "GET") {
        std::size_t since = 0;
        if (auto it = req.query.find("since"); it != req.query.end()) {
          try {
            since = std::stoul(it->second);
          } catch (const std::exception&) {
            return error(400, "since must be a non-negative integer");
          }
        }
        return session_frames(id, since, req.authorization);
      }
      if (parts.size() == 3 && parts[2] == "messages" && m == "POST") {
        const auto body = parse_body(req.body);
        if (!body || !body->contains("text") || !(*body)["text"].is_string()) {
          return error(400, "body must be {\"text\": string}");
        }
        return post_message(id, (*body)["text"].get<std::string>(), req.authorization);
      }
      if (parts.size() == 3 && parts[2] == "choice" && m == "POST") {
        const auto body = parse_body(req.body);
        if (!body || !body->contains("dimension")) return error(400, "body must be {\"dimension\": slug or null}");
        std::optional<DimensionId> chosen;
        if (!(*body)["dimension"].is_null()) {
          if (!(*body)["dimension"].is_string()) return error(400, "dimension must be a slug or null");
          const auto slug = (*body)["dimension"].get<std::string>();
          chosen = catalog_.find(slug);
          if (!chosen) return error(400, "unknown dimension '" + slug + "'");
        }
        return with_session(id, req.authorization, true, [&](Entry& e) {
          if (e.session->phase() != Phase::Summary) return error(409, "session is not choosing a dimension");
          return finish_if_done(e, e.session->advance_to_cbt(chosen));
        });
      }
      if (parts.size() == 3 && parts[2] == "report" && m == "GET") {
        return with_session(id, req.authorization, false, [&](Entry& e) {
          if (!e.report) return error(409, "session is still in progress");
          auto j = report_json(*e.report);
          if (config_.storage == StorageMode::Client) j["qtable"] = qtable_to_json(e.session->qtable(), catalog_);
          return ApiResponse{200, std::move(j)};
        });
      }
      if (parts.size() == 3 && parts[2] == "record" && m == "GET") {
        return with_session(id, req.authorization, false, [&](Entry& e) {
          return ApiResponse{200, record_to_json(e.session->to_record(), catalog_)};
        });
      }
    }
    return error(404, "no route for " + m + " " + req.path);
  } catch (const PreconditionError& e) {
    return error(400, e.what());
  } catch (const PersistenceError& e) {
    return error(500, e.what());
  } catch (const std::exception& e) {
    return error(500, e.what());
  }
}

ApiResponse ApiService::create_session(const ApiRequest& req) {
  const auto body = parse_body(req.body);
  if (!body) return error(400, "body must be a JSON object");
  if (!body->contains("user_id") || !(*body)["user_id"].is_string() || (*body)["user_id"].get<std::string>().empty()) {
    return error(400, "user_id is required");
  }
  const auto user = (*body)["user_id"].get<std::string>();
  if (auto denied = authorize(req.authorization, user)) return *denied;
  if (!body->contains("selected_dimensions") || !(*body)["selected_dimensions"].is_array()) {
    return error(400, "selected_dimensions must be a list of dimension slugs");
  }
  DimensionSet selected;
  for (const auto& s : (*body)["selected_dimensions"]) {
    if (!s.is_string()) return error(400, "selected_dimensions must be a list of dimension slugs");
    const auto d = catalog_.find(s.get<std::string>());
    if (!d) return error(400, "unknown dimension '" + s.get<std::string>() + "'");
    selected.insert(*d);
  }
  if (selected.empty()) return error(400, "select at least one dimension");

  auto config = config_.session;
  if (body->contains("seed")) {
    config.scheduler.rng_seed = (*body)["seed"].get<std::uint64_t>();
    config.question_seed = config.scheduler.rng_seed;
  } else {
    std::random_device rd;
    config.scheduler.rng_seed = (static_cast<std::uint64_t>(rd()) << 32) | rd();
    config.question_seed = (static_cast<std::uint64_t>(rd()) << 32) | rd();
  }

  QTable qtable;
  if (config_.storage == StorageMode::Server) {
    qtable = load_qtable(*store_, user, catalog_, default_priorities(), config.scheduler);
  } else if (body->contains("qtable") && !(*body)["qtable"].is_null()) {
    try {
      qtable = qtable_from_json((*body)["qtable"], catalog_);
    } catch (const PersistenceError& e) {
      return error(400, std::string("invalid qtable: ") + e.what());
    }
    if (qtable.owner() != user) return error(400, "qtable belongs to another user");
  } else {
    qtable = init_qtable(default_priorities(), config.scheduler, user);
  }

  auto entry = std::make_shared<Entry>();
  const auto id = new_session_id();
  entry->session = std::make_unique<Session>(id, user, selected, std::move(qtable), config,
                                             Session::Deps{catalog_, backends_(), templates_, clock_, config_.model_tag});
  auto frames = entry->session->frames();
  {
    std::lock_guard lock(mu_);
    sessions_[id] = entry;
  }
  auto j = nlohmann::json{{"session_id", id},
                          {"user_id", user},
                          {"created_at", entry->session->created_at()},
                          {"phase", std::string(to_string(entry->session->phase()))},
                          {"first_message", frame_to_json(frames.front(), catalog_)},
                          {"frames", frames_json(frames)}};
  return {201, std::move(j)};
}

ApiResponse ApiService::with_session(const std::string& id, const std::string& authorization, bool mutate,
                                     const std::function<ApiResponse(Entry&)>& fn) {
  auto entry = find(id);
  if (!entry) return error(404, "unknown session '" + id + "'");
  if (auto denied = authorize(authorization, entry->session->user_id())) return *denied;
  std::unique_lock lock(entry->mu, std::defer_lock);
  if (mutate && config_.reject_concurrent) {
    if (!lock.try_lock()) return error(429, "session is busy with another message");
  } else {
    lock.lock();
  }
  return fn(*entry);
}

ApiResponse ApiService::finish_if_done(Entry& e, std::vector<Frame> frames) {
  if (e.session->phase() == Phase::Done && !e.report) {
    e.report = e.session->finalize(config_.storage == StorageMode::Server ? store_.get() : nullptr);
  }
  return {200,
          {{"replies", frames_json(frames)},
           {"phase", std::string(to_string(e.session->phase()))},
           {"report_ready", e.report.has_value()}}};
}

ApiResponse ApiService::post_message(const std::string& session_id, const std::string& text,
                                     const std::string& authorization) {
  return with_session(session_id, authorization, true, [&](Entry& e) {
    if (e.session->phase() == Phase::Done) return error(409, "session is finished");
    return finish_if_done(e, e.session->handle_user_message(text));
  });
}

ApiResponse ApiService::session_frames(const std::string& session_id, std::size_t since,
                                       const std::string& authorization) {
  return with_session(session_id, authorization, false, [&](Entry& e) {
    const auto& all = e.session->frames();
    std::vector<Frame> tail(all.begin() + static_cast<std::ptrdiff_t>(std::min(since, all.size())), all.end());
    return ApiResponse{200,
                       {{"session_id", session_id},
                        {"user_id", e.session->user_id()},
                        {"created_at", e.session->created_at()},
                        {"phase", std::string(to_string(e.session->phase()))},
                        {"frame_count", all.size()},
                        {"frames", frames_json(tail)}}};
  });
}

ApiResponse ApiService::run_eval_request(const ApiRequest& req) {
  if (auto denied = authorize(req.authorization, "")) return *denied;
  const auto body = parse_body(req.body);
  if (!body || !body->contains("task") || !body->contains("dataset")) {
    return error(400, "body must be {task, dataset, backend?, parallelism?}");
  }
  EvalTask task;
  std::vector<LabeledExample> dataset;
  try {
    task = EvalTask::parse((*body)["task"].get<std::string>());
    dataset = parse_dataset((*body)["dataset"].get<std::string>(), catalog_, templates_);
  } catch (const DatasetError& e) {
    return {400, {{"error", e.what()}, {"line", e.line()}}};
  }
  const auto backend_kind = body->value("backend", std::string("configured"));
  std::shared_ptr<Backend> backend;
  if (backend_kind == "echo") {
    backend = std::make_shared<EchoBackend>(dataset, catalog_, templates_);
  } else if (backend_kind == "configured") {
    backend = backends_();
  } else {
    return error(400, "backend must be 'echo' or 'configured'");
  }
  EvalOptions opts;
  opts.parallelism = body->value("parallelism", 1);
  opts.templates = &templates_;
  opts.catalog = &catalog_;
  opts.model_tag = config_.model_tag;
  return {200, eval_result_to_json(run_eval(task, dataset, backend, opts))};
}

}  // namespace mindcheck
