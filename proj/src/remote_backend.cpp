#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "mindcheck/backend.hpp"
#include "mindcheck/errors.hpp"

namespace mindcheck {

namespace {

std::string env_or(const char* name, const char* fallback) {
  const char* v = std::getenv(name);
  return v && *v ? v : fallback;
}

bool retryable_status(int status) { return status == 408 || status == 429 || status >= 500; }

}  // namespace

std::chrono::milliseconds RetryPolicy::backoff(int retry) const {
  const double ms = static_cast<double>(initial_backoff.count()) * std::pow(multiplier, retry - 1);
  return std::chrono::milliseconds(
      static_cast<std::int64_t>(std::min(ms, static_cast<double>(max_backoff.count()))));
}

RemoteConfig RemoteConfig::from_env() {
  RemoteConfig c;
  c.base_url = env_or("MINDCHECK_BACKEND_URL", "https://api.openai.com/v1");
  c.model = env_or("MINDCHECK_MODEL", "gpt-4");
  c.api_key = env_or("MINDCHECK_API_KEY", "");
  return c;
}

RemoteBackend::RemoteBackend(RemoteConfig config, Sleeper sleeper)
    : config_(std::move(config)), sleeper_(std::move(sleeper)) {
  if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  const auto& url = config_.base_url;
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw PreconditionError("backend URL needs a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  scheme_host_port_ = url.substr(0, path_start);
  path_ = path_start == std::string::npos ? std::string() : url.substr(path_start);
  while (!path_.empty() && path_.back() == '/') path_.pop_back();
  path_ += "/chat/completions";
}

nlohmann::json RemoteBackend::request_body(const PromptRequest& req) const {
  return {
      {"model", req.model_tag.empty() ? config_.model : req.model_tag},
      {"messages",
       {{{"role", "system"}, {"content", req.system_content}},
        {{"role", "user"}, {"content", req.user_content}}}},
      {"temperature", req.temperature},
      {"max_tokens", req.max_tokens},
  };
}

std::string RemoteBackend::extract_content(const std::string& body) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception&) {
    throw BackendError("backend returned a non-JSON body");
  }
  const auto ptr = "/choices/0/message/content"_json_pointer;
  if (!doc.contains(ptr) || !doc[ptr].is_string()) {
    throw BackendError("backend response has no choices[0].message.content");
  }
  auto content = doc[ptr].get<std::string>();
  if (content.empty()) throw BackendError("backend returned empty content");
  return content;
}

CompletionText RemoteBackend::complete(const PromptRequest& req) {
  req.validate();
  const auto body = request_body(req).dump();
  const auto started = std::chrono::steady_clock::now();

  httplib::Client client(scheme_host_port_);
  client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(config_.connect_timeout));
  client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(config_.read_timeout));
  client.set_write_timeout(std::chrono::duration_cast<std::chrono::microseconds>(config_.read_timeout));
  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

  std::string last_error;
  bool last_was_timeout = false;
  for (int attempt = 0;; ++attempt) {
    if (attempt > 0) sleeper_(config_.retry.backoff(attempt));
    const auto sent = std::chrono::steady_clock::now();
    auto res = client.Post(path_, headers, body, "application/json");
    if (!res) {
      const auto err = res.error();
      last_was_timeout = err == httplib::Error::ConnectionTimeout ||
                         (err == httplib::Error::Read && std::chrono::steady_clock::now() - sent >= config_.read_timeout);
      last_error = httplib::to_string(err);
    } else if (res->status == 401 || res->status == 403) {
      throw AuthError("backend rejected credentials (HTTP " + std::to_string(res->status) + ")");
    } else if (res->status >= 200 && res->status < 300) {
      return {extract_content(res->body), id(),
              std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - started)};
    } else if (retryable_status(res->status)) {
      last_was_timeout = res->status == 408;
      last_error = "HTTP " + std::to_string(res->status);
    } else {
      throw BackendError("backend returned HTTP " + std::to_string(res->status));
    }
    if (attempt >= config_.retry.max_retries) break;
  }
  const auto msg = "backend unavailable after " + std::to_string(config_.retry.max_retries + 1) +
                   " attempts: " + last_error;
  if (last_was_timeout) throw TimeoutError(msg);
  throw TransportError(msg);
}

}  // namespace mindcheck
