#include <fstream>

#include "mindcheck/backend.hpp"
#include "mindcheck/errors.hpp"

namespace mindcheck {

void PromptRequest::validate() const {
  if (!(temperature >= 0.0 && temperature <= 2.0)) {
    throw PreconditionError("temperature must be in [0, 2]");
  }
  if (system_content.empty()) throw PreconditionError("system content is empty");
}

bool ScriptEntry::matches(const PromptRequest& req) const {
  if (template_name && *template_name != req.template_name) return false;
  if (contains && req.user_content.find(*contains) == std::string::npos) return false;
  return true;
}

ScriptedBackend::ScriptedBackend(std::vector<ScriptEntry> script, std::string id)
    : id_(std::move(id)), script_(std::move(script)), consumed_(script_.size(), false) {
  if (script_.empty()) throw PreconditionError("scripted backend needs a nonempty script");
}

CompletionText ScriptedBackend::complete(const PromptRequest& req) {
  req.validate();
  std::lock_guard lock(mu_);
  for (std::size_t i = 0; i < script_.size(); ++i) {
    const auto& entry = script_[i];
    if (consumed_[i] || !entry.matches(req)) continue;
    if (!entry.sticky) consumed_[i] = true;
    if (entry.fail) {
      calls_.push_back({req.template_name, req.user_content, "<" + *entry.fail + ">"});
      if (*entry.fail == "timeout") throw TimeoutError("scripted timeout");
      if (*entry.fail == "auth") throw AuthError("scripted authentication failure");
      throw TransportError("scripted transport failure");
    }
    std::string reply = entry.reply;
    static const std::string kEcho = "{{user_content}}";
    for (auto pos = reply.find(kEcho); pos != std::string::npos;
         pos = reply.find(kEcho, pos + req.user_content.size())) {
      reply.replace(pos, kEcho.size(), req.user_content);
    }
    calls_.push_back({req.template_name, req.user_content, reply});
    return {reply, id_, std::chrono::nanoseconds{0}};
  }
  calls_.push_back({req.template_name, req.user_content, "<no match>"});
  throw ScriptError("no script entry matches request for template '" + req.template_name + "'");
}

std::vector<ScriptCall> ScriptedBackend::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

std::size_t ScriptedBackend::remaining() const {
  std::lock_guard lock(mu_);
  std::size_t n = 0;
  for (std::size_t i = 0; i < script_.size(); ++i)
    if (!script_[i].sticky && !consumed_[i]) ++n;
  return n;
}

nlohmann::json script_to_json(const std::vector<ScriptEntry>& script) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : script) {
    nlohmann::json j;
    if (e.template_name) j["template"] = *e.template_name;
    if (e.contains) j["contains"] = *e.contains;
    if (e.fail) {
      j["fail"] = *e.fail;
    } else {
      j["reply"] = e.reply;
    }
    if (e.sticky) j["sticky"] = true;
    entries.push_back(std::move(j));
  }
  return {{"entries", std::move(entries)}};
}

std::vector<ScriptEntry> script_from_json(const nlohmann::json& doc) {
  const nlohmann::json* entries = &doc;
  if (doc.is_object()) {
    if (!doc.contains("entries")) throw PreconditionError("script document has no 'entries'");
    entries = &doc["entries"];
  }
  if (!entries->is_array()) throw PreconditionError("script entries must be an array");
  std::vector<ScriptEntry> out;
  for (const auto& j : *entries) {
    if (!j.is_object()) throw PreconditionError("script entry must be an object");
    ScriptEntry e;
    if (j.contains("template")) e.template_name = j["template"].get<std::string>();
    if (j.contains("contains")) e.contains = j["contains"].get<std::string>();
    if (j.contains("fail")) {
      e.fail = j["fail"].get<std::string>();
      if (*e.fail != "transport" && *e.fail != "timeout" && *e.fail != "auth") {
        throw PreconditionError("unknown scripted failure '" + *e.fail + "'");
      }
    } else if (j.contains("reply")) {
      e.reply = j["reply"].get<std::string>();
    } else {
      throw PreconditionError("script entry needs 'reply' or 'fail'");
    }
    e.sticky = j.value("sticky", false);
    out.push_back(std::move(e));
  }
  return out;
}

std::shared_ptr<ScriptedBackend> ScriptedBackend::from_json(const nlohmann::json& doc) {
  return std::make_shared<ScriptedBackend>(script_from_json(doc));
}

std::shared_ptr<ScriptedBackend> ScriptedBackend::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw PreconditionError("cannot open script " + path.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw PreconditionError("malformed script " + path.string() + ": " + e.what());
  }
}

}  // namespace mindcheck
