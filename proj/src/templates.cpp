#include <algorithm>
#include <fstream>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "mindcheck/errors.hpp"
#include "mindcheck/gateway.hpp"
#include "mindcheck/resources.hpp"

namespace mindcheck {

namespace {

bool needs_examples(const std::string& role) {
  return role == "reasoner" || role == "guide" || role == "validator";
}

ResponseFormat parse_format(const std::string& s, const std::string& name) {
  if (s == "decision") return ResponseFormat::Decision;
  if (s == "analysis") return ResponseFormat::Analysis;
  if (s == "classification") return ResponseFormat::Classification;
  if (s == "text") return ResponseFormat::Text;
  throw TemplateError("template '" + name + "': unknown response_format '" + s + "'");
}

std::vector<std::string> placeholders(std::string_view text) {
  std::vector<std::string> out;
  for (std::size_t pos = text.find("{{"); pos != std::string_view::npos; pos = text.find("{{", pos + 2)) {
    const auto end = text.find("}}", pos + 2);
    if (end == std::string_view::npos) break;
    out.emplace_back(text.substr(pos + 2, end - pos - 2));
  }
  return out;
}

}  // namespace

std::string_view to_string(ResponseFormat f) {
  switch (f) {
    case ResponseFormat::Decision: return "decision";
    case ResponseFormat::Analysis: return "analysis";
    case ResponseFormat::Classification: return "classification";
    case ResponseFormat::Text: return "text";
  }
  return "text";
}

std::string substitute(std::string_view text, const Fields& fields) {
  std::string out;
  std::size_t cursor = 0;
  for (;;) {
    const auto open = text.find("{{", cursor);
    if (open == std::string_view::npos) break;
    const auto close = text.find("}}", open + 2);
    if (close == std::string_view::npos) break;
    const std::string key(text.substr(open + 2, close - open - 2));
    auto it = fields.find(key);
    if (it == fields.end()) throw TemplateError("unresolved placeholder '{{" + key + "}}'");
    out.append(text.substr(cursor, open - cursor));
    out.append(it->second);
    cursor = close + 2;
  }
  out.append(text.substr(cursor));
  return out;
}

PromptTemplate PromptTemplate::parse(std::string_view text) {
  std::string s(text);
  if (s.rfind("---", 0) != 0) throw TemplateError("template must start with a '---' front matter line");
  const auto first_nl = s.find('\n');
  const auto close = s.find("\n---", first_nl);
  if (first_nl == std::string::npos || close == std::string::npos) {
    throw TemplateError("template front matter is not terminated by '---'");
  }
  const std::string front = s.substr(first_nl + 1, close - first_nl);
  auto body_start = s.find('\n', close + 4);
  std::string body = body_start == std::string::npos ? std::string() : s.substr(body_start + 1);

  PromptTemplate t;
  try {
    YAML::Node y = YAML::Load(front);
    if (!y.IsMap()) throw TemplateError("template front matter must be a mapping");
    if (!y["name"]) throw TemplateError("template front matter has no 'name'");
    t.name = y["name"].as<std::string>();
    t.role = y["role"] ? y["role"].as<std::string>() : "generator";
    if (!y["response_format"]) throw TemplateError("template '" + t.name + "' has no response_format");
    t.response_format = parse_format(y["response_format"].as<std::string>(), t.name);
    if (y["temperature"]) t.temperature = y["temperature"].as<double>();
    if (y["max_tokens"]) t.max_tokens = y["max_tokens"].as<int>();
    if (y["required_user_fields"]) t.required_user_fields = y["required_user_fields"].as<std::vector<std::string>>();
    if (y["required_system_fields"]) {
      t.required_system_fields = y["required_system_fields"].as<std::vector<std::string>>();
    }
    if (!y["user_template"]) throw TemplateError("template '" + t.name + "' has no user_template");
    t.user_template = y["user_template"].as<std::string>();
    if (y["examples"]) {
      for (const auto& ex : y["examples"]) {
        if (!ex["user"] || !ex["response"]) {
          throw TemplateError("template '" + t.name + "': example needs 'user' and 'response'");
        }
        t.examples.push_back({trim(ex["user"].as<std::string>()), trim(ex["response"].as<std::string>())});
      }
    }
  } catch (const YAML::Exception& e) {
    throw TemplateError(std::string("template front matter: ") + e.what());
  }
  t.objective = trim(body);
  if (t.objective.empty()) throw TemplateError("template '" + t.name + "' has an empty objective");
  if (!(t.temperature >= 0.0 && t.temperature <= 2.0)) {
    throw TemplateError("template '" + t.name + "': temperature outside [0, 2]");
  }
  if (needs_examples(t.role) && (t.examples.size() < 3 || t.examples.size() > 4)) {
    throw TemplateError("template '" + t.name + "': " + t.role + " templates need 3-4 examples, got " +
                        std::to_string(t.examples.size()));
  }
  for (const auto& key : placeholders(t.user_template)) {
    if (std::find(t.required_user_fields.begin(), t.required_user_fields.end(), key) ==
        t.required_user_fields.end()) {
      throw TemplateError("template '" + t.name + "': placeholder '" + key + "' is not a required field");
    }
  }
  return t;
}

std::string format_reminder(ResponseFormat f) {
  switch (f) {
    case ResponseFormat::Decision:
      return "Reply with one line of the form 'Decision: 0' or 'Decision: 1'.";
    case ResponseFormat::Analysis:
      return "Reply in the form 'Analysis: <your text>'.";
    case ResponseFormat::Classification:
      return "Reply with exactly one of 'Dimension: <identifier> Score: <0|1|2>', "
             "'General: <yes|no|maybe|question|stop>' or 'Unclassifiable'.";
    case ResponseFormat::Text:
      return "Reply with the requested text only.";
  }
  return {};
}

std::string PromptTemplate::render_system(const Fields& fields) const {
  for (const auto& key : required_system_fields) {
    if (!fields.contains(key)) throw TemplateError("template '" + name + "': missing system field '" + key + "'");
  }
  std::string out = substitute(objective, fields);
  out += "\n\nOutput format: " + format_reminder(response_format);
  if (!examples.empty()) {
    out += "\n\nExamples:";
    for (const auto& ex : examples) out += "\n\nInput:\n" + ex.user + "\nOutput: " + ex.response;
  }
  return out;
}

std::string PromptTemplate::render_user(const Fields& fields) const {
  for (const auto& key : required_user_fields) {
    if (!fields.contains(key)) throw TemplateError("template '" + name + "': missing field '" + key + "'");
  }
  return trim(substitute(user_template, fields));
}

TemplateSet TemplateSet::load_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw TemplateError("not a template directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() == ".prompt") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  TemplateSet set;
  for (const auto& path : files) {
    std::ifstream in(path);
    std::ostringstream buf;
    buf << in.rdbuf();
    auto t = PromptTemplate::parse(buf.str());
    if (t.name != path.stem().string()) {
      throw TemplateError("template name '" + t.name + "' does not match file " + path.filename().string());
    }
    set.add(std::move(t));
  }
  return set;
}

const TemplateSet& TemplateSet::defaults() {
  static const TemplateSet set = [] {
    TemplateSet s;
    for (const auto& [name, text] : resources::default_template_texts()) s.add(PromptTemplate::parse(text));
    return s;
  }();
  return set;
}

void TemplateSet::add(PromptTemplate t) {
  auto name = t.name;
  templates_.insert_or_assign(std::move(name), std::move(t));
}

const PromptTemplate& TemplateSet::get(const std::string& name) const {
  auto it = templates_.find(name);
  if (it == templates_.end()) throw TemplateError("unknown template '" + name + "'");
  return it->second;
}

std::vector<std::string> TemplateSet::names() const {
  std::vector<std::string> out;
  for (const auto& [name, t] : templates_) out.push_back(name);
  return out;
}

}  // namespace mindcheck
