#pragma once

// Prompt templates and the completion gateway that instantiates them, calls a
// backend and parses the reply.

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mindcheck/backend.hpp"
#include "mindcheck/catalog.hpp"
#include "mindcheck/grammar.hpp"

namespace mindcheck {

enum class ResponseFormat { Decision, Analysis, Classification, Text };

std::string_view to_string(ResponseFormat f);

using Fields = std::map<std::string, std::string>;

struct TemplateExample {
  std::string user;
  std::string response;
};

/// A `templates/<name>.prompt` file: YAML front matter between `---` lines,
/// then the objective text.
///
/// Front matter keys: name, role, response_format (decision | analysis |
/// classification | text), temperature, max_tokens, required_user_fields,
/// required_system_fields, user_template, examples (list of {user, response}).
/// Templates with role reasoner, guide or validator must carry 3 or 4 examples.
struct PromptTemplate {
  std::string name;
  std::string role;
  ResponseFormat response_format = ResponseFormat::Text;
  double temperature = 0.7;
  int max_tokens = 256;
  std::vector<std::string> required_user_fields;
  std::vector<std::string> required_system_fields;
  std::string user_template;
  std::vector<TemplateExample> examples;
  std::string objective;

  /// Throws TemplateError.
  static PromptTemplate parse(std::string_view text);

  /// Objective, output format and examples. Throws TemplateError when a
  /// required system field is missing.
  std::string render_system(const Fields& fields = {}) const;
  /// Throws TemplateError when a required field is missing or the template
  /// has a placeholder with no value.
  std::string render_user(const Fields& fields) const;
};

/// Replaces `{{key}}` placeholders in one pass; substituted values are not
/// rescanned. Throws TemplateError on an unknown placeholder.
std::string substitute(std::string_view text, const Fields& fields);

class TemplateSet {
 public:
  /// Every `*.prompt` file in `dir`.
  static TemplateSet load_dir(const std::filesystem::path& dir);
  /// The templates compiled into the library.
  static const TemplateSet& defaults();

  void add(PromptTemplate t);
  /// Throws TemplateError for an unknown name.
  const PromptTemplate& get(const std::string& name) const;
  bool contains(const std::string& name) const { return templates_.contains(name); }
  std::vector<std::string> names() const;

 private:
  std::map<std::string, PromptTemplate> templates_;
};

std::string format_reminder(ResponseFormat f);

/// Instantiates templates and calls the backend. A reply that fails the
/// template's grammar is re-queried once with a format reminder appended to
/// the user content; a second failure propagates the ParseError. Backend
/// errors propagate unchanged.
class Gateway {
 public:
  Gateway(std::shared_ptr<Backend> backend, const TemplateSet& templates, std::string model_tag = {});

  Backend& backend() const { return *backend_; }
  const TemplateSet& templates() const { return templates_; }

  PromptRequest build(const std::string& template_name, const Fields& user_fields,
                      const Fields& system_fields = {}) const;

  Decision decide(const std::string& template_name, const Fields& fields);
  std::string analyze(const std::string& template_name, const Fields& fields);
  std::string text(const std::string& template_name, const Fields& fields);
  Classification classify(const std::string& template_name, const Fields& fields,
                          const Fields& system_fields, const DimensionCatalog& catalog);

  /// Backend round trips, including format re-queries.
  int backend_calls() const noexcept { return backend_calls_; }

 private:
  template <class Parser>
  auto run(const PromptRequest& req, ResponseFormat format, Parser&& parse);

  std::shared_ptr<Backend> backend_;
  const TemplateSet& templates_;
  std::string model_tag_;
  int backend_calls_ = 0;
};

}  // namespace mindcheck
