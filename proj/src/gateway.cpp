#include "mindcheck/gateway.hpp"

#include "mindcheck/errors.hpp"

namespace mindcheck {

Gateway::Gateway(std::shared_ptr<Backend> backend, const TemplateSet& templates, std::string model_tag)
    : backend_(std::move(backend)), templates_(templates), model_tag_(std::move(model_tag)) {
  if (!backend_) throw PreconditionError("gateway needs a backend");
}

PromptRequest Gateway::build(const std::string& template_name, const Fields& user_fields,
                             const Fields& system_fields) const {
  const auto& t = templates_.get(template_name);
  PromptRequest req;
  req.template_name = t.name;
  req.system_content = t.render_system(system_fields);
  req.user_content = t.render_user(user_fields);
  req.temperature = t.temperature;
  req.max_tokens = t.max_tokens;
  req.model_tag = model_tag_;
  return req;
}

template <class Parser>
auto Gateway::run(const PromptRequest& req, ResponseFormat format, Parser&& parse) {
  ++backend_calls_;
  auto first = backend_->complete(req);
  try {
    return parse(first.raw);
  } catch (const ParseError&) {
  }
  PromptRequest retry = req;
  retry.user_content += "\n\n" + format_reminder(format);
  ++backend_calls_;
  auto second = backend_->complete(retry);
  return parse(second.raw);
}

Decision Gateway::decide(const std::string& template_name, const Fields& fields) {
  return run(build(template_name, fields), ResponseFormat::Decision,
             [](const std::string& raw) { return parse_decision(raw); });
}

std::string Gateway::analyze(const std::string& template_name, const Fields& fields) {
  return run(build(template_name, fields), ResponseFormat::Analysis,
             [](const std::string& raw) { return parse_analysis(raw); });
}

std::string Gateway::text(const std::string& template_name, const Fields& fields) {
  return run(build(template_name, fields), ResponseFormat::Text,
             [](const std::string& raw) { return parse_text(raw); });
}

Classification Gateway::classify(const std::string& template_name, const Fields& fields,
                                 const Fields& system_fields, const DimensionCatalog& catalog) {
  return run(build(template_name, fields, system_fields), ResponseFormat::Classification,
             [&catalog](const std::string& raw) { return parse_classification(raw, catalog); });
}

}  // namespace mindcheck
