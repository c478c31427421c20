#include "mindcheck/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <thread>

#include "mindcheck/errors.hpp"
#include "mindcheck/random.hpp"

namespace mindcheck {

namespace {

std::string label_from_json(const nlohmann::json& j, const EvalTask& task, const DimensionCatalog& catalog,
                            std::size_t line) {
  if (task.binary()) {
    if (!j.is_number_integer() || (j.get<int>() != 0 && j.get<int>() != 1)) {
      throw DatasetError("decision label must be 0 or 1 for task " + task.name(), line);
    }
    return std::to_string(j.get<int>());
  }
  if (j.is_string() && j.get<std::string>() == "unclassifiable") return "unclassifiable";
  if (j.is_object() && j.contains("dimension") && j.contains("score")) {
    const auto slug = j["dimension"].get<std::string>();
    const auto d = catalog.find(slug);
    if (!d) throw DatasetError("unknown dimension '" + slug + "'", line);
    const int score = j["score"].get<int>();
    if (score < 0 || score > 2) throw DatasetError("score must be 0, 1 or 2", line);
    return class_label(DimScore{*d, score_from_int(score)}, catalog);
  }
  if (j.is_object() && j.contains("general")) {
    const auto cls = parse_general_class(j["general"].get<std::string>());
    if (!cls) throw DatasetError("unknown general class '" + j["general"].get<std::string>() + "'", line);
    return class_label(GeneralResponse{*cls}, catalog);
  }
  throw DatasetError("classification label must be {dimension, score}, {general} or \"unclassifiable\"", line);
}

std::string template_name(const EvalTask& task) { return task.name(); }

double ratio(long num, long den) { return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den); }

}  // namespace

EvalTask EvalTask::parse(std::string_view name) {
  if (name == "response_analyzer") return {Kind::ResponseAnalyzer, 0};
  if (name == "rv_reasoner") return {Kind::RvReasoner, 0};
  for (int s = 1; s <= 3; ++s)
    if (name == "cbt_stage" + std::to_string(s) + "_reasoner") return {Kind::CbtReasoner, s};
  throw PreconditionError("unknown eval task '" + std::string(name) + "'");
}

std::string EvalTask::name() const {
  switch (kind) {
    case Kind::ResponseAnalyzer: return "response_analyzer";
    case Kind::RvReasoner: return "rv_reasoner";
    case Kind::CbtReasoner: return "cbt_stage" + std::to_string(stage) + "_reasoner";
  }
  return "";
}

std::string class_label(Decision d) { return std::to_string(to_int(d)); }

std::string class_label(const Classification& c, const DimensionCatalog& catalog) {
  if (const auto* ds = std::get_if<DimScore>(&c)) return catalog.slug(ds->dimension) + ":" + std::to_string(to_int(ds->score));
  if (const auto* g = std::get_if<GeneralResponse>(&c)) return "general:" + std::string(to_string(g->cls));
  return "unclassifiable";
}

std::string render_label(const EvalTask& task, const std::string& label, const DimensionCatalog& catalog) {
  if (task.binary()) return render_decision(label == "1" ? Decision::Invalid : Decision::Valid);
  if (label == "unclassifiable") return render_classification(Unclassifiable{}, catalog);
  const auto colon = label.find(':');
  if (label.rfind("general:", 0) == 0) {
    return render_classification(GeneralResponse{*parse_general_class(label.substr(colon + 1))}, catalog);
  }
  return render_classification(
      DimScore{catalog.require(label.substr(0, colon)), score_from_int(std::stoi(label.substr(colon + 1)))}, catalog);
}

std::vector<LabeledExample> parse_dataset(std::string_view text, const DimensionCatalog& catalog,
                                          const TemplateSet& templates) {
  std::vector<LabeledExample> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DatasetError(std::string("invalid JSON: ") + e.what(), lineno);
    }
    if (!j.is_object()) throw DatasetError("each line must be a JSON object", lineno);
    for (const char* key : {"task", "fields", "label"})
      if (!j.contains(key)) throw DatasetError(std::string("missing key '") + key + "'", lineno);
    LabeledExample ex;
    ex.line = lineno;
    try {
      ex.task = EvalTask::parse(j["task"].get<std::string>());
      if (!j["fields"].is_object()) throw DatasetError("fields must be an object", lineno);
      for (const auto& [k, v] : j["fields"].items()) {
        if (!v.is_string()) throw DatasetError("field '" + k + "' must be a string", lineno);
        ex.fields[k] = v.get<std::string>();
      }
      for (const auto& req : templates.get(template_name(ex.task)).required_user_fields)
        if (!ex.fields.contains(req)) throw DatasetError("task " + ex.task.name() + " needs field '" + req + "'", lineno);
      ex.label = label_from_json(j["label"], ex.task, catalog, lineno);
    } catch (const DatasetError&) {
      throw;
    } catch (const std::exception& e) {
      throw DatasetError(e.what(), lineno);
    }
    out.push_back(std::move(ex));
  }
  if (out.empty()) throw DatasetError("dataset has no examples", 0);
  return out;
}

std::vector<LabeledExample> load_dataset(const std::filesystem::path& path, const DimensionCatalog& catalog,
                                         const TemplateSet& templates) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot open " + path.string(), 0);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_dataset(ss.str(), catalog, templates);
}

long ConfusionMatrix::total() const {
  long t = 0;
  for (const auto& row : counts)
    for (long c : row) t += c;
  return t;
}

long ConfusionMatrix::trace() const {
  long t = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) t += counts[i][i];
  return t;
}

long ConfusionMatrix::at(const std::string& label, const std::string& predicted) const {
  const auto i = std::find(classes.begin(), classes.end(), label);
  const auto j = std::find(classes.begin(), classes.end(), predicted);
  if (i == classes.end() || j == classes.end()) return 0;
  return counts[i - classes.begin()][j - classes.begin()];
}

ConfusionMatrix confusion_matrix(const std::vector<std::string>& predictions, const std::vector<std::string>& labels) {
  if (predictions.size() != labels.size()) {
    throw PreconditionError("predictions and labels differ in length: " + std::to_string(predictions.size()) +
                            " vs " + std::to_string(labels.size()));
  }
  std::set<std::string> classes(labels.begin(), labels.end());
  classes.insert(predictions.begin(), predictions.end());
  ConfusionMatrix m;
  m.classes.assign(classes.begin(), classes.end());
  m.counts.assign(m.classes.size(), std::vector<long>(m.classes.size(), 0));
  auto index = [&](const std::string& c) { return std::lower_bound(m.classes.begin(), m.classes.end(), c) - m.classes.begin(); };
  for (std::size_t k = 0; k < labels.size(); ++k) ++m.counts[index(labels[k])][index(predictions[k])];
  return m;
}

Metrics compute_metrics(const ConfusionMatrix& m, std::optional<std::string> positive_class) {
  Metrics out;
  out.confusion = m;
  out.n = m.total();
  out.accuracy = ratio(m.trace(), out.n);
  out.positive_class = positive_class;
  const auto column = [&](std::size_t j) {
    long s = 0;
    for (const auto& row : m.counts) s += row[j];
    return s;
  };
  const auto row_sum = [&](std::size_t i) {
    long s = 0;
    for (long c : m.counts[i]) s += c;
    return s;
  };
  if (positive_class) {
    const auto it = std::find(m.classes.begin(), m.classes.end(), *positive_class);
    if (it == m.classes.end()) return out;
    const auto p = static_cast<std::size_t>(it - m.classes.begin());
    out.precision = ratio(m.counts[p][p], column(p));
    out.recall = ratio(m.counts[p][p], row_sum(p));
    return out;
  }
  double precision = 0.0, recall = 0.0;
  int label_classes = 0;
  for (std::size_t i = 0; i < m.classes.size(); ++i) {
    if (row_sum(i) == 0) continue;
    ++label_classes;
    precision += ratio(m.counts[i][i], column(i));
    recall += ratio(m.counts[i][i], row_sum(i));
  }
  if (label_classes) {
    out.precision = precision / label_classes;
    out.recall = recall / label_classes;
  }
  return out;
}

Metrics compute_metrics(const std::vector<std::string>& predictions, const std::vector<std::string>& labels,
                        std::optional<std::string> positive_class) {
  return compute_metrics(confusion_matrix(predictions, labels), std::move(positive_class));
}

std::string predict(const LabeledExample& ex, Gateway& gateway, const DimensionCatalog& catalog,
                    std::string* failure) {
  try {
    if (ex.task.binary()) return class_label(gateway.decide(ex.task.name(), ex.fields));
    return class_label(gateway.classify(ex.task.name(), ex.fields, {{"dimension_list", catalog.dimension_list()}},
                                        catalog),
                       catalog);
  } catch (const BackendError& e) {
    if (failure) *failure = std::string("backend: ") + e.what();
  } catch (const ParseError& e) {
    if (failure) *failure = std::string("parse: ") + e.what();
  }
  return std::string(kErrorClass);
}

EvalResult run_eval(const EvalTask& task, const std::vector<LabeledExample>& dataset, std::shared_ptr<Backend> backend,
                    const EvalOptions& options) {
  const auto& templates = options.templates ? *options.templates : TemplateSet::defaults();
  const auto& catalog = options.catalog ? *options.catalog : default_catalog();
  std::vector<const LabeledExample*> examples;
  for (const auto& ex : dataset)
    if (ex.task == task) examples.push_back(&ex);
  if (examples.empty()) throw PreconditionError("dataset has no examples for task " + task.name());

  EvalResult result;
  result.task = task;
  result.predictions.resize(examples.size());
  std::vector<std::string> failures(examples.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    Gateway gateway(backend, templates, options.model_tag);
    for (std::size_t i = next++; i < examples.size(); i = next++)
      result.predictions[i] = predict(*examples[i], gateway, catalog, &failures[i]);
  };
  const auto threads = static_cast<std::size_t>(std::clamp(options.parallelism, 1, 64));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < std::min(threads, examples.size()); ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (std::size_t i = 0; i < examples.size(); ++i) {
    result.labels.push_back(examples[i]->label);
    if (!failures[i].empty()) result.failures.push_back({examples[i]->line, failures[i]});
  }
  result.metrics = compute_metrics(result.predictions, result.labels,
                                   task.binary() ? std::optional<std::string>("1") : std::nullopt);
  return result;
}

nlohmann::json metrics_to_json(const Metrics& m) {
  nlohmann::json j{{"n", m.n},
                   {"accuracy", m.accuracy},
                   {"precision", m.precision},
                   {"recall", m.recall},
                   {"averaging", m.positive_class ? "binary" : "macro"},
                   {"classes", m.confusion.classes},
                   {"confusion", m.confusion.counts}};
  j["positive_class"] = m.positive_class ? nlohmann::json(*m.positive_class) : nlohmann::json();
  return j;
}

nlohmann::json eval_result_to_json(const EvalResult& r) {
  nlohmann::json failures = nlohmann::json::array();
  for (const auto& f : r.failures) failures.push_back({{"line", f.line}, {"message", f.message}});
  return {{"task", r.task.name()},
          {"metrics", metrics_to_json(r.metrics)},
          {"predictions", r.predictions},
          {"labels", r.labels},
          {"failures", std::move(failures)}};
}

std::string render_eval_table(const EvalResult& r) {
  std::ostringstream out;
  const auto& m = r.metrics;
  out << "task       " << r.task.name() << "\n";
  out << "n          " << m.n << "\n" << std::fixed << std::setprecision(4);
  out << "accuracy   " << m.accuracy << "\n";
  out << "precision  " << m.precision << (m.positive_class ? " (class " + *m.positive_class + ")" : " (macro)") << "\n";
  out << "recall     " << m.recall << (m.positive_class ? " (class " + *m.positive_class + ")" : " (macro)") << "\n";
  out << "failures   " << r.failures.size() << "\n\nconfusion (rows: label, columns: prediction)\n";
  std::size_t width = 5;
  for (const auto& c : m.confusion.classes) width = std::max(width, c.size());
  out << std::setw(static_cast<int>(width)) << "";
  for (const auto& c : m.confusion.classes) out << "  " << std::setw(static_cast<int>(width)) << c;
  out << "\n";
  for (std::size_t i = 0; i < m.confusion.classes.size(); ++i) {
    out << std::setw(static_cast<int>(width)) << m.confusion.classes[i];
    for (long c : m.confusion.counts[i]) out << "  " << std::setw(static_cast<int>(width)) << c;
    out << "\n";
  }
  return out.str();
}

EchoBackend::EchoBackend(const std::vector<LabeledExample>& dataset, const DimensionCatalog& catalog,
                         const TemplateSet& templates) {
  for (const auto& ex : dataset) {
    const auto user = templates.get(ex.task.name()).render_user(ex.fields);
    replies_.emplace(std::make_pair(ex.task.name(), user), render_label(ex.task, ex.label, catalog));
  }
}

CompletionText EchoBackend::complete(const PromptRequest& req) {
  const auto it = replies_.find({req.template_name, req.user_content});
  if (it == replies_.end()) throw ScriptError("echo backend has no example for this request");
  return {it->second, id(), std::chrono::milliseconds(0)};
}

DatasetSplit split_dataset(const std::vector<LabeledExample>& dataset, double test_fraction, std::uint64_t seed) {
  if (test_fraction < 0.0 || test_fraction > 1.0) throw PreconditionError("test fraction must be in [0, 1]");
  std::vector<std::size_t> order(dataset.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.uniform_index(i)]);
  const auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(dataset.size()) * test_fraction));
  DatasetSplit out;
  for (std::size_t k = 0; k < order.size(); ++k) (k < n_test ? out.test : out.train).push_back(dataset[order[k]]);
  return out;
}

}  // namespace mindcheck
