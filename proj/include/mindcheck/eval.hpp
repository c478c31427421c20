#pragma once

// Labeled-dataset evaluation of the classifier and reasoner prompts:
// JSONL datasets, prediction runs against any backend, confusion matrices
// and accuracy / precision / recall.

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mindcheck/gateway.hpp"

namespace mindcheck {

/// Evaluated prompt: response_analyzer, rv_reasoner or cbt_stage{1,2,3}_reasoner.
struct EvalTask {
  enum class Kind { ResponseAnalyzer, RvReasoner, CbtReasoner };
  Kind kind = Kind::RvReasoner;
  /// CBT stage 1..3, CbtReasoner only.
  int stage = 0;

  /// Throws PreconditionError for an unknown name.
  static EvalTask parse(std::string_view name);
  std::string name() const;
  bool binary() const { return kind != Kind::ResponseAnalyzer; }

  friend bool operator==(const EvalTask&, const EvalTask&) = default;
};

/// Prediction recorded when the backend or the parser failed.
inline constexpr std::string_view kErrorClass = "<error>";

/// Canonical class label: "0"/"1" for decisions; "slug:score",
/// "general:<class>" or "unclassifiable" for classifications.
std::string class_label(Decision d);
std::string class_label(const Classification& c, const DimensionCatalog& catalog);

struct LabeledExample {
  EvalTask task;
  Fields fields;
  /// Canonical class label.
  std::string label;
  /// 1-based line in the source file.
  std::size_t line = 0;
};

/// One JSON object per line:
///   {"task": "rv_reasoner", "fields": {...}, "label": 0}
///   {"task": "response_analyzer", "fields": {...},
///    "label": {"dimension": "alcohol-abuse", "score": 2}
///             | {"general": "yes"} | "unclassifiable"}
/// Fields must cover the task template's required user fields. Blank lines
/// are skipped. Throws DatasetError naming the line; an empty dataset is an
/// error at line 0.
std::vector<LabeledExample> parse_dataset(std::string_view text, const DimensionCatalog& catalog = default_catalog(),
                                          const TemplateSet& templates = TemplateSet::defaults());
std::vector<LabeledExample> load_dataset(const std::filesystem::path& path,
                                         const DimensionCatalog& catalog = default_catalog(),
                                         const TemplateSet& templates = TemplateSet::defaults());

/// Square confusion matrix over the sorted union of label and prediction
/// classes. counts[i][j] = examples labeled classes[i] predicted classes[j].
struct ConfusionMatrix {
  std::vector<std::string> classes;
  std::vector<std::vector<long>> counts;

  long total() const;
  long trace() const;
  long at(const std::string& label, const std::string& predicted) const;
};

/// Throws PreconditionError on a length mismatch.
ConfusionMatrix confusion_matrix(const std::vector<std::string>& predictions, const std::vector<std::string>& labels);

struct Metrics {
  long n = 0;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  /// Set for binary tasks.
  std::optional<std::string> positive_class;
  ConfusionMatrix confusion;
};

/// Derived from the matrix only. With a positive class, precision and
/// recall are for that class; otherwise they are macro-averaged over the
/// classes that occur as labels. A class never predicted has precision 0.
Metrics compute_metrics(const ConfusionMatrix& m, std::optional<std::string> positive_class);
Metrics compute_metrics(const std::vector<std::string>& predictions, const std::vector<std::string>& labels,
                        std::optional<std::string> positive_class);

struct EvalFailure {
  std::size_t line = 0;
  std::string message;
};

struct EvalResult {
  EvalTask task;
  Metrics metrics;
  std::vector<std::string> predictions;
  std::vector<std::string> labels;
  std::vector<EvalFailure> failures;
};

struct EvalOptions {
  /// Examples evaluated concurrently.
  int parallelism = 1;
  const TemplateSet* templates = nullptr;
  const DimensionCatalog* catalog = nullptr;
  std::string model_tag;
};

/// Predicts one example; backend and parse failures yield kErrorClass.
std::string predict(const LabeledExample& ex, Gateway& gateway, const DimensionCatalog& catalog,
                    std::string* failure = nullptr);

/// Runs `task` over the matching examples of `dataset`. Failures are counted
/// as misclassifications and listed, never thrown. Throws PreconditionError
/// when no example matches the task.
EvalResult run_eval(const EvalTask& task, const std::vector<LabeledExample>& dataset, std::shared_ptr<Backend> backend,
                    const EvalOptions& options = {});

nlohmann::json metrics_to_json(const Metrics& m);
nlohmann::json eval_result_to_json(const EvalResult& r);
/// Human-readable summary with the confusion matrix.
std::string render_eval_table(const EvalResult& r);

/// Replies with each example's own label, rendered in the task's output
/// grammar; requests that match no example raise ScriptError.
class EchoBackend : public Backend {
 public:
  EchoBackend(const std::vector<LabeledExample>& dataset, const DimensionCatalog& catalog = default_catalog(),
              const TemplateSet& templates = TemplateSet::defaults());
  CompletionText complete(const PromptRequest& req) override;
  std::string id() const override { return "echo"; }

 private:
  std::map<std::pair<std::string, std::string>, std::string> replies_;
};

/// Renders a canonical label in the task's output grammar.
std::string render_label(const EvalTask& task, const std::string& label, const DimensionCatalog& catalog);

struct DatasetSplit {
  std::vector<LabeledExample> train;
  std::vector<LabeledExample> test;
};

/// Seeded shuffle, then the first round(n * test_fraction) examples form the
/// test part (prompt-example bookkeeping; nothing is trained).
DatasetSplit split_dataset(const std::vector<LabeledExample>& dataset, double test_fraction = 0.1,
                           std::uint64_t seed = 0);

}  // namespace mindcheck
