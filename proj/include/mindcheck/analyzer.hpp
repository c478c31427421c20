#pragma once

// Response analysis: sentence segmentation, per-segment classification and
// resolution of general responses through the score mapping table.

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "mindcheck/catalog.hpp"
#include "mindcheck/domain.hpp"
#include "mindcheck/gateway.hpp"

namespace mindcheck {

struct Segment {
  std::string text;
  std::size_t index = 0;
  friend bool operator==(const Segment&, const Segment&) = default;
};

/// Splits on terminal punctuation (. ! ?) followed by whitespace and an
/// uppercase letter, digit or opening quote, or by the end of the message.
/// Titles and Latin abbreviations (Dr., Mrs., e.g., vs., ...), single-letter
/// initials and decimals never end a sentence. Throws PreconditionError on an
/// empty or blank message.
std::vector<Segment> segment(std::string_view message);

struct AnalyzerOutcome {
  std::vector<Classification> classifications;
  std::optional<SessionControl> control;
};

/// What one classification resolves to against the asked dimension.
using Resolution = std::variant<DimScore, SessionControl, Unclassifiable>;

Resolution resolve_one(const Classification& c, DimensionId asked, const ScoreMappingTable& table);

struct ResolvedMessage {
  std::vector<DimScore> pairs;
  /// EndScreening takes precedence over RestateQuestion.
  std::optional<SessionControl> control;
  std::size_t unclassifiable = 0;
};

ResolvedMessage resolve(const AnalyzerOutcome& outcome, DimensionId asked, const ScoreMappingTable& table);

enum class FallbackAction { RequestRephrase, LogAndAdvance };

/// Attempt 1 asks the user to rephrase; attempt 2 logs the segment and moves on.
FallbackAction rephrase_fallback(int attempt);

inline constexpr std::string_view kRephraseRequest =
    "Sorry, I didn't quite follow that. Could you say it another way?";

class ResponseAnalyzer {
 public:
  static constexpr const char* kTemplate = "response_analyzer";

  ResponseAnalyzer(Gateway& gateway, const DimensionCatalog& catalog);

  /// Backend or parse failures yield Unclassifiable.
  Classification classify_segment(const Segment& seg, DimensionId asked, const std::string& question);

  AnalyzerOutcome analyze(const std::vector<Segment>& segments, DimensionId asked, const std::string& question);

  /// Classifier calls made, successful or not.
  int calls() const noexcept { return calls_; }

 private:
  Gateway& gateway_;
  const DimensionCatalog& catalog_;
  std::string dimension_list_;
  int calls_ = 0;
};

/// Structural rewording of a sample question; the original on any failure.
std::string rephrase_question(const std::string& question, Gateway& gateway);

}  // namespace mindcheck
