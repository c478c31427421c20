#pragma once

// Reflection-validation exchange run for every response scored 2: a simple
// reflection and open follow-up question, a validity decision on the user's
// follow-up, at most one guide, then empathic validation or abandonment.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mindcheck/catalog.hpp"
#include "mindcheck/gateway.hpp"
#include "mindcheck/turns.hpp"

namespace mindcheck {

inline constexpr int kMaxRvInvalidFollowups = 2;
inline constexpr int kMaxRvGuides = 2;

inline constexpr std::string_view kRvOpenQuestion = "Can you tell me more about what has been contributing to this?";
inline constexpr std::string_view kProfessionalHelpNote =
    "Consider discussing this with a mental health professional.";

/// What the pipelines need from the session: the gateway, the catalog for
/// dimension names and the session's call counters.
struct PipelineDeps {
  Gateway& gateway;
  const DimensionCatalog& catalog;
  Telemetry& telemetry;
};

enum class RvOutcome { Pending, Validated, Abandoned };

std::string_view to_string(RvOutcome o);

struct RvFollowup {
  std::string question;
  std::string response;
  Decision decision = Decision::Invalid;
  /// Guide issued after this follow-up, if any.
  std::optional<std::string> guide;

  friend bool operator==(const RvFollowup&, const RvFollowup&) = default;
};

struct RvContext {
  DimensionId dimension = DimensionId::from_index(1);
  std::string original_question;
  std::string original_response;
  std::vector<RvFollowup> followups;
  /// Question the user is currently answering; empty once resolved.
  std::string pending_question;
  RvOutcome outcome = RvOutcome::Pending;
  std::string validation;
  std::string note;
  std::string cause;

  int guides() const;
  friend bool operator==(const RvContext&, const RvContext&) = default;
};

nlohmann::json rv_to_json(const RvContext& ctx, const DimensionCatalog& catalog);
RvContext rv_from_json(const nlohmann::json& j, const DimensionCatalog& catalog);

/// Restatement of the user's words in second person. Falls back to
/// "You mentioned that <response>." when the backend fails. Throws
/// PreconditionError on an empty response.
std::string simple_reflection(const std::string& original_response, PipelineDeps deps);

/// Empty responses are Invalid without a backend call. Double parse failures
/// propagate.
Decision reason_followup(const RvContext& ctx, const std::string& candidate_response, PipelineDeps deps);

/// Requires the last decision to be Invalid and fewer than kMaxRvGuides guides.
std::string guide_followup(const RvContext& ctx, PipelineDeps deps);

/// Requires a Valid follow-up. Records the text as the context's validation.
std::string validate_empathically(RvContext& ctx, PipelineDeps deps);

/// Opens a context and returns the reflection and follow-up question frames.
RvContext begin_rv(DimensionId dimension, std::string original_question, std::string original_response,
                   PipelineDeps deps, std::vector<Frame>& out);

/// Feeds the user's answer to the open follow-up. Emits a validation or guide
/// frame; abandonment emits nothing and sets the professional-help note.
/// Backend and parse failures abandon the context with the cause recorded.
void on_rv_response(RvContext& ctx, const std::string& response, PipelineDeps deps, std::vector<Frame>& out);

/// Runs a whole exchange, asking the user through `ask` for each follow-up.
RvContext run_rv(DimensionId dimension, const std::string& original_question, const std::string& original_response,
                 PipelineDeps deps, const std::function<std::string(const Frame&)>& ask);

}  // namespace mindcheck
