#pragma once

// End-of-session CBT: summary and dimension choice, situation statement, then
// three guarded stages (recognize, challenge, reframe negative thoughts).
// Each stage allows three reasoner evaluations and two guides; a third
// invalid response terminates the whole procedure.

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mindcheck/rv.hpp"

namespace mindcheck {

inline constexpr int kCbtStageCount = 3;
inline constexpr int kMaxCbtReasonerCalls = 3;
inline constexpr int kMaxCbtGuides = 2;

inline constexpr std::string_view kSeekProfessionalHelp =
    "It may help to work through this with a professional. Please consider seeking professional assistance.";

enum class CbtStage { Recognize = 1, Challenge = 2, Reframe = 3 };

inline int to_int(CbtStage s) noexcept { return static_cast<int>(s); }
std::string_view to_string(CbtStage s);

struct SessionSummary {
  std::string text;
  /// Score-2 dimensions.
  std::vector<DimensionId> flagged;
  /// Offered for CBT: the flagged set, or the score-1 set when nothing is flagged.
  std::vector<DimensionId> candidates;
};

/// Lists dimensions scored 2 before those scored 1, each group in catalog order.
SessionSummary summarize_session(const std::map<DimensionId, Score>& scores, const DimensionCatalog& catalog);

/// Parsed reply to the dimension-choice prompt.
struct CbtChoice {
  enum class Kind { Chosen, Decline, Invalid } kind = Kind::Invalid;
  std::optional<DimensionId> dimension;
};

/// Accepts the option number, slug or display name of a candidate, or a
/// decline word (no, skip, none, ...).
CbtChoice parse_cbt_choice(const std::string& reply, const std::vector<DimensionId>& candidates,
                           const DimensionCatalog& catalog);

std::string choice_prompt(const std::vector<DimensionId>& candidates, const DimensionCatalog& catalog);

struct CbtAttempt {
  std::string question;
  std::string response;
  Decision decision = Decision::Invalid;
  std::optional<std::string> guide;
  friend bool operator==(const CbtAttempt&, const CbtAttempt&) = default;
};

struct CbtStageRecord {
  CbtStage stage = CbtStage::Recognize;
  std::vector<CbtAttempt> attempts;
  int reasoner_calls = 0;
  bool passed = false;

  int guides() const;
  friend bool operator==(const CbtStageRecord&, const CbtStageRecord&) = default;
};

enum class CbtStatus { InProgress, Completed, Terminated };
std::string_view to_string(CbtStatus s);

struct CbtSession {
  DimensionId chosen = DimensionId::from_index(1);
  std::string situation;
  std::vector<CbtStageRecord> stages;
  std::string pending_question;
  CbtStatus status = CbtStatus::InProgress;
  std::optional<CbtStage> terminated_stage;
  std::string recommendation;
  std::string cause;

  CbtStage current_stage() const { return stages.back().stage; }
  friend bool operator==(const CbtSession&, const CbtSession&) = default;
};

nlohmann::json cbt_to_json(const CbtSession& s, const DimensionCatalog& catalog);
CbtSession cbt_from_json(const nlohmann::json& j, const DimensionCatalog& catalog);

/// One-paragraph statement grounded in the user's words: if the model's text
/// quotes none of `evidence`, the first item is appended as a quote. Throws
/// PreconditionError when `evidence` is empty (dimension never discussed).
std::string identify_situation(DimensionId dimension, const std::vector<std::string>& evidence, PipelineDeps deps);

/// Prior stages' and the current stage's turns, oldest first.
std::string cbt_history(const CbtSession& s);

std::string stage_question(CbtStage stage, const CbtSession& s, PipelineDeps deps);

/// Empty responses are Invalid without a backend call.
Decision stage_reason(CbtStage stage, const CbtSession& s, const std::string& response, PipelineDeps deps);

/// Throws PolicyError when the stage already has kMaxCbtGuides guides.
std::string stage_guide(CbtStage stage, const CbtSession& s, const std::string& response, PipelineDeps deps);

/// Identifies the situation and asks the first stage question. Emits the
/// situation as a summary frame and the question as a cbt_question frame.
CbtSession begin_cbt(DimensionId chosen, const std::vector<std::string>& evidence, PipelineDeps deps,
                     std::vector<Frame>& out);

/// Feeds the user's answer to the open stage question.
void on_cbt_response(CbtSession& s, const std::string& response, PipelineDeps deps, std::vector<Frame>& out);

}  // namespace mindcheck
