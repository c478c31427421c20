#pragma once

// Per-session conversation state machine: screening question loop with
// segment handling, reflection-validation dispatch, re-ask and stop handling,
// then summary, dimension choice and CBT, and finally the report.

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mindcheck/analyzer.hpp"
#include "mindcheck/cbt.hpp"
#include "mindcheck/rv.hpp"
#include "mindcheck/scheduler.hpp"
#include "mindcheck/store.hpp"
#include "mindcheck/turns.hpp"

namespace mindcheck {

enum class Phase { Screening, Summary, Cbt, Done };

std::string_view to_string(Phase p);

struct SessionConfig {
  SchedulerConfig scheduler;
  /// Seeds the choice among a dimension's sample questions.
  std::uint64_t question_seed = 0;
  /// Reword sample questions through the backend before asking.
  bool rephrase_questions = true;

  friend bool operator==(const SessionConfig&, const SessionConfig&) = default;
};

nlohmann::json session_config_to_json(const SessionConfig& c);
SessionConfig session_config_from_json(const nlohmann::json& j);

/// Returns the current time as an ISO-8601 UTC string.
using Clock = std::function<std::string()>;
Clock system_clock();

struct Turn {
  enum class Role { Engine, User };
  Role role = Role::Engine;
  std::optional<TurnKind> kind;
  std::string text;
  std::optional<DimensionId> dimension;
  std::optional<int> stage;
  /// User turns only.
  std::string timestamp;

  friend bool operator==(const Turn&, const Turn&) = default;
};

struct LoggedUnclassified {
  std::string text;
  std::string timestamp;
  std::optional<DimensionId> asked;
  friend bool operator==(const LoggedUnclassified&, const LoggedUnclassified&) = default;
};

/// Everything a finished or in-progress session stores. Serialized as the
/// session record document.
struct SessionRecord {
  std::string session_id;
  std::string user_id;
  std::string created_at;
  DimensionSet selected;
  SessionConfig config;
  QTable qtable_before;
  QTable qtable_after;
  Phase phase = Phase::Screening;
  StateId current_state = StateId::start();
  DimensionSet visited;
  std::map<DimensionId, Score> scores;
  std::vector<Turn> turns;
  std::vector<RvContext> rv;
  std::optional<CbtSession> cbt;
  std::vector<LoggedUnclassified> unclassified;
  std::vector<std::string> notes;
  Telemetry telemetry;

  friend bool operator==(const SessionRecord&, const SessionRecord&) = default;
};

nlohmann::json record_to_json(const SessionRecord& r, const DimensionCatalog& catalog);
/// Throws PersistenceError on a malformed record.
SessionRecord record_from_json(const nlohmann::json& j, const DimensionCatalog& catalog);

struct SessionReport {
  std::string session_id;
  std::string text;
  nlohmann::json data;
  /// Set when persisting the record or Q-table failed; the report is still valid.
  std::optional<std::string> persistence_error;
};

/// Therapist-note style report derived from a finished session's record.
SessionReport build_report(const SessionRecord& r, const DimensionCatalog& catalog);

class Session {
 public:
  struct Deps {
    const DimensionCatalog& catalog;
    std::shared_ptr<Backend> backend;
    const TemplateSet& templates = TemplateSet::defaults();
    Clock clock = system_clock();
    std::string model_tag = {};
  };

  /// Asks the first question, chosen by select_next restricted to `selected`.
  /// Throws PreconditionError on an empty selection.
  Session(std::string session_id, std::string user_id, DimensionSet selected, QTable qtable, SessionConfig config,
          Deps deps);

  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  /// Engine replies to one user message, in order. Throws PreconditionError
  /// once the session is Done.
  std::vector<Frame> handle_user_message(const std::string& message);

  /// Summary phase: a candidate dimension starts CBT, nullopt declines.
  std::vector<Frame> advance_to_cbt(std::optional<DimensionId> chosen);

  /// Requires phase Done. Persists the Q-table and the session record when a
  /// store is given; failures are reported in the result, not thrown.
  SessionReport finalize(TextStore* store = nullptr);

  /// Builds the report without persisting; requires phase Done.
  SessionReport report() const;

  SessionRecord to_record() const;

  const std::string& id() const noexcept { return session_id_; }
  const std::string& user_id() const noexcept { return user_id_; }
  const std::string& created_at() const noexcept { return created_at_; }
  Phase phase() const noexcept { return phase_; }
  StateId current_state() const noexcept { return current_state_; }
  const DimensionSet& selected() const noexcept { return selected_; }
  const DimensionSet& visited() const noexcept { return visited_; }
  const std::map<DimensionId, Score>& scores() const noexcept { return scores_; }
  const std::vector<Turn>& turns() const noexcept { return turns_; }
  /// Engine turns only, indexed from 0.
  const std::vector<Frame>& frames() const noexcept { return frames_; }
  const std::vector<RvContext>& rv_records() const noexcept { return rv_; }
  const std::optional<CbtSession>& cbt() const noexcept { return cbt_; }
  const std::vector<LoggedUnclassified>& unclassified() const noexcept { return unclassified_; }
  const Telemetry& telemetry() const noexcept { return telemetry_; }
  const QTable& qtable() const noexcept { return qtable_; }
  std::optional<DimensionId> asked_dimension() const noexcept { return asked_; }
  const std::vector<std::string>& notes() const noexcept { return notes_; }
  /// Number of times each dimension's question was asked (re-asks included).
  const std::map<DimensionId, int>& ask_counts() const noexcept { return ask_counts_; }

 private:
  struct PendingSegment {
    std::string text;
    int attempt = 1;
  };

  PipelineDeps deps() { return {gateway_, catalog_, telemetry_}; }
  void emit(std::vector<Frame>& out, Frame f);
  void emit_all(std::vector<Frame>& out, std::vector<Frame> fs);
  std::string compose_question(DimensionId d);
  void ask(DimensionId d, std::vector<Frame>& out);
  void select_and_ask(std::vector<Frame>& out);
  void process_queue(std::vector<Frame>& out);
  void after_queue(std::vector<Frame>& out);
  void record_pair(const DimScore& pair, const std::string& segment_text, std::vector<Frame>& out, bool& rv_started);
  void close_rv(const RvContext& ctx);
  void enter_summary(std::vector<Frame>& out);
  void handle_summary_reply(const std::string& message, std::vector<Frame>& out);
  void finish(std::vector<Frame>& out, std::string closing);
  std::vector<std::string> evidence_for(DimensionId d) const;

  std::string session_id_;
  std::string user_id_;
  DimensionSet selected_;
  SessionConfig config_;
  const DimensionCatalog& catalog_;
  std::shared_ptr<Backend> backend_;
  Gateway gateway_;
  ResponseAnalyzer analyzer_;
  Clock clock_;
  Rng scheduler_rng_;
  Rng question_rng_;

  std::string created_at_;
  QTable qtable_before_;
  QTable qtable_;
  Phase phase_ = Phase::Screening;
  StateId current_state_ = StateId::start();
  StateId asked_from_ = StateId::start();
  std::optional<DimensionId> asked_;
  std::string asked_question_;
  bool asked_addressed_ = false;
  bool restate_requested_ = false;
  std::map<DimensionId, int> ask_counts_;
  DimensionSet reasked_;
  DimensionSet visited_;
  std::map<DimensionId, Score> scores_;
  std::map<DimensionId, std::vector<std::string>> evidence_;
  std::deque<PendingSegment> queue_;
  std::optional<PendingSegment> awaiting_rephrase_;
  std::string current_timestamp_;
  std::optional<std::size_t> active_rv_;
  std::vector<RvContext> rv_;
  SessionSummary summary_;
  int invalid_choices_ = 0;
  std::optional<CbtSession> cbt_;
  std::vector<std::string> notes_;
  std::vector<LoggedUnclassified> unclassified_;
  std::vector<Turn> turns_;
  std::vector<Frame> frames_;
  Telemetry telemetry_;
};

/// Re-runs a stored session record against `backend` (normally the script the
/// session was recorded with), feeding the recorded user messages and
/// timestamps. Returns the resulting session's report.
SessionReport replay(const nlohmann::json& record, std::shared_ptr<Backend> backend, const DimensionCatalog& catalog,
                     const TemplateSet& templates = TemplateSet::defaults());

std::string session_record_key(const std::string& session_id);

}  // namespace mindcheck
