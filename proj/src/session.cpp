#include "mindcheck/session.hpp"

#include <chrono>
#include <ctime>

#include "mindcheck/errors.hpp"

namespace mindcheck {

namespace {

constexpr std::string_view kAllClearClosing = "Thank you for checking in today. Keep up the good work!";
constexpr std::string_view kDeclineClosing = "Thank you for talking with me today. Take care.";

}  // namespace

std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::Screening: return "screening";
    case Phase::Summary: return "summary";
    case Phase::Cbt: return "cbt";
    case Phase::Done: return "done";
  }
  return "screening";
}

Clock system_clock() {
  return [] {
    const auto now = std::chrono::system_clock::now();
    const auto t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return std::string(buf);
  };
}

Session::Session(std::string session_id, std::string user_id, DimensionSet selected, QTable qtable,
                 SessionConfig config, Deps deps)
    : session_id_(std::move(session_id)),
      user_id_(std::move(user_id)),
      selected_(selected),
      config_(config),
      catalog_(deps.catalog),
      backend_(std::move(deps.backend)),
      gateway_(backend_, deps.templates, deps.model_tag),
      analyzer_(gateway_, catalog_),
      clock_(std::move(deps.clock)),
      scheduler_rng_(config.scheduler.rng_seed),
      question_rng_(config.question_seed),
      qtable_before_(qtable),
      qtable_(std::move(qtable)) {
  if (selected_.empty()) throw PreconditionError("empty selection: choose at least one dimension");
  config_.scheduler.validate();
  if (qtable_before_.owner().empty()) {
    qtable_before_.set_owner(user_id_);
    qtable_.set_owner(user_id_);
  }
  created_at_ = clock_();
  std::vector<Frame> out;
  select_and_ask(out);
}

void Session::emit(std::vector<Frame>& out, Frame f) {
  f.index = frames_.size();
  frames_.push_back(f);
  turns_.push_back({Turn::Role::Engine, f.kind, f.text, f.dimension, f.stage, {}});
  out.push_back(std::move(f));
}

void Session::emit_all(std::vector<Frame>& out, std::vector<Frame> fs) {
  for (auto& f : fs) emit(out, std::move(f));
}

std::string Session::compose_question(DimensionId d) {
  const auto& samples = catalog_.at(d).sample_questions;
  const auto& sample = samples[question_rng_.uniform_index(samples.size())];
  if (!config_.rephrase_questions) return sample;
  ++telemetry_.rephraser_calls;
  return rephrase_question(sample, gateway_);
}

void Session::ask(DimensionId d, std::vector<Frame>& out) {
  asked_from_ = current_state_;
  current_state_ = StateId::question(d);
  asked_ = d;
  ++ask_counts_[d];
  asked_addressed_ = false;
  restate_requested_ = false;
  asked_question_ = compose_question(d);
  emit(out, {0, TurnKind::Question, asked_question_, d, std::nullopt});
}

void Session::select_and_ask(std::vector<Frame>& out) {
  const auto action = select_next(current_state_, qtable_, visited_, selected_, config_.scheduler, scheduler_rng_);
  if (action.is_finish()) {
    enter_summary(out);
    return;
  }
  ask(action.dimension(), out);
}

std::vector<Frame> Session::handle_user_message(const std::string& message) {
  if (phase_ == Phase::Done) throw PreconditionError("session is finished");
  current_timestamp_ = clock_();
  turns_.push_back({Turn::Role::User, std::nullopt, message, std::nullopt, std::nullopt, current_timestamp_});
  std::vector<Frame> out;

  switch (phase_) {
    case Phase::Screening: {
      if (active_rv_) {
        auto& ctx = rv_[*active_rv_];
        std::vector<Frame> fs;
        on_rv_response(ctx, message, deps(), fs);
        emit_all(out, std::move(fs));
        if (ctx.outcome == RvOutcome::Pending) return out;
        close_rv(ctx);
        active_rv_.reset();
        process_queue(out);
        return out;
      }
      std::vector<PendingSegment> incoming;
      const int attempt = awaiting_rephrase_ ? 2 : 1;
      if (trim(message).empty()) {
        incoming.push_back({"", attempt});
      } else {
        for (auto& seg : segment(message)) incoming.push_back({std::move(seg.text), attempt});
      }
      if (awaiting_rephrase_) {
        awaiting_rephrase_.reset();
        queue_.insert(queue_.begin(), incoming.begin(), incoming.end());
      } else {
        queue_.insert(queue_.end(), incoming.begin(), incoming.end());
      }
      process_queue(out);
      return out;
    }
    case Phase::Summary:
      handle_summary_reply(message, out);
      return out;
    case Phase::Cbt: {
      std::vector<Frame> fs;
      on_cbt_response(*cbt_, message, deps(), fs);
      emit_all(out, std::move(fs));
      if (cbt_->status != CbtStatus::InProgress) phase_ = Phase::Done;
      return out;
    }
    case Phase::Done:
      break;
  }
  return out;
}

void Session::process_queue(std::vector<Frame>& out) {
  std::size_t index = 0;
  while (!queue_.empty()) {
    auto seg = queue_.front();
    queue_.pop_front();
    Classification c = Unclassifiable{};
    if (!seg.text.empty()) {
      ++telemetry_.classifier_calls;
      c = analyzer_.classify_segment({seg.text, index++}, *asked_, asked_question_);
    }
    const auto r = resolve_one(c, *asked_, catalog_.score_table());
    if (std::holds_alternative<Unclassifiable>(r)) {
      if (rephrase_fallback(seg.attempt) == FallbackAction::RequestRephrase) {
        awaiting_rephrase_ = seg;
        emit(out, {0, TurnKind::RephraseRequest, std::string(kRephraseRequest), asked_, std::nullopt});
        return;
      }
      unclassified_.push_back({seg.text, current_timestamp_, asked_});
      continue;
    }
    if (const auto* control = std::get_if<SessionControl>(&r)) {
      if (*control == SessionControl::EndScreening) {
        enter_summary(out);
        return;
      }
      restate_requested_ = true;
      continue;
    }
    bool rv_started = false;
    record_pair(std::get<DimScore>(r), seg.text, out, rv_started);
    if (rv_started) return;
  }
  after_queue(out);
}

void Session::record_pair(const DimScore& pair, const std::string& segment_text, std::vector<Frame>& out,
                          bool& rv_started) {
  const auto d = pair.dimension;
  const auto from = d == *asked_ ? asked_from_ : current_state_;
  update(qtable_, from, ActionId::ask(d), pair.score, StateId::question(d), config_.scheduler);
  ++telemetry_.qtable_updates;
  scores_[d] = pair.score;
  visited_.insert(d);
  evidence_[d].push_back(segment_text);
  if (d == *asked_) asked_addressed_ = true;
  if (pair.score != Score::NeedsAttention) return;

  std::vector<Frame> fs;
  rv_.push_back(begin_rv(d, asked_question_, segment_text, deps(), fs));
  emit_all(out, std::move(fs));
  if (rv_.back().outcome == RvOutcome::Pending) {
    active_rv_ = rv_.size() - 1;
    rv_started = true;
    return;
  }
  close_rv(rv_.back());
}

void Session::close_rv(const RvContext& ctx) {
  for (const auto& f : ctx.followups)
    if (f.decision == Decision::Valid) evidence_[ctx.dimension].push_back(f.response);
  if (ctx.outcome == RvOutcome::Abandoned && !ctx.note.empty())
    notes_.push_back(catalog_.display_name(ctx.dimension) + ": " + ctx.note);
}

void Session::after_queue(std::vector<Frame>& out) {
  if (phase_ != Phase::Screening) return;
  if (!asked_addressed_) {
    const auto d = *asked_;
    if (!reasked_.contains(d)) {
      reasked_.insert(d);
      ++ask_counts_[d];
      restate_requested_ = false;
      asked_question_ = compose_question(d);
      emit(out, {0, TurnKind::Question, asked_question_, d, std::nullopt});
      return;
    }
    // Asked twice without an answer: move on without a score.
    visited_.insert(d);
  }
  select_and_ask(out);
}

void Session::enter_summary(std::vector<Frame>& out) {
  phase_ = Phase::Summary;
  current_state_ = StateId::end();
  queue_.clear();
  awaiting_rephrase_.reset();
  summary_ = summarize_session(scores_, catalog_);
  if (summary_.candidates.empty()) {
    notes_.push_back("CBT skipped: no dimension needed attention.");
    emit(out, {0, TurnKind::Summary, summary_.text, std::nullopt, std::nullopt});
    finish(out, std::string(kAllClearClosing));
    return;
  }
  emit(out, {0, TurnKind::Summary, summary_.text + "\n" + choice_prompt(summary_.candidates, catalog_), std::nullopt,
             std::nullopt});
}

void Session::handle_summary_reply(const std::string& message, std::vector<Frame>& out) {
  const auto choice = parse_cbt_choice(message, summary_.candidates, catalog_);
  switch (choice.kind) {
    case CbtChoice::Kind::Chosen: {
      auto fs = advance_to_cbt(choice.dimension);
      out.insert(out.end(), fs.begin(), fs.end());
      return;
    }
    case CbtChoice::Kind::Decline: {
      auto fs = advance_to_cbt(std::nullopt);
      out.insert(out.end(), fs.begin(), fs.end());
      return;
    }
    case CbtChoice::Kind::Invalid:
      break;
  }
  if (++invalid_choices_ == 1) {
    emit(out, {0, TurnKind::Summary, "I didn't catch which area you meant. " + choice_prompt(summary_.candidates, catalog_),
               std::nullopt, std::nullopt});
    return;
  }
  notes_.push_back("CBT skipped: no recognizable dimension choice.");
  finish(out, std::string(kDeclineClosing));
}

std::vector<Frame> Session::advance_to_cbt(std::optional<DimensionId> chosen) {
  if (phase_ != Phase::Summary) throw PreconditionError("dimension choice is only possible in the summary phase");
  std::vector<Frame> out;
  if (!chosen) {
    notes_.push_back("CBT skipped: user declined.");
    finish(out, std::string(kDeclineClosing));
    return out;
  }
  if (std::find(summary_.candidates.begin(), summary_.candidates.end(), *chosen) == summary_.candidates.end()) {
    emit(out, {0, TurnKind::Summary, "That area is not one of today's options. " + choice_prompt(summary_.candidates, catalog_),
               std::nullopt, std::nullopt});
    return out;
  }
  phase_ = Phase::Cbt;
  std::vector<Frame> fs;
  cbt_ = begin_cbt(*chosen, evidence_for(*chosen), deps(), fs);
  emit_all(out, std::move(fs));
  if (cbt_->status != CbtStatus::InProgress) phase_ = Phase::Done;
  return out;
}

void Session::finish(std::vector<Frame>& out, std::string closing) {
  emit(out, {0, TurnKind::Closing, std::move(closing), std::nullopt, std::nullopt});
  phase_ = Phase::Done;
}

std::vector<std::string> Session::evidence_for(DimensionId d) const {
  auto it = evidence_.find(d);
  return it == evidence_.end() ? std::vector<std::string>{} : it->second;
}

SessionRecord Session::to_record() const {
  SessionRecord r;
  r.session_id = session_id_;
  r.user_id = user_id_;
  r.created_at = created_at_;
  r.selected = selected_;
  r.config = config_;
  r.qtable_before = qtable_before_;
  r.qtable_after = qtable_;
  r.phase = phase_;
  r.current_state = current_state_;
  r.visited = visited_;
  r.scores = scores_;
  r.turns = turns_;
  r.rv = rv_;
  r.cbt = cbt_;
  r.unclassified = unclassified_;
  r.notes = notes_;
  r.telemetry = telemetry_;
  return r;
}

SessionReport Session::report() const {
  if (phase_ != Phase::Done) throw PreconditionError("report is only available once the session is done");
  return build_report(to_record(), catalog_);
}

SessionReport Session::finalize(TextStore* store) {
  auto rep = report();
  if (store) {
    try {
      persist_qtable(*store, qtable_, catalog_);
      store->put(session_record_key(session_id_), record_to_json(to_record(), catalog_).dump(2));
    } catch (const std::exception& e) {
      rep.persistence_error = e.what();
    }
  }
  return rep;
}

std::string session_record_key(const std::string& session_id) { return "session/" + session_id; }

SessionReport replay(const nlohmann::json& record, std::shared_ptr<Backend> backend, const DimensionCatalog& catalog,
                     const TemplateSet& templates) {
  const auto rec = record_from_json(record, catalog);
  std::vector<std::string> stamps{rec.created_at};
  for (const auto& t : rec.turns)
    if (t.role == Turn::Role::User) stamps.push_back(t.timestamp);
  auto cursor = std::make_shared<std::size_t>(0);
  Clock clock = [stamps, cursor]() {
    if (*cursor >= stamps.size()) throw PreconditionError("replay clock exhausted");
    return stamps[(*cursor)++];
  };
  Session session(rec.session_id, rec.user_id, rec.selected, rec.qtable_before, rec.config,
                  {catalog, std::move(backend), templates, clock, {}});
  for (const auto& t : rec.turns) {
    if (t.role != Turn::Role::User) continue;
    if (session.phase() == Phase::Done) throw PreconditionError("recorded session has messages after it finished");
    session.handle_user_message(t.text);
  }
  return session.report();
}

}  // namespace mindcheck
