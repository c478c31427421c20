#include <gtest/gtest.h>

#include <cstdlib>
#include <set>

#include "mindcheck/errors.hpp"
#include "mindcheck/session.hpp"
#include "session_harness.hpp"

using namespace mindcheck;
using namespace testsupport;

namespace {

void check_golden(const std::string& name, const std::string& actual) {
  if (std::getenv("UPDATE_GOLDEN")) {
    std::ofstream(golden_path(name), std::ios::binary) << actual;
    return;
  }
  const auto expected = read_golden(name);
  ASSERT_TRUE(expected) << "missing golden " << golden_path(name) << "; run with UPDATE_GOLDEN=1";
  EXPECT_EQ(actual, *expected) << "golden mismatch: " << name;
}

/// Checks the per-session invariants over a finished run.
void check_invariants(const Session& s) {
  for (const auto& [d, n] : s.ask_counts()) {
    EXPECT_LE(n, 2) << cat().slug(d);
    EXPECT_TRUE(s.selected().contains(d)) << cat().slug(d);
  }
  int score2 = 0;
  std::map<DimensionId, int> rv_per_dim;
  for (const auto& c : s.rv_records()) ++rv_per_dim[c.dimension];
  for (const auto& [d, sc] : s.scores())
    if (sc == Score::NeedsAttention) {
      ++score2;
      EXPECT_EQ(rv_per_dim[d], 1) << cat().slug(d);
    }
  EXPECT_EQ(static_cast<int>(s.rv_records().size()), score2);
  for (auto d : s.scores()) EXPECT_TRUE(s.visited().contains(d.first));
}

int pairs_recorded(const Session& s) { return s.telemetry().qtable_updates; }

}  // namespace

// (a) every selected dimension asked at most once, plus one re-ask for the
// off-topic answer; one Score-2 answer gets exactly one R-V.
TEST(SessionTrace, FullThirtySevenDimensions) {
  auto r = trace_a();
  ASSERT_EQ(r.session->phase(), Phase::Done);
  const auto& s = *r.session;
  check_invariants(s);
  EXPECT_EQ(s.visited(), DimensionSet::all());
  EXPECT_EQ(s.ask_counts().at(dim("sleep-schedule")), 2);
  int reasks = 0;
  for (const auto& [d, n] : s.ask_counts()) reasks += n - 1;
  EXPECT_EQ(reasks, 1);
  EXPECT_EQ(s.rv_records().size(), 1u);
  EXPECT_EQ(s.rv_records()[0].dimension, dim("alcohol-abuse"));
  EXPECT_EQ(s.telemetry().rv_validator_calls, 1);
  ASSERT_TRUE(s.cbt());
  EXPECT_EQ(s.cbt()->chosen, dim("alcohol-abuse"));
  EXPECT_EQ(s.cbt()->status, CbtStatus::Completed);
  // Every classification in this trace is a (dimension, score) pair.
  EXPECT_EQ(pairs_recorded(s), s.telemetry().classifier_calls);
  EXPECT_EQ(s.scores().at(dim("exercise-and-sports")), Score::SomeProblems);
  check_golden("trace_a_full_session", transcript(s));

  const auto report = r.session->report();
  EXPECT_EQ(report.data["scores"].size(), 37u);
  EXPECT_EQ(report.data["flagged"], nlohmann::json::array({"alcohol-abuse"}));
  EXPECT_EQ(report.data["telemetry"]["rv_validator_calls"], 1);
}

// (b) several Score-2 pairs, one valid, one guided and one abandoned R-V.
TEST(SessionTrace, EveryScoreTwoGetsOneReflectionValidation) {
  auto r = trace_b();
  ASSERT_EQ(r.session->phase(), Phase::Done);
  const auto& s = *r.session;
  check_invariants(s);
  ASSERT_EQ(s.rv_records().size(), 3u);
  int validated = 0, abandoned = 0, guides = 0;
  for (const auto& c : s.rv_records()) {
    validated += c.outcome == RvOutcome::Validated;
    abandoned += c.outcome == RvOutcome::Abandoned;
    guides += c.guides();
  }
  EXPECT_EQ(validated, 2);
  EXPECT_EQ(abandoned, 1);
  EXPECT_EQ(guides, 2);
  const auto report = r.session->report();
  EXPECT_NE(report.text.find(std::string(kProfessionalHelpNote)), std::string::npos);
  bool noted = false;
  for (const auto& n : report.data["notes"]) noted |= n.get<std::string>().find(kProfessionalHelpNote) != std::string::npos;
  EXPECT_TRUE(noted);
  check_golden("trace_b_rv_outcomes", transcript(s));
}

// (c) the two-segment message records both expected pairs; the incidental
// dimension is never asked.
TEST(SessionTrace, TwoSegmentMessage) {
  auto r = trace_c();
  const auto& s = *r.session;
  EXPECT_EQ(s.scores(), (std::map<DimensionId, Score>{{dim("alcohol-abuse"), Score::Good},
                                                      {dim("relationship-with-friends-and-colleagues"), Score::Good}}));
  EXPECT_EQ(s.ask_counts().count(dim("relationship-with-friends-and-colleagues")), 0u);
  EXPECT_EQ(s.ask_counts().at(dim("alcohol-abuse")), 1);
  EXPECT_EQ(s.phase(), Phase::Done);
  EXPECT_EQ(pairs_recorded(s), 2);
  check_golden("trace_c_two_segments", transcript(s));
}

// (d) "Stop" ends screening and opens the summary.
TEST(SessionTrace, StopMovesToSummary) {
  auto r = trace_d();
  EXPECT_EQ(r.session->phase(), Phase::Summary);
  const auto& last = r.session->frames().back();
  EXPECT_EQ(last.kind, TurnKind::Summary);
  EXPECT_NE(last.text.find(cat().display_name(dim("sleep-schedule"))), std::string::npos);
  EXPECT_EQ(r.session->current_state(), StateId::end());
  EXPECT_EQ(r.session->scores().size(), 1u);
  check_golden("trace_d_stop", transcript(*r.session));
}

TEST(SessionTrace, ExcludedDimensionNeverAsked) {
  auto sel = DimensionSet::all();
  sel.erase(dim("law-abiding"));
  auto r = start(screening_script(), sel);
  ASSERT_TRUE(drive(r, canned_answers()));
  EXPECT_EQ(r.session->ask_counts().count(dim("law-abiding")), 0u);
  EXPECT_FALSE(r.session->visited().contains(dim("law-abiding")));
  EXPECT_EQ(r.session->visited().size(), 36u);
}

TEST(SessionTrace, GoldenTranscriptsAreByteStable) {
  auto run_once = [] {
    auto b = screening_script({{"alcohol-abuse", 2}});
    b.decide("rv_reasoner", Decision::Valid);
    auto r = start(b, DimensionSet::all(), test_config(0.9, 11));
    drive(r, canned_answers({}, {}, {"no"}));
    return transcript(*r.session) + r.session->report().text;
  };
  EXPECT_EQ(run_once(), run_once());
}

TEST(Session, EmptySelectionRejected) {
  EXPECT_THROW(start(screening_script(), DimensionSet{}), PreconditionError);
}

TEST(Session, ForcedGreedyFirstQuestion) {
  Priorities pri;
  for (auto d : all_dimensions()) pri[d] = 0.0;
  pri[dim("coping-skills")] = 1.0;
  auto r = start(screening_script(), DimensionSet::all(), test_config(1.0), pri);
  EXPECT_EQ(r.session->asked_dimension(), dim("coping-skills"));
  EXPECT_EQ(r.session->frames().size(), 1u);
  EXPECT_EQ(r.session->frames()[0].kind, TurnKind::Question);
}

TEST(Session, UnaddressedTwiceForceAdvances) {
  auto b = screening_script();
  b.scored("I enjoy painting.", "creativity", 0);
  b.scored("I paint on weekends.", "creativity", 0);
  Priorities pri;
  for (auto d : all_dimensions()) pri[d] = 0.0;
  pri[dim("sleep-schedule")] = 1.0;
  auto r = start(b, DimensionSet::of({dim("sleep-schedule"), dim("managing-mood")}), test_config(1.0), pri);
  auto out = r.session->handle_user_message("I enjoy painting.");
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].kind, TurnKind::Question);
  EXPECT_EQ(out[0].dimension, dim("sleep-schedule"));
  out = r.session->handle_user_message("I paint on weekends.");
  ASSERT_FALSE(out.empty());
  EXPECT_EQ(out.back().dimension, dim("managing-mood"));
  EXPECT_TRUE(r.session->visited().contains(dim("sleep-schedule")));
  EXPECT_EQ(r.session->scores().count(dim("sleep-schedule")), 0u);
  EXPECT_EQ(r.session->ask_counts().at(dim("sleep-schedule")), 2);
}

TEST(Session, UnclassifiableAsksToRephraseThenLogs) {
  auto b = screening_script();
  b.classify("Purple monkey dishwasher.", Unclassifiable{});
  b.classify("Blue elephant toaster.", Unclassifiable{});
  Priorities pri;
  for (auto d : all_dimensions()) pri[d] = 0.0;
  pri[dim("sleep-schedule")] = 1.0;
  auto r = start(b, DimensionSet::of({dim("sleep-schedule"), dim("managing-mood")}), test_config(1.0), pri);
  auto out = r.session->handle_user_message("Purple monkey dishwasher.");
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].kind, TurnKind::RephraseRequest);
  out = r.session->handle_user_message("Blue elephant toaster.");
  ASSERT_EQ(r.session->unclassified().size(), 1u);
  EXPECT_EQ(r.session->unclassified()[0].text, "Blue elephant toaster.");
  EXPECT_EQ(r.session->unclassified()[0].asked, dim("sleep-schedule"));
  EXPECT_EQ(out.back().kind, TurnKind::Question);
  EXPECT_EQ(out.back().dimension, dim("sleep-schedule"));
}

TEST(Session, ClassifierOutageBecomesUnclassifiable) {
  ScriptBuilder b;
  b.generative_defaults();
  b.fail("response_analyzer", "transport");
  auto r = start(b, DimensionSet::of({dim("sleep-schedule")}));
  auto out = r.session->handle_user_message("I sleep fine.");
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].kind, TurnKind::RephraseRequest);
}

TEST(Session, DeclineAndInvalidChoice) {
  auto b = screening_script({{"sleep-schedule", 1}});
  auto r = start(b, DimensionSet::of({dim("sleep-schedule")}));
  r.session->handle_user_message(answer_for(dim("sleep-schedule")));
  ASSERT_EQ(r.session->phase(), Phase::Summary);
  auto out = r.session->handle_user_message("banana");
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].kind, TurnKind::Summary);
  EXPECT_EQ(r.session->phase(), Phase::Summary);
  out = r.session->handle_user_message("mango");
  EXPECT_EQ(r.session->phase(), Phase::Done);
  EXPECT_EQ(out.back().kind, TurnKind::Closing);
  EXPECT_THROW(r.session->handle_user_message("hello"), PreconditionError);

  auto r2 = start(b, DimensionSet::of({dim("sleep-schedule")}));
  r2.session->handle_user_message(answer_for(dim("sleep-schedule")));
  EXPECT_THROW(r2.session->report(), PreconditionError);
  r2.session->handle_user_message("skip");
  ASSERT_EQ(r2.session->phase(), Phase::Done);
  EXPECT_NE(r2.session->report().text.find("CBT skipped: user declined."), std::string::npos);
}

TEST(Session, AllClearSkipsCbt) {
  auto r = start(screening_script(), DimensionSet::of({dim("sleep-schedule")}));
  auto out = r.session->handle_user_message(answer_for(dim("sleep-schedule")));
  EXPECT_EQ(r.session->phase(), Phase::Done);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].kind, TurnKind::Summary);
  EXPECT_EQ(out[1].kind, TurnKind::Closing);
  EXPECT_FALSE(r.session->cbt());
}

TEST(Session, LatestScoreWinsAndUpdatesMatchPairs) {
  auto b = screening_script();
  b.scored("I sleep badly.", "sleep-schedule", 1);
  b.scored("Actually I sleep well.", "sleep-schedule", 0);
  Priorities pri;
  for (auto d : all_dimensions()) pri[d] = 0.0;
  pri[dim("managing-mood")] = 1.0;
  auto r = start(b, DimensionSet::of({dim("managing-mood"), dim("creativity")}), test_config(1.0), pri);
  r.session->handle_user_message("I sleep badly. Actually I sleep well.");
  EXPECT_EQ(r.session->scores().at(dim("sleep-schedule")), Score::Good);
  EXPECT_EQ(pairs_recorded(*r.session), 2);
  EXPECT_EQ(r.session->ask_counts().at(dim("managing-mood")), 2);
}

TEST(SessionRecordTest, RoundTripAndReplay) {
  auto r = persistence_trace();
  ASSERT_EQ(r.session->phase(), Phase::Done);

  MemoryTextStore store;
  const auto report = r.session->finalize(&store);
  EXPECT_FALSE(report.persistence_error);
  const auto rec = r.session->to_record();
  const auto stored = nlohmann::json::parse(*store.get(session_record_key("s-1")));
  EXPECT_EQ(record_from_json(stored, cat()), rec);
  EXPECT_EQ(record_from_json(record_to_json(rec, cat()), cat()), rec);
  EXPECT_EQ(load_qtable(store, "user-1", cat(), default_priorities(), test_config().scheduler), r.session->qtable());
  EXPECT_NE(r.session->qtable(), rec.qtable_before);

  const auto replayed = replay(stored, persistence_script().backend(), cat());
  EXPECT_EQ(replayed.text, report.text);
  EXPECT_EQ(replayed.data.dump(), report.data.dump());
  EXPECT_NE(report.text.find(std::string(kSeekProfessionalHelp)), std::string::npos);

  auto broken = stored;
  broken.erase("turns");
  EXPECT_THROW(record_from_json(broken, cat()), PersistenceError);
}

namespace {

class FailingStore : public TextStore {
 public:
  std::optional<std::string> get(const std::string&) override { return std::nullopt; }
  void put(const std::string&, const std::string&) override { throw PersistenceError("disk full"); }
};

}  // namespace

TEST(SessionRecordTest, PersistenceFailureStillReturnsReport) {
  auto r = start(screening_script(), DimensionSet::of({dim("sleep-schedule")}));
  r.session->handle_user_message(answer_for(dim("sleep-schedule")));
  FailingStore store;
  const auto rep = r.session->finalize(&store);
  ASSERT_TRUE(rep.persistence_error);
  EXPECT_NE(rep.persistence_error->find("disk full"), std::string::npos);
  EXPECT_FALSE(rep.text.empty());
}

TEST(SessionRecordTest, ReportListsVisitedOnce) {
  auto r = start(screening_script(), DimensionSet::all());
  ASSERT_TRUE(drive(r, canned_answers()));
  const auto rep = r.session->report();
  std::set<std::string> seen;
  for (const auto& row : rep.data["scores"]) EXPECT_TRUE(seen.insert(row["dimension"].get<std::string>()).second);
  EXPECT_EQ(seen.size(), r.session->visited().size());
}
