#include "mindcheck/cbt.hpp"

#include <algorithm>
#include <cctype>

#include "mindcheck/errors.hpp"

namespace mindcheck {

namespace {

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string strip_punct(std::string s) {
  s = trim(s);
  while (!s.empty() && std::ispunct(static_cast<unsigned char>(s.back()))) s.pop_back();
  while (!s.empty() && std::ispunct(static_cast<unsigned char>(s.front()))) s.erase(s.begin());
  return trim(s);
}

std::string names(const std::vector<DimensionId>& dims, const DimensionCatalog& catalog) {
  std::string out;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) out += ", ";
    out += catalog.display_name(dims[i]);
  }
  return out;
}

std::string template_for(CbtStage stage, const char* role) {
  return "cbt_stage" + std::to_string(to_int(stage)) + "_" + role;
}

void terminate(CbtSession& s, std::string cause) {
  s.status = CbtStatus::Terminated;
  s.terminated_stage = s.stages.empty() ? CbtStage::Recognize : s.current_stage();
  s.recommendation = std::string(kSeekProfessionalHelp);
  s.cause = std::move(cause);
  s.pending_question.clear();
}

CbtStage next_stage(CbtStage s) { return static_cast<CbtStage>(to_int(s) + 1); }

}  // namespace

std::string_view to_string(CbtStage s) {
  switch (s) {
    case CbtStage::Recognize: return "recognize";
    case CbtStage::Challenge: return "challenge";
    case CbtStage::Reframe: return "reframe";
  }
  return "recognize";
}

std::string_view to_string(CbtStatus s) {
  switch (s) {
    case CbtStatus::InProgress: return "in_progress";
    case CbtStatus::Completed: return "completed";
    case CbtStatus::Terminated: return "terminated";
  }
  return "in_progress";
}

SessionSummary summarize_session(const std::map<DimensionId, Score>& scores, const DimensionCatalog& catalog) {
  SessionSummary out;
  std::vector<DimensionId> some;
  for (const auto& [d, s] : scores) {
    if (s == Score::NeedsAttention) out.flagged.push_back(d);
    if (s == Score::SomeProblems) some.push_back(d);
  }
  out.candidates = out.flagged.empty() ? some : out.flagged;
  out.text = "Here is a summary of today's check-in.";
  if (out.flagged.empty() && some.empty()) {
    out.text += " You are doing well in every area we talked about.";
    return out;
  }
  if (!out.flagged.empty()) out.text += "\nNeeds attention: " + names(out.flagged, catalog) + ".";
  if (!some.empty()) out.text += "\nSome concerns: " + names(some, catalog) + ".";
  return out;
}

std::string choice_prompt(const std::vector<DimensionId>& candidates, const DimensionCatalog& catalog) {
  std::string out = "Which area would you like to work on together?";
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    out += "\n" + std::to_string(i + 1) + ". " + catalog.display_name(candidates[i]);
  }
  out += "\nOr say \"skip\" to finish for today.";
  return out;
}

CbtChoice parse_cbt_choice(const std::string& reply, const std::vector<DimensionId>& candidates,
                           const DimensionCatalog& catalog) {
  const auto text = lower(strip_punct(reply));
  static const std::vector<std::string> kDecline = {"no",   "skip", "none",     "nothing", "not now", "no thanks",
                                                    "nope", "pass", "not today", "decline", "stop",    "no thank you"};
  if (std::find(kDecline.begin(), kDecline.end(), text) != kDecline.end()) return {CbtChoice::Kind::Decline, {}};
  if (!text.empty() && std::all_of(text.begin(), text.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
    const auto n = std::stoul(text.size() > 3 ? std::string("0") : text);
    if (n >= 1 && n <= candidates.size()) return {CbtChoice::Kind::Chosen, candidates[n - 1]};
    return {};
  }
  for (auto d : candidates) {
    if (text == catalog.slug(d) || text == lower(catalog.display_name(d))) return {CbtChoice::Kind::Chosen, d};
  }
  std::optional<DimensionId> hit;
  for (auto d : candidates) {
    if (text.size() >= 4 && lower(catalog.display_name(d)).find(text) != std::string::npos) {
      if (hit) return {};
      hit = d;
    }
  }
  if (hit) return {CbtChoice::Kind::Chosen, hit};
  return {};
}

int CbtStageRecord::guides() const {
  int n = 0;
  for (const auto& a : attempts)
    if (a.guide) ++n;
  return n;
}

nlohmann::json cbt_to_json(const CbtSession& s, const DimensionCatalog& catalog) {
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& st : s.stages) {
    nlohmann::json attempts = nlohmann::json::array();
    for (const auto& a : st.attempts) {
      nlohmann::json j = {{"question", a.question}, {"response", a.response}, {"decision", to_int(a.decision)}};
      if (a.guide) j["guide"] = *a.guide;
      attempts.push_back(std::move(j));
    }
    stages.push_back({{"stage", to_int(st.stage)},
                      {"attempts", std::move(attempts)},
                      {"reasoner_calls", st.reasoner_calls},
                      {"guides", st.guides()},
                      {"passed", st.passed}});
  }
  nlohmann::json j = {{"chosen_dimension", catalog.slug(s.chosen)},
                      {"situation", s.situation},
                      {"stages", std::move(stages)},
                      {"pending_question", s.pending_question},
                      {"status", to_string(s.status)},
                      {"recommendation", s.recommendation},
                      {"cause", s.cause}};
  j["terminated_stage"] = s.terminated_stage ? nlohmann::json(to_int(*s.terminated_stage)) : nlohmann::json();
  return j;
}

CbtSession cbt_from_json(const nlohmann::json& j, const DimensionCatalog& catalog) {
  CbtSession s;
  s.chosen = catalog.require(j.at("chosen_dimension").get<std::string>());
  s.situation = j.at("situation").get<std::string>();
  for (const auto& st : j.at("stages")) {
    CbtStageRecord r;
    r.stage = static_cast<CbtStage>(st.at("stage").get<int>());
    for (const auto& a : st.at("attempts")) {
      CbtAttempt at;
      at.question = a.at("question").get<std::string>();
      at.response = a.at("response").get<std::string>();
      at.decision = a.at("decision").get<int>() == 0 ? Decision::Valid : Decision::Invalid;
      if (a.contains("guide")) at.guide = a["guide"].get<std::string>();
      r.attempts.push_back(std::move(at));
    }
    r.reasoner_calls = st.at("reasoner_calls").get<int>();
    r.passed = st.at("passed").get<bool>();
    s.stages.push_back(std::move(r));
  }
  s.pending_question = j.at("pending_question").get<std::string>();
  const auto status = j.at("status").get<std::string>();
  s.status = status == "completed"    ? CbtStatus::Completed
             : status == "terminated" ? CbtStatus::Terminated
                                      : CbtStatus::InProgress;
  if (!j.at("terminated_stage").is_null()) s.terminated_stage = static_cast<CbtStage>(j["terminated_stage"].get<int>());
  s.recommendation = j.at("recommendation").get<std::string>();
  s.cause = j.at("cause").get<std::string>();
  return s;
}

std::string identify_situation(DimensionId dimension, const std::vector<std::string>& evidence, PipelineDeps deps) {
  if (evidence.empty()) {
    throw PreconditionError("dimension '" + deps.catalog.slug(dimension) + "' was not discussed this session");
  }
  std::string joined;
  for (const auto& e : evidence) joined += "- " + e + "\n";
  ++deps.telemetry.situation_calls;
  auto situation = deps.gateway.analyze("cbt_situation", {{"dimension", deps.catalog.slug(dimension)},
                                                         {"evidence", trim(joined)}});
  const bool grounded = std::any_of(evidence.begin(), evidence.end(), [&](const std::string& e) {
    const auto core = strip_punct(e);
    return !core.empty() && situation.find(core) != std::string::npos;
  });
  if (!grounded) situation += " In your words: \"" + trim(evidence.front()) + "\"";
  return situation;
}

std::string cbt_history(const CbtSession& s) {
  std::string out = "Situation: " + s.situation;
  for (const auto& st : s.stages) {
    out += "\n[Stage " + std::to_string(to_int(st.stage)) + ": " + std::string(to_string(st.stage)) + "]";
    for (const auto& a : st.attempts) {
      out += "\nAssistant: " + a.question + "\nUser: " + a.response;
      if (a.guide) out += "\nAssistant: " + *a.guide;
    }
  }
  return out;
}

std::string stage_question(CbtStage stage, const CbtSession& s, PipelineDeps deps) {
  ++deps.telemetry.cbt_question_calls[to_int(stage) - 1];
  return deps.gateway.text(template_for(stage, "question"), {{"situation", s.situation}, {"history", cbt_history(s)}});
}

Decision stage_reason(CbtStage stage, const CbtSession& s, const std::string& response, PipelineDeps deps) {
  if (s.pending_question.empty()) throw PreconditionError("no open stage question");
  if (trim(response).empty()) return Decision::Invalid;
  ++deps.telemetry.cbt_reasoner_calls[to_int(stage) - 1];
  return deps.gateway.decide(template_for(stage, "reasoner"), {{"situation", s.situation},
                                                              {"history", cbt_history(s)},
                                                              {"question", s.pending_question},
                                                              {"response", trim(response)}});
}

std::string stage_guide(CbtStage stage, const CbtSession& s, const std::string& response, PipelineDeps deps) {
  const auto& record = s.stages.back();
  if (record.stage != stage) throw PreconditionError("guide requested for a stage that is not current");
  if (record.guides() >= kMaxCbtGuides) throw PolicyError("stage guide limit reached");
  ++deps.telemetry.cbt_guide_calls[to_int(stage) - 1];
  return deps.gateway.analyze(template_for(stage, "guide"), {{"situation", s.situation},
                                                            {"history", cbt_history(s)},
                                                            {"question", s.pending_question},
                                                            {"response", trim(response)}});
}

CbtSession begin_cbt(DimensionId chosen, const std::vector<std::string>& evidence, PipelineDeps deps,
                     std::vector<Frame>& out) {
  CbtSession s;
  s.chosen = chosen;
  try {
    s.situation = identify_situation(chosen, evidence, deps);
    out.push_back({0, TurnKind::Summary, s.situation, chosen, std::nullopt});
    s.stages.push_back({CbtStage::Recognize, {}, 0, false});
    s.pending_question = stage_question(CbtStage::Recognize, s, deps);
    out.push_back({0, TurnKind::CbtQuestion, s.pending_question, chosen, 1});
  } catch (const BackendError& e) {
    terminate(s, std::string("backend failure: ") + e.what());
  } catch (const ParseError& e) {
    terminate(s, std::string("unparseable model output: ") + e.what());
  }
  if (s.status == CbtStatus::Terminated) {
    out.push_back({0, TurnKind::Closing, s.recommendation, chosen, std::nullopt});
  }
  return s;
}

void on_cbt_response(CbtSession& s, const std::string& response, PipelineDeps deps, std::vector<Frame>& out) {
  if (s.status != CbtStatus::InProgress) throw PreconditionError("CBT already finished");
  const auto stage = s.current_stage();
  try {
    const auto decision = stage_reason(stage, s, response, deps);
    auto& record = s.stages.back();
    ++record.reasoner_calls;
    record.attempts.push_back({s.pending_question, trim(response), decision, std::nullopt});
    if (decision == Decision::Valid) {
      record.passed = true;
      if (stage == CbtStage::Reframe) {
        s.status = CbtStatus::Completed;
        s.pending_question.clear();
        out.push_back({0, TurnKind::Closing,
                       "You worked through all three steps today. Thank you for your effort, and take care.", s.chosen,
                       std::nullopt});
        return;
      }
      s.stages.push_back({next_stage(stage), {}, 0, false});
      s.pending_question = stage_question(next_stage(stage), s, deps);
      out.push_back({0, TurnKind::CbtQuestion, s.pending_question, s.chosen, to_int(next_stage(stage))});
      return;
    }
    if (record.reasoner_calls >= kMaxCbtReasonerCalls) {
      terminate(s, "no valid response after " + std::to_string(record.reasoner_calls) + " attempts");
      out.push_back({0, TurnKind::Closing, s.recommendation, s.chosen, std::nullopt});
      return;
    }
    const auto guide = stage_guide(stage, s, response, deps);
    s.stages.back().attempts.back().guide = guide;
    s.pending_question = guide;
    out.push_back({0, TurnKind::CbtGuide, guide, s.chosen, to_int(stage)});
  } catch (const BackendError& e) {
    terminate(s, std::string("backend failure: ") + e.what());
    out.push_back({0, TurnKind::Closing, s.recommendation, s.chosen, std::nullopt});
  } catch (const ParseError& e) {
    terminate(s, std::string("unparseable model output: ") + e.what());
    out.push_back({0, TurnKind::Closing, s.recommendation, s.chosen, std::nullopt});
  }
}

}  // namespace mindcheck
