#include "mindcheck/rv.hpp"

#include "mindcheck/errors.hpp"

namespace mindcheck {

namespace {

std::string render_followups(const RvContext& ctx) {
  std::string out;
  for (const auto& f : ctx.followups) {
    if (!out.empty()) out += "\n";
    out += "Q: " + f.question + "\nA: " + f.response;
  }
  return out;
}

Fields base_fields(const RvContext& ctx, const DimensionCatalog& catalog) {
  return {{"dimension", catalog.slug(ctx.dimension)},
          {"original_question", ctx.original_question},
          {"original_response", ctx.original_response}};
}

void abandon(RvContext& ctx, std::string cause) {
  ctx.outcome = RvOutcome::Abandoned;
  ctx.pending_question.clear();
  ctx.note = std::string(kProfessionalHelpNote);
  ctx.cause = std::move(cause);
}

}  // namespace

std::string_view to_string(RvOutcome o) {
  switch (o) {
    case RvOutcome::Pending: return "pending";
    case RvOutcome::Validated: return "validated";
    case RvOutcome::Abandoned: return "abandoned";
  }
  return "pending";
}

int RvContext::guides() const {
  int n = 0;
  for (const auto& f : followups)
    if (f.guide) ++n;
  return n;
}

nlohmann::json rv_to_json(const RvContext& ctx, const DimensionCatalog& catalog) {
  nlohmann::json followups = nlohmann::json::array();
  for (const auto& f : ctx.followups) {
    nlohmann::json j = {{"question", f.question}, {"response", f.response}, {"decision", to_int(f.decision)}};
    if (f.guide) j["guide"] = *f.guide;
    followups.push_back(std::move(j));
  }
  return {{"dimension", catalog.slug(ctx.dimension)},
          {"original_question", ctx.original_question},
          {"original_response", ctx.original_response},
          {"followups", std::move(followups)},
          {"pending_question", ctx.pending_question},
          {"outcome", to_string(ctx.outcome)},
          {"validation", ctx.validation},
          {"note", ctx.note},
          {"cause", ctx.cause}};
}

RvContext rv_from_json(const nlohmann::json& j, const DimensionCatalog& catalog) {
  RvContext ctx;
  ctx.dimension = catalog.require(j.at("dimension").get<std::string>());
  ctx.original_question = j.at("original_question").get<std::string>();
  ctx.original_response = j.at("original_response").get<std::string>();
  for (const auto& f : j.at("followups")) {
    RvFollowup fu;
    fu.question = f.at("question").get<std::string>();
    fu.response = f.at("response").get<std::string>();
    fu.decision = f.at("decision").get<int>() == 0 ? Decision::Valid : Decision::Invalid;
    if (f.contains("guide")) fu.guide = f["guide"].get<std::string>();
    ctx.followups.push_back(std::move(fu));
  }
  ctx.pending_question = j.at("pending_question").get<std::string>();
  const auto outcome = j.at("outcome").get<std::string>();
  ctx.outcome = outcome == "validated" ? RvOutcome::Validated
                : outcome == "abandoned" ? RvOutcome::Abandoned
                                         : RvOutcome::Pending;
  ctx.validation = j.at("validation").get<std::string>();
  ctx.note = j.at("note").get<std::string>();
  ctx.cause = j.at("cause").get<std::string>();
  return ctx;
}

std::string simple_reflection(const std::string& original_response, PipelineDeps deps) {
  const auto response = trim(original_response);
  if (response.empty()) throw PreconditionError("reflection needs a nonempty response");
  ++deps.telemetry.reflection_calls;
  try {
    return deps.gateway.text("reflective_summarizer", {{"response", response}});
  } catch (const BackendError&) {
  } catch (const ParseError&) {
  }
  auto body = response;
  while (!body.empty() && (body.back() == '.' || body.back() == '!' || body.back() == '?')) body.pop_back();
  return "You mentioned that " + body + ".";
}

Decision reason_followup(const RvContext& ctx, const std::string& candidate_response, PipelineDeps deps) {
  if (ctx.pending_question.empty()) throw PreconditionError("no open follow-up question");
  if (trim(candidate_response).empty()) return Decision::Invalid;
  auto fields = base_fields(ctx, deps.catalog);
  fields["followup_question"] = ctx.pending_question;
  fields["followup_response"] = trim(candidate_response);
  ++deps.telemetry.rv_reasoner_calls;
  return deps.gateway.decide("rv_reasoner", fields);
}

std::string guide_followup(const RvContext& ctx, PipelineDeps deps) {
  if (ctx.followups.empty() || ctx.followups.back().decision != Decision::Invalid) {
    throw PreconditionError("guide requires an invalid follow-up");
  }
  if (ctx.guides() >= kMaxRvGuides) throw PolicyError("follow-up guide limit reached");
  auto fields = base_fields(ctx, deps.catalog);
  fields["followup_question"] = ctx.followups.back().question;
  fields["followup_response"] = ctx.followups.back().response;
  ++deps.telemetry.rv_guide_calls;
  return deps.gateway.analyze("rv_guide", fields);
}

std::string validate_empathically(RvContext& ctx, PipelineDeps deps) {
  if (ctx.followups.empty() || ctx.followups.back().decision != Decision::Valid) {
    throw PreconditionError("validation requires a valid follow-up");
  }
  auto fields = base_fields(ctx, deps.catalog);
  fields["followups"] = render_followups(ctx);
  ++deps.telemetry.rv_validator_calls;
  ctx.validation = deps.gateway.analyze("rv_validator", fields);
  ctx.outcome = RvOutcome::Validated;
  ctx.pending_question.clear();
  return ctx.validation;
}

RvContext begin_rv(DimensionId dimension, std::string original_question, std::string original_response,
                   PipelineDeps deps, std::vector<Frame>& out) {
  RvContext ctx;
  ctx.dimension = dimension;
  ctx.original_question = std::move(original_question);
  ctx.original_response = std::move(original_response);
  const auto reflection = simple_reflection(ctx.original_response, deps);
  ctx.pending_question = reflection + " " + std::string(kRvOpenQuestion);
  out.push_back({0, TurnKind::Reflection, reflection, dimension, std::nullopt});
  out.push_back({0, TurnKind::FollowupQuestion, std::string(kRvOpenQuestion), dimension, std::nullopt});
  return ctx;
}

void on_rv_response(RvContext& ctx, const std::string& response, PipelineDeps deps, std::vector<Frame>& out) {
  if (ctx.outcome != RvOutcome::Pending) throw PreconditionError("reflection-validation already resolved");
  try {
    const auto decision = reason_followup(ctx, response, deps);
    ctx.followups.push_back({ctx.pending_question, trim(response), decision, std::nullopt});
    if (decision == Decision::Valid) {
      out.push_back({0, TurnKind::Validation, validate_empathically(ctx, deps), ctx.dimension,
                     std::nullopt});
      return;
    }
    int invalid = 0;
    for (const auto& f : ctx.followups)
      if (f.decision == Decision::Invalid) ++invalid;
    if (invalid >= kMaxRvInvalidFollowups) {
      abandon(ctx, "no valid follow-up after " + std::to_string(invalid) + " attempts");
      return;
    }
    auto guide = guide_followup(ctx, deps);
    ctx.followups.back().guide = guide;
    ctx.pending_question = guide;
    out.push_back({0, TurnKind::Guide, guide, ctx.dimension, std::nullopt});
  } catch (const BackendError& e) {
    abandon(ctx, std::string("backend failure: ") + e.what());
  } catch (const ParseError& e) {
    abandon(ctx, std::string("unparseable model output: ") + e.what());
  }
}

RvContext run_rv(DimensionId dimension, const std::string& original_question, const std::string& original_response,
                 PipelineDeps deps, const std::function<std::string(const Frame&)>& ask) {
  std::vector<Frame> frames;
  RvContext ctx;
  try {
    ctx = begin_rv(dimension, original_question, original_response, deps, frames);
  } catch (const BackendError& e) {
    ctx.dimension = dimension;
    ctx.original_question = original_question;
    ctx.original_response = original_response;
    abandon(ctx, std::string("backend failure: ") + e.what());
    return ctx;
  }
  while (ctx.outcome == RvOutcome::Pending) {
    const auto answer = ask(frames.back());
    frames.clear();
    on_rv_response(ctx, answer, deps, frames);
  }
  return ctx;
}

}  // namespace mindcheck
