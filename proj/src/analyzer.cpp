#include "mindcheck/analyzer.hpp"

#include "mindcheck/errors.hpp"

namespace mindcheck {

Resolution resolve_one(const Classification& c, DimensionId asked, const ScoreMappingTable& table) {
  if (const auto* ds = std::get_if<DimScore>(&c)) return *ds;
  if (const auto* g = std::get_if<GeneralResponse>(&c)) {
    auto r = lookup_general_score(asked, g->cls, table);
    if (const auto* score = std::get_if<Score>(&r)) return DimScore{asked, *score};
    return std::get<SessionControl>(r);
  }
  return Unclassifiable{};
}

ResolvedMessage resolve(const AnalyzerOutcome& outcome, DimensionId asked, const ScoreMappingTable& table) {
  ResolvedMessage out;
  out.control = outcome.control;
  for (const auto& c : outcome.classifications) {
    auto r = resolve_one(c, asked, table);
    if (auto* pair = std::get_if<DimScore>(&r)) {
      out.pairs.push_back(*pair);
    } else if (auto* control = std::get_if<SessionControl>(&r)) {
      if (!out.control || *control == SessionControl::EndScreening) out.control = *control;
    } else {
      ++out.unclassifiable;
    }
  }
  return out;
}

FallbackAction rephrase_fallback(int attempt) {
  if (attempt != 1 && attempt != 2) throw PreconditionError("rephrase attempt must be 1 or 2");
  return attempt == 1 ? FallbackAction::RequestRephrase : FallbackAction::LogAndAdvance;
}

ResponseAnalyzer::ResponseAnalyzer(Gateway& gateway, const DimensionCatalog& catalog)
    : gateway_(gateway), catalog_(catalog), dimension_list_(catalog.dimension_list()) {}

Classification ResponseAnalyzer::classify_segment(const Segment& seg, DimensionId asked,
                                                  const std::string& question) {
  ++calls_;
  try {
    return gateway_.classify(kTemplate,
                             {{"question", question}, {"asked_dimension", catalog_.slug(asked)}, {"segment", seg.text}},
                             {{"dimension_list", dimension_list_}}, catalog_);
  } catch (const BackendError&) {
    return Unclassifiable{};
  } catch (const ParseError&) {
    return Unclassifiable{};
  }
}

AnalyzerOutcome ResponseAnalyzer::analyze(const std::vector<Segment>& segments, DimensionId asked,
                                          const std::string& question) {
  AnalyzerOutcome out;
  for (const auto& seg : segments) {
    out.classifications.push_back(classify_segment(seg, asked, question));
    if (const auto* g = std::get_if<GeneralResponse>(&out.classifications.back())) {
      if (g->cls == GeneralResponseClass::Stop) {
        out.control = SessionControl::EndScreening;
      } else if (g->cls == GeneralResponseClass::Question && !out.control) {
        out.control = SessionControl::RestateQuestion;
      }
    }
  }
  return out;
}

std::string rephrase_question(const std::string& question, Gateway& gateway) {
  try {
    return gateway.text("rephraser", {{"question", question}});
  } catch (const BackendError&) {
    return question;
  } catch (const ParseError&) {
    return question;
  }
}

}  // namespace mindcheck
