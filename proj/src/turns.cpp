#include "mindcheck/turns.hpp"

namespace mindcheck {

std::string_view to_string(TurnKind k) {
  switch (k) {
    case TurnKind::Question: return "question";
    case TurnKind::RephraseRequest: return "rephrase_request";
    case TurnKind::Reflection: return "reflection";
    case TurnKind::FollowupQuestion: return "followup_question";
    case TurnKind::Guide: return "guide";
    case TurnKind::Validation: return "validation";
    case TurnKind::Summary: return "summary";
    case TurnKind::CbtQuestion: return "cbt_question";
    case TurnKind::CbtGuide: return "cbt_guide";
    case TurnKind::Closing: return "closing";
  }
  return "question";
}

std::optional<TurnKind> parse_turn_kind(std::string_view s) {
  for (auto k : kAllTurnKinds)
    if (to_string(k) == s) return k;
  return std::nullopt;
}

nlohmann::json frame_to_json(const Frame& f, const DimensionCatalog& catalog) {
  nlohmann::json j = {{"index", f.index}, {"kind", to_string(f.kind)}, {"text", f.text}};
  if (f.dimension) j["dimension"] = catalog.slug(*f.dimension);
  if (f.stage) j["stage"] = *f.stage;
  return j;
}

nlohmann::json telemetry_to_json(const Telemetry& t) {
  return {
      {"classifier_calls", t.classifier_calls},
      {"rephraser_calls", t.rephraser_calls},
      {"reflection_calls", t.reflection_calls},
      {"rv_reasoner_calls", t.rv_reasoner_calls},
      {"rv_guide_calls", t.rv_guide_calls},
      {"rv_validator_calls", t.rv_validator_calls},
      {"situation_calls", t.situation_calls},
      {"cbt_question_calls", t.cbt_question_calls},
      {"cbt_reasoner_calls", t.cbt_reasoner_calls},
      {"cbt_guide_calls", t.cbt_guide_calls},
      {"qtable_updates", t.qtable_updates},
  };
}

Telemetry telemetry_from_json(const nlohmann::json& j) {
  Telemetry t;
  t.classifier_calls = j.at("classifier_calls").get<int>();
  t.rephraser_calls = j.at("rephraser_calls").get<int>();
  t.reflection_calls = j.at("reflection_calls").get<int>();
  t.rv_reasoner_calls = j.at("rv_reasoner_calls").get<int>();
  t.rv_guide_calls = j.at("rv_guide_calls").get<int>();
  t.rv_validator_calls = j.at("rv_validator_calls").get<int>();
  t.situation_calls = j.at("situation_calls").get<int>();
  t.cbt_question_calls = j.at("cbt_question_calls").get<std::array<int, 3>>();
  t.cbt_reasoner_calls = j.at("cbt_reasoner_calls").get<std::array<int, 3>>();
  t.cbt_guide_calls = j.at("cbt_guide_calls").get<std::array<int, 3>>();
  t.qtable_updates = j.at("qtable_updates").get<int>();
  return t;
}

}  // namespace mindcheck
