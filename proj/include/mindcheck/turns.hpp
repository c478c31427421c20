#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "mindcheck/catalog.hpp"
#include "mindcheck/domain.hpp"

namespace mindcheck {

/// Closed set of engine reply kinds; clients annotate turns by kind.
enum class TurnKind {
  Question,
  RephraseRequest,
  Reflection,
  FollowupQuestion,
  Guide,
  Validation,
  Summary,
  CbtQuestion,
  CbtGuide,
  Closing,
};

inline constexpr std::array<TurnKind, 10> kAllTurnKinds = {
    TurnKind::Question,   TurnKind::RephraseRequest, TurnKind::Reflection, TurnKind::FollowupQuestion,
    TurnKind::Guide,      TurnKind::Validation,      TurnKind::Summary,    TurnKind::CbtQuestion,
    TurnKind::CbtGuide,   TurnKind::Closing};

std::string_view to_string(TurnKind k);
std::optional<TurnKind> parse_turn_kind(std::string_view s);

/// One engine reply as sent to clients.
struct Frame {
  std::size_t index = 0;
  TurnKind kind = TurnKind::Question;
  std::string text;
  std::optional<DimensionId> dimension;
  std::optional<int> stage;

  friend bool operator==(const Frame&, const Frame&) = default;
};

nlohmann::json frame_to_json(const Frame& f, const DimensionCatalog& catalog);

/// Per-session call counters.
struct Telemetry {
  int classifier_calls = 0;
  int rephraser_calls = 0;
  int reflection_calls = 0;
  int rv_reasoner_calls = 0;
  int rv_guide_calls = 0;
  int rv_validator_calls = 0;
  int situation_calls = 0;
  std::array<int, 3> cbt_question_calls{};
  std::array<int, 3> cbt_reasoner_calls{};
  std::array<int, 3> cbt_guide_calls{};
  int qtable_updates = 0;

  friend bool operator==(const Telemetry&, const Telemetry&) = default;
};

nlohmann::json telemetry_to_json(const Telemetry& t);
Telemetry telemetry_from_json(const nlohmann::json& j);

}  // namespace mindcheck
