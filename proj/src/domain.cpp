#include "mindcheck/domain.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>

namespace mindcheck {

DimensionId DimensionId::from_index(int index) {
  if (index < 1 || index > kDimensionCount) {
    throw std::out_of_range("dimension index out of range: " + std::to_string(index));
  }
  return DimensionId(index);
}

std::vector<DimensionId> all_dimensions() {
  std::vector<DimensionId> out;
  out.reserve(kDimensionCount);
  for (int i = 1; i <= kDimensionCount; ++i) out.push_back(DimensionId::from_index(i));
  return out;
}

DimensionSet DimensionSet::all() {
  DimensionSet s;
  s.bits_.set();
  return s;
}

DimensionSet DimensionSet::of(const std::vector<DimensionId>& dims) {
  DimensionSet s;
  for (auto d : dims) s.insert(d);
  return s;
}

std::vector<DimensionId> DimensionSet::members() const {
  std::vector<DimensionId> out;
  for (int i = 0; i < kDimensionCount; ++i) {
    if (bits_.test(static_cast<std::size_t>(i))) out.push_back(DimensionId::from_index(i + 1));
  }
  return out;
}

Score score_from_int(int value) {
  if (value < 0 || value > 2) {
    throw std::out_of_range("score must be 0, 1 or 2, got " + std::to_string(value));
  }
  return static_cast<Score>(value);
}

std::string_view to_string(GeneralResponseClass cls) {
  switch (cls) {
    case GeneralResponseClass::Yes: return "yes";
    case GeneralResponseClass::No: return "no";
    case GeneralResponseClass::Maybe: return "maybe";
    case GeneralResponseClass::Question: return "question";
    case GeneralResponseClass::Stop: return "stop";
  }
  return "unknown";
}

std::optional<GeneralResponseClass> parse_general_class(std::string_view text) {
  std::string lower;
  for (char c : text) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  for (auto cls : {GeneralResponseClass::Yes, GeneralResponseClass::No, GeneralResponseClass::Maybe,
                   GeneralResponseClass::Question, GeneralResponseClass::Stop}) {
    if (lower == to_string(cls)) return cls;
  }
  return std::nullopt;
}

std::string_view to_string(SessionControl control) {
  switch (control) {
    case SessionControl::RestateQuestion: return "restate_question";
    case SessionControl::EndScreening: return "end_screening";
  }
  return "unknown";
}

GeneralResolution lookup_general_score(DimensionId dim, GeneralResponseClass cls,
                                       const ScoreMappingTable& table) {
  const ScoreRow& row = table.row(dim);
  switch (cls) {
    case GeneralResponseClass::Yes: return row.yes;
    case GeneralResponseClass::No: return row.no;
    case GeneralResponseClass::Maybe: return row.maybe;
    case GeneralResponseClass::Question: return SessionControl::RestateQuestion;
    case GeneralResponseClass::Stop: return SessionControl::EndScreening;
  }
  throw std::logic_error("unhandled general response class");
}

}  // namespace mindcheck
