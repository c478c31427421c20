#include "mindcheck/grammar.hpp"

#include <regex>

#include "mindcheck/errors.hpp"

namespace mindcheck {

namespace {

const std::regex& decision_re() {
  static const std::regex re(R"(\bdecision[ \t]*:[ \t]*([01])(?![0-9/]|\.[0-9]))", std::regex::icase);
  return re;
}

const std::regex& dimscore_re() {
  static const std::regex re(R"(\bdimension[ \t]*:[ \t]*([a-z0-9-]+)[ \t]*[,;]?[ \t]*score[ \t]*:[ \t]*([0-9]+)\b)",
                             std::regex::icase);
  return re;
}

const std::regex& general_re() {
  static const std::regex re(R"(\bgeneral[ \t]*:[ \t]*([a-z]+)\b)", std::regex::icase);
  return re;
}

const std::regex& unclassifiable_re() {
  static const std::regex re(R"(\bunclassifiable\b)", std::regex::icase);
  return re;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

std::string trim(std::string_view s) {
  const auto ws = " \t\r\n\f\v";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return std::string(s.substr(b, e - b + 1));
}

Decision parse_decision(std::string_view text) {
  const std::string s(text);
  std::smatch m;
  if (!std::regex_search(s, m, decision_re())) throw ParseError("no 'Decision: 0|1' in reply", s);
  return m[1] == "0" ? Decision::Valid : Decision::Invalid;
}

std::string render_decision(Decision d) { return "Decision: " + std::to_string(to_int(d)); }

std::string parse_analysis(std::string_view text) {
  const std::string s(text);
  const auto pos = lower(s).find("analysis:");
  if (pos == std::string::npos) throw ParseError("no 'Analysis:' marker in reply", s);
  auto body = trim(std::string_view(s).substr(pos + 9));
  if (body.empty()) throw ParseError("empty analysis", s);
  return body;
}

std::string parse_text(std::string_view text) {
  auto body = trim(text);
  if (body.empty()) throw ParseError("empty reply", std::string(text));
  return body;
}

Classification parse_classification(std::string_view text, const DimensionCatalog& catalog) {
  const std::string s(text);
  std::smatch dm, gm, um;
  const bool has_d = std::regex_search(s, dm, dimscore_re());
  const bool has_g = std::regex_search(s, gm, general_re());
  const bool has_u = std::regex_search(s, um, unclassifiable_re());
  const auto pos = [](bool has, const std::smatch& m) {
    return has ? static_cast<std::size_t>(m.position(0)) : std::string::npos;
  };
  const auto pd = pos(has_d, dm), pg = pos(has_g, gm), pu = pos(has_u, um);
  if (pd == std::string::npos && pg == std::string::npos && pu == std::string::npos) {
    throw ParseError("no classification marker in reply", s);
  }
  if (pd < pg && pd < pu) {
    auto id = catalog.find(lower(dm[1].str()));
    if (!id) throw ParseError("unknown dimension '" + dm[1].str() + "'", s);
    const auto score = dm[2].str();
    if (score != "0" && score != "1" && score != "2") throw ParseError("score out of range", s);
    return DimScore{*id, score_from_int(score[0] - '0')};
  }
  if (pg < pu) {
    auto cls = parse_general_class(lower(gm[1].str()));
    if (!cls) throw ParseError("unknown general class '" + gm[1].str() + "'", s);
    return GeneralResponse{*cls};
  }
  return Unclassifiable{};
}

std::string render_classification(const Classification& c, const DimensionCatalog& catalog) {
  if (const auto* ds = std::get_if<DimScore>(&c)) {
    return "Dimension: " + catalog.slug(ds->dimension) + " Score: " + std::to_string(to_int(ds->score));
  }
  if (const auto* g = std::get_if<GeneralResponse>(&c)) return "General: " + std::string(to_string(g->cls));
  return "Unclassifiable";
}

}  // namespace mindcheck
