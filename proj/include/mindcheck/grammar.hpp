#pragma once

// Strict parsers for model output grammars. Markers are case-insensitive and
// may be surrounded by prose; anything else is a ParseError carrying the raw
// text.

#include <string>
#include <string_view>

#include "mindcheck/catalog.hpp"
#include "mindcheck/domain.hpp"

namespace mindcheck {

enum class Decision { Valid = 0, Invalid = 1 };

inline int to_int(Decision d) noexcept { return static_cast<int>(d); }

/// First `Decision:` marker followed on the same line by a lone 0 or 1.
/// "Decision: 10", "Decision: 0/1" and "Decision: 0.5" do not match.
Decision parse_decision(std::string_view text);
std::string render_decision(Decision d);

/// Text after the first `Analysis:` marker, trimmed; empty text is an error.
std::string parse_analysis(std::string_view text);

/// Trimmed reply; empty is an error.
std::string parse_text(std::string_view text);

/// One of `Dimension: <slug> Score: <0|1|2>`, `General: <class>` or
/// `Unclassifiable`; the earliest marker in the text wins. Unknown slugs are
/// a ParseError.
Classification parse_classification(std::string_view text, const DimensionCatalog& catalog);
std::string render_classification(const Classification& c, const DimensionCatalog& catalog);

std::string trim(std::string_view s);

}  // namespace mindcheck
