#include <array>
#include <cctype>

#include "mindcheck/analyzer.hpp"
#include "mindcheck/errors.hpp"
#include "mindcheck/grammar.hpp"

namespace mindcheck {

namespace {

// Lowercased, without the final period.
constexpr std::array<std::string_view, 13> kAbbreviations = {
    "dr", "mr", "mrs", "ms", "prof", "st", "mt", "vs", "e.g", "i.e", "cf", "approx", "u.s"};

bool is_terminal(char c) { return c == '.' || c == '!' || c == '?'; }
bool is_closer(char c) { return c == '"' || c == '\'' || c == ')' || c == ']'; }
bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

bool starts_sentence(char c) {
  const auto u = static_cast<unsigned char>(c);
  return std::isupper(u) || std::isdigit(u) || c == '"' || c == '\'' || c == '(' || c == '[' || u >= 0x80;
}

// The word that ends right before the period at `dot`.
std::string_view word_before(std::string_view text, std::size_t dot) {
  std::size_t b = dot;
  while (b > 0 && !is_space(text[b - 1]) && text[b - 1] != '(' && text[b - 1] != '"') --b;
  return text.substr(b, dot - b);
}

bool period_is_abbreviation(std::string_view text, std::size_t dot) {
  const auto word = word_before(text, dot);
  if (word.empty()) return false;
  // Single-letter initial such as "J." in "J. Smith"; the pronoun "I" ends sentences.
  if (word.size() == 1 && std::isupper(static_cast<unsigned char>(word[0])) && word[0] != 'I') return true;
  std::string lower(word);
  for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  for (auto abbr : kAbbreviations)
    if (lower == abbr) return true;
  return false;
}

}  // namespace

std::vector<Segment> segment(std::string_view message) {
  if (trim(message).empty()) throw PreconditionError("cannot segment an empty message");
  std::vector<Segment> out;
  auto emit = [&](std::size_t b, std::size_t e) {
    auto piece = trim(message.substr(b, e - b));
    if (!piece.empty()) out.push_back({std::move(piece), out.size()});
  };

  std::size_t start = 0;
  std::size_t i = 0;
  while (i < message.size()) {
    if (!is_terminal(message[i])) {
      ++i;
      continue;
    }
    const std::size_t first = i;
    while (i < message.size() && is_terminal(message[i])) ++i;
    while (i < message.size() && is_closer(message[i])) ++i;
    const std::size_t end = i;
    if (end == message.size()) break;
    if (!is_space(message[end])) continue;  // 3.5, e.g.x, "...word"
    std::size_t next = end;
    while (next < message.size() && is_space(message[next])) ++next;
    if (next == message.size()) break;
    if (!starts_sentence(message[next])) continue;
    if (message[first] == '.' && end - first == 1 && period_is_abbreviation(message, first)) continue;
    emit(start, end);
    start = next;
    i = next;
  }
  emit(start, message.size());
  return out;
}

}  // namespace mindcheck
