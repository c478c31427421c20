#pragma once

// Screening data model: dimensions, scores, general responses and the
// per-segment classification result.

#include <array>
#include <bitset>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace mindcheck {

inline constexpr int kDimensionCount = 37;
inline constexpr int kScoreLevels = 3;
inline constexpr int kGeneralClassCount = 5;
/// Number of (Dimension, Score) classification targets.
inline constexpr int kAdmissibleTargets = kDimensionCount * kScoreLevels;

/// One of the 37 screening dimensions, by 1-based catalog index.
class DimensionId {
 public:
  /// Throws std::out_of_range outside 1..37.
  static DimensionId from_index(int index);

  int index() const noexcept { return index_; }
  /// 0-based position, for array indexing.
  std::size_t offset() const noexcept { return static_cast<std::size_t>(index_ - 1); }

  friend auto operator<=>(DimensionId, DimensionId) = default;

 private:
  explicit constexpr DimensionId(int index) : index_(index) {}
  int index_;
};

std::vector<DimensionId> all_dimensions();

/// Set of dimensions, e.g. the user's selection or the visited set.
class DimensionSet {
 public:
  DimensionSet() = default;
  static DimensionSet all();
  static DimensionSet of(const std::vector<DimensionId>& dims);

  void insert(DimensionId d) { bits_.set(d.offset()); }
  void erase(DimensionId d) { bits_.reset(d.offset()); }
  bool contains(DimensionId d) const { return bits_.test(d.offset()); }
  std::size_t size() const { return bits_.count(); }
  bool empty() const { return bits_.none(); }
  bool is_subset_of(const DimensionSet& other) const { return (bits_ & ~other.bits_).none(); }

  /// Ascending by index.
  std::vector<DimensionId> members() const;

  friend DimensionSet operator-(const DimensionSet& a, const DimensionSet& b) {
    DimensionSet r;
    r.bits_ = a.bits_ & ~b.bits_;
    return r;
  }
  friend DimensionSet operator|(const DimensionSet& a, const DimensionSet& b) {
    DimensionSet r;
    r.bits_ = a.bits_ | b.bits_;
    return r;
  }
  friend bool operator==(const DimensionSet&, const DimensionSet&) = default;

 private:
  std::bitset<kDimensionCount> bits_;
};

/// 0: doing well, 1: some problems but no immediate action, 2: needs
/// heightened attention.
enum class Score : std::uint8_t { Good = 0, SomeProblems = 1, NeedsAttention = 2 };

/// Throws std::out_of_range for values other than 0, 1, 2.
Score score_from_int(int value);
inline int to_int(Score s) noexcept { return static_cast<int>(s); }

enum class GeneralResponseClass { Yes, No, Maybe, Question, Stop };

std::string_view to_string(GeneralResponseClass cls);
std::optional<GeneralResponseClass> parse_general_class(std::string_view text);

enum class SessionControl { RestateQuestion, EndScreening };

std::string_view to_string(SessionControl control);

struct DimScore {
  DimensionId dimension;
  Score score;
  friend bool operator==(const DimScore&, const DimScore&) = default;
};

struct GeneralResponse {
  GeneralResponseClass cls;
  friend bool operator==(const GeneralResponse&, const GeneralResponse&) = default;
};

struct Unclassifiable {
  friend bool operator==(const Unclassifiable&, const Unclassifiable&) = default;
};

using Classification = std::variant<DimScore, GeneralResponse, Unclassifiable>;

inline bool is_unclassifiable(const Classification& c) {
  return std::holds_alternative<Unclassifiable>(c);
}

/// Per-dimension score for the three mapped general classes.
struct ScoreRow {
  Score yes = Score::Good;
  Score no = Score::NeedsAttention;
  Score maybe = Score::SomeProblems;
  friend bool operator==(const ScoreRow&, const ScoreRow&) = default;
};

/// Maps (dimension, Yes/No/Maybe) to a Score; 37 rows x 3 columns.
class ScoreMappingTable {
 public:
  ScoreMappingTable() = default;

  void set_row(DimensionId d, ScoreRow row) { rows_[d.offset()] = row; }
  const ScoreRow& row(DimensionId d) const { return rows_[d.offset()]; }

  friend bool operator==(const ScoreMappingTable&, const ScoreMappingTable&) = default;

 private:
  std::array<ScoreRow, kDimensionCount> rows_{};
};

using GeneralResolution = std::variant<Score, SessionControl>;

/// Yes/No/Maybe resolve through the table; Question restates the question and
/// Stop ends screening.
GeneralResolution lookup_general_score(DimensionId dim, GeneralResponseClass cls,
                                       const ScoreMappingTable& table);

}  // namespace mindcheck
