#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mindcheck/domain.hpp"

namespace mindcheck {

inline constexpr std::size_t kMinSampleQuestions = 7;
inline constexpr std::size_t kMaxSampleQuestions = 11;

struct DimensionSpec {
  DimensionId id;
  std::string slug;
  std::string display_name;
  std::vector<std::string> sample_questions;
  ScoreRow score_map;

  friend bool operator==(const DimensionSpec&, const DimensionSpec&) = default;
};

/// The 37 screening dimensions with their sample questions and the general
/// response score map. Immutable after load.
///
/// File schema (JSON):
///   { "version": "...",
///     "dimensions": [ { "slug": "...", "display_name": "...",
///                       "sample_questions": ["...", ...],
///                       "score_map": {"yes": 0, "no": 2, "maybe": 1} } ] }
/// `maybe` defaults to 1 when omitted; `yes` and `no` are required.
class DimensionCatalog {
 public:
  /// Throws CatalogError on any schema or invariant violation.
  static DimensionCatalog from_json(const nlohmann::json& doc);
  static DimensionCatalog parse(std::string_view text);
  static DimensionCatalog load_file(const std::filesystem::path& path);

  nlohmann::json to_json() const;
  std::string serialize() const;

  const std::string& version() const noexcept { return version_; }
  const std::vector<DimensionSpec>& dimensions() const noexcept { return dimensions_; }
  const DimensionSpec& at(DimensionId id) const { return dimensions_[id.offset()]; }
  const std::string& slug(DimensionId id) const { return at(id).slug; }
  const std::string& display_name(DimensionId id) const { return at(id).display_name; }

  std::optional<DimensionId> find(std::string_view slug) const;
  /// Throws CatalogError naming the unknown slug.
  DimensionId require(std::string_view slug) const;

  const ScoreMappingTable& score_table() const noexcept { return table_; }

  /// "slug: display name" lines, used in classifier prompts.
  std::string dimension_list() const;

  friend bool operator==(const DimensionCatalog& a, const DimensionCatalog& b) {
    return a.version_ == b.version_ && a.dimensions_ == b.dimensions_;
  }

 private:
  DimensionCatalog() = default;

  std::string version_;
  std::vector<DimensionSpec> dimensions_;
  ScoreMappingTable table_;
};

const DimensionCatalog& default_catalog();

}  // namespace mindcheck
