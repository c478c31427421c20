#include "mindcheck/catalog.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "mindcheck/errors.hpp"
#include "mindcheck/resources.hpp"

namespace mindcheck {
namespace {

using nlohmann::json;

Score score_entry(const json& map, const char* key, const std::string& slug) {
  const auto& v = map.at(key);
  if (!v.is_number_integer()) {
    throw CatalogError("score_map." + std::string(key) + " of '" + slug + "' is not an integer");
  }
  const int value = v.get<int>();
  if (value < 0 || value > 2) {
    throw CatalogError("score_map." + std::string(key) + " of '" + slug + "' out of range 0-2");
  }
  return static_cast<Score>(value);
}

DimensionSpec parse_dimension(const json& entry, int index) {
  if (!entry.is_object()) throw CatalogError("dimension entry is not an object");
  DimensionSpec spec{DimensionId::from_index(index), {}, {}, {}, {}};
  if (!entry.contains("slug") || !entry["slug"].is_string()) {
    throw CatalogError("dimension " + std::to_string(index) + " has no slug");
  }
  spec.slug = entry["slug"].get<std::string>();
  if (spec.slug.empty()) throw CatalogError("dimension " + std::to_string(index) + " has an empty slug");
  spec.display_name = entry.value("display_name", spec.slug);

  if (!entry.contains("sample_questions") || !entry["sample_questions"].is_array()) {
    throw CatalogError("dimension '" + spec.slug + "' has no sample_questions list");
  }
  for (const auto& q : entry["sample_questions"]) {
    if (!q.is_string() || q.get<std::string>().empty()) {
      throw CatalogError("dimension '" + spec.slug + "' has a non-text sample question");
    }
    spec.sample_questions.push_back(q.get<std::string>());
  }
  const auto n = spec.sample_questions.size();
  if (n < kMinSampleQuestions || n > kMaxSampleQuestions) {
    throw CatalogError("dimension '" + spec.slug + "' has " + std::to_string(n) +
                       " sample questions, expected 7 to 11");
  }

  if (!entry.contains("score_map") || !entry["score_map"].is_object()) {
    throw CatalogError("dimension '" + spec.slug + "' has no score_map");
  }
  const auto& map = entry["score_map"];
  for (const char* key : {"yes", "no"}) {
    if (!map.contains(key)) {
      throw CatalogError("missing score_map entry '" + std::string(key) + "' for '" + spec.slug + "'");
    }
  }
  spec.score_map.yes = score_entry(map, "yes", spec.slug);
  spec.score_map.no = score_entry(map, "no", spec.slug);
  spec.score_map.maybe = map.contains("maybe") ? score_entry(map, "maybe", spec.slug) : Score::SomeProblems;
  return spec;
}

}  // namespace

DimensionCatalog DimensionCatalog::from_json(const json& doc) {
  if (!doc.is_object()) throw CatalogError("malformed catalog: top level is not an object");
  if (!doc.contains("dimensions") || !doc["dimensions"].is_array()) {
    throw CatalogError("malformed catalog: missing 'dimensions' list");
  }
  const auto& dims = doc["dimensions"];
  if (dims.size() != static_cast<std::size_t>(kDimensionCount)) {
    throw CatalogError("wrong dimension count: expected 37, got " + std::to_string(dims.size()));
  }

  DimensionCatalog catalog;
  catalog.version_ = doc.contains("version") && doc["version"].is_string()
                         ? doc["version"].get<std::string>()
                         : std::string{};
  std::set<std::string> seen;
  int index = 1;
  for (const auto& entry : dims) {
    auto spec = parse_dimension(entry, index);
    if (!seen.insert(spec.slug).second) throw CatalogError("duplicate slug '" + spec.slug + "'");
    catalog.table_.set_row(spec.id, spec.score_map);
    catalog.dimensions_.push_back(std::move(spec));
    ++index;
  }
  return catalog;
}

DimensionCatalog DimensionCatalog::parse(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw CatalogError(std::string("malformed catalog: ") + e.what());
  }
  try {
    return from_json(doc);
  } catch (const json::exception& e) {
    throw CatalogError(std::string("malformed catalog: ") + e.what());
  }
}

DimensionCatalog DimensionCatalog::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CatalogError("cannot open catalog file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str());
}

json DimensionCatalog::to_json() const {
  json dims = json::array();
  for (const auto& d : dimensions_) {
    dims.push_back({{"slug", d.slug},
                    {"display_name", d.display_name},
                    {"sample_questions", d.sample_questions},
                    {"score_map",
                     {{"yes", to_int(d.score_map.yes)},
                      {"no", to_int(d.score_map.no)},
                      {"maybe", to_int(d.score_map.maybe)}}}});
  }
  return {{"version", version_}, {"dimensions", std::move(dims)}};
}

std::string DimensionCatalog::serialize() const { return to_json().dump(2); }

std::optional<DimensionId> DimensionCatalog::find(std::string_view slug) const {
  for (const auto& d : dimensions_) {
    if (d.slug == slug) return d.id;
  }
  return std::nullopt;
}

DimensionId DimensionCatalog::require(std::string_view slug) const {
  if (auto id = find(slug)) return *id;
  throw CatalogError("unknown dimension slug '" + std::string(slug) + "'");
}

std::string DimensionCatalog::dimension_list() const {
  std::string out;
  for (const auto& d : dimensions_) {
    out += d.slug;
    out += ": ";
    out += d.display_name;
    out += '\n';
  }
  if (!out.empty()) out.pop_back();
  return out;
}

const DimensionCatalog& default_catalog() {
  static const DimensionCatalog catalog = DimensionCatalog::parse(resources::default_catalog_text());
  return catalog;
}

}  // namespace mindcheck
