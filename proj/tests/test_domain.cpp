#include <gtest/gtest.h>

#include <chrono>
#include <set>

#include "mindcheck/catalog.hpp"
#include "mindcheck/domain.hpp"
#include "mindcheck/errors.hpp"
#include "mindcheck/resources.hpp"

using namespace mindcheck;

namespace {

nlohmann::json default_doc() { return nlohmann::json::parse(resources::default_catalog_text()); }

}  // namespace

TEST(Domain, DimensionIdRange) {
  EXPECT_EQ(DimensionId::from_index(1).index(), 1);
  EXPECT_EQ(DimensionId::from_index(37).offset(), 36u);
  EXPECT_THROW(DimensionId::from_index(0), std::out_of_range);
  EXPECT_THROW(DimensionId::from_index(38), std::out_of_range);
  EXPECT_EQ(all_dimensions().size(), 37u);
}

TEST(Domain, ClassSpace) {
  EXPECT_EQ(kAdmissibleTargets, 111);
  // Enumerate instead of trusting the constant.
  std::set<std::pair<int, int>> targets;
  for (auto d : all_dimensions())
    for (int s = 0; s < 3; ++s) targets.insert({d.index(), to_int(score_from_int(s))});
  EXPECT_EQ(targets.size(), 111u);
  std::set<GeneralResponseClass> general;
  for (auto name : {"yes", "no", "maybe", "question", "stop"}) general.insert(*parse_general_class(name));
  EXPECT_EQ(general.size(), static_cast<std::size_t>(kGeneralClassCount));
  EXPECT_FALSE(parse_general_class("perhaps").has_value());
  EXPECT_THROW(score_from_int(3), std::out_of_range);
}

TEST(Domain, DimensionSetOps) {
  auto a = DimensionSet::of({DimensionId::from_index(1), DimensionId::from_index(5)});
  auto b = DimensionSet::of({DimensionId::from_index(5)});
  EXPECT_EQ((a - b).members(), std::vector<DimensionId>{DimensionId::from_index(1)});
  EXPECT_TRUE(b.is_subset_of(a));
  EXPECT_FALSE(a.is_subset_of(b));
  EXPECT_EQ(DimensionSet::all().size(), 37u);
  EXPECT_EQ((a | b).size(), 2u);
}

TEST(Catalog, DefaultLoads) {
  const auto start = std::chrono::steady_clock::now();
  const auto catalog = DimensionCatalog::parse(resources::default_catalog_text());
  const auto elapsed = std::chrono::steady_clock::now() - start;
  EXPECT_LT(std::chrono::duration<double>(elapsed).count(), 1.0);
  ASSERT_EQ(catalog.dimensions().size(), 37u);
  for (const auto& spec : catalog.dimensions()) {
    EXPECT_GE(spec.sample_questions.size(), 7u) << spec.slug;
    EXPECT_LE(spec.sample_questions.size(), 11u) << spec.slug;
  }
  ASSERT_TRUE(catalog.find("alcohol-abuse").has_value());
  EXPECT_EQ(catalog.at(*catalog.find("alcohol-abuse")).sample_questions.front(), "Do you often drink alone?");
}

TEST(Catalog, PaperFixedMappingCells) {
  const auto& c = default_catalog();
  EXPECT_EQ(std::get<Score>(lookup_general_score(c.require("managing-work-school"), GeneralResponseClass::Yes,
                                                 c.score_table())),
            Score::Good);
  EXPECT_EQ(std::get<Score>(lookup_general_score(c.require("alcohol-abuse"), GeneralResponseClass::Yes,
                                                 c.score_table())),
            Score::NeedsAttention);
}

TEST(Catalog, ControlClassesNeverScore) {
  const auto& c = default_catalog();
  for (auto d : all_dimensions()) {
    for (auto cls : {GeneralResponseClass::Yes, GeneralResponseClass::No, GeneralResponseClass::Maybe}) {
      EXPECT_TRUE(std::holds_alternative<Score>(lookup_general_score(d, cls, c.score_table())));
    }
    EXPECT_EQ(std::get<SessionControl>(lookup_general_score(d, GeneralResponseClass::Stop, c.score_table())),
              SessionControl::EndScreening);
    EXPECT_EQ(std::get<SessionControl>(lookup_general_score(d, GeneralResponseClass::Question, c.score_table())),
              SessionControl::RestateQuestion);
  }
}

TEST(Catalog, RoundTrip) {
  const auto& c = default_catalog();
  EXPECT_EQ(DimensionCatalog::parse(c.serialize()), c);
}

TEST(Catalog, WrongDimensionCount) {
  auto doc = default_doc();
  doc["dimensions"].erase(doc["dimensions"].size() - 1);
  try {
    DimensionCatalog::from_json(doc);
    FAIL() << "expected CatalogError";
  } catch (const CatalogError& e) {
    EXPECT_NE(std::string(e.what()).find("wrong dimension count"), std::string::npos);
  }
}

TEST(Catalog, TooManySampleQuestions) {
  auto doc = default_doc();
  auto& qs = doc["dimensions"][0]["sample_questions"];
  while (qs.size() < 12) qs.push_back("Extra question?");
  EXPECT_THROW(DimensionCatalog::from_json(doc), CatalogError);
}

TEST(Catalog, TooFewSampleQuestions) {
  auto doc = default_doc();
  auto& qs = doc["dimensions"][3]["sample_questions"];
  while (qs.size() > 6) qs.erase(qs.size() - 1);
  EXPECT_THROW(DimensionCatalog::from_json(doc), CatalogError);
}

TEST(Catalog, MissingScoreMapEntry) {
  auto doc = default_doc();
  doc["dimensions"][2]["score_map"].erase("no");
  EXPECT_THROW(DimensionCatalog::from_json(doc), CatalogError);
}

TEST(Catalog, MaybeDefaultsToOne) {
  auto doc = default_doc();
  doc["dimensions"][0]["score_map"].erase("maybe");
  auto c = DimensionCatalog::from_json(doc);
  EXPECT_EQ(c.score_table().row(DimensionId::from_index(1)).maybe, Score::SomeProblems);
}

TEST(Catalog, DuplicateSlugAndBadScore) {
  auto doc = default_doc();
  doc["dimensions"][1]["slug"] = doc["dimensions"][0]["slug"];
  EXPECT_THROW(DimensionCatalog::from_json(doc), CatalogError);
  doc = default_doc();
  doc["dimensions"][1]["score_map"]["yes"] = 3;
  EXPECT_THROW(DimensionCatalog::from_json(doc), CatalogError);
}

TEST(Catalog, MalformedDocument) {
  EXPECT_THROW(DimensionCatalog::parse("{not json"), CatalogError);
  EXPECT_THROW(DimensionCatalog::parse("[]"), CatalogError);
  EXPECT_THROW(DimensionCatalog::parse("{\"version\":\"1\"}"), CatalogError);
}

TEST(Catalog, UnknownSlugNamed) {
  try {
    default_catalog().require("no-such-dimension");
    FAIL();
  } catch (const CatalogError& e) {
    EXPECT_NE(std::string(e.what()).find("no-such-dimension"), std::string::npos);
  }
}
