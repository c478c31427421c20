#include <gtest/gtest.h>

#include "mindcheck/errors.hpp"
#include "mindcheck/gateway.hpp"
#include "test_support.hpp"

using namespace mindcheck;

namespace {

ScriptEntry reply(std::string text, std::optional<std::string> tmpl = std::nullopt) {
  ScriptEntry e;
  e.reply = std::move(text);
  e.template_name = std::move(tmpl);
  return e;
}

Fields rv_fields() {
  return {{"dimension", "sleep-schedule"},
          {"original_question", "How has your sleep been?"},
          {"original_response", "I can't sleep because of deadlines."},
          {"followup_question", "What keeps you up?"},
          {"followup_response", "Work."}};
}

}  // namespace

TEST(Grammar, FortyCaseFixture) {
  const auto cases = testsupport::read_json("grammar_cases.json");
  ASSERT_EQ(cases.size(), 40u);
  for (const auto& c : cases) {
    const auto input = c["input"].get<std::string>();
    const bool is_decision = c["parser"] == "decision";
    if (c.value("error", false)) {
      if (is_decision) {
        EXPECT_THROW(parse_decision(input), ParseError) << input;
      } else {
        EXPECT_THROW(parse_analysis(input), ParseError) << input;
      }
      continue;
    }
    if (is_decision) {
      EXPECT_EQ(to_int(parse_decision(input)), c["expect"].get<int>()) << input;
    } else {
      EXPECT_EQ(parse_analysis(input), c["expect"].get<std::string>()) << input;
    }
  }
}

TEST(Grammar, ParseErrorCarriesRaw) {
  try {
    parse_decision("I think it is valid.");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.raw(), "I think it is valid.");
  }
}

TEST(Grammar, DecisionRoundTrip) {
  for (auto d : {Decision::Valid, Decision::Invalid}) EXPECT_EQ(parse_decision(render_decision(d)), d);
}

TEST(Grammar, Classification) {
  const auto& c = default_catalog();
  EXPECT_EQ(parse_classification("Dimension: alcohol-abuse Score: 2", c),
            Classification(DimScore{c.require("alcohol-abuse"), Score::NeedsAttention}));
  EXPECT_EQ(parse_classification("Label -> dimension: Sleep-Schedule, score: 0", c),
            Classification(DimScore{c.require("sleep-schedule"), Score::Good}));
  EXPECT_EQ(parse_classification("General: Stop", c), Classification(GeneralResponse{GeneralResponseClass::Stop}));
  EXPECT_EQ(parse_classification("Unclassifiable", c), Classification(Unclassifiable{}));
  EXPECT_EQ(parse_classification("General: no (not Unclassifiable)", c),
            Classification(GeneralResponse{GeneralResponseClass::No}));
  EXPECT_THROW(parse_classification("Dimension: astrology Score: 1", c), ParseError);
  EXPECT_THROW(parse_classification("Dimension: alcohol-abuse Score: 3", c), ParseError);
  EXPECT_THROW(parse_classification("General: perhaps", c), ParseError);
  EXPECT_THROW(parse_classification("no idea", c), ParseError);
  for (auto d : all_dimensions())
    for (int s = 0; s < 3; ++s) {
      Classification x = DimScore{d, score_from_int(s)};
      EXPECT_EQ(parse_classification(render_classification(x, c), c), x);
    }
}

TEST(Templates, DefaultsLoadAndMatchDirectory) {
  const auto& set = TemplateSet::defaults();
  EXPECT_EQ(set.names().size(), 16u);
  auto from_dir = TemplateSet::load_dir(MINDCHECK_TEMPLATE_DIR);
  EXPECT_EQ(from_dir.names(), set.names());
  for (const auto& name : set.names()) {
    const auto& t = set.get(name);
    if (t.role == "reasoner" || t.role == "guide" || t.role == "validator") {
      EXPECT_GE(t.examples.size(), 3u) << name;
      EXPECT_LE(t.examples.size(), 4u) << name;
    }
    if (t.role == "reasoner") {
      EXPECT_EQ(t.temperature, 0.0) << name;
      EXPECT_EQ(t.response_format, ResponseFormat::Decision) << name;
    }
    if (t.role == "rephraser" || t.role == "guide" || t.role == "validator") EXPECT_EQ(t.temperature, 0.7) << name;
  }
}

TEST(Templates, MissingFieldFailsLoudly) {
  const auto& t = TemplateSet::defaults().get("rv_reasoner");
  auto fields = rv_fields();
  fields.erase("followup_response");
  EXPECT_THROW(t.render_user(fields), TemplateError);
  EXPECT_THROW(TemplateSet::defaults().get("response_analyzer").render_system({}), TemplateError);
}

TEST(Templates, SubstituteIsSinglePass) {
  EXPECT_EQ(substitute("a {{x}} b", {{"x", "{{y}}"}}), "a {{y}} b");
  EXPECT_THROW(substitute("a {{missing}}", {}), TemplateError);
}

TEST(Templates, ParseRejectsBadFiles) {
  EXPECT_THROW(PromptTemplate::parse("no front matter"), TemplateError);
  const std::string few_examples =
      "---\nname: x\nrole: reasoner\nresponse_format: decision\nuser_template: \"{{a}}\"\n"
      "required_user_fields: [a]\nexamples:\n  - user: q\n    response: \"Decision: 0\"\n---\nObjective.\n";
  EXPECT_THROW(PromptTemplate::parse(few_examples), TemplateError);
  const std::string undeclared =
      "---\nname: x\nresponse_format: text\nuser_template: \"{{a}} {{b}}\"\nrequired_user_fields: [a]\n---\nObj.\n";
  EXPECT_THROW(PromptTemplate::parse(undeclared), TemplateError);
  const std::string bad_format = "---\nname: x\nresponse_format: json\nuser_template: hi\n---\nObj.\n";
  EXPECT_THROW(PromptTemplate::parse(bad_format), TemplateError);
}

TEST(Templates, SystemContentCarriesExamplesAndFormat) {
  const auto& t = TemplateSet::defaults().get("rv_reasoner");
  const auto sys = t.render_system();
  EXPECT_NE(sys.find("Decision: 0"), std::string::npos);
  EXPECT_NE(sys.find("Examples:"), std::string::npos);
  EXPECT_NE(sys.find(t.objective), std::string::npos);
}

TEST(ScriptedBackend, ConsumesInOrder) {
  auto backend = std::make_shared<ScriptedBackend>(std::vector{reply("Decision: 0"), reply("Decision: 1")});
  Gateway gw(backend, TemplateSet::defaults());
  EXPECT_EQ(backend->complete(gw.build("rv_reasoner", rv_fields())).raw, "Decision: 0");
  EXPECT_EQ(backend->complete(gw.build("rv_reasoner", rv_fields())).raw, "Decision: 1");
  EXPECT_THROW(backend->complete(gw.build("rv_reasoner", rv_fields())), ScriptError);
  EXPECT_THROW(ScriptedBackend(std::vector<ScriptEntry>{}), PreconditionError);
}

TEST(ScriptedBackend, MatchersStickyAndEcho) {
  ScriptEntry echo = reply("{{user_content}}", "rephraser");
  echo.sticky = true;
  ScriptEntry contains = reply("Decision: 1", "rv_reasoner");
  contains.contains = "Work.";
  auto backend = std::make_shared<ScriptedBackend>(std::vector{echo, contains});
  Gateway gw(backend, TemplateSet::defaults());
  EXPECT_EQ(gw.text("rephraser", {{"question", "Have you recently exercised?"}}), "Have you recently exercised?");
  EXPECT_EQ(gw.text("rephraser", {{"question", "Q2?"}}), "Q2?");
  EXPECT_EQ(gw.decide("rv_reasoner", rv_fields()), Decision::Invalid);
  EXPECT_EQ(backend->remaining(), 0u);
  EXPECT_EQ(backend->calls().size(), 3u);
}

TEST(ScriptedBackend, JsonRoundTripAndFailures) {
  auto json = nlohmann::json::parse(
      R"({"entries":[{"template":"rephraser","reply":"x"},{"fail":"transport"},{"fail":"auth"},{"fail":"timeout"}]})");
  auto script = script_from_json(json);
  EXPECT_EQ(script_to_json(script), json);
  auto backend = std::make_shared<ScriptedBackend>(script);
  Gateway gw(backend, TemplateSet::defaults());
  EXPECT_EQ(gw.text("rephraser", {{"question", "q"}}), "x");
  EXPECT_THROW(gw.text("rephraser", {{"question", "q"}}), TransportError);
  EXPECT_THROW(gw.text("rephraser", {{"question", "q"}}), AuthError);
  EXPECT_THROW(gw.text("rephraser", {{"question", "q"}}), TimeoutError);
  EXPECT_THROW(script_from_json(nlohmann::json::parse(R"({"entries":[{"fail":"boom"}]})")), PreconditionError);
}

TEST(Gateway, RequeriesOnceWithReminder) {
  auto backend = std::make_shared<ScriptedBackend>(std::vector{reply("It is valid."), reply("Decision: 0")});
  Gateway gw(backend, TemplateSet::defaults());
  EXPECT_EQ(gw.decide("rv_reasoner", rv_fields()), Decision::Valid);
  const auto calls = backend->calls();
  ASSERT_EQ(calls.size(), 2u);
  EXPECT_NE(calls[1].user_content.find("Decision: 0"), std::string::npos);
  EXPECT_EQ(gw.backend_calls(), 2);
}

TEST(Gateway, SecondParseFailurePropagates) {
  auto backend = std::make_shared<ScriptedBackend>(std::vector{reply("nope"), reply("still nope"), reply("Decision: 1")});
  Gateway gw(backend, TemplateSet::defaults());
  EXPECT_THROW(gw.decide("rv_reasoner", rv_fields()), ParseError);
  EXPECT_EQ(backend->remaining(), 1u);
}

TEST(Gateway, BuildUsesTemplateSettings) {
  auto backend = std::make_shared<ScriptedBackend>(std::vector{reply("x")});
  Gateway gw(backend, TemplateSet::defaults(), "model-a");
  auto req = gw.build("rv_reasoner", rv_fields());
  EXPECT_EQ(req.temperature, 0.0);
  EXPECT_EQ(req.model_tag, "model-a");
  EXPECT_EQ(gw.build("rv_guide", rv_fields()).temperature, 0.7);
  PromptRequest bad = req;
  bad.temperature = 2.5;
  EXPECT_THROW(bad.validate(), PreconditionError);
  bad = req;
  bad.system_content.clear();
  EXPECT_THROW(bad.validate(), PreconditionError);
}

TEST(Gateway, ScriptedRunsAreDeterministic) {
  auto run = [] {
    auto backend = std::make_shared<ScriptedBackend>(
        std::vector{reply("Decision: 1", "rv_reasoner"), reply("Analysis: Let's focus on sleep.", "rv_guide")});
    Gateway gw(backend, TemplateSet::defaults());
    auto d = gw.decide("rv_reasoner", rv_fields());
    auto g = gw.analyze("rv_guide", rv_fields());
    return std::to_string(to_int(d)) + g + backend->calls().back().user_content;
  };
  EXPECT_EQ(run(), run());
}
