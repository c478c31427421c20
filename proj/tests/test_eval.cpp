#include <gtest/gtest.h>

#include <algorithm>

#include "mindcheck/errors.hpp"
#include "mindcheck/eval.hpp"
#include "test_support.hpp"

using namespace mindcheck;

namespace {

std::vector<LabeledExample> rv_fixture() { return load_dataset(testsupport::fixture("eval_rv_20.jsonl")); }

std::shared_ptr<Backend> script(const char* name) { return ScriptedBackend::load_file(testsupport::fixture(name)); }

const EvalTask kRv = EvalTask::parse("rv_reasoner");

}  // namespace

TEST(Dataset, LoadsFixture) {
  const auto ds = rv_fixture();
  ASSERT_EQ(ds.size(), 20u);
  EXPECT_EQ(ds[0].line, 1u);
  EXPECT_EQ(std::count_if(ds.begin(), ds.end(), [](const auto& e) { return e.label == "1"; }), 5);
}

TEST(Dataset, ErrorsNameTheLine) {
  const std::string good =
      R"({"task":"rv_reasoner","fields":{"dimension":"a","original_question":"q","original_response":"r","followup_question":"f","followup_response":"x"},"label":0})";
  try {
    parse_dataset(good + "\n\n" + R"({"task":"rv_reasoner","fields":{"dimension":"a"},"label":0})");
    FAIL() << "expected DatasetError";
  } catch (const DatasetError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  try {
    parse_dataset(good + "\n" + R"({"task":"response_analyzer","fields":{"question":"q","asked_dimension":"alcohol-abuse","segment":"s"},"label":1})");
    FAIL() << "expected DatasetError";
  } catch (const DatasetError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(parse_dataset(""), DatasetError);
  EXPECT_THROW(parse_dataset("\n  \n"), DatasetError);
  EXPECT_THROW(parse_dataset("{not json"), DatasetError);
  EXPECT_THROW(parse_dataset(R"({"task":"nope","fields":{},"label":0})"), DatasetError);
  EXPECT_THROW(parse_dataset(R"({"task":"response_analyzer","fields":{"question":"q","asked_dimension":"x","segment":"s"},"label":{"dimension":"no-such","score":1}})"),
               DatasetError);
}

TEST(Dataset, ClassificationLabels) {
  const auto ds = parse_dataset(
      R"({"task":"response_analyzer","fields":{"question":"q","asked_dimension":"alcohol-abuse","segment":"s1"},"label":{"dimension":"alcohol-abuse","score":2}})"
      "\n"
      R"({"task":"response_analyzer","fields":{"question":"q","asked_dimension":"alcohol-abuse","segment":"s2"},"label":{"general":"stop"}})"
      "\n"
      R"({"task":"response_analyzer","fields":{"question":"q","asked_dimension":"alcohol-abuse","segment":"s3"},"label":"unclassifiable"})");
  EXPECT_EQ(ds[0].label, "alcohol-abuse:2");
  EXPECT_EQ(ds[1].label, "general:stop");
  EXPECT_EQ(ds[2].label, "unclassifiable");
  const auto r = run_eval(EvalTask::parse("response_analyzer"), ds, std::make_shared<EchoBackend>(ds));
  EXPECT_EQ(r.metrics.accuracy, 1.0);
  EXPECT_FALSE(r.metrics.positive_class);
}

// The hand tally in eval_rv_20_tally.json is the oracle.
TEST(Eval, FifteenOfTwentyMatchesHandTally) {
  const auto tally = testsupport::read_json("eval_rv_20_tally.json");
  const long tp = tally["true_positive"], fn = tally["false_negative"], fp = tally["false_positive"],
             tn = tally["true_negative"];
  const auto r = run_eval(kRv, rv_fixture(), script("eval_rv_20_script.json"));
  EXPECT_EQ(r.metrics.n, 20);
  EXPECT_EQ(r.metrics.accuracy, 0.75);
  EXPECT_EQ(r.metrics.confusion.at("1", "1"), tp);
  EXPECT_EQ(r.metrics.confusion.at("1", "0"), fn);
  EXPECT_EQ(r.metrics.confusion.at("0", "1"), fp);
  EXPECT_EQ(r.metrics.confusion.at("0", "0"), tn);
  EXPECT_EQ(r.metrics.precision, static_cast<double>(tp) / static_cast<double>(tp + fp));
  EXPECT_EQ(r.metrics.recall, static_cast<double>(tp) / static_cast<double>(tp + fn));
  EXPECT_EQ(r.metrics.positive_class, "1");
  EXPECT_TRUE(r.failures.empty());
}

TEST(Eval, AlwaysWrongScoresZero) {
  const auto r = run_eval(kRv, rv_fixture(), script("eval_rv_20_always_wrong.json"));
  EXPECT_EQ(r.metrics.accuracy, 0.0);
  EXPECT_EQ(r.metrics.recall, 0.0);
}

TEST(Eval, EchoBackendIsPerfect) {
  const auto ds = rv_fixture();
  const auto r = run_eval(kRv, ds, std::make_shared<EchoBackend>(ds));
  EXPECT_EQ(r.metrics.accuracy, 1.0);
  EXPECT_EQ(r.metrics.precision, 1.0);
  EXPECT_EQ(r.metrics.recall, 1.0);
}

TEST(Eval, ParallelRunMatchesSequential) {
  const auto ds = rv_fixture();
  const auto seq = run_eval(kRv, ds, script("eval_rv_20_script.json"));
  EvalOptions opts;
  opts.parallelism = 4;
  const auto par = run_eval(kRv, ds, script("eval_rv_20_script.json"), opts);
  EXPECT_EQ(seq.predictions, par.predictions);
  EXPECT_EQ(metrics_to_json(seq.metrics), metrics_to_json(par.metrics));
}

TEST(Eval, BackendFailuresCountAsMisclassified) {
  ScriptEntry fail;
  fail.template_name = "rv_reasoner";
  fail.fail = "transport";
  fail.sticky = true;
  const auto ds = rv_fixture();
  const auto r = run_eval(kRv, ds, std::make_shared<ScriptedBackend>(std::vector{fail}));
  EXPECT_EQ(r.failures.size(), 20u);
  EXPECT_EQ(r.failures[0].line, 1u);
  EXPECT_EQ(r.metrics.accuracy, 0.0);
  EXPECT_EQ(r.metrics.confusion.total(), 20);
  EXPECT_EQ(r.metrics.confusion.at("1", std::string(kErrorClass)), 5);
  EXPECT_THROW(run_eval(EvalTask::parse("cbt_stage1_reasoner"), ds, std::make_shared<EchoBackend>(ds)),
               PreconditionError);
}

TEST(Metrics, IdentityIsDiagonal) {
  const std::vector<std::string> l{"a", "b", "c", "a"};
  const auto m = confusion_matrix(l, l);
  EXPECT_EQ(m.trace(), 4);
  EXPECT_EQ(m.total(), 4);
  for (std::size_t i = 0; i < m.classes.size(); ++i)
    for (std::size_t j = 0; j < m.classes.size(); ++j)
      if (i != j) EXPECT_EQ(m.counts[i][j], 0);
  EXPECT_THROW(confusion_matrix({"a"}, {"a", "b"}), PreconditionError);
}

TEST(Metrics, SingleClass) {
  const auto m = compute_metrics({"x", "x"}, {"x", "x"}, std::nullopt);
  EXPECT_EQ(m.confusion.classes.size(), 1u);
  EXPECT_EQ(m.accuracy, 1.0);
  EXPECT_EQ(m.precision, 1.0);
  const auto b = compute_metrics({"0", "0"}, {"0", "0"}, std::string("1"));
  EXPECT_EQ(b.precision, 0.0);
  EXPECT_EQ(b.recall, 0.0);
}

// Macro averages by hand: class a P=1/2 R=1/2, b P=2/3 R=1, c P=0 R=0.
TEST(Metrics, MacroAverageByHand) {
  const auto m = compute_metrics({"a", "b", "b", "b", "a"}, {"a", "a", "b", "b", "c"}, std::nullopt);
  EXPECT_DOUBLE_EQ(m.precision, (0.5 + 2.0 / 3.0 + 0.0) / 3.0);
  EXPECT_DOUBLE_EQ(m.recall, (0.5 + 1.0 + 0.0) / 3.0);
  EXPECT_EQ(m.accuracy, 0.6);
}

TEST(Metrics, PermutationInvariant) {
  std::vector<std::string> p{"0", "1", "1", "0", "1", "0", "0"};
  std::vector<std::string> l{"0", "1", "0", "0", "1", "1", "0"};
  const auto base = metrics_to_json(compute_metrics(p, l, std::string("1")));
  std::vector<std::size_t> idx{6, 2, 4, 0, 5, 1, 3};
  std::vector<std::string> p2, l2;
  for (auto i : idx) {
    p2.push_back(p[i]);
    l2.push_back(l[i]);
  }
  EXPECT_EQ(metrics_to_json(compute_metrics(p2, l2, std::string("1"))), base);
}

TEST(Split, NinetyTen) {
  const auto ds = rv_fixture();
  const auto s = split_dataset(ds, 0.1, 3);
  EXPECT_EQ(s.test.size(), 2u);
  EXPECT_EQ(s.train.size(), 18u);
  std::vector<std::size_t> lines;
  for (const auto& e : s.train) lines.push_back(e.line);
  for (const auto& e : s.test) lines.push_back(e.line);
  std::sort(lines.begin(), lines.end());
  for (std::size_t i = 0; i < lines.size(); ++i) EXPECT_EQ(lines[i], i + 1);
  const auto again = split_dataset(ds, 0.1, 3);
  EXPECT_EQ(again.test[0].line, s.test[0].line);
}

TEST(Eval, TableAndJson) {
  const auto r = run_eval(kRv, rv_fixture(), script("eval_rv_20_script.json"));
  const auto table = render_eval_table(r);
  EXPECT_NE(table.find("accuracy   0.7500"), std::string::npos);
  const auto j = eval_result_to_json(r);
  EXPECT_EQ(j["metrics"]["n"], 20);
  EXPECT_EQ(j["predictions"].size(), 20u);
}
