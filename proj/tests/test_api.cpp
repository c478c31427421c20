#include <gtest/gtest.h>

#include <future>
#include <thread>

#include "mindcheck/api.hpp"
#include "mindcheck/errors.hpp"
#include "script_builder.hpp"
#include "test_support.hpp"

using namespace mindcheck;
using testsupport::ScriptBuilder;

namespace {

const DimensionCatalog& cat() { return default_catalog(); }

ScriptBuilder sleep_script(int score) {
  ScriptBuilder b;
  b.generative_defaults();
  b.scored("I sleep fine.", "sleep-schedule", score);
  b.general("Stop", GeneralResponseClass::Stop);
  b.decide("rv_reasoner", Decision::Valid);
  return b;
}

struct Api {
  explicit Api(ScriptBuilder b, ApiConfig config = {}) {
    auto backend = b.backend();
    store = std::make_shared<MemoryTextStore>();
    service = std::make_unique<ApiService>(config, [backend] { return backend; }, store);
  }
  ApiResponse call(std::string method, std::string path, nlohmann::json body = nullptr, std::string auth = {}) {
    ApiRequest r;
    r.method = std::move(method);
    const auto q = path.find('?');
    if (q != std::string::npos) {
      const auto kv = path.substr(q + 1);
      r.query[kv.substr(0, kv.find('='))] = kv.substr(kv.find('=') + 1);
      path = path.substr(0, q);
    }
    r.path = std::move(path);
    r.body = body.is_null() ? "" : body.dump();
    r.authorization = std::move(auth);
    return service->handle(r);
  }
  std::string create(const std::vector<std::string>& dims = {"sleep-schedule"}, std::string auth = {}) {
    auto r = call("POST", "/sessions", {{"user_id", "u1"}, {"selected_dimensions", dims}, {"seed", 1}}, auth);
    EXPECT_EQ(r.status, 201) << r.body.dump();
    return r.body.value("session_id", "");
  }

  std::shared_ptr<MemoryTextStore> store;
  std::unique_ptr<ApiService> service;
};

}  // namespace

TEST(Api, CreateSession) {
  Api api(sleep_script(0));
  auto r = api.call("POST", "/sessions", {{"user_id", "u1"}, {"selected_dimensions", {"sleep-schedule"}}});
  ASSERT_EQ(r.status, 201);
  EXPECT_EQ(r.body["first_message"]["kind"], "question");
  EXPECT_EQ(r.body["first_message"]["dimension"], "sleep-schedule");
  EXPECT_EQ(r.body["phase"], "screening");
  EXPECT_EQ(api.service->session_count(), 1u);
}

TEST(Api, CreateSessionErrors) {
  Api api(sleep_script(0));
  auto r = api.call("POST", "/sessions", {{"user_id", "u1"}, {"selected_dimensions", nlohmann::json::array()}});
  EXPECT_EQ(r.status, 400);
  r = api.call("POST", "/sessions", {{"user_id", "u1"}, {"selected_dimensions", {"sleep-schedule", "flying"}}});
  EXPECT_EQ(r.status, 400);
  EXPECT_NE(r.body["error"].get<std::string>().find("flying"), std::string::npos);
  r = api.call("POST", "/sessions", {{"selected_dimensions", {"sleep-schedule"}}});
  EXPECT_EQ(r.status, 400);
  ApiRequest raw{"POST", "/sessions", {}, "{broken", ""};
  EXPECT_EQ(api.service->handle(raw).status, 400);
}

TEST(Api, MessageFlowReportAndErrors) {
  Api api(sleep_script(0));
  const auto id = api.create();
  EXPECT_EQ(api.call("GET", "/sessions/" + id + "/report").status, 409);
  auto r = api.call("POST", "/sessions/" + id + "/messages", {{"text", "I sleep fine."}});
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(r.body["phase"], "done");
  ASSERT_EQ(r.body["replies"].size(), 2u);
  EXPECT_EQ(r.body["replies"][0]["kind"], "summary");
  EXPECT_EQ(r.body["replies"][1]["kind"], "closing");
  EXPECT_EQ(api.call("POST", "/sessions/" + id + "/messages", {{"text", "hi"}}).status, 409);
  r = api.call("GET", "/sessions/" + id + "/report");
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(r.body["data"]["scores"][0]["dimension"], "sleep-schedule");
  EXPECT_TRUE(r.body["persistence_error"].is_null());
  EXPECT_TRUE(api.store->get(session_record_key(id)));
  EXPECT_TRUE(api.store->get(qtable_key("u1")));
  EXPECT_EQ(api.call("GET", "/sessions/nope/report").status, 404);
  EXPECT_EQ(api.call("POST", "/sessions/nope/messages", {{"text", "x"}}).status, 404);
  EXPECT_EQ(api.call("POST", "/sessions/" + id + "/messages", {{"txt", "x"}}).status, 400);
  EXPECT_EQ(api.call("GET", "/users/u1/qtable").status, 200);
  EXPECT_EQ(api.call("GET", "/sessions/" + id + "/record").body["session_id"], id);
}

TEST(Api, StopGivesSummaryAndChoicePrompt) {
  Api api(sleep_script(2));
  const auto id = api.create({"sleep-schedule", "managing-mood"});
  // The first question is sleep-schedule or managing-mood depending on the
  // seed; answer whichever it is with a score-2 sleep answer.
  auto r = api.call("POST", "/sessions/" + id + "/messages", {{"text", "I sleep fine."}});
  ASSERT_EQ(r.status, 200);
  r = api.call("POST", "/sessions/" + id + "/messages", {{"text", "It is the noise."}});
  ASSERT_EQ(r.status, 200);
  if (r.body["phase"] == "screening" && r.body["replies"].back()["kind"] == "question") {
    r = api.call("POST", "/sessions/" + id + "/messages", {{"text", "Stop"}});
  }
  ASSERT_EQ(r.body["phase"], "summary") << r.body.dump();
  const auto text = r.body["replies"].back()["text"].get<std::string>();
  EXPECT_EQ(r.body["replies"].back()["kind"], "summary");
  EXPECT_NE(text.find("Which area would you like to work on"), std::string::npos);
  EXPECT_EQ(api.call("POST", "/sessions/" + id + "/choice", {{"dimension", "flying"}}).status, 400);
  r = api.call("POST", "/sessions/" + id + "/choice", {{"dimension", nullptr}});
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(r.body["phase"], "done");
  EXPECT_EQ(api.call("POST", "/sessions/" + id + "/choice", {{"dimension", nullptr}}).status, 409);
}

TEST(Api, ReconnectReplaysFromIndexWithoutDuplicates) {
  Api api(sleep_script(0));
  const auto id = api.create();
  api.call("POST", "/sessions/" + id + "/messages", {{"text", "I sleep fine."}});
  auto all = api.call("GET", "/sessions/" + id);
  ASSERT_EQ(all.status, 200);
  const auto n = all.body["frame_count"].get<std::size_t>();
  EXPECT_EQ(all.body["frames"].size(), n);
  auto tail = api.call("GET", "/sessions/" + id + "?since=1");
  ASSERT_EQ(tail.body["frames"].size(), n - 1);
  EXPECT_EQ(tail.body["frames"][0]["index"], 1);
  EXPECT_EQ(api.call("GET", "/sessions/" + id + "?since=99").body["frames"].size(), 0u);
  EXPECT_EQ(api.call("GET", "/sessions/" + id + "?since=x").status, 400);
}

TEST(Api, TurnKindsAndCatalog) {
  Api api(sleep_script(0));
  auto r = api.call("GET", "/turn-kinds");
  EXPECT_EQ(r.body["kinds"], (nlohmann::json{"question", "rephrase_request", "reflection", "followup_question", "guide",
                                             "validation", "summary", "cbt_question", "cbt_guide", "closing"}));
  r = api.call("GET", "/catalog");
  EXPECT_EQ(r.body["dimensions"].size(), 37u);
  EXPECT_EQ(api.call("GET", "/nowhere").status, 404);
}

TEST(Api, Auth) {
  ApiConfig cfg;
  cfg.auth_secret = "s3cret";
  Api api(sleep_script(0), cfg);
  const auto token = "Bearer " + user_token("s3cret", "u1");
  EXPECT_EQ(api.call("POST", "/sessions", {{"user_id", "u1"}, {"selected_dimensions", {"sleep-schedule"}}}).status,
            401);
  EXPECT_EQ(api.call("POST", "/sessions", {{"user_id", "u1"}, {"selected_dimensions", {"sleep-schedule"}}},
                     "Bearer u1.deadbeef")
                .status,
            401);
  EXPECT_EQ(api.call("POST", "/sessions", {{"user_id", "u2"}, {"selected_dimensions", {"sleep-schedule"}}}, token)
                .status,
            403);
  const auto id = api.create({"sleep-schedule"}, token);
  EXPECT_EQ(api.call("GET", "/sessions/" + id, nullptr, "Bearer " + user_token("s3cret", "u2")).status, 403);
  EXPECT_EQ(api.call("GET", "/sessions/" + id, nullptr, token).status, 200);
  EXPECT_EQ(verify_token("s3cret", user_token("s3cret", "a.b")), "a.b");
  EXPECT_FALSE(verify_token("other", user_token("s3cret", "u1")));
  EXPECT_EQ(api.call("GET", "/health").status, 200);
}

TEST(Api, ClientHeldStorage) {
  ApiConfig cfg;
  cfg.storage = StorageMode::Client;
  Api api(sleep_script(1), cfg);
  auto q = init_qtable(default_priorities(), cfg.session.scheduler, "u1");
  auto r = api.call("POST", "/sessions",
                    {{"user_id", "u1"}, {"selected_dimensions", {"sleep-schedule"}}, {"qtable", qtable_to_json(q, cat())}});
  ASSERT_EQ(r.status, 201);
  const auto id = r.body["session_id"].get<std::string>();
  api.call("POST", "/sessions/" + id + "/messages", {{"text", "I sleep fine."}});
  api.call("POST", "/sessions/" + id + "/choice", {{"dimension", nullptr}});
  r = api.call("GET", "/sessions/" + id + "/report");
  ASSERT_EQ(r.status, 200);
  EXPECT_NE(qtable_from_json(r.body["qtable"], cat()), q);
  EXPECT_FALSE(api.store->get(session_record_key(id)));
  EXPECT_EQ(api.call("GET", "/users/u1/qtable").status, 404);
  auto other = init_qtable(default_priorities(), cfg.session.scheduler, "u2");
  EXPECT_EQ(api.call("POST", "/sessions",
                     {{"user_id", "u1"}, {"selected_dimensions", {"sleep-schedule"}}, {"qtable", qtable_to_json(other, cat())}})
                .status,
            400);
}

namespace {

/// Blocks every completion until released, to hold a session mid-message.
class GateBackend : public Backend {
 public:
  explicit GateBackend(std::shared_ptr<Backend> inner) : inner_(std::move(inner)) {}
  CompletionText complete(const PromptRequest& req) override {
    if (req.template_name == "response_analyzer") {
      entered_.set_value();
      release_.wait();
    }
    return inner_->complete(req);
  }
  std::string id() const override { return "gate"; }
  std::promise<void> entered_;
  std::shared_future<void> release_;

 private:
  std::shared_ptr<Backend> inner_;
};

}  // namespace

TEST(Api, ConcurrentMessageIsRejectedWhenConfigured) {
  ApiConfig cfg;
  cfg.reject_concurrent = true;
  auto gate = std::make_shared<GateBackend>(sleep_script(0).backend());
  std::promise<void> release;
  gate->release_ = release.get_future().share();
  auto entered = gate->entered_.get_future();
  ApiService service(cfg, [gate] { return gate; }, std::make_shared<MemoryTextStore>());
  auto created = service.handle({"POST", "/sessions", {}, R"({"user_id":"u1","selected_dimensions":["sleep-schedule"]})", ""});
  ASSERT_EQ(created.status, 201);
  const auto id = created.body["session_id"].get<std::string>();
  auto first = std::async(std::launch::async, [&] { return service.post_message(id, "I sleep fine.", ""); });
  entered.wait();
  EXPECT_EQ(service.post_message(id, "again", "").status, 429);
  release.set_value();
  EXPECT_EQ(first.get().status, 200);
}

TEST(Api, EvalEndpoint) {
  Api api(sleep_script(0));
  const auto dataset = testsupport::read_text(testsupport::fixture("eval_rv_20.jsonl"));
  auto r = api.call("POST", "/eval", {{"task", "rv_reasoner"}, {"dataset", dataset}, {"backend", "echo"}});
  ASSERT_EQ(r.status, 200) << r.body.dump();
  EXPECT_EQ(r.body["metrics"]["accuracy"], 1.0);
  r = api.call("POST", "/eval", {{"task", "rv_reasoner"}, {"dataset", "{\"task\":1}\n"}, {"backend", "echo"}});
  EXPECT_EQ(r.status, 400);
  EXPECT_EQ(r.body["line"], 1);
  EXPECT_EQ(api.call("POST", "/eval", {{"task", "nope"}, {"dataset", dataset}}).status, 400);
}
