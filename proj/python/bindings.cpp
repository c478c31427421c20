#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mindcheck/analyzer.hpp"
#include "mindcheck/api.hpp"
#include "mindcheck/errors.hpp"
#include "mindcheck/eval.hpp"
#include "mindcheck/session.hpp"

namespace py = pybind11;
using namespace mindcheck;

// Structured values cross the boundary as JSON text; the Python package
// decodes them.

namespace {

std::shared_ptr<Backend> scripted(const std::string& script_json) {
  return ScriptedBackend::from_json(nlohmann::json::parse(script_json));
}

std::string frames_json(const std::vector<Frame>& frames) {
  auto arr = nlohmann::json::array();
  for (const auto& f : frames) arr.push_back(frame_to_json(f, default_catalog()));
  return arr.dump();
}

class PySession {
 public:
  PySession(const std::string& user_id, const std::vector<std::string>& dimensions, const std::string& script_json,
            std::uint64_t seed, bool rephrase, const std::string& qtable_json) {
    const auto& catalog = default_catalog();
    DimensionSet selected;
    for (const auto& s : dimensions) selected.insert(catalog.require(s));
    if (dimensions.empty()) selected = DimensionSet::all();
    SessionConfig cfg;
    cfg.scheduler.rng_seed = seed;
    cfg.question_seed = seed;
    cfg.rephrase_questions = rephrase;
    auto q = qtable_json.empty() ? init_qtable(default_priorities(), cfg.scheduler, user_id)
                                 : qtable_from_json(nlohmann::json::parse(qtable_json), catalog);
    auto n = std::make_shared<int>(0);
    Clock clock = [n] { return "t" + std::to_string((*n)++); };
    session_ = std::make_unique<Session>(user_id + "-" + std::to_string(seed), user_id, selected, std::move(q), cfg,
                                         Session::Deps{catalog, scripted(script_json), TemplateSet::defaults(), clock});
  }

  std::string send(const std::string& text) { return frames_json(session_->handle_user_message(text)); }
  std::string choose(const std::optional<std::string>& slug) {
    std::optional<DimensionId> d;
    if (slug) d = default_catalog().require(*slug);
    return frames_json(session_->advance_to_cbt(d));
  }
  std::string phase() const { return std::string(to_string(session_->phase())); }
  std::string frames() const { return frames_json(session_->frames()); }
  std::string report() const {
    const auto r = session_->report();
    return nlohmann::json{{"session_id", r.session_id}, {"text", r.text}, {"data", r.data}}.dump();
  }
  std::string record() const { return record_to_json(session_->to_record(), default_catalog()).dump(); }
  std::string qtable() const { return qtable_to_json(session_->qtable(), default_catalog()).dump(); }

 private:
  std::unique_ptr<Session> session_;
};

class PyApi {
 public:
  PyApi(const std::string& script_json, const std::string& auth_secret, bool client_storage) {
    ApiConfig cfg;
    cfg.auth_secret = auth_secret;
    cfg.storage = client_storage ? StorageMode::Client : StorageMode::Server;
    auto backend = scripted(script_json);
    service_ = std::make_unique<ApiService>(cfg, [backend] { return backend; }, std::make_shared<MemoryTextStore>());
  }
  std::pair<int, std::string> handle(const std::string& method, const std::string& target, const std::string& body,
                                     const std::string& authorization) {
    ApiRequest req;
    req.method = method;
    const auto q = target.find('?');
    req.path = target.substr(0, q);
    if (q != std::string::npos) {
      std::string_view query(target);
      query.remove_prefix(q + 1);
      while (!query.empty()) {
        const auto amp = query.find('&');
        const auto pair = query.substr(0, amp);
        const auto eq = pair.find('=');
        req.query[std::string(pair.substr(0, eq))] = eq == std::string_view::npos ? "" : std::string(pair.substr(eq + 1));
        if (amp == std::string_view::npos) break;
        query.remove_prefix(amp + 1);
      }
    }
    req.body = body;
    req.authorization = authorization;
    py::gil_scoped_release release;
    const auto res = service_->handle(req);
    return {res.status, res.body.dump()};
  }

 private:
  std::unique_ptr<ApiService> service_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Daily functioning check-in engine";

  py::register_exception<Error>(m, "Error");
  py::register_exception<ParseError>(m, "ParseError", m.attr("Error"));
  py::register_exception<PreconditionError>(m, "PreconditionError", m.attr("Error"));
  py::register_exception<DatasetError>(m, "DatasetError", m.attr("Error"));
  py::register_exception<PersistenceError>(m, "PersistenceError", m.attr("Error"));
  py::register_exception<BackendError>(m, "BackendError", m.attr("Error"));
  py::register_exception<CatalogError>(m, "CatalogError", m.attr("Error"));

  m.def("catalog_json", [] { return default_catalog().to_json().dump(); });
  m.def("turn_kinds", [] {
    std::vector<std::string> out;
    for (auto k : kAllTurnKinds) out.emplace_back(to_string(k));
    return out;
  });
  m.def("parse_decision", [](const std::string& text) { return to_int(parse_decision(text)); });
  m.def("parse_analysis", &parse_analysis);
  m.def("segment", [](const std::string& text) {
    std::vector<std::string> out;
    for (auto& s : segment(text)) out.push_back(std::move(s.text));
    return out;
  });
  m.def("user_token", &user_token);
  m.def("evaluate",
        [](const std::string& task, const std::string& dataset_path, const std::string& script_json, int parallelism) {
          const auto dataset = load_dataset(dataset_path);
          std::shared_ptr<Backend> backend;
          if (script_json.empty()) {
            backend = std::make_shared<EchoBackend>(dataset);
          } else {
            backend = scripted(script_json);
          }
          EvalOptions opts;
          opts.parallelism = parallelism;
          py::gil_scoped_release release;
          return eval_result_to_json(run_eval(EvalTask::parse(task), dataset, backend, opts)).dump();
        },
        py::arg("task"), py::arg("dataset_path"), py::arg("script_json") = "", py::arg("parallelism") = 1);
  m.def("replay", [](const std::string& record_json, const std::string& script_json) {
    const auto r = replay(nlohmann::json::parse(record_json), scripted(script_json), default_catalog());
    return nlohmann::json{{"session_id", r.session_id}, {"text", r.text}, {"data", r.data}}.dump();
  });

  py::class_<PySession>(m, "Session")
      .def(py::init<const std::string&, const std::vector<std::string>&, const std::string&, std::uint64_t, bool,
                    const std::string&>(),
           py::arg("user_id"), py::arg("dimensions"), py::arg("script_json"), py::arg("seed") = 0,
           py::arg("rephrase") = true, py::arg("qtable_json") = "")
      .def("send", &PySession::send)
      .def("choose", &PySession::choose)
      .def_property_readonly("phase", &PySession::phase)
      .def("frames", &PySession::frames)
      .def("report", &PySession::report)
      .def("record", &PySession::record)
      .def("qtable", &PySession::qtable);

  py::class_<PyApi>(m, "Api")
      .def(py::init<const std::string&, const std::string&, bool>(), py::arg("script_json"),
           py::arg("auth_secret") = "", py::arg("client_storage") = false)
      .def("handle", &PyApi::handle, py::arg("method"), py::arg("target"), py::arg("body") = "",
           py::arg("authorization") = "");
}
