#include <CLI11.hpp>

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "mindcheck/api.hpp"
#include "mindcheck/errors.hpp"
#include "mindcheck/eval.hpp"
#include "mindcheck/session.hpp"

#ifdef MINDCHECK_HAVE_SERVER
#include "http_server.hpp"
#endif

using namespace mindcheck;

namespace {

struct BackendOptions {
  std::string kind = "remote";
  std::string script;
  std::string url;
  std::string model;
};

void add_backend_options(CLI::App* cmd, BackendOptions& o, bool allow_echo = false) {
  std::vector<std::string> kinds{"scripted", "remote"};
  if (allow_echo) kinds.push_back("echo");
  cmd->add_option("--backend", o.kind, "Completion backend")->check(CLI::IsMember(kinds))->capture_default_str();
  cmd->add_option("--script", o.script, "Script file for the scripted backend")->check(CLI::ExistingFile);
  cmd->add_option("--backend-url", o.url, "Chat-completion base URL (overrides MINDCHECK_BACKEND_URL)");
  cmd->add_option("--model", o.model, "Model name (overrides MINDCHECK_MODEL)");
}

std::shared_ptr<Backend> make_backend(const BackendOptions& o) {
  if (o.kind == "scripted") {
    if (o.script.empty()) throw PreconditionError("--backend scripted needs --script");
    return ScriptedBackend::load_file(o.script);
  }
  auto cfg = RemoteConfig::from_env();
  if (!o.url.empty()) cfg.base_url = o.url;
  if (!o.model.empty()) cfg.model = o.model;
  return std::make_shared<RemoteBackend>(cfg);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PreconditionError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void print_frames(const std::vector<Frame>& frames, const DimensionCatalog& catalog) {
  for (const auto& f : frames) {
    std::cout << "[" << to_string(f.kind);
    if (f.dimension) std::cout << " " << catalog.slug(*f.dimension);
    if (f.stage) std::cout << " stage " << *f.stage;
    std::cout << "] " << f.text << "\n";
  }
  std::cout.flush();
}

std::string env_or(const char* name, std::string fallback) {
  const char* v = std::getenv(name);
  return v && *v ? std::string(v) : std::move(fallback);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Daily functioning check-in engine"};
  app.require_subcommand(1);

  // catalog
  auto* catalog_cmd = app.add_subcommand("catalog", "List the screening dimensions");
  bool catalog_json = false;
  catalog_cmd->add_flag("--json", catalog_json, "Print the full catalog document");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a prompt against a labeled dataset");
  std::string eval_task, eval_dataset, eval_out;
  int eval_parallelism = 1;
  BackendOptions eval_backend;
  eval_cmd->add_option("--task", eval_task, "response_analyzer, rv_reasoner or cbt_stage{1,2,3}_reasoner")->required();
  eval_cmd->add_option("--dataset", eval_dataset, "JSONL dataset")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--out", eval_out, "Write metrics JSON here");
  eval_cmd->add_option("--parallelism", eval_parallelism, "Concurrent examples")->check(CLI::Range(1, 64));
  add_backend_options(eval_cmd, eval_backend, true);

  // chat
  auto* chat_cmd = app.add_subcommand("chat", "Run a check-in session on the terminal");
  std::string chat_user = "local", chat_store;
  std::vector<std::string> chat_dims;
  std::uint64_t chat_seed = 0;
  bool chat_seed_set = false;
  BackendOptions chat_backend;
  chat_cmd->add_option("--user", chat_user, "User id")->capture_default_str();
  chat_cmd->add_option("--dimensions", chat_dims, "Dimension slugs to cover (default: all)")->delimiter(',');
  chat_cmd->add_option("--store-dir", chat_store, "Directory for Q-tables and session records");
  chat_cmd->add_option("--seed", chat_seed, "Seed for question order and wording")->each([&](const std::string&) {
    chat_seed_set = true;
  });
  add_backend_options(chat_cmd, chat_backend);

  // replay
  auto* replay_cmd = app.add_subcommand("replay", "Regenerate a stored session's report from its script");
  std::string replay_record, replay_script, replay_expect;
  replay_cmd->add_option("--record", replay_record, "Session record JSON")->required()->check(CLI::ExistingFile);
  replay_cmd->add_option("--script", replay_script, "Script the session ran against")->required()->check(CLI::ExistingFile);
  replay_cmd->add_option("--expect", replay_expect, "Report text to compare against")->check(CLI::ExistingFile);

#ifdef MINDCHECK_HAVE_SERVER
  // serve
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP and WebSocket API");
  std::string serve_config, serve_address, serve_secret, serve_storage, serve_store;
  int serve_port = -1;
  bool serve_reject = false;
  BackendOptions serve_backend;
  serve_cmd->add_option("--config", serve_config, "JSON config file")->check(CLI::ExistingFile);
  serve_cmd->add_option("--address", serve_address, "Listen address (MINDCHECK_ADDRESS, default 127.0.0.1)");
  serve_cmd->add_option("--port", serve_port, "Listen port (MINDCHECK_PORT, default 8080)")->check(CLI::Range(0, 65535));
  serve_cmd->add_option("--auth-secret", serve_secret, "Token secret (MINDCHECK_AUTH_SECRET); empty disables auth");
  serve_cmd->add_option("--storage", serve_storage, "server or client (MINDCHECK_STORAGE)")
      ->check(CLI::IsMember({"server", "client"}));
  serve_cmd->add_option("--store-dir", serve_store, "Store directory (MINDCHECK_STORE_DIR, default ./mindcheck-data)");
  serve_cmd->add_flag("--reject-concurrent", serve_reject, "Answer 429 to a message for a busy session");
  add_backend_options(serve_cmd, serve_backend);
#endif

  CLI11_PARSE(app, argc, argv);
  const auto& catalog = default_catalog();

  try {
    if (*catalog_cmd) {
      if (catalog_json) {
        std::cout << catalog.to_json().dump(2) << "\n";
      } else {
        for (const auto& d : catalog.dimensions())
          std::cout << d.id.index() << "\t" << d.slug << "\t" << d.display_name << "\n";
      }
      return 0;
    }

    if (*eval_cmd) {
      const auto task = EvalTask::parse(eval_task);
      const auto dataset = load_dataset(eval_dataset, catalog);
      auto backend = eval_backend.kind == "echo" ? std::make_shared<EchoBackend>(dataset, catalog)
                                                 : make_backend(eval_backend);
      EvalOptions opts;
      opts.parallelism = eval_parallelism;
      const auto result = run_eval(task, dataset, backend, opts);
      std::cout << render_eval_table(result);
      for (const auto& f : result.failures) std::cerr << "line " << f.line << ": " << f.message << "\n";
      if (!eval_out.empty()) std::ofstream(eval_out) << eval_result_to_json(result).dump(2) << "\n";
      return 0;
    }

    if (*chat_cmd) {
      DimensionSet selected;
      for (const auto& s : chat_dims) selected.insert(catalog.require(s));
      if (chat_dims.empty()) selected = DimensionSet::all();
      SessionConfig cfg;
      if (!chat_seed_set) chat_seed = std::random_device{}();
      cfg.scheduler.rng_seed = chat_seed;
      cfg.question_seed = chat_seed;
      std::unique_ptr<TextStore> store;
      if (!chat_store.empty()) store = std::make_unique<FileTextStore>(chat_store);
      auto qtable = store ? load_qtable(*store, chat_user, catalog, default_priorities(), cfg.scheduler)
                          : init_qtable(default_priorities(), cfg.scheduler, chat_user);
      std::ostringstream id;
      id << chat_user << "-" << std::hex << chat_seed;
      Session session(id.str(), chat_user, selected, std::move(qtable), cfg,
                      {catalog, make_backend(chat_backend)});
      print_frames(session.frames(), catalog);
      std::string line;
      while (session.phase() != Phase::Done && std::cout << "> " << std::flush && std::getline(std::cin, line)) {
        print_frames(session.handle_user_message(line), catalog);
      }
      if (session.phase() != Phase::Done) {
        std::cerr << "session ended before completion; nothing saved\n";
        return 1;
      }
      const auto report = session.finalize(store.get());
      std::cout << "\n" << report.text;
      if (report.persistence_error) {
        std::cerr << "could not save: " << *report.persistence_error << "\n";
        return 1;
      }
      return 0;
    }

    if (*replay_cmd) {
      const auto record = nlohmann::json::parse(read_file(replay_record));
      const auto report = replay(record, ScriptedBackend::load_file(replay_script), catalog);
      std::cout << report.text;
      if (!replay_expect.empty() && read_file(replay_expect) != report.text) {
        std::cerr << "replayed report differs from " << replay_expect << "\n";
        return 1;
      }
      return 0;
    }

#ifdef MINDCHECK_HAVE_SERVER
    if (*serve_cmd) {
      nlohmann::json file_cfg = nlohmann::json::object();
      if (!serve_config.empty()) file_cfg = nlohmann::json::parse(read_file(serve_config));
      auto pick = [&](const std::string& flag, const char* key, const char* env, std::string fallback) {
        if (!flag.empty()) return flag;
        if (file_cfg.contains(key)) return file_cfg[key].get<std::string>();
        return env_or(env, std::move(fallback));
      };
      const auto address = pick(serve_address, "address", "MINDCHECK_ADDRESS", "127.0.0.1");
      const auto port = serve_port >= 0 ? serve_port
                        : file_cfg.contains("port") ? file_cfg["port"].get<int>()
                                                    : std::stoi(env_or("MINDCHECK_PORT", "8080"));
      ApiConfig cfg;
      cfg.auth_secret = pick(serve_secret, "auth_secret", "MINDCHECK_AUTH_SECRET", "");
      cfg.storage = pick(serve_storage, "storage", "MINDCHECK_STORAGE", "server") == "client" ? StorageMode::Client
                                                                                             : StorageMode::Server;
      cfg.reject_concurrent = serve_reject || file_cfg.value("reject_concurrent", false);
      if (serve_backend.url.empty()) serve_backend.url = file_cfg.value("backend_url", "");
      if (serve_backend.model.empty()) serve_backend.model = file_cfg.value("model", "");
      cfg.model_tag = serve_backend.model;
      const auto store_dir = pick(serve_store, "store_dir", "MINDCHECK_STORE_DIR", "mindcheck-data");
      std::shared_ptr<TextStore> store;
      if (cfg.storage == StorageMode::Server) store = std::make_shared<FileTextStore>(store_dir);
      auto backend = make_backend(serve_backend);

      sigset_t signals;
      sigemptyset(&signals);
      sigaddset(&signals, SIGINT);
      sigaddset(&signals, SIGTERM);
      pthread_sigmask(SIG_BLOCK, &signals, nullptr);

      ApiService service(cfg, [backend] { return backend; }, store, catalog);
      HttpServer server(service, address, static_cast<std::uint16_t>(port));
      server.start();
      std::cout << "listening on " << address << ":" << server.port() << std::endl;
      int sig = 0;
      sigwait(&signals, &sig);
      server.stop();
      return 0;
    }
#endif
  } catch (const DatasetError& e) {
    std::cerr << "dataset error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
