#include "http_server.hpp"

#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include <condition_variable>
#include <map>

namespace mindcheck {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

namespace {

std::string url_decode(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '%' && i + 2 < s.size()) {
      out += static_cast<char>(std::stoi(std::string(s.substr(i + 1, 2)), nullptr, 16));
      i += 2;
    } else {
      out += s[i] == '+' ? ' ' : s[i];
    }
  }
  return out;
}

ApiRequest to_api_request(const http::request<http::string_body>& req) {
  ApiRequest out;
  out.method = std::string(req.method_string());
  const std::string target(req.target());
  const auto q = target.find('?');
  out.path = target.substr(0, q);
  if (q != std::string::npos) {
    std::string_view query(target);
    query.remove_prefix(q + 1);
    while (!query.empty()) {
      const auto amp = query.find('&');
      const auto pair = query.substr(0, amp);
      const auto eq = pair.find('=');
      out.query[url_decode(pair.substr(0, eq))] = eq == std::string_view::npos ? "" : url_decode(pair.substr(eq + 1));
      if (amp == std::string_view::npos) break;
      query.remove_prefix(amp + 1);
    }
  }
  out.body = req.body();
  out.authorization = std::string(req[http::field::authorization]);
  return out;
}

/// Session id when the path is /sessions/{id}/ws.
std::optional<std::string> websocket_session(const std::string& path) {
  constexpr std::string_view prefix = "/sessions/";
  constexpr std::string_view suffix = "/ws";
  if (path.size() <= prefix.size() + suffix.size() || path.rfind(prefix, 0) != 0 ||
      path.compare(path.size() - suffix.size(), suffix.size(), suffix) != 0) {
    return std::nullopt;
  }
  auto id = path.substr(prefix.size(), path.size() - prefix.size() - suffix.size());
  if (id.empty() || id.find('/') != std::string::npos) return std::nullopt;
  return id;
}

}  // namespace

struct HttpServer::Impl {
  ApiService& service;
  asio::io_context io;
  tcp::acceptor acceptor{io};
  std::thread accept_thread;
  std::atomic<bool> stopping{false};
  std::mutex mu;
  std::condition_variable stopped_cv;
  bool stopped = false;
  std::map<std::uint64_t, std::shared_ptr<tcp::socket>> sockets;
  std::condition_variable idle_cv;
  std::set<std::string> live_sockets;
  std::uint64_t next_id = 0;

  explicit Impl(ApiService& s) : service(s) {}

  void accept_loop() {
    while (!stopping) {
      auto socket = std::make_shared<tcp::socket>(io);
      beast::error_code ec;
      acceptor.accept(*socket, ec);
      if (stopping) return;
      if (ec) continue;
      std::lock_guard lock(mu);
      const auto id = next_id++;
      sockets[id] = socket;
      std::thread([this, id, socket] {
        serve(*socket);
        std::lock_guard l(mu);
        sockets.erase(id);
        idle_cv.notify_all();
      }).detach();
    }
  }

  void serve(tcp::socket& socket) {
    beast::flat_buffer buffer;
    beast::error_code ec;
    for (;;) {
      http::request_parser<http::string_body> parser;
      parser.body_limit(16 * 1024 * 1024);
      http::read(socket, buffer, parser, ec);
      if (ec) return;
      auto req = parser.release();
      const auto api_req = to_api_request(req);
      if (websocket::is_upgrade(req)) {
        serve_websocket(socket, std::move(req), api_req);
        return;
      }
      const auto res = service.handle(api_req);
      http::response<http::string_body> out{static_cast<http::status>(res.status), req.version()};
      out.set(http::field::content_type, "application/json");
      out.set(http::field::access_control_allow_origin, "*");
      out.keep_alive(req.keep_alive());
      out.body() = res.body.dump();
      out.prepare_payload();
      http::write(socket, out, ec);
      if (ec || !out.keep_alive()) break;
    }
    socket.shutdown(tcp::socket::shutdown_send, ec);
  }

  void reject(tcp::socket& socket, const http::request<http::string_body>& req, int status, const std::string& msg) {
    http::response<http::string_body> out{static_cast<http::status>(status), req.version()};
    out.set(http::field::content_type, "application/json");
    out.body() = nlohmann::json{{"error", msg}}.dump();
    out.prepare_payload();
    beast::error_code ec;
    http::write(socket, out, ec);
  }

  void serve_websocket(tcp::socket& socket, http::request<http::string_body> req, ApiRequest api_req) {
    const auto id = websocket_session(api_req.path);
    if (!id) return reject(socket, req, 404, "no WebSocket route for " + api_req.path);
    std::string auth = api_req.authorization;
    if (auth.empty() && api_req.query.contains("token")) auth = "Bearer " + api_req.query["token"];
    std::size_t since = 0;
    if (api_req.query.contains("since")) {
      try {
        since = std::stoul(api_req.query["since"]);
      } catch (const std::exception&) {
        return reject(socket, req, 400, "since must be a non-negative integer");
      }
    }
    auto snapshot = service.session_frames(*id, since, auth);
    if (snapshot.status != 200) return reject(socket, req, snapshot.status, snapshot.body.value("error", ""));
    {
      std::lock_guard lock(mu);
      if (!live_sockets.insert(*id).second) return reject(socket, req, 409, "session already has a live WebSocket");
    }
    struct Release {
      Impl* self;
      std::string id;
      ~Release() {
        std::lock_guard lock(self->mu);
        self->live_sockets.erase(id);
      }
    } release{this, *id};

    websocket::stream<tcp::socket&> ws(socket);
    beast::error_code ec;
    ws.accept(req, ec);
    if (ec) return;
    ws.text(true);
    auto send = [&](const nlohmann::json& j) {
      ws.write(asio::buffer(j.dump()), ec);
      return !ec;
    };
    for (const auto& f : snapshot.body["frames"]) {
      auto msg = f;
      msg["type"] = "frame";
      if (!send(msg)) return;
    }
    if (!send({{"type", "status"}, {"phase", snapshot.body["phase"]}, {"frame_count", snapshot.body["frame_count"]}})) {
      return;
    }
    for (;;) {
      beast::flat_buffer in;
      ws.read(in, ec);
      if (ec) return;
      const auto text = beast::buffers_to_string(in.data());
      ApiResponse res;
      nlohmann::json msg;
      try {
        msg = nlohmann::json::parse(text);
      } catch (const nlohmann::json::exception&) {
        msg = nullptr;
      }
      if (msg.is_object() && msg.contains("text") && msg["text"].is_string()) {
        res = service.post_message(*id, msg["text"].get<std::string>(), auth);
      } else if (msg.is_object() && msg.contains("dimension")) {
        ApiRequest choice{"POST", "/sessions/" + *id + "/choice", {}, nlohmann::json{{"dimension", msg["dimension"]}}.dump(), auth};
        res = service.handle(choice);
      } else {
        res = {400, {{"error", "send {\"text\": string} or {\"dimension\": slug or null}"}}};
      }
      if (res.status != 200) {
        if (!send({{"type", "error"}, {"status", res.status}, {"error", res.body.value("error", "")}})) return;
        continue;
      }
      for (const auto& f : res.body["replies"]) {
        auto frame = f;
        frame["type"] = "frame";
        if (!send(frame)) return;
      }
      if (!send({{"type", "status"}, {"phase", res.body["phase"]}, {"report_ready", res.body["report_ready"]}})) return;
    }
  }
};

HttpServer::HttpServer(ApiService& service, std::string address, std::uint16_t port)
    : impl_(std::make_unique<Impl>(service)) {
  tcp::endpoint ep(asio::ip::make_address(address), port);
  impl_->acceptor.open(ep.protocol());
  impl_->acceptor.set_option(asio::socket_base::reuse_address(true));
  impl_->acceptor.bind(ep);
  port_ = impl_->acceptor.local_endpoint().port();
}

HttpServer::~HttpServer() { stop(); }

void HttpServer::start() {
  impl_->acceptor.listen();
  impl_->accept_thread = std::thread([this] { impl_->accept_loop(); });
}

void HttpServer::stop() {
  if (impl_->stopping.exchange(true)) return;
  beast::error_code ec;
  if (impl_->accept_thread.joinable()) {
    // Wake the blocking accept() by connecting to ourselves.
    asio::io_context io;
    tcp::socket poke(io);
    const auto local = impl_->acceptor.local_endpoint(ec);
    const auto host = local.address().is_unspecified() ? asio::ip::make_address("127.0.0.1") : local.address();
    poke.connect({host, port_}, ec);
    impl_->accept_thread.join();
  }
  impl_->acceptor.close(ec);
  std::unique_lock lock(impl_->mu);
  for (auto& [id, s] : impl_->sockets) s->shutdown(tcp::socket::shutdown_both, ec);
  impl_->idle_cv.wait(lock, [this] { return impl_->sockets.empty(); });
  impl_->stopped = true;
  impl_->stopped_cv.notify_all();
}

void HttpServer::wait() {
  std::unique_lock lock(impl_->mu);
  impl_->stopped_cv.wait(lock, [this] { return impl_->stopped; });
}

}  // namespace mindcheck
