#pragma once

// HTTP and WebSocket front end for ApiService. HTTP requests map one to one
// onto ApiService::handle; GET /sessions/{id}/ws upgrades to a WebSocket that
// carries the same frames as the message endpoint.

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "mindcheck/api.hpp"

namespace mindcheck {

class HttpServer {
 public:
  /// Port 0 picks a free port; see port().
  HttpServer(ApiService& service, std::string address, std::uint16_t port);
  ~HttpServer();

  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds and starts accepting on a background thread.
  void start();
  /// Closes the listener and every open connection, then joins.
  void stop();
  /// Blocks until stop() is called from another thread.
  void wait();

  std::uint16_t port() const noexcept { return port_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::uint16_t port_ = 0;
};

}  // namespace mindcheck
