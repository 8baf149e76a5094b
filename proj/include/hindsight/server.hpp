#pragma once

#include <atomic>
#include <cstdint>
#include <list>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "hindsight/env.hpp"
#include "json.hpp"

namespace hindsight {

inline constexpr int kProtocolVersion = 1;

// Request handling for one connection, independent of the transport.
// See docs/protocol.md for the message schema.
class Session {
 public:
  Session(TaskMode default_mode, EpisodeConfig episode);

  // One request line in, one response object out.
  nlohmann::json handle(const std::string& line);
  bool closed() const noexcept { return closed_; }

 private:
  nlohmann::json dispatch(const nlohmann::json& request);

  TaskMode default_mode_;
  EpisodeConfig episode_;
  std::optional<Environment> env_;
  bool closed_ = false;
};

struct ServerConfig {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;  // 0 picks a free port
  TaskMode mode = TaskMode::Default;
  std::size_t max_sessions = 16;
  EpisodeConfig episode{};
};

class ServerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Newline-delimited JSON over TCP, one thread and one environment per
// connection.
class EnvServer {
 public:
  explicit EnvServer(ServerConfig cfg);
  ~EnvServer();
  EnvServer(const EnvServer&) = delete;
  EnvServer& operator=(const EnvServer&) = delete;

  // Binds and starts accepting; throws ServerError when the port is taken.
  void start();
  std::uint16_t port() const noexcept { return port_; }
  // Stops accepting, lets sessions finish their current request and joins.
  void stop();

 private:
  struct Connection {
    int fd = -1;
    std::thread thread;
    std::atomic<bool> finished{false};
  };

  void accept_loop();
  void serve_connection(Connection& conn);
  void reap_finished();

  ServerConfig cfg_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};
  std::thread acceptor_;
  std::mutex mu_;
  std::list<Connection> connections_;
};

}  // namespace hindsight
