#include "hindsight/server.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstring>

namespace hindsight {
namespace {

constexpr std::size_t kMaxLine = 1 << 20;

nlohmann::json error_response(std::string_view code, std::string_view message) {
  return {{"ok", false}, {"error", code}, {"message", message}};
}

nlohmann::json observation_fields(const Environment& env) {
  const auto obs = env.observation();
  return {{"observation", obs.features},
          {"instruction_tokens", env.instruction().tokens},
          {"instruction", env.instruction().text()},
          {"t", env.state().t}};
}

bool send_all(int fd, const std::string& data) {
  std::size_t sent = 0;
  while (sent < data.size()) {
    const auto n = ::send(fd, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return false;
    sent += static_cast<std::size_t>(n);
  }
  return true;
}

}  // namespace

Session::Session(TaskMode default_mode, EpisodeConfig episode) : default_mode_(default_mode), episode_(episode) {}

nlohmann::json Session::handle(const std::string& line) {
  nlohmann::json request;
  try {
    request = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    auto r = error_response("parse", e.what());
    r["version"] = kProtocolVersion;
    return r;
  }
  nlohmann::json response;
  try {
    response = dispatch(request);
  } catch (const nlohmann::json::exception& e) {
    response = error_response("bad_request", e.what());
  } catch (const std::invalid_argument& e) {
    response = error_response("bad_request", e.what());
  }
  response["version"] = kProtocolVersion;
  if (request.is_object() && request.contains("id")) response["id"] = request["id"];
  return response;
}

nlohmann::json Session::dispatch(const nlohmann::json& request) {
  if (!request.is_object()) return error_response("bad_request", "request must be a JSON object");
  if (!request.contains("cmd") || !request["cmd"].is_string()) return error_response("bad_request", "missing 'cmd'");
  const auto cmd = request["cmd"].get<std::string>();

  if (cmd == "reset") {
    const TaskMode mode = request.contains("mode") ? parse_task_mode(request["mode"].get<std::string>()) : default_mode_;
    const std::uint64_t seed = request.contains("seed") ? request["seed"].get<std::uint64_t>() : 0;
    if (!env_ || env_->mode() != mode) env_.emplace(mode, episode_);
    env_->reset(seed);
    auto r = observation_fields(*env_);
    r["ok"] = true;
    r["mode"] = to_string(mode);
    r["done"] = false;
    return r;
  }
  if (cmd == "step") {
    if (!env_ || !env_->has_episode()) return error_response("no_episode", "reset before step");
    if (env_->done()) return error_response("episode_done", "episode finished; reset to continue");
    if (!request.contains("action") || !request["action"].is_array() || request["action"].size() != kActionDim) {
      return error_response("bad_request", "'action' must be an array of " + std::to_string(kActionDim) + " numbers");
    }
    Action a{};
    for (std::size_t i = 0; i < kActionDim; ++i) {
      const auto& v = request["action"][i];
      if (!v.is_number() || !std::isfinite(v.get<double>()))
        return error_response("bad_request", "action entries must be finite numbers");
      a[i] = v.get<double>();
    }
    const auto step = env_->step(a);
    auto r = observation_fields(*env_);
    r["ok"] = true;
    r["reward"] = step.reward;
    r["done"] = step.done;
    r["success"] = step.success;
    if (step.event) {
      const auto& obj = step.state.objects[step.event->object];
      r["hindsight_event"] = {{"t", step.event->t},
                              {"object", step.event->object},
                              {"color", obj.color},
                              {"shape", to_string(obj.shape_class)},
                              {"instruction", step.event->instruction.text()},
                              {"tokens", step.event->instruction.tokens}};
    } else {
      r["hindsight_event"] = nullptr;
    }
    return r;
  }
  if (cmd == "vocab") {
    const TaskMode mode = request.contains("mode") ? parse_task_mode(request["mode"].get<std::string>())
                          : env_                   ? env_->mode()
                                                   : default_mode_;
    return {{"ok", true}, {"mode", to_string(mode)}, {"words", Vocabulary(mode).words()}};
  }
  if (cmd == "close") {
    closed_ = true;
    return {{"ok", true}};
  }
  return error_response("bad_request", "unknown cmd '" + cmd + "'");
}

EnvServer::EnvServer(ServerConfig cfg) : cfg_(std::move(cfg)) {}

EnvServer::~EnvServer() { stop(); }

void EnvServer::start() {
  if (listen_fd_ >= 0) throw ServerError("server already started");
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw ServerError(std::string("socket: ") + std::strerror(errno));
  int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(cfg_.port);
  if (::inet_pton(AF_INET, cfg_.host.c_str(), &addr.sin_addr) != 1) {
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw ServerError("invalid host address " + cfg_.host);
  }
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0 || ::listen(listen_fd_, 64) < 0) {
    const std::string msg = std::strerror(errno);
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw ServerError("cannot listen on " + cfg_.host + ":" + std::to_string(cfg_.port) + ": " + msg);
  }
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
  stopping_ = false;
  acceptor_ = std::thread([this] { accept_loop(); });
}

void EnvServer::stop() {
  if (listen_fd_ < 0) return;
  stopping_ = true;
  if (acceptor_.joinable()) acceptor_.join();
  ::close(listen_fd_);
  listen_fd_ = -1;
  std::lock_guard lock(mu_);
  for (auto& c : connections_) ::shutdown(c.fd, SHUT_RD);
  for (auto& c : connections_) {
    if (c.thread.joinable()) c.thread.join();
    ::close(c.fd);
  }
  connections_.clear();
}

void EnvServer::reap_finished() {
  std::lock_guard lock(mu_);
  for (auto it = connections_.begin(); it != connections_.end();) {
    if (it->finished) {
      it->thread.join();
      ::close(it->fd);
      it = connections_.erase(it);
    } else {
      ++it;
    }
  }
}

void EnvServer::accept_loop() {
  while (!stopping_) {
    pollfd p{listen_fd_, POLLIN, 0};
    const int ready = ::poll(&p, 1, 50);
    reap_finished();
    if (ready <= 0) continue;
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) continue;
    std::lock_guard lock(mu_);
    if (connections_.size() >= cfg_.max_sessions) {
      auto r = error_response("busy", "session limit reached");
      r["version"] = kProtocolVersion;
      send_all(fd, r.dump() + "\n");
      ::close(fd);
      continue;
    }
    auto& conn = connections_.emplace_back();
    conn.fd = fd;
    conn.thread = std::thread([this, &conn] { serve_connection(conn); });
  }
}

void EnvServer::serve_connection(Connection& conn) {
  Session session(cfg_.mode, cfg_.episode);
  std::string pending;
  char buf[4096];
  while (!session.closed()) {
    const auto n = ::recv(conn.fd, buf, sizeof buf, 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) break;
    pending.append(buf, static_cast<std::size_t>(n));
    std::size_t start = 0, nl;
    bool ok = true;
    while (ok && !session.closed() && (nl = pending.find('\n', start)) != std::string::npos) {
      std::string line = pending.substr(start, nl - start);
      start = nl + 1;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      ok = send_all(conn.fd, session.handle(line).dump() + "\n");
    }
    pending.erase(0, start);
    if (!ok) break;
    if (pending.size() > kMaxLine) {
      auto r = error_response("bad_request", "line too long");
      r["version"] = kProtocolVersion;
      send_all(conn.fd, r.dump() + "\n");
      break;
    }
  }
  ::shutdown(conn.fd, SHUT_RDWR);
  conn.finished = true;
}

}  // namespace hindsight
