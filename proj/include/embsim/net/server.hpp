#pragma once

#include "embsim/net/protocol.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace embsim::net {

struct ServerOptions {
  /// Base configuration; HELLO documents override individual keys.
  nlohmann::json defaults = nlohmann::json::object();
  std::uint64_t seed = 0;
  int max_envs = 8;
  /// When set, each connection's frames are appended to conn_<n>.bin here.
  std::optional<std::filesystem::path> transcript_dir;
};

/// Protocol state of one connection: up to max_envs environments keyed by
/// env_id, strict request/response.
class Session {
 public:
  explicit Session(ServerOptions options);

  /// Response to one request; nullopt after CLOSE.
  std::optional<Frame> handle(const Frame& request);
  bool closed() const { return closed_; }
  /// Environment bound to env_id, or nullptr.
  const Environment* env(std::uint16_t env_id) const;

 private:
  struct Slot {
    std::unique_ptr<Environment> env;
    std::uint64_t seed = 0;
    bool reset = false;
  };

  Frame hello(const Frame& request);
  Frame reset(const Frame& request, Slot& slot);
  Frame step(const Frame& request, Slot& slot);

  ServerOptions options_;
  std::map<std::uint16_t, Slot> slots_;
  bool closed_ = false;
};

Frame error_frame(std::uint16_t env_id, std::uint16_t code, const std::string& message);

/// Appends frames as records: u8 direction (0 received, 1 sent) + frame bytes.
class Transcript {
 public:
  explicit Transcript(const std::filesystem::path& path);
  void record(bool sent, std::span<const std::uint8_t> frame_bytes);

 private:
  std::mutex mutex_;
  std::ofstream out_;
};

/// TCP front end. One thread per connection; requests on a connection are
/// served in arrival order.
class Server {
 public:
  explicit Server(ServerOptions options);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds and listens; port 0 picks a free port.
  void bind(const std::string& host, std::uint16_t port);
  std::uint16_t port() const { return port_; }
  /// Accept loop; returns after stop().
  void run();
  void start() { thread_ = std::thread([this] { run(); }); }
  void stop();

 private:
  void serve_connection(int fd, int index);

  ServerOptions options_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};
  std::thread thread_;
  std::mutex mutex_;
  std::vector<int> client_fds_;
  std::vector<std::thread> workers_;
};

/// Blocking client used by tools and tests.
class Client {
 public:
  Client(const std::string& host, std::uint16_t port);
  ~Client();
  Client(const Client&) = delete;
  Client& operator=(const Client&) = delete;

  void send(const Frame& frame);
  void send_raw(std::span<const std::uint8_t> bytes);
  /// Next complete frame; throws Io when the peer closes first.
  Frame receive();
  Frame request(const Frame& frame) {
    send(frame);
    return receive();
  }

 private:
  int fd_ = -1;
  std::vector<std::uint8_t> buffer_;
};

}  // namespace embsim::net
