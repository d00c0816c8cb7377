#include "embsim/net/server.hpp"

#include "embsim/error.hpp"

#include <spdlog/spdlog.h>

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

namespace embsim::net {

using nlohmann::json;

namespace {

const char* kind_name(ActionKind k) {
  switch (k) {
    case ActionKind::Noop: return "noop";
    case ActionKind::Walk: return "walk";
    case ActionKind::Kick: return "kick";
    case ActionKind::Grab: return "grab";
    case ActionKind::Release: return "release";
    case ActionKind::Look: return "look";
    case ActionKind::ReleaseLook: return "release_look";
    case ActionKind::RotateHead: return "rotate_head";
    case ActionKind::Sound: return "sound";
    case ActionKind::Torque: return "torque";
  }
  return "?";
}

const char* dtype_name(DType t) { return t == DType::F32 ? "f32" : "u8"; }

StepResultMsg pack(const std::vector<ObservationFrame>& obs, const std::vector<double>& rewards,
                   bool done, const json& info) {
  StepResultMsg m;
  m.observations = obs;
  for (double r : rewards) m.rewards.push_back(static_cast<float>(r));
  m.done = done;
  m.info = info.dump();
  return m;
}

void send_all(int fd, std::span<const std::uint8_t> bytes) {
  std::size_t sent = 0;
  while (sent < bytes.size()) {
    const ssize_t n = ::send(fd, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::Io, std::string("send failed: ") + std::strerror(errno));
    }
    sent += static_cast<std::size_t>(n);
  }
}

// Reads until the buffer holds a complete frame; nullopt on orderly close.
std::optional<Frame> read_frame(int fd, std::vector<std::uint8_t>& buffer) {
  std::uint8_t chunk[65536];
  for (;;) {
    const DecodeResult r = decode_frame(buffer);
    if (r.status == DecodeResult::Status::Complete) {
      buffer.erase(buffer.begin(), buffer.begin() + static_cast<std::ptrdiff_t>(r.consumed));
      return r.frame;
    }
    const ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
    if (n == 0) {
      if (!buffer.empty()) spdlog::warn("peer closed with {} unread bytes", buffer.size());
      return std::nullopt;
    }
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::Io, std::string("recv failed: ") + std::strerror(errno));
    }
    buffer.insert(buffer.end(), chunk, chunk + n);
  }
}

}  // namespace

Frame error_frame(std::uint16_t env_id, std::uint16_t code, const std::string& message) {
  return {env_id, static_cast<std::uint8_t>(MsgType::Error), encode_error({code, message})};
}

Session::Session(ServerOptions options) : options_(std::move(options)) {}

const Environment* Session::env(std::uint16_t env_id) const {
  const auto it = slots_.find(env_id);
  return it == slots_.end() ? nullptr : it->second.env.get();
}

std::optional<Frame> Session::handle(const Frame& req) {
  if (closed_) return std::nullopt;
  if (!is_known_type(req.type)) {
    return error_frame(req.env_id, kUnknownMessage,
                       "unknown message type " + std::to_string(int(req.type)));
  }
  const auto type = static_cast<MsgType>(req.type);
  if (type == MsgType::Close) {
    closed_ = true;
    return std::nullopt;
  }
  if (req.env_id >= options_.max_envs) {
    return error_frame(req.env_id, kBadEnvId,
                       "env_id " + std::to_string(req.env_id) + " exceeds max_envs " +
                           std::to_string(options_.max_envs));
  }
  try {
    switch (type) {
      case MsgType::Hello: return hello(req);
      case MsgType::Reset:
      case MsgType::Step: {
        const auto it = slots_.find(req.env_id);
        if (it == slots_.end()) {
          return error_frame(req.env_id, static_cast<std::uint16_t>(ErrorCode::NotReset),
                             "no HELLO for env_id " + std::to_string(req.env_id));
        }
        return type == MsgType::Reset ? reset(req, it->second) : step(req, it->second);
      }
      default:
        return error_frame(req.env_id, kUnknownMessage,
                           std::string("unexpected message ") + type_name(req.type));
    }
  } catch (const Error& e) {
    return error_frame(req.env_id, static_cast<std::uint16_t>(e.code()), e.what());
  } catch (const json::exception& e) {
    return error_frame(req.env_id, static_cast<std::uint16_t>(ErrorCode::Configuration), e.what());
  } catch (const std::exception& e) {
    spdlog::error("env {}: {}", req.env_id, e.what());
    return error_frame(req.env_id, kInternal, e.what());
  }
}

Frame Session::hello(const Frame& req) {
  json doc = options_.defaults;
  if (!req.payload.empty()) {
    const json overrides = json::parse(payload_text(req.payload));
    if (!overrides.is_object()) {
      throw Error(ErrorCode::Configuration, "HELLO payload must be a JSON object");
    }
    doc.update(overrides);
  }
  std::uint64_t seed = options_.seed;
  if (doc.contains("seed")) {
    seed = doc["seed"].get<std::uint64_t>();
    doc.erase("seed");
  }
  Slot slot;
  slot.env = std::make_unique<Environment>(env_config_from_json(doc));
  slot.seed = seed;
  // Shapes come from a first reset; clients still have to RESET before STEP.
  const auto first = slot.env->reset(seed);
  const EnvConfig& cfg = slot.env->config();
  const Agent& agent = slot.env->agents().front();

  json obs = json::object();
  for (const auto& [key, t] : first.front().entries()) {
    obs[key] = {{"dtype", dtype_name(t.dtype)}, {"shape", t.shape}};
  }
  json kinds = json::array();
  for (int k = 0; k <= static_cast<int>(ActionKind::Torque); ++k) {
    const auto kind = static_cast<ActionKind>(k);
    const bool torque = agent.mode() == ActionMode::JointTorque;
    const bool allowed = torque ? (kind == ActionKind::Noop || kind == ActionKind::Torque ||
                                   kind == ActionKind::Sound)
                                : kind != ActionKind::Torque;
    if (allowed) kinds.push_back({{"id", k}, {"name", kind_name(kind)}});
  }
  json ack{{"env_id", req.env_id},
           {"seed", seed},
           {"config", env_config_to_json(cfg)},
           {"agents", cfg.agents},
           {"observations", obs},
           {"action_mode", agent.mode() == ActionMode::JointTorque ? "joint_torque" : "animation"},
           {"dof", agent.skeleton().total_dof()},
           {"actions", kinds},
           {"dt_control", cfg.dt_control()},
           {"audio_samples", cfg.audio.frame_samples()},
           {"max_steps", cfg.episode_limit()}};
  slots_[req.env_id] = std::move(slot);
  spdlog::info("env {}: {} in {} with {} agent(s)", req.env_id, to_string(cfg.task),
               cfg.playground, cfg.agents);
  return {req.env_id, static_cast<std::uint8_t>(MsgType::HelloAck), text_payload(ack.dump())};
}

Frame Session::reset(const Frame& req, Slot& slot) {
  const auto seed = decode_reset(req.payload).value_or(slot.seed);
  const auto obs = slot.env->reset(seed);
  slot.reset = true;
  const json info{{"step", 0}, {"time", 0.0}, {"seed", seed}};
  const std::vector<double> zeros(obs.size(), 0.0);
  spdlog::debug("env {}: reset seed {}", req.env_id, seed);
  return {req.env_id, static_cast<std::uint8_t>(MsgType::StepResult),
          encode_step_result(pack(obs, zeros, false, info))};
}

Frame Session::step(const Frame& req, Slot& slot) {
  if (!slot.reset) throw Error(ErrorCode::NotReset, "not reset");
  const auto actions = decode_actions(req.payload);
  const StepResult r = slot.env->step(actions);
  return {req.env_id, static_cast<std::uint8_t>(MsgType::StepResult),
          encode_step_result(pack(r.observations, r.rewards, r.done, r.info))};
}

Transcript::Transcript(const std::filesystem::path& path) : out_(path, std::ios::binary) {
  if (!out_) throw Error(ErrorCode::Io, "cannot write transcript " + path.string());
}

void Transcript::record(bool sent, std::span<const std::uint8_t> bytes) {
  const std::lock_guard lock(mutex_);
  out_.put(sent ? 1 : 0);
  out_.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  out_.flush();
}

Server::Server(ServerOptions options) : options_(std::move(options)) {}

Server::~Server() { stop(); }

void Server::bind(const std::string& host, std::uint16_t port) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = AI_PASSIVE;
  addrinfo* res = nullptr;
  const std::string service = std::to_string(port);
  if (const int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &res); rc != 0) {
    throw Error(ErrorCode::Io, "cannot resolve " + host + ": " + ::gai_strerror(rc));
  }
  const int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  const int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  const int rc = ::bind(fd, res->ai_addr, res->ai_addrlen);
  ::freeaddrinfo(res);
  if (rc != 0 || ::listen(fd, 16) != 0) {
    const std::string why = std::strerror(errno);
    ::close(fd);
    throw Error(ErrorCode::Io, "cannot listen on " + host + ":" + service + ": " + why);
  }
  sockaddr_in addr{};
  socklen_t len = sizeof addr;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  listen_fd_ = fd;
  port_ = ntohs(addr.sin_port);
  spdlog::info("listening on {}:{}", host, port_);
}

void Server::run() {
  if (listen_fd_ < 0) throw Error(ErrorCode::Io, "server is not bound");
  int index = 0;
  while (!stopping_) {
    pollfd p{listen_fd_, POLLIN, 0};
    if (::poll(&p, 1, 100) <= 0) continue;
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) continue;
    const int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    const std::lock_guard lock(mutex_);
    client_fds_.push_back(fd);
    workers_.emplace_back([this, fd, i = index++] { serve_connection(fd, i); });
  }
}

void Server::stop() {
  if (stopping_.exchange(true)) return;
  if (thread_.joinable()) thread_.join();
  std::vector<std::thread> workers;
  {
    const std::lock_guard lock(mutex_);
    for (int fd : client_fds_) ::shutdown(fd, SHUT_RDWR);
    workers.swap(workers_);
  }
  for (auto& w : workers) w.join();
  if (listen_fd_ >= 0) ::close(listen_fd_);
  listen_fd_ = -1;
}

void Server::serve_connection(int fd, int index) {
  spdlog::info("connection {} opened", index);
  std::unique_ptr<Transcript> transcript;
  if (options_.transcript_dir) {
    transcript = std::make_unique<Transcript>(*options_.transcript_dir /
                                              ("conn_" + std::to_string(index) + ".bin"));
  }
  Session session(options_);
  std::vector<std::uint8_t> buffer;
  try {
    while (!session.closed()) {
      std::optional<Frame> req;
      try {
        req = read_frame(fd, buffer);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::Protocol) throw;
        // The length field is unusable, so the stream cannot be resynchronised.
        send_all(fd, encode_frame(error_frame(0, static_cast<std::uint16_t>(e.code()), e.what())));
        break;
      }
      if (!req) break;
      if (transcript) transcript->record(false, encode_frame(*req));
      spdlog::debug("conn {} env {}: {}", index, req->env_id, type_name(req->type));
      const auto resp = session.handle(*req);
      if (!resp) continue;
      const auto bytes = encode_frame(*resp);
      if (transcript) transcript->record(true, bytes);
      send_all(fd, bytes);
    }
  } catch (const std::exception& e) {
    if (!stopping_) spdlog::warn("connection {}: {}", index, e.what());
  }
  {
    const std::lock_guard lock(mutex_);
    std::erase(client_fds_, fd);
  }
  ::close(fd);
  spdlog::info("connection {} closed", index);
}

Client::Client(const std::string& host, std::uint16_t port) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string service = std::to_string(port);
  if (const int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &res); rc != 0) {
    throw Error(ErrorCode::Io, "cannot resolve " + host + ": " + ::gai_strerror(rc));
  }
  fd_ = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  const int rc = ::connect(fd_, res->ai_addr, res->ai_addrlen);
  ::freeaddrinfo(res);
  if (rc != 0) {
    const std::string why = std::strerror(errno);
    ::close(fd_);
    throw Error(ErrorCode::Io, "cannot connect to " + host + ":" + service + ": " + why);
  }
  const int one = 1;
  ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

Client::~Client() {
  if (fd_ >= 0) ::close(fd_);
}

void Client::send(const Frame& frame) { send_all(fd_, encode_frame(frame)); }

void Client::send_raw(std::span<const std::uint8_t> bytes) { send_all(fd_, bytes); }

Frame Client::receive() {
  auto f = read_frame(fd_, buffer_);
  if (!f) throw Error(ErrorCode::Io, "server closed the connection");
  return *f;
}

}  // namespace embsim::net
