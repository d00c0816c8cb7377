#include "embsim/net/protocol.hpp"

#include "embsim/error.hpp"

#include <bit>
#include <cstring>

namespace embsim::net {

namespace {

static_assert(std::endian::native == std::endian::little, "wire codec assumes a little-endian host");

[[noreturn]] void malformed(const std::string& what) {
  throw Error(ErrorCode::Protocol, "malformed payload: " + what);
}

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

template <typename T>
T get(std::span<const std::uint8_t> in, std::size_t& pos) {
  if (in.size() - pos < sizeof(T)) malformed("truncated");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

void expect_end(std::span<const std::uint8_t> in, std::size_t pos) {
  if (pos != in.size()) malformed("trailing bytes");
}

}  // namespace

bool is_known_type(std::uint8_t type) noexcept { return type <= 6; }

const char* type_name(std::uint8_t type) noexcept {
  switch (type) {
    case 0: return "HELLO";
    case 1: return "HELLO_ACK";
    case 2: return "RESET";
    case 3: return "STEP";
    case 4: return "STEP_RESULT";
    case 5: return "ERROR";
    case 6: return "CLOSE";
    default: return "UNKNOWN";
  }
}

std::vector<std::uint8_t> encode_frame(const Frame& frame) {
  if (frame.payload.size() > kMaxPayload) {
    throw Error(ErrorCode::Protocol, "payload exceeds 64 MiB");
  }
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderSize + frame.payload.size());
  put<std::uint32_t>(out, static_cast<std::uint32_t>(3 + frame.payload.size()));
  put<std::uint16_t>(out, frame.env_id);
  put<std::uint8_t>(out, frame.type);
  out.insert(out.end(), frame.payload.begin(), frame.payload.end());
  return out;
}

DecodeResult decode_frame(std::span<const std::uint8_t> bytes) {
  DecodeResult r;
  if (bytes.size() < 4) return r;
  std::uint32_t length;
  std::memcpy(&length, bytes.data(), 4);
  if (length < 3) throw Error(ErrorCode::Protocol, "frame length below header size");
  if (length - 3 > kMaxPayload) throw Error(ErrorCode::Protocol, "payload exceeds 64 MiB");
  if (bytes.size() < 4 + std::size_t(length)) return r;
  std::size_t pos = 4;
  r.frame.env_id = get<std::uint16_t>(bytes, pos);
  r.frame.type = get<std::uint8_t>(bytes, pos);
  r.frame.payload.assign(bytes.begin() + kHeaderSize, bytes.begin() + 4 + length);
  r.consumed = 4 + length;
  r.status = DecodeResult::Status::Complete;
  return r;
}

Frame decode_exact(std::span<const std::uint8_t> bytes) {
  const DecodeResult r = decode_frame(bytes);
  if (r.status != DecodeResult::Status::Complete || r.consumed != bytes.size()) {
    throw Error(ErrorCode::Protocol, "declared frame length does not match buffer");
  }
  return r.frame;
}

void encode_observation(const ObservationFrame& frame, std::vector<std::uint8_t>& out) {
  put<std::uint16_t>(out, static_cast<std::uint16_t>(frame.size()));
  for (const auto& [key, t] : frame.entries()) {
    if (key.size() > 0xffff || t.shape.size() > 0xff) malformed("key or rank too large");
    put<std::uint16_t>(out, static_cast<std::uint16_t>(key.size()));
    out.insert(out.end(), key.begin(), key.end());
    put<std::uint8_t>(out, static_cast<std::uint8_t>(t.dtype));
    put<std::uint8_t>(out, static_cast<std::uint8_t>(t.shape.size()));
    for (std::uint32_t d : t.shape) put<std::uint32_t>(out, d);
    out.insert(out.end(), t.bytes.begin(), t.bytes.end());
  }
}

ObservationFrame decode_observation(std::span<const std::uint8_t> in, std::size_t& pos) {
  ObservationFrame frame;
  const auto keys = get<std::uint16_t>(in, pos);
  for (std::uint16_t k = 0; k < keys; ++k) {
    const auto len = get<std::uint16_t>(in, pos);
    if (in.size() - pos < len) malformed("truncated key");
    std::string key(reinterpret_cast<const char*>(in.data() + pos), len);
    pos += len;
    Tensor t;
    const auto dtype = get<std::uint8_t>(in, pos);
    if (dtype > 1) malformed("unknown element type");
    t.dtype = static_cast<DType>(dtype);
    const auto ndim = get<std::uint8_t>(in, pos);
    std::uint64_t count = 1;
    for (int d = 0; d < ndim; ++d) {
      t.shape.push_back(get<std::uint32_t>(in, pos));
      count *= t.shape.back();
      if (count > kMaxPayload) malformed("tensor too large");
    }
    const std::size_t nbytes = count * dtype_size(t.dtype);
    if (in.size() - pos < nbytes) malformed("truncated tensor");
    t.bytes.assign(in.begin() + pos, in.begin() + pos + nbytes);
    pos += nbytes;
    try {
      frame.add(std::move(key), std::move(t));
    } catch (const Error&) {
      malformed("duplicate observation key");
    }
  }
  return frame;
}

std::vector<std::uint8_t> encode_step_result(const StepResultMsg& msg) {
  if (msg.rewards.size() != msg.observations.size()) {
    throw Error(ErrorCode::InvalidArgument, "one reward per agent observation expected");
  }
  std::vector<std::uint8_t> out;
  put<std::uint16_t>(out, static_cast<std::uint16_t>(msg.observations.size()));
  for (const auto& f : msg.observations) encode_observation(f, out);
  for (float r : msg.rewards) put<float>(out, r);
  put<std::uint8_t>(out, msg.done ? 1 : 0);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(msg.info.size()));
  out.insert(out.end(), msg.info.begin(), msg.info.end());
  return out;
}

StepResultMsg decode_step_result(std::span<const std::uint8_t> in) {
  StepResultMsg msg;
  std::size_t pos = 0;
  const auto agents = get<std::uint16_t>(in, pos);
  for (std::uint16_t a = 0; a < agents; ++a) msg.observations.push_back(decode_observation(in, pos));
  for (std::uint16_t a = 0; a < agents; ++a) msg.rewards.push_back(get<float>(in, pos));
  const auto done = get<std::uint8_t>(in, pos);
  if (done > 1) malformed("done flag");
  msg.done = done == 1;
  const auto len = get<std::uint32_t>(in, pos);
  if (in.size() - pos < len) malformed("truncated info");
  msg.info.assign(reinterpret_cast<const char*>(in.data() + pos), len);
  pos += len;
  expect_end(in, pos);
  return msg;
}

std::vector<std::uint8_t> encode_actions(std::span<const Action> actions) {
  std::vector<std::uint8_t> out;
  put<std::uint16_t>(out, static_cast<std::uint16_t>(actions.size()));
  for (const Action& a : actions) {
    put<std::uint8_t>(out, static_cast<std::uint8_t>(a.kind));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(a.data.size()));
    for (float v : a.data) put<float>(out, v);
  }
  return out;
}

std::vector<Action> decode_actions(std::span<const std::uint8_t> in) {
  std::size_t pos = 0;
  const auto n = get<std::uint16_t>(in, pos);
  std::vector<Action> actions(n);
  for (Action& a : actions) {
    a.kind = static_cast<ActionKind>(get<std::uint8_t>(in, pos));
    const auto count = get<std::uint32_t>(in, pos);
    if ((in.size() - pos) / 4 < count) malformed("truncated action vector");
    a.data.resize(count);
    for (float& v : a.data) v = get<float>(in, pos);
  }
  expect_end(in, pos);
  return actions;
}

std::vector<std::uint8_t> encode_reset(std::optional<std::uint64_t> seed) {
  std::vector<std::uint8_t> out;
  if (seed) put<std::uint64_t>(out, *seed);
  return out;
}

std::optional<std::uint64_t> decode_reset(std::span<const std::uint8_t> in) {
  if (in.empty()) return std::nullopt;
  if (in.size() != 8) malformed("reset seed must be 8 bytes");
  std::size_t pos = 0;
  return get<std::uint64_t>(in, pos);
}

std::vector<std::uint8_t> encode_error(const ErrorMsg& msg) {
  std::vector<std::uint8_t> out;
  put<std::uint16_t>(out, msg.code);
  out.insert(out.end(), msg.message.begin(), msg.message.end());
  return out;
}

ErrorMsg decode_error(std::span<const std::uint8_t> in) {
  std::size_t pos = 0;
  ErrorMsg m;
  m.code = get<std::uint16_t>(in, pos);
  m.message.assign(reinterpret_cast<const char*>(in.data() + pos), in.size() - pos);
  return m;
}

std::vector<std::uint8_t> text_payload(const std::string& text) {
  return {text.begin(), text.end()};
}

std::string payload_text(std::span<const std::uint8_t> bytes) {
  return {reinterpret_cast<const char*>(bytes.data()), bytes.size()};
}

}  // namespace embsim::net
