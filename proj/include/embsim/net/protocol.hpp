#pragma once

#include "embsim/env/environment.hpp"
#include "embsim/env/observation.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace embsim::net {

// Frame: u32 length (LE, counts env_id + type + payload), u16 env_id, u8 type, payload.
enum class MsgType : std::uint8_t {
  Hello = 0,
  HelloAck = 1,
  Reset = 2,
  Step = 3,
  StepResult = 4,
  Error = 5,
  Close = 6,
};

constexpr std::size_t kHeaderSize = 7;
constexpr std::uint32_t kMaxPayload = 64u << 20;

bool is_known_type(std::uint8_t type) noexcept;
const char* type_name(std::uint8_t type) noexcept;

struct Frame {
  std::uint16_t env_id = 0;
  std::uint8_t type = 0;  // raw, so unknown types survive decoding
  std::vector<std::uint8_t> payload;

  bool operator==(const Frame&) const = default;
};

std::vector<std::uint8_t> encode_frame(const Frame& frame);

/// Incremental decoding over a byte stream.
struct DecodeResult {
  enum class Status { Complete, Incomplete };
  Status status = Status::Incomplete;
  Frame frame;
  std::size_t consumed = 0;
};
/// Throws Protocol on a length field below 3 or above the payload limit.
DecodeResult decode_frame(std::span<const std::uint8_t> bytes);
/// Whole-buffer decode: the buffer must hold exactly one frame.
Frame decode_exact(std::span<const std::uint8_t> bytes);

// Payload codecs. Decoders throw Protocol on malformed or trailing bytes.

/// Per key: u16 key length, key, u8 dtype, u8 ndim, ndim x u32 dims, payload;
/// preceded by a u16 key count.
void encode_observation(const ObservationFrame& frame, std::vector<std::uint8_t>& out);
ObservationFrame decode_observation(std::span<const std::uint8_t> bytes, std::size_t& pos);

struct StepResultMsg {
  std::vector<ObservationFrame> observations;  // one per agent
  std::vector<float> rewards;                  // one per agent
  bool done = false;
  std::string info;  // JSON text

  bool operator==(const StepResultMsg&) const = default;
};

std::vector<std::uint8_t> encode_step_result(const StepResultMsg& msg);
StepResultMsg decode_step_result(std::span<const std::uint8_t> bytes);

/// u16 agent count; per agent u8 kind, u32 count, count x f32.
std::vector<std::uint8_t> encode_actions(std::span<const Action> actions);
std::vector<Action> decode_actions(std::span<const std::uint8_t> bytes);

/// Empty (use the configured seed) or u64.
std::vector<std::uint8_t> encode_reset(std::optional<std::uint64_t> seed);
std::optional<std::uint64_t> decode_reset(std::span<const std::uint8_t> bytes);

struct ErrorMsg {
  std::uint16_t code = 0;
  std::string message;

  bool operator==(const ErrorMsg&) const = default;
};

std::vector<std::uint8_t> encode_error(const ErrorMsg& msg);
ErrorMsg decode_error(std::span<const std::uint8_t> bytes);

/// Codes carried by ERROR frames: ErrorCode values, plus these.
constexpr std::uint16_t kUnknownMessage = 100;
constexpr std::uint16_t kBadEnvId = 101;
constexpr std::uint16_t kInternal = 102;

std::vector<std::uint8_t> text_payload(const std::string& text);
std::string payload_text(std::span<const std::uint8_t> bytes);

}  // namespace embsim::net
