#pragma once

#include <cstdint>
#include <random>

namespace embsim {

/// Well-known stream ids, one per subsystem.
enum class StreamId : std::uint64_t {
  PhysicsJitter = 0,
  SceneSampling = 1,
  Task = 2,
  Dataset = 3,
};

/// Deterministic random stream. mt19937_64 is fully specified by the C++
/// standard, and every draw below is derived from raw 64-bit output with
/// integer/IEEE arithmetic only, so sequences match across platforms.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n); n > 0. Uses rejection to avoid modulo bias.
  std::uint64_t uniform_int(std::uint64_t n);
  /// Standard normal via Box-Muller.
  double normal();

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

RngStream derive_stream(std::uint64_t seed, std::uint64_t stream_id);
inline RngStream derive_stream(std::uint64_t seed, StreamId id) {
  return derive_stream(seed, static_cast<std::uint64_t>(id));
}

}  // namespace embsim
