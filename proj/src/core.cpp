#include "embsim/clock.hpp"
#include "embsim/error.hpp"
#include "embsim/rng.hpp"

#include <cmath>

namespace embsim {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid-argument";
    case ErrorCode::InvalidAction: return "invalid-action";
    case ErrorCode::ModeConflict: return "mode-conflict";
    case ErrorCode::InteractionRefused: return "interaction-refused";
    case ErrorCode::NotFound: return "not-found";
    case ErrorCode::UnsupportedPair: return "unsupported-pair";
    case ErrorCode::SimulationDiverged: return "simulation-diverged";
    case ErrorCode::InvalidGeometry: return "invalid-geometry";
    case ErrorCode::Configuration: return "configuration";
    case ErrorCode::EpisodeFinished: return "episode-finished";
    case ErrorCode::NotReset: return "not-reset";
    case ErrorCode::Protocol: return "protocol";
    case ErrorCode::Io: return "io";
  }
  return "unknown";
}

SimClock::SimClock(double dt_physics) : dt_(dt_physics) {
  if (!(dt_physics > 0.0) || !std::isfinite(dt_physics)) {
    throw Error(ErrorCode::Configuration, "dt_physics must be positive and finite");
  }
}

SimClock advance(SimClock clock) noexcept {
  clock.advance();
  return clock;
}

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed),
      stream_id_(stream_id),
      engine_(splitmix64(splitmix64(seed) ^ splitmix64(~stream_id + 0x632BE59BD9B4E019ull))) {}

double RngStream::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::uint64_t RngStream::uniform_int(std::uint64_t n) {
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "uniform_int requires n > 0");
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

double RngStream::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

RngStream derive_stream(std::uint64_t seed, std::uint64_t stream_id) {
  return RngStream(seed, stream_id);
}

}  // namespace embsim
