#pragma once

#include <stdexcept>
#include <string>

namespace embsim {

enum class ErrorCode {
  InvalidArgument,
  InvalidAction,
  ModeConflict,
  InteractionRefused,
  NotFound,
  UnsupportedPair,
  SimulationDiverged,
  InvalidGeometry,
  Configuration,
  EpisodeFinished,
  NotReset,
  Protocol,
  Io,
};

const char* to_string(ErrorCode code) noexcept;

// Every failure the engine reports is an Error carrying a machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace embsim
