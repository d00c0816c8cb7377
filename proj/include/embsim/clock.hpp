#pragma once

#include <cstdint>

namespace embsim {

/// Fixed-timestep simulation clock. Time is an integer step count times a
/// constant step length; wall-clock time never enters.
class SimClock {
 public:
  static constexpr double kDefaultDt = 0.004;

  explicit SimClock(double dt_physics = kDefaultDt);

  double dt() const noexcept { return dt_; }
  std::uint64_t steps() const noexcept { return steps_; }
  double time() const noexcept { return static_cast<double>(steps_) * dt_; }

  void advance() noexcept { ++steps_; }
  void reset() noexcept { steps_ = 0; }

 private:
  double dt_;
  std::uint64_t steps_ = 0;
};

/// Pure form of SimClock::advance.
SimClock advance(SimClock clock) noexcept;

}  // namespace embsim
