#pragma once

#include "embsim/clock.hpp"
#include "embsim/env/observation.hpp"
#include "embsim/env/scene.hpp"
#include "embsim/env/tasks.hpp"
#include "embsim/humanoid/agent.hpp"
#include "embsim/rng.hpp"
#include "embsim/sensors/audio.hpp"
#include "embsim/sensors/tactile.hpp"
#include "embsim/sensors/vision.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace embsim {

enum class ActionKind : std::uint8_t {
  Noop = 0,
  Walk = 1,          // [walk_speed m/s, turn_speed rad/s]
  Kick = 2,          // [] or [object id]
  Grab = 3,          // [] or [object id]
  Release = 4,       // []
  Look = 5,          // [x, y, z]
  ReleaseLook = 6,   // []
  RotateHead = 7,    // [up_down deg, left_right deg]
  Sound = 8,         // samples at fs
  Torque = 9,        // one value in [-1, 1] per DOF
};

struct Action {
  ActionKind kind = ActionKind::Noop;
  std::vector<float> data;
};

struct ObsConfig {
  bool vision = true;
  bool audio = true;
  bool tactile = true;
  bool proprio = true;
  /// Audio key carries FFT magnitudes [windows, 2, bins] instead of raw [2, n].
  bool audio_fft = false;
};

struct EnvConfig {
  TaskId task = TaskId::KickTheBall;
  std::string playground = "SimpleEnv";
  std::optional<std::filesystem::path> scene_file;
  int agents = 1;
  ObsConfig obs;
  AudioConfig audio;
  AudioMode audio_mode = AudioMode::Hrtf;
  std::optional<std::filesystem::path> hrtf_file;
  VisionConfig vision;
  AgentConfig agent;
  double dt_physics = 0.004;
  int substeps = 5;
  bool helper_rewards = true;
  int max_steps = 0;  // 0: task default
  double tactile_d_max = 0.01;

  int episode_limit() const;
  double dt_control() const { return dt_physics * substeps; }
};

/// Parses the HELLO/CLI configuration object; unknown keys are rejected.
EnvConfig env_config_from_json(const nlohmann::json& doc);
nlohmann::json env_config_to_json(const EnvConfig& config);

struct StepResult {
  std::vector<ObservationFrame> observations;
  std::vector<double> rewards;
  std::vector<RewardBreakdown> breakdown;
  bool done = false;
  nlohmann::json info;
};

/// Object spawned by the task (ball, navigation targets, grab object).
struct TaskObject {
  BodyId body = 0;
  std::string kind;
  double footprint = 0.1;  // horizontal radius used by reach tests
};

class Environment {
 public:
  explicit Environment(EnvConfig config);

  const EnvConfig& config() const { return config_; }
  const SceneSpec& scene() const { return scene_; }
  const BuiltScene& built() const { return built_; }
  PhysicsWorld& world() { return *world_; }
  const PhysicsWorld& world() const { return *world_; }
  std::vector<Agent>& agents() { return agents_; }
  const std::vector<Agent>& agents() const { return agents_; }
  const std::vector<TaskObject>& task_objects() const { return objects_; }
  const std::vector<AudioSource>& audio_sources() const { return sources_; }
  const TactileSkin& skin() const { return *skin_; }
  const SimClock& clock() const { return clock_; }
  int steps() const { return steps_; }
  bool done() const { return done_; }
  bool has_reset() const { return world_ != nullptr; }
  std::uint64_t seed() const { return seed_; }
  std::optional<std::size_t> target_index() const { return target_; }

  std::vector<ObservationFrame> reset(std::uint64_t seed);
  /// One action per agent, applied simultaneously on the pre-step state.
  StepResult step(std::span<const Action> actions);

  /// Transient source at the agent's head, heard by every listener.
  void make_sound(int agent, std::span<const float> samples);

  /// Listener at the agent's ears.
  Listener listener(int agent) const;

 private:
  /// Packs every agent's frame; renders and consumes one audio frame.
  std::vector<ObservationFrame> observe();
  void spawn_task();
  Vec3 sample_free_point(RngStream& rng, const RoomSpec& room, double clearance,
                         const std::vector<Vec3>& taken, double taken_clearance);
  void respawn_ball(TaskObject& ball);
  void validate_action(const Agent& agent, const Action& a) const;

  EnvConfig config_;
  SceneSpec scene_;
  std::shared_ptr<const SkeletonConfig> skeleton_;
  std::optional<HrtfTable> hrtf_;
  std::unique_ptr<PhysicsWorld> world_;
  BuiltScene built_;
  std::vector<Agent> agents_;
  std::unique_ptr<TactileSkin> skin_;
  std::vector<AudioSource> sources_;
  std::vector<TaskObject> objects_;
  std::optional<std::size_t> target_;
  std::vector<bool> reached_;
  std::vector<double> prev_hand_distance_;
  std::shared_ptr<const Clip> buzz_;
  RngStream task_rng_ = derive_stream(0, StreamId::Task);
  SimClock clock_;
  std::uint64_t seed_ = 0;
  int steps_ = 0;
  bool done_ = false;
};

}  // namespace embsim
