#pragma once

#include "embsim/env/observation.hpp"
#include "embsim/physics/world.hpp"
#include "embsim/sensors/audio.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace embsim::dataset {

enum class Kind { ImageClassification, TactileClassification, Distance, BoundingBox, SoundLocalization };

Kind kind_from_string(const std::string& name);
const char* to_string(Kind kind) noexcept;
std::vector<std::string> kind_names();

// VTEN: "VTEN", u8 element type, u8 ndim, ndim x u32 dims, row-major payload.
std::vector<std::uint8_t> encode_vten(const Tensor& t);
Tensor decode_vten(std::span<const std::uint8_t> bytes);
void write_vten(const std::filesystem::path& path, const Tensor& t);
Tensor read_vten(const std::filesystem::path& path);

/// Camera orientation looking from `eye` toward `target` with +y up.
Quat look_at(const Vec3& eye, const Vec3& target);

/// Vision object classes; "doll" is a capsule torso with a sphere head.
const std::vector<std::string>& vision_classes();
const std::vector<std::string>& tactile_classes();

/// Adds a kinematic object of class `cls` whose base rests at `base`.
BodyId add_vision_object(PhysicsWorld& world, int cls, const Vec3& base, double yaw);

/// Camera pose and object drawn for a vision sample.
struct VisionView {
  int cls = 0;
  Vec3 eye = Vec3::Zero();  // cyclopean camera position
  Quat orientation = Quat::Identity();
  Vec3 object_center = Vec3::Zero();
};
VisionView vision_view(std::uint64_t seed, int index);

struct Sample {
  Tensor data;
  std::vector<std::string> label;  // CSV columns after index and file
};

struct SoundSetup {
  AudioMode mode = AudioMode::Hrtf;
  const HrtfTable* hrtf = nullptr;
  bool room = true;
};

struct SoundScene {
  Pose head;
  Vec3 source;
};

// One sample each; every draw comes from derive_stream(seed, index).
Sample image_sample(std::uint64_t seed, int index);
Sample bbox_sample(std::uint64_t seed, int index);
Sample distance_sample(std::uint64_t seed, int index);
Sample sound_sample(std::uint64_t seed, int index, const SoundSetup& setup);
Sample tactile_sample(std::uint64_t seed, int index);

/// Renders 4410 stereo samples of a noise burst emitted at t = 0.
Sample render_sound(const SoundScene& scene, std::span<const float> burst, const SoundSetup& setup);

struct TactileDrop {
  int cls = 0;
  Vec3 offset = Vec3::Zero();  // horizontal offset over the palm centre
  double height = 0.05;         // gap between the object's lowest point and the palm
  Quat orientation = Quat::Identity();
};
constexpr int kTactileSteps = 128;
/// [128, hand taxels] readings of the right hand while the object lands.
Tensor record_drop(const TactileDrop& drop);

struct GenOptions {
  Kind kind = Kind::ImageClassification;
  int n = 1000;
  std::uint64_t seed = 0;
  std::filesystem::path out;
  AudioMode audio_mode = AudioMode::Hrtf;
  std::optional<std::filesystem::path> hrtf_file;
};

/// Writes data_XXXXXX.vten, labels.csv and manifest.json; returns the manifest.
nlohmann::json generate(const GenOptions& options);
/// Checks the manifest against the files on disk; returns the sample count.
int validate_dataset(const std::filesystem::path& dir);

}  // namespace embsim::dataset
