#pragma once

#include "embsim/physics/world.hpp"
#include "embsim/sensors/audio.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace embsim {

struct DoorSpec {
  std::string side;     // north (+z), south (-z), east (+x), west (-x)
  double offset = 0.0;  // along the wall, from the room centre
  double width = 1.0;
};

struct RoomSpec {
  std::string name;
  double center_x = 0.0;
  double center_z = 0.0;
  Vec3 size = Vec3(6.0, 3.0, 6.0);
  Vec3 wall_color = Vec3::Ones();
  std::vector<std::string> walls{"north", "south", "east", "west"};
  std::vector<DoorSpec> doors;
  bool corridor = false;

  bool contains_xz(const Vec3& p, double margin = 0.0) const;
};

struct PropSpec {
  std::string name;
  std::string shape = "box";  // box, sphere, capsule, cylinder
  Vec3 half_extents = Vec3::Constant(0.25);
  double radius = 0.25;
  double half_height = 0.25;
  double mass = 50.0;
  Vec3 color = Vec3::Constant(0.7);
  bool transparent = false;
  bool fixed = true;
  Vec3 position = Vec3::Zero();
  double yaw_deg = 0.0;
};

struct SceneSpec {
  std::string name;
  Vec3 background = Vec3(0.55, 0.7, 0.85);
  Vec3 floor_color = Vec3::Constant(0.75);
  Vec3 ceiling_color = Vec3::Ones();
  double ceiling_height = 3.0;
  double wall_thickness = 0.1;
  std::vector<RoomSpec> rooms;
  std::vector<PropSpec> props;
  RoomAcoustics audio_room;

  /// Rooms excluding corridors.
  int room_count() const;
  int prop_count() const { return static_cast<int>(props.size()); }
  const RoomSpec* room_at(const Vec3& p) const;
};

SceneSpec scene_from_json(const nlohmann::json& doc);
nlohmann::json scene_to_json(const SceneSpec& scene);
SceneSpec load_scene(const std::filesystem::path& path);

std::vector<std::string> playground_names();
/// Built-in playground by name; NotFound for unknown names.
SceneSpec load_playground(const std::string& name);

struct BuiltScene {
  BodyId floor = 0;
  BodyId ceiling = 0;
  std::vector<BodyId> walls;
  std::vector<BodyId> props;
};

Shape prop_shape(const PropSpec& prop);
BuiltScene build_scene(const SceneSpec& scene, PhysicsWorld& world);

}  // namespace embsim
