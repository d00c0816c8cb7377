#include "embsim/env/scene.hpp"

#include "embsim/error.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <string_view>

namespace embsim {

namespace detail {
extern const std::string_view kSimpleEnvJson;
extern const std::string_view kSingleRoomEnvJson;
extern const std::string_view kHouseEnvJson;
}  // namespace detail

namespace {

using nlohmann::json;

Vec3 vec3(const json& j) {
  if (!j.is_array() || j.size() != 3) throw Error(ErrorCode::Configuration, "expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

bool known_side(const std::string& s) {
  return s == "north" || s == "south" || s == "east" || s == "west";
}

// Wall segments along one side, split around its doors.
void add_wall(PhysicsWorld& world, BuiltScene& out, const RoomSpec& room, const std::string& side,
              double t) {
  const bool along_x = side == "north" || side == "south";
  const double length = (along_x ? room.size.x() : room.size.z()) + 2.0 * t;
  const double h = room.size.y();
  double fixed = 0.0;
  if (side == "north") fixed = room.center_z + room.size.z() / 2.0 + t / 2.0;
  if (side == "south") fixed = room.center_z - room.size.z() / 2.0 - t / 2.0;
  if (side == "east") fixed = room.center_x + room.size.x() / 2.0 + t / 2.0;
  if (side == "west") fixed = room.center_x - room.size.x() / 2.0 - t / 2.0;
  const double centre = along_x ? room.center_x : room.center_z;

  std::vector<std::pair<double, double>> gaps;
  for (const DoorSpec& d : room.doors) {
    if (d.side == side) gaps.emplace_back(d.offset - d.width / 2.0, d.offset + d.width / 2.0);
  }
  std::sort(gaps.begin(), gaps.end());
  std::vector<std::pair<double, double>> spans;
  double cursor = -length / 2.0;
  for (const auto& [g0, g1] : gaps) {
    if (g0 > cursor) spans.emplace_back(cursor, g0);
    cursor = std::max(cursor, g1);
  }
  if (cursor < length / 2.0) spans.emplace_back(cursor, length / 2.0);

  for (const auto& [a, b] : spans) {
    if (b - a < 1e-6) continue;
    RigidBody wall;
    wall.name = room.name + "_wall_" + side;
    wall.kinematic = true;
    wall.scenery = true;
    wall.gravity = false;
    wall.mass = 1000.0;
    wall.color = room.wall_color;
    const double mid = centre + (a + b) / 2.0;
    wall.position = along_x ? Vec3(mid, h / 2.0, fixed) : Vec3(fixed, h / 2.0, mid);
    const Vec3 half = along_x ? Vec3((b - a) / 2.0, h / 2.0, t / 2.0)
                              : Vec3(t / 2.0, h / 2.0, (b - a) / 2.0);
    const BodyId id = world.add_body(wall);
    world.add_collider({id, Box{half}, {}});
    out.walls.push_back(id);
  }
}

}  // namespace

bool RoomSpec::contains_xz(const Vec3& p, double margin) const {
  return std::abs(p.x() - center_x) <= size.x() / 2.0 - margin &&
         std::abs(p.z() - center_z) <= size.z() / 2.0 - margin;
}

int SceneSpec::room_count() const {
  return static_cast<int>(
      std::count_if(rooms.begin(), rooms.end(), [](const RoomSpec& r) { return !r.corridor; }));
}

const RoomSpec* SceneSpec::room_at(const Vec3& p) const {
  for (const RoomSpec& r : rooms) {
    if (r.contains_xz(p)) return &r;
  }
  return nullptr;
}

SceneSpec scene_from_json(const json& doc) {
  try {
    SceneSpec s;
    s.name = doc.value("name", std::string("custom"));
    if (doc.contains("background")) s.background = vec3(doc["background"]);
    if (doc.contains("floor_color")) s.floor_color = vec3(doc["floor_color"]);
    if (doc.contains("ceiling_color")) s.ceiling_color = vec3(doc["ceiling_color"]);
    s.ceiling_height = doc.value("ceiling_height", 3.0);
    s.wall_thickness = doc.value("wall_thickness", 0.1);
    for (const json& r : doc.at("rooms")) {
      RoomSpec room;
      room.name = r.at("name").get<std::string>();
      room.center_x = r.at("center")[0].get<double>();
      room.center_z = r.at("center")[1].get<double>();
      room.size = vec3(r.at("size"));
      if (r.contains("wall_color")) room.wall_color = vec3(r["wall_color"]);
      if (r.contains("walls")) room.walls = r["walls"].get<std::vector<std::string>>();
      room.corridor = r.value("corridor", false);
      for (const json& d : r.value("doors", json::array())) {
        room.doors.push_back({d.at("side").get<std::string>(), d.value("offset", 0.0),
                              d.value("width", 1.0)});
      }
      if (!(room.size.array() > 0.0).all()) {
        throw Error(ErrorCode::Configuration, "room " + room.name + " needs a positive size");
      }
      for (const auto& w : room.walls) {
        if (!known_side(w)) throw Error(ErrorCode::Configuration, "unknown wall side " + w);
      }
      for (const auto& d : room.doors) {
        if (!known_side(d.side)) throw Error(ErrorCode::Configuration, "unknown door side " + d.side);
      }
      s.rooms.push_back(std::move(room));
    }
    if (s.rooms.empty()) throw Error(ErrorCode::Configuration, "scene needs at least one room");
    for (const json& p : doc.value("props", json::array())) {
      PropSpec prop;
      prop.name = p.at("name").get<std::string>();
      prop.shape = p.value("shape", std::string("box"));
      if (p.contains("half_extents")) prop.half_extents = vec3(p["half_extents"]);
      prop.radius = p.value("radius", prop.radius);
      prop.half_height = p.value("half_height", prop.half_height);
      prop.mass = p.value("mass", prop.mass);
      if (p.contains("color")) prop.color = vec3(p["color"]);
      prop.transparent = p.value("transparent", false);
      prop.fixed = p.value("fixed", true);
      prop.position = vec3(p.at("position"));
      prop.yaw_deg = p.value("yaw_deg", 0.0);
      validate_shape(prop_shape(prop));
      s.props.push_back(std::move(prop));
    }
    if (doc.contains("audio_room")) {
      const json& a = doc["audio_room"];
      s.audio_room.origin = vec3(a.at("origin"));
      s.audio_room.size = vec3(a.at("size"));
      s.audio_room.beta = a.value("beta", 0.5);
      s.audio_room.max_order = a.value("max_order", 2);
    } else {
      const RoomSpec& r = s.rooms.front();
      s.audio_room.origin = Vec3(r.center_x - r.size.x() / 2.0, 0.0, r.center_z - r.size.z() / 2.0);
      s.audio_room.size = r.size;
    }
    s.audio_room.validate();
    return s;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Configuration, std::string("malformed scene: ") + e.what());
  }
}

json scene_to_json(const SceneSpec& s) {
  json doc;
  doc["name"] = s.name;
  doc["background"] = to_json(s.background);
  doc["floor_color"] = to_json(s.floor_color);
  doc["ceiling_color"] = to_json(s.ceiling_color);
  doc["ceiling_height"] = s.ceiling_height;
  doc["wall_thickness"] = s.wall_thickness;
  doc["rooms"] = json::array();
  for (const RoomSpec& r : s.rooms) {
    json room{{"name", r.name},
              {"center", {r.center_x, r.center_z}},
              {"size", to_json(r.size)},
              {"wall_color", to_json(r.wall_color)},
              {"walls", r.walls},
              {"corridor", r.corridor},
              {"doors", json::array()}};
    for (const DoorSpec& d : r.doors) {
      room["doors"].push_back({{"side", d.side}, {"offset", d.offset}, {"width", d.width}});
    }
    doc["rooms"].push_back(room);
  }
  doc["props"] = json::array();
  for (const PropSpec& p : s.props) {
    doc["props"].push_back({{"name", p.name},
                            {"shape", p.shape},
                            {"half_extents", to_json(p.half_extents)},
                            {"radius", p.radius},
                            {"half_height", p.half_height},
                            {"mass", p.mass},
                            {"color", to_json(p.color)},
                            {"transparent", p.transparent},
                            {"fixed", p.fixed},
                            {"position", to_json(p.position)},
                            {"yaw_deg", p.yaw_deg}});
  }
  doc["audio_room"] = {{"origin", to_json(s.audio_room.origin)},
                       {"size", to_json(s.audio_room.size)},
                       {"beta", s.audio_room.beta},
                       {"max_order", s.audio_room.max_order}};
  return doc;
}

SceneSpec load_scene(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open scene file " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Configuration, path.string() + ": " + e.what());
  }
  return scene_from_json(doc);
}

std::vector<std::string> playground_names() { return {"SimpleEnv", "SingleRoomEnv", "HouseEnv"}; }

SceneSpec load_playground(const std::string& name) {
  std::string_view text;
  if (name == "SimpleEnv") text = detail::kSimpleEnvJson;
  else if (name == "SingleRoomEnv") text = detail::kSingleRoomEnvJson;
  else if (name == "HouseEnv") text = detail::kHouseEnvJson;
  else throw Error(ErrorCode::NotFound, "unknown playground '" + name + "'");
  return scene_from_json(json::parse(text));
}

Shape prop_shape(const PropSpec& p) {
  if (p.shape == "box") return Box{p.half_extents};
  if (p.shape == "sphere") return Sphere{p.radius};
  if (p.shape == "capsule") return Capsule{p.radius, p.half_height};
  if (p.shape == "cylinder") {
    static thread_local std::map<std::pair<double, double>, std::shared_ptr<const MeshData>> cache;
    auto& mesh = cache[{p.radius, p.half_height}];
    if (!mesh) mesh = std::make_shared<MeshData>(make_cylinder_mesh(p.radius, p.half_height, 16));
    return TriangleMesh{mesh};
  }
  throw Error(ErrorCode::Configuration, "unknown prop shape '" + p.shape + "'");
}

BuiltScene build_scene(const SceneSpec& s, PhysicsWorld& world) {
  BuiltScene out;
  RigidBody floor;
  floor.name = "floor";
  floor.kinematic = true;
  floor.scenery = true;
  floor.gravity = false;
  floor.color = s.floor_color;
  out.floor = world.add_body(floor);
  world.add_collider({out.floor, Plane{kUp, 0.0}, {}});

  RigidBody ceiling = floor;
  ceiling.name = "ceiling";
  ceiling.color = s.ceiling_color;
  out.ceiling = world.add_body(ceiling);
  world.add_collider({out.ceiling, Plane{-kUp, -s.ceiling_height}, {}});

  for (const RoomSpec& r : s.rooms) {
    for (const std::string& side : r.walls) add_wall(world, out, r, side, s.wall_thickness);
  }
  for (const PropSpec& p : s.props) {
    RigidBody b;
    b.name = p.name;
    b.mass = p.mass;
    b.kinematic = p.fixed;
    b.gravity = !p.fixed;
    b.transparent = p.transparent;
    b.color = p.color;
    b.position = p.position;
    b.orientation = yaw_rotation(deg_to_rad(p.yaw_deg));
    const BodyId id = world.add_body(b);
    world.add_collider({id, prop_shape(p), {}});
    out.props.push_back(id);
  }
  return out;
}

}  // namespace embsim
