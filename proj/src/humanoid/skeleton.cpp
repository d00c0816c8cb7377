#include "embsim/humanoid/skeleton.hpp"

#include "embsim/error.hpp"

#include <fstream>

namespace embsim {
namespace {

using nlohmann::json;

Vec3 vec3(const json& j) {
  if (!j.is_array() || j.size() != 3) {
    throw Error(ErrorCode::Configuration, "expected a 3-element array, got " + j.dump());
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

// Built-in toddler-scale rig: 18 bones, 34 rotational DOF.
constexpr const char* kSimple18 = R"json({
  "name": "simple18",
  "pelvis_height": 0.45,
  "root_collider": {"radius": 0.15, "half_height": 0.3, "center_height": 0.48},
  "head_bone": "head",
  "hand_bones": ["l_hand", "r_hand"],
  "eyes": {"offset": [0.0, 0.09, 0.075], "ipd": 0.06, "rest_pitch_deg": 25.0},
  "bones": [
    {"name": "pelvis", "parent": null, "offset": [0, 0, 0],
     "collider": {"half_extents": [0.09, 0.05, 0.06], "center": [0, 0, 0]}},
    {"name": "spine1", "parent": "pelvis", "offset": [0, 0.07, 0],
     "collider": {"half_extents": [0.085, 0.05, 0.055], "center": [0, 0.02, 0]},
     "joint": [{"axis": [1, 0, 0], "limits_deg": [-30, 45], "max_torque": 20},
               {"axis": [0, 1, 0], "limits_deg": [-30, 30], "max_torque": 20},
               {"axis": [0, 0, 1], "limits_deg": [-20, 20], "max_torque": 20}]},
    {"name": "spine2", "parent": "spine1", "offset": [0, 0.1, 0],
     "collider": {"half_extents": [0.095, 0.06, 0.06], "center": [0, 0.03, 0]},
     "joint": [{"axis": [1, 0, 0], "limits_deg": [-20, 30], "max_torque": 20},
               {"axis": [0, 1, 0], "limits_deg": [-30, 30], "max_torque": 20},
               {"axis": [0, 0, 1], "limits_deg": [-20, 20], "max_torque": 20}]},
    {"name": "head", "parent": "spine2", "offset": [0, 0.14, 0],
     "collider": {"half_extents": [0.07, 0.08, 0.075], "center": [0, 0.09, 0.01]},
     "joint": [{"axis": [1, 0, 0], "limits_deg": [-45, 60], "max_torque": 5},
               {"axis": [0, 1, 0], "limits_deg": [-80, 80], "max_torque": 5}]},
    {"name": "l_shoulder", "parent": "spine2", "offset": [0.12, 0.06, 0],
     "collider": {"half_extents": [0.03, 0.08, 0.03], "center": [0, -0.08, 0]},
     "joint": [{"axis": [1, 0, 0], "limits_deg": [-180, 60], "max_torque": 8},
               {"axis": [0, 0, 1], "limits_deg": [-30, 170], "max_torque": 8},
               {"axis": [0, 1, 0], "limits_deg": [-90, 90], "max_torque": 8}]},
    {"name": "l_elbow", "parent": "l_shoulder", "offset": [0, -0.16, 0],
     "collider": {"half_extents": [0.027, 0.07, 0.027], "center": [0, -0.07, 0]},
     "joint": [{"axis": [1, 0, 0], "limits_deg": [-150, 0], "max_torque": 5}]},
    {"name": "l_wrist", "parent": "l_elbow", "offset": [0, -0.14, 0],
     "collider": {"half_extents": [0.022, 0.012, 0.022], "center": [0, -0.01, 0]},
     "joint": [{"axis": [1, 0, 0], "limits_deg": [-70, 70], "max_torque": 2},
               {"axis": [0, 1, 0], "limits_deg": [-90, 90], "max_torque": 2}]},
    {"name": "l_hand", "parent": "l_wrist", "offset": [0, -0.025, 0],
     "collider": {"half_extents": [0.012, 0.04, 0.035], "center": [0, -0.04, 0]},
     "skin_subdiv": 4,
     "joint": [{"axis": [0, 0, 1], "limits_deg": [-20, 20], "max_torque": 1}]},
    {"name": "r_shoulder", "parent": "spine2", "offset": [-0.12, 0.06, 0],
     "collider": {"half_extents": [0.03, 0.08, 0.03], "center": [0, -0.08, 0]},
     "joint": [{"axis": [1, 0, 0], "limits_deg": [-180, 60], "max_torque": 8},
               {"axis": [0, 0, 1], "limits_deg": [-170, 30], "max_torque": 8},
               {"axis": [0, 1, 0], "limits_deg": [-90, 90], "max_torque": 8}]},
    {"name": "r_elbow", "parent": "r_shoulder", "offset": [0, -0.16, 0],
     "collider": {"half_extents": [0.027, 0.07, 0.027], "center": [0, -0.07, 0]},
     "joint": [{"axis": [1, 0, 0], "limits_deg": [-150, 0], "max_torque": 5}]},
    {"name": "r_wrist", "parent": "r_elbow", "offset": [0, -0.14, 0],
     "collider": {"half_extents": [0.022, 0.012, 0.022], "center": [0, -0.01, 0]},
     "joint": [{"axis": [1, 0, 0], "limits_deg": [-70, 70], "max_torque": 2},
               {"axis": [0, 1, 0], "limits_deg": [-90, 90], "max_torque": 2}]},
    {"name": "r_hand", "parent": "r_wrist", "offset": [0, -0.025, 0],
     "collider": {"half_extents": [0.012, 0.04, 0.035], "center": [0, -0.04, 0]},
     "skin_subdiv": 4,
     "joint": [{"axis": [0, 0, 1], "limits_deg": [-20, 20], "max_torque": 1}]},
    {"name": "l_hip", "parent": "pelvis", "offset": [0.05, -0.04, 0],
     "collider": {"half_extents": [0.04, 0.09, 0.04], "center": [0, -0.09, 0]},
     "joint": [{"axis": [1, 0, 0], "limits_deg": [-120, 30], "max_torque": 15},
               {"axis": [0, 0, 1], "limits_deg": [-30, 45], "max_torque": 15},
               {"axis": [0, 1, 0], "limits_deg": [-40, 40], "max_torque": 15}]},
    {"name": "l_knee", "parent": "l_hip", "offset": [0, -0.18, 0],
     "collider": {"half_extents": [0.035, 0.08, 0.035], "center": [0, -0.08, 0]},
     "joint": [{"axis": [1, 0, 0], "limits_deg": [0, 150], "max_torque": 10}]},
    {"name": "l_ankle", "parent": "l_knee", "offset": [0, -0.17, 0],
     "collider": {"half_extents": [0.03, 0.015, 0.06], "center": [0, -0.025, 0.03]},
     "joint": [{"axis": [1, 0, 0], "limits_deg": [-45, 30], "max_torque": 5},
               {"axis": [0, 0, 1], "limits_deg": [-20, 20], "max_torque": 5}]},
    {"name": "r_hip", "parent": "pelvis", "offset": [-0.05, -0.04, 0],
     "collider": {"half_extents": [0.04, 0.09, 0.04], "center": [0, -0.09, 0]},
     "joint": [{"axis": [1, 0, 0], "limits_deg": [-120, 30], "max_torque": 15},
               {"axis": [0, 0, 1], "limits_deg": [-45, 30], "max_torque": 15},
               {"axis": [0, 1, 0], "limits_deg": [-40, 40], "max_torque": 15}]},
    {"name": "r_knee", "parent": "r_hip", "offset": [0, -0.18, 0],
     "collider": {"half_extents": [0.035, 0.08, 0.035], "center": [0, -0.08, 0]},
     "joint": [{"axis": [1, 0, 0], "limits_deg": [0, 150], "max_torque": 10}]},
    {"name": "r_ankle", "parent": "r_knee", "offset": [0, -0.17, 0],
     "collider": {"half_extents": [0.03, 0.015, 0.06], "center": [0, -0.025, 0.03]},
     "joint": [{"axis": [1, 0, 0], "limits_deg": [-45, 30], "max_torque": 5},
               {"axis": [0, 0, 1], "limits_deg": [-20, 20], "max_torque": 5}]}
  ]
})json";

}  // namespace

int SkeletonConfig::bone_index(const std::string& bone_name) const {
  for (std::size_t i = 0; i < bones.size(); ++i) {
    if (bones[i].name == bone_name) return static_cast<int>(i);
  }
  return -1;
}

int SkeletonConfig::total_dof() const {
  int dof = 0;
  for (const BoneDef& b : bones) dof += static_cast<int>(b.joint_axes.size());
  return dof;
}

SkeletonConfig skeleton_from_json(const json& doc) {
  SkeletonConfig cfg;
  try {
    cfg.name = doc.value("name", "custom");
    cfg.pelvis_height = doc.value("pelvis_height", cfg.pelvis_height);
    if (doc.contains("root_collider")) {
      const json& rc = doc["root_collider"];
      cfg.root_radius = rc.value("radius", cfg.root_radius);
      cfg.root_half_height = rc.value("half_height", cfg.root_half_height);
      cfg.root_center_height = rc.value("center_height", cfg.root_center_height);
    }
    if (doc.contains("eyes")) {
      const json& e = doc["eyes"];
      if (e.contains("offset")) cfg.eye_offset = vec3(e["offset"]);
      cfg.ipd = e.value("ipd", cfg.ipd);
      cfg.rest_head_pitch = deg_to_rad(e.value("rest_pitch_deg", 0.0));
    }
    for (const json& jb : doc.at("bones")) {
      BoneDef b;
      b.name = jb.at("name").get<std::string>();
      if (jb.contains("parent") && !jb["parent"].is_null()) {
        const auto parent_name = jb["parent"].get<std::string>();
        b.parent = cfg.bone_index(parent_name);
        if (b.parent < 0) {
          throw Error(ErrorCode::Configuration,
                      "bone '" + b.name + "' lists unknown or later parent '" + parent_name + "'");
        }
      }
      if (jb.contains("offset")) b.offset = vec3(jb["offset"]);
      if (jb.contains("collider")) {
        b.collider_half = vec3(jb["collider"].at("half_extents"));
        if (jb["collider"].contains("center")) b.collider_center = vec3(jb["collider"]["center"]);
      }
      b.skin_subdiv = jb.value("skin_subdiv", 1);
      if (jb.contains("joint")) {
        for (const json& ja : jb["joint"]) {
          JointAxis ax;
          ax.axis = vec3(ja.at("axis")).normalized();
          const json& lim = ja.at("limits_deg");
          ax.lo = deg_to_rad(lim.at(0).get<double>());
          ax.hi = deg_to_rad(lim.at(1).get<double>());
          if (ax.lo > ax.hi) {
            throw Error(ErrorCode::Configuration, "joint limits reversed on bone '" + b.name + "'");
          }
          ax.max_torque = ja.value("max_torque", 1.0);
          const double rest = deg_to_rad(ja.value("rest_deg", 0.0));
          ax.angle = rest;
          b.joint_axes.push_back(ax);
          b.rest_angles.push_back(rest);
        }
        if (b.joint_axes.size() > 3) {
          throw Error(ErrorCode::Configuration, "bone '" + b.name + "' has more than 3 axes");
        }
      }
      if (cfg.bone_index(b.name) >= 0) {
        throw Error(ErrorCode::Configuration, "duplicate bone '" + b.name + "'");
      }
      cfg.bones.push_back(std::move(b));
    }
    if (cfg.bones.empty() || cfg.bones.front().parent != -1) {
      throw Error(ErrorCode::Configuration, "first bone must be the parentless root");
    }
    for (std::size_t i = 1; i < cfg.bones.size(); ++i) {
      if (cfg.bones[i].parent < 0) {
        throw Error(ErrorCode::Configuration, "skeleton must have a single root");
      }
    }
    cfg.head_bone = cfg.bone_index(doc.value("head_bone", std::string("head")));
    if (doc.contains("hand_bones")) {
      cfg.hand_bones = {cfg.bone_index(doc["hand_bones"].at(0).get<std::string>()),
                        cfg.bone_index(doc["hand_bones"].at(1).get<std::string>())};
    }
    if (cfg.head_bone < 0 || cfg.hand_bones[0] < 0 || cfg.hand_bones[1] < 0) {
      throw Error(ErrorCode::Configuration, "skeleton needs a head bone and two hand bones");
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Configuration, std::string("skeleton config: ") + e.what());
  }
  return cfg;
}

json skeleton_to_json(const SkeletonConfig& cfg) {
  json doc;
  doc["name"] = cfg.name;
  doc["pelvis_height"] = cfg.pelvis_height;
  doc["root_collider"] = {{"radius", cfg.root_radius},
                          {"half_height", cfg.root_half_height},
                          {"center_height", cfg.root_center_height}};
  doc["head_bone"] = cfg.bones[cfg.head_bone].name;
  doc["hand_bones"] = {cfg.bones[cfg.hand_bones[0]].name, cfg.bones[cfg.hand_bones[1]].name};
  doc["eyes"] = {{"offset", to_json(cfg.eye_offset)},
                 {"ipd", cfg.ipd},
                 {"rest_pitch_deg", rad_to_deg(cfg.rest_head_pitch)}};
  json bones = json::array();
  for (const BoneDef& b : cfg.bones) {
    json jb;
    jb["name"] = b.name;
    jb["parent"] = b.parent < 0 ? json(nullptr) : json(cfg.bones[b.parent].name);
    jb["offset"] = to_json(b.offset);
    jb["collider"] = {{"half_extents", to_json(b.collider_half)},
                      {"center", to_json(b.collider_center)}};
    jb["skin_subdiv"] = b.skin_subdiv;
    if (!b.joint_axes.empty()) {
      json axes = json::array();
      for (std::size_t k = 0; k < b.joint_axes.size(); ++k) {
        const JointAxis& ax = b.joint_axes[k];
        axes.push_back({{"axis", to_json(ax.axis)},
                        {"limits_deg", {rad_to_deg(ax.lo), rad_to_deg(ax.hi)}},
                        {"max_torque", ax.max_torque},
                        {"rest_deg", rad_to_deg(b.rest_angles[k])}});
      }
      jb["joint"] = axes;
    }
    bones.push_back(jb);
  }
  doc["bones"] = bones;
  return doc;
}

SkeletonConfig load_skeleton(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open skeleton file " + path.string());
  try {
    return skeleton_from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Configuration, path.string() + ": " + e.what());
  }
}

const SkeletonConfig& simple18() {
  static const SkeletonConfig cfg = skeleton_from_json(json::parse(kSimple18));
  return cfg;
}

SkinMesh build_skin(const SkeletonConfig& cfg, double skin_depth) {
  SkinMesh skin;
  for (std::size_t bi = 0; bi < cfg.bones.size(); ++bi) {
    const BoneDef& b = cfg.bones[bi];
    const MeshData box =
        make_box_mesh(b.collider_half + Vec3::Constant(skin_depth), std::max(1, b.skin_subdiv));
    for (const auto& tri : box.triangles) {
      SkinTriangle st;
      st.bone = static_cast<int>(bi);
      for (int k = 0; k < 3; ++k) st.local[k] = box.vertices[tri[k]] + b.collider_center;
      st.local_normal = (st.local[1] - st.local[0]).cross(st.local[2] - st.local[0]).normalized();
      skin.triangles.push_back(st);
    }
  }
  return skin;
}

std::vector<Pose> forward_kinematics(const SkeletonConfig& cfg, const Pose& root,
                                     const std::vector<std::vector<double>>& angles,
                                     const Quat& head_extra) {
  std::vector<Pose> out(cfg.bones.size());
  const Pose pelvis_frame = root * Pose{Vec3(0.0, cfg.pelvis_height, 0.0), Quat::Identity()};
  for (std::size_t i = 0; i < cfg.bones.size(); ++i) {
    const BoneDef& b = cfg.bones[i];
    Quat rot = Quat::Identity();
    for (std::size_t k = 0; k < b.joint_axes.size(); ++k) {
      rot = rot * Quat(Eigen::AngleAxisd(angles[i][k], b.joint_axes[k].axis));
    }
    if (static_cast<int>(i) == cfg.head_bone) rot = rot * head_extra;
    const Pose parent = b.parent < 0 ? pelvis_frame : out[b.parent];
    out[i] = parent * Pose{b.offset, rot.normalized()};
  }
  return out;
}

std::pair<Vec3, Vec3> bone_segment(const BoneDef& bone) {
  return {Vec3::Zero(), 2.0 * bone.collider_center};
}

}  // namespace embsim
