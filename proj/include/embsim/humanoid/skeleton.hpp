#pragma once

#include "embsim/math.hpp"
#include "embsim/physics/world.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace embsim {

struct BoneDef {
  std::string name;
  int parent = -1;
  Vec3 offset = Vec3::Zero();  // joint position in the parent bone frame
  Vec3 collider_half = Vec3::Constant(0.05);
  Vec3 collider_center = Vec3::Zero();  // in the bone frame
  int skin_subdiv = 1;
  /// Rotation axes of the joint connecting this bone to its parent (limits in
  /// radians in memory, degrees on disk). Empty for the root and fixed bones.
  std::vector<JointAxis> joint_axes;
  std::vector<double> rest_angles;
};

/// Skeleton description. Loaded from JSON; "simple18" ships built in, and the
/// same format describes larger rigs.
struct SkeletonConfig {
  std::string name;
  std::vector<BoneDef> bones;
  double pelvis_height = 0.45;
  double root_radius = 0.15;
  double root_half_height = 0.3;
  double root_center_height = 0.48;
  int head_bone = -1;
  std::array<int, 2> hand_bones{-1, -1};  // left, right
  Vec3 eye_offset{0.0, 0.09, 0.075};      // eye midpoint in the head frame
  double ipd = 0.06;
  /// Default head pitch (radians, positive looks down) applied at rest.
  double rest_head_pitch = 0.0;

  int bone_index(const std::string& name) const;
  int total_dof() const;
};

SkeletonConfig skeleton_from_json(const nlohmann::json& doc);
nlohmann::json skeleton_to_json(const SkeletonConfig& cfg);
SkeletonConfig load_skeleton(const std::filesystem::path& path);
const SkeletonConfig& simple18();

struct SkinTriangle {
  int bone = 0;
  std::array<Vec3, 3> local;  // vertices in the bone frame
  Vec3 local_normal = kUp;
};

/// Skin surface: each bone's collider box grown by `skin_depth`, each face
/// subdivided per the bone's skin_subdiv.
struct SkinMesh {
  std::vector<SkinTriangle> triangles;
};

SkinMesh build_skin(const SkeletonConfig& cfg, double skin_depth);

/// World pose of every bone given the agent root pose (ground point + yaw),
/// per-bone joint angles (one vector per bone, empty for fixed bones) and an
/// extra head rotation.
std::vector<Pose> forward_kinematics(const SkeletonConfig& cfg, const Pose& root,
                                     const std::vector<std::vector<double>>& angles,
                                     const Quat& head_extra = Quat::Identity());

/// Bone segment used by the nearest-bone rule: from the joint to the far end of
/// the bone's collider, in the bone frame.
std::pair<Vec3, Vec3> bone_segment(const BoneDef& bone);

}  // namespace embsim
