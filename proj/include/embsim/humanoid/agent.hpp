#pragma once

#include "embsim/humanoid/skeleton.hpp"
#include "embsim/physics/world.hpp"

#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace embsim {

/// Animation mode drives the avatar with primitive actions (walk, kick, grab);
/// joint-torque mode drives individual joint axes. Fixed per episode.
enum class ActionMode { Animation, JointTorque };

enum class Eye { Left = 0, Right = 1 };
enum class Hand { Left = 0, Right = 1 };

struct CameraIntrinsics {
  double vertical_fov_deg = 60.0;
  int width = 84;
  int height = 84;
};

struct AgentConfig {
  ActionMode mode = ActionMode::Animation;
  double interact_distance = 1.5;  // m, horizontal from the agent root
  double kick_impulse = 2.0;       // N·s
  CameraIntrinsics camera;
};

class Agent {
 public:
  /// Adds the root capsule and one box body per bone to `world`, and appends
  /// the skeleton's joints to world.joints().
  static Agent spawn(PhysicsWorld& world, std::shared_ptr<const SkeletonConfig> skeleton,
                     int index, AgentConfig config, const Vec3& position, double yaw);

  int index() const { return index_; }
  ActionMode mode() const { return config_.mode; }
  const AgentConfig& config() const { return config_; }
  const SkeletonConfig& skeleton() const { return *skeleton_; }
  BodyId root_body() const { return root_body_; }
  const std::vector<BodyId>& bone_bodies() const { return bone_bodies_; }
  std::optional<BodyId> grabbed() const { return grabbed_; }
  const std::optional<Vec3>& look_target() const { return look_target_; }

  /// Ground point under the agent with yaw-only orientation.
  Pose root_pose(const PhysicsWorld& world) const;
  double yaw() const { return yaw_; }
  void set_root(PhysicsWorld& world, const Vec3& position, double yaw);

  const std::vector<Pose>& bone_poses() const { return bone_poses_; }
  Pose head_pose() const { return bone_poses_[skeleton_->head_bone]; }
  Pose eye_pose(Eye eye) const;
  Pose hand_pose(Hand hand) const { return bone_poses_[skeleton_->hand_bones[int(hand)]]; }
  /// Centre of the palm collider in world coordinates.
  Vec3 palm_center(Hand hand) const;
  Vec3 gaze_direction() const;

  /// Per-bone joint angles (empty vectors for fixed bones).
  std::vector<std::vector<double>> joint_angles(const PhysicsWorld& world) const;
  /// Sets joint angles (flat, joint order) and zeroes joint velocities.
  void set_joint_angles(PhysicsWorld& world, std::span<const double> flat);
  std::span<Joint> joints(PhysicsWorld& world) const;
  std::span<const Joint> joints(const PhysicsWorld& world) const;

  /// Forward kinematics onto the bone bodies and any held object. Body
  /// velocities become finite differences over `dt` when dt > 0.
  void update_kinematics(PhysicsWorld& world, double dt);

  void walk(PhysicsWorld& world, double walk_speed, double turn_speed, double dt_control);
  void kick(PhysicsWorld& world, BodyId object);
  void grab(PhysicsWorld& world, BodyId object);
  /// No-op when nothing is held.
  void release(PhysicsWorld& world);
  void look_toward_point(const Vec3& target) { look_target_ = target; }
  void release_look() { look_target_.reset(); }
  /// Relative head rotation in degrees; positive up_down looks up, positive
  /// left_right turns left. Not limited by joint ranges.
  void rotate_head(double up_down_deg, double left_right_deg);
  void apply_torque(PhysicsWorld& world, std::span<const double> normalized);

  /// Bone orientations (w, x, y, z per bone), then joint angles, then joint
  /// angular velocities, all in joint/axis order. Length 4·bones + 2·DOF.
  std::vector<double> proprioception(const PhysicsWorld& world) const;

  bool is_visible(const PhysicsWorld& world, BodyId object, Eye eye) const;
  /// True when a transparent body lies between the eyes and the object.
  bool transparent_between(const PhysicsWorld& world, BodyId object) const;
  bool is_interactable(const PhysicsWorld& world, BodyId object) const;
  /// Interactable objects ordered by angle off the gaze axis, then distance, then id.
  std::vector<BodyId> interactable_objects(const PhysicsWorld& world) const;

  double horizontal_distance(const PhysicsWorld& world, BodyId object) const;

 private:
  Quat head_extra() const;
  bool ray_blocked(const PhysicsWorld& world, const Vec3& from, BodyId object,
                   bool transparent_only) const;

  std::shared_ptr<const SkeletonConfig> skeleton_;
  AgentConfig config_;
  int index_ = 0;
  BodyId root_body_ = 0;
  std::vector<BodyId> bone_bodies_;
  std::vector<int> bone_joint_;  // world joint index per bone, -1 if fixed
  std::size_t joint_begin_ = 0;
  std::size_t joint_count_ = 0;
  double yaw_ = 0.0;
  double head_pitch_ = 0.0;  // radians, positive looks down
  double head_turn_ = 0.0;   // radians, positive turns left
  std::optional<Vec3> look_target_;
  std::optional<BodyId> grabbed_;
  Pose grab_offset_;
  Hand grab_hand_ = Hand::Right;
  std::vector<Pose> bone_poses_;
};

}  // namespace embsim
