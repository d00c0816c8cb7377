#include "embsim/humanoid/agent.hpp"

#include "embsim/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <tuple>

namespace embsim {

Agent Agent::spawn(PhysicsWorld& world, std::shared_ptr<const SkeletonConfig> skeleton, int index,
                   AgentConfig config, const Vec3& position, double yaw) {
  Agent a;
  a.skeleton_ = std::move(skeleton);
  a.config_ = config;
  a.index_ = index;
  a.yaw_ = yaw;
  a.head_pitch_ = a.skeleton_->rest_head_pitch;
  const SkeletonConfig& cfg = *a.skeleton_;

  RigidBody root;
  root.name = "agent" + std::to_string(index) + ".root";
  root.kinematic = true;
  root.driven = true;
  root.hidden = true;
  root.agent = index;
  root.agent_root = true;
  root.mass = 15.0;
  root.position = position;
  root.orientation = yaw_rotation(yaw);
  a.root_body_ = world.add_body(root);
  world.add_collider({a.root_body_, Capsule{cfg.root_radius, cfg.root_half_height},
                      Pose{Vec3(0.0, cfg.root_center_height, 0.0), Quat::Identity()}});

  a.joint_begin_ = world.joints().size();
  a.bone_joint_.assign(cfg.bones.size(), -1);
  for (std::size_t i = 0; i < cfg.bones.size(); ++i) {
    const BoneDef& b = cfg.bones[i];
    RigidBody body;
    body.name = "agent" + std::to_string(index) + "." + b.name;
    body.kinematic = true;
    body.driven = true;
    body.agent = index;
    body.mass = 1.0;
    body.color = Vec3(0.95, 0.8, 0.7);
    const BodyId id = world.add_body(body);
    world.add_collider({id, Box{b.collider_half}, Pose{b.collider_center, Quat::Identity()}});
    a.bone_bodies_.push_back(id);
    if (!b.joint_axes.empty()) {
      Joint j;
      j.parent_bone = b.parent;
      j.child_bone = static_cast<int>(i);
      j.axes = b.joint_axes;
      for (std::size_t k = 0; k < j.axes.size(); ++k) {
        j.axes[k].angle = b.rest_angles[k];
        j.axes[k].velocity = 0.0;
        j.axes[k].torque = 0.0;
      }
      a.bone_joint_[i] = static_cast<int>(world.joints().size());
      world.joints().push_back(std::move(j));
    }
  }
  a.joint_count_ = world.joints().size() - a.joint_begin_;
  a.update_kinematics(world, 0.0);
  return a;
}

Pose Agent::root_pose(const PhysicsWorld& world) const {
  const RigidBody& r = world.body(root_body_);
  return {r.position, yaw_rotation(yaw_)};
}

void Agent::set_root(PhysicsWorld& world, const Vec3& position, double yaw) {
  yaw_ = yaw;
  RigidBody& r = world.body(root_body_);
  r.position = position;
  r.orientation = yaw_rotation(yaw);
  r.linear_velocity.setZero();
}

Quat Agent::head_extra() const {
  return Quat(Eigen::AngleAxisd(head_turn_, kUp)) * Quat(Eigen::AngleAxisd(head_pitch_, kLeft));
}

Pose Agent::eye_pose(Eye eye) const {
  const double side = eye == Eye::Left ? 0.5 : -0.5;
  const Pose head = head_pose();
  const Vec3 pos = head.apply(skeleton_->eye_offset + Vec3(side * skeleton_->ipd, 0.0, 0.0));
  if (look_target_ && (*look_target_ - pos).norm() > 1e-9) {
    return {pos, look_rotation(*look_target_ - pos)};
  }
  return {pos, head.orientation};
}

Vec3 Agent::palm_center(Hand hand) const {
  const int bone = skeleton_->hand_bones[int(hand)];
  return bone_poses_[bone].apply(skeleton_->bones[bone].collider_center);
}

Vec3 Agent::gaze_direction() const {
  return (eye_pose(Eye::Left).forward() + eye_pose(Eye::Right).forward()).normalized();
}

std::span<Joint> Agent::joints(PhysicsWorld& world) const {
  return std::span<Joint>(world.joints()).subspan(joint_begin_, joint_count_);
}

std::span<const Joint> Agent::joints(const PhysicsWorld& world) const {
  return std::span<const Joint>(world.joints()).subspan(joint_begin_, joint_count_);
}

std::vector<std::vector<double>> Agent::joint_angles(const PhysicsWorld& world) const {
  std::vector<std::vector<double>> out(skeleton_->bones.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (bone_joint_[i] < 0) continue;
    for (const JointAxis& ax : world.joints()[bone_joint_[i]].axes) out[i].push_back(ax.angle);
  }
  return out;
}

void Agent::set_joint_angles(PhysicsWorld& world, std::span<const double> flat) {
  auto js = joints(world);
  if (static_cast<int>(flat.size()) != total_dof(js)) {
    throw Error(ErrorCode::InvalidArgument, "joint angle vector has wrong length");
  }
  std::size_t k = 0;
  for (Joint& j : js) {
    for (JointAxis& ax : j.axes) {
      ax.angle = std::clamp(flat[k++], ax.lo, ax.hi);
      ax.velocity = 0.0;
    }
  }
}

void Agent::update_kinematics(PhysicsWorld& world, double dt) {
  const std::vector<Pose> poses =
      forward_kinematics(*skeleton_, root_pose(world), joint_angles(world), head_extra());
  for (std::size_t i = 0; i < poses.size(); ++i) {
    RigidBody& b = world.body(bone_bodies_[i]);
    if (dt > 0.0) b.linear_velocity = (poses[i].position - b.position) / dt;
    b.position = poses[i].position;
    b.orientation = poses[i].orientation;
  }
  bone_poses_ = poses;
  if (grabbed_) {
    RigidBody& obj = world.body(*grabbed_);
    const Pose held = hand_pose(grab_hand_) * grab_offset_;
    if (dt > 0.0) obj.linear_velocity = (held.position - obj.position) / dt;
    obj.position = held.position;
    obj.orientation = held.orientation;
  }
}

void Agent::walk(PhysicsWorld& world, double walk_speed, double turn_speed, double dt_control) {
  if (config_.mode != ActionMode::Animation) {
    throw Error(ErrorCode::ModeConflict, "walk requires animation mode");
  }
  if (!std::isfinite(walk_speed) || !std::isfinite(turn_speed)) {
    throw Error(ErrorCode::InvalidAction, "walk parameters must be finite");
  }
  yaw_ += turn_speed * dt_control;
  RigidBody& r = world.body(root_body_);
  r.orientation = yaw_rotation(yaw_);
  const Vec3 velocity = r.orientation * kForward * walk_speed;
  r.position += velocity * dt_control;
  r.linear_velocity = velocity;
}

void Agent::kick(PhysicsWorld& world, BodyId object) {
  if (config_.mode != ActionMode::Animation) {
    throw Error(ErrorCode::ModeConflict, "kick requires animation mode");
  }
  if (!is_interactable(world, object)) {
    throw Error(ErrorCode::InteractionRefused,
                "object " + std::to_string(object) + " is not interactable");
  }
  RigidBody& obj = world.body(object);
  if (obj.kinematic) {
    throw Error(ErrorCode::InteractionRefused, "object " + std::to_string(object) + " is fixed");
  }
  Vec3 dir = horizontal(obj.position - world.body(root_body_).position);
  if (dir.norm() < 1e-9) dir = root_pose(world).forward();
  obj.linear_velocity += (config_.kick_impulse / obj.mass) * dir.normalized();
}

void Agent::grab(PhysicsWorld& world, BodyId object) {
  if (config_.mode != ActionMode::Animation) {
    throw Error(ErrorCode::ModeConflict, "grab requires animation mode");
  }
  if (grabbed_) {
    throw Error(ErrorCode::InteractionRefused, "hand already holds an object");
  }
  if (!is_interactable(world, object)) {
    throw Error(ErrorCode::InteractionRefused,
                "object " + std::to_string(object) + " is not interactable");
  }
  RigidBody& obj = world.body(object);
  if (obj.kinematic || obj.mass >= world.config().mass_threshold) {
    throw Error(ErrorCode::InteractionRefused,
                "object " + std::to_string(object) + " is too heavy to grab");
  }
  const double dl = (palm_center(Hand::Left) - obj.position).norm();
  const double dr = (palm_center(Hand::Right) - obj.position).norm();
  grab_hand_ = dl < dr ? Hand::Left : Hand::Right;
  const Pose hand = hand_pose(grab_hand_);
  grab_offset_ = Pose{hand.inverse_apply(obj.position),
                      (hand.orientation.conjugate() * obj.orientation).normalized()};
  obj.kinematic = true;
  obj.driven = true;
  obj.agent = index_;
  obj.linear_velocity.setZero();
  grabbed_ = object;
}

void Agent::release(PhysicsWorld& world) {
  if (!grabbed_) return;
  RigidBody& obj = world.body(*grabbed_);
  obj.kinematic = false;
  obj.driven = false;
  obj.agent = -1;
  obj.linear_velocity = world.body(bone_bodies_[skeleton_->hand_bones[int(grab_hand_)]]).linear_velocity;
  grabbed_.reset();
}

void Agent::rotate_head(double up_down_deg, double left_right_deg) {
  head_pitch_ -= deg_to_rad(up_down_deg);
  head_turn_ += deg_to_rad(left_right_deg);
}

void Agent::apply_torque(PhysicsWorld& world, std::span<const double> normalized) {
  if (config_.mode != ActionMode::JointTorque) {
    throw Error(ErrorCode::ModeConflict, "joint torques require joint-torque mode");
  }
  embsim::apply_torque(joints(world), normalized);
}

std::vector<double> Agent::proprioception(const PhysicsWorld& world) const {
  std::vector<double> out;
  const auto js = joints(world);
  const int dof = total_dof(js);
  out.reserve(4 * bone_poses_.size() + 2 * dof);
  for (const Pose& p : bone_poses_) {
    out.push_back(p.orientation.w());
    out.push_back(p.orientation.x());
    out.push_back(p.orientation.y());
    out.push_back(p.orientation.z());
  }
  for (const Joint& j : js) {
    for (const JointAxis& ax : j.axes) out.push_back(ax.angle);
  }
  for (const Joint& j : js) {
    for (const JointAxis& ax : j.axes) out.push_back(ax.velocity);
  }
  return out;
}

bool Agent::ray_blocked(const PhysicsWorld& world, const Vec3& from, BodyId object,
                        bool transparent_only) const {
  const Vec3 target = world.body(object).position;
  const Vec3 delta = target - from;
  const double dist = delta.norm();
  if (dist < 1e-9) return false;
  const Vec3 dir = delta / dist;
  const auto& bodies = world.bodies();
  for (const Collider& c : world.colliders()) {
    const RigidBody& b = bodies[c.body];
    if (c.body == object || b.agent == index_ || b.hidden) continue;
    if (b.transparent != transparent_only) continue;
    if (raycast(c.shape, c.world_pose(b), from, dir, dist)) return true;
  }
  return false;
}

bool Agent::is_visible(const PhysicsWorld& world, BodyId object, Eye eye) const {
  if (object >= world.bodies().size()) {
    throw Error(ErrorCode::NotFound, "unknown object " + std::to_string(object));
  }
  const Pose cam = eye_pose(eye);
  const Vec3 local = cam.inverse_apply(world.body(object).position);
  if (local.z() <= 1e-6) return false;
  const double tan_v = std::tan(deg_to_rad(config_.camera.vertical_fov_deg) / 2.0);
  const double aspect =
      static_cast<double>(config_.camera.width) / static_cast<double>(config_.camera.height);
  if (std::abs(local.y()) > local.z() * tan_v) return false;
  if (std::abs(local.x()) > local.z() * tan_v * aspect) return false;
  return !ray_blocked(world, cam.position, object, false);
}

bool Agent::transparent_between(const PhysicsWorld& world, BodyId object) const {
  const Vec3 mid = 0.5 * (eye_pose(Eye::Left).position + eye_pose(Eye::Right).position);
  return ray_blocked(world, mid, object, true);
}

double Agent::horizontal_distance(const PhysicsWorld& world, BodyId object) const {
  return horizontal(world.body(object).position - world.body(root_body_).position).norm();
}

bool Agent::is_interactable(const PhysicsWorld& world, BodyId object) const {
  if (object >= world.bodies().size()) {
    throw Error(ErrorCode::NotFound, "unknown object " + std::to_string(object));
  }
  const RigidBody& b = world.body(object);
  if (b.scenery || (b.agent >= 0 && b.agent != index_)) return false;
  if (horizontal_distance(world, object) > config_.interact_distance) return false;
  if (!is_visible(world, object, Eye::Left) && !is_visible(world, object, Eye::Right)) {
    return false;
  }
  return !transparent_between(world, object);
}

std::vector<BodyId> Agent::interactable_objects(const PhysicsWorld& world) const {
  const Vec3 mid = 0.5 * (eye_pose(Eye::Left).position + eye_pose(Eye::Right).position);
  const Vec3 gaze = gaze_direction();
  struct Ranked {
    double angle;
    double distance;
    BodyId id;
  };
  std::vector<Ranked> ranked;
  for (const RigidBody& b : world.bodies()) {
    if (b.scenery || b.hidden || b.agent >= 0) continue;
    if (!is_interactable(world, b.id)) continue;
    const Vec3 d = b.position - mid;
    const double cosang = std::clamp(gaze.dot(d.normalized()), -1.0, 1.0);
    ranked.push_back({std::acos(cosang), d.norm(), b.id});
  }
  std::sort(ranked.begin(), ranked.end(), [](const Ranked& x, const Ranked& y) {
    return std::tie(x.angle, x.distance, x.id) < std::tie(y.angle, y.distance, y.id);
  });
  std::vector<BodyId> out;
  for (const Ranked& r : ranked) out.push_back(r.id);
  return out;
}

}  // namespace embsim
