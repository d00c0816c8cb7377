#pragma once

#include "embsim/math.hpp"
#include "embsim/physics/shapes.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace embsim {

using BodyId = std::uint32_t;

struct RigidBody {
  BodyId id = 0;
  std::string name;
  double mass = 1.0;
  Vec3 position = Vec3::Zero();
  Quat orientation = Quat::Identity();
  Vec3 linear_velocity = Vec3::Zero();
  Vec3 angular_velocity = Vec3::Zero();
  /// Kinematic bodies ignore forces and impulses; they move only by their set
  /// velocity. Static scenery is kinematic with zero velocity.
  bool kinematic = false;
  bool transparent = false;
  /// Hidden bodies take part in physics but are skipped by cameras and rays.
  bool hidden = false;
  Vec3 color = Vec3::Constant(0.8);
  /// Driven bodies have their pose written externally each step (agent
  /// skeletons, held objects); velocity is still used by contact resolution.
  bool driven = false;
  /// Walls, floors and ceilings: never candidates for interaction.
  bool scenery = false;
  bool gravity = true;
  double linear_damping = 0.0;
  /// Owning agent index, or -1 for environment objects.
  int agent = -1;
  bool agent_root = false;

  Pose pose() const { return {position, orientation}; }
  bool dynamic() const { return !kinematic; }
  double inverse_mass() const { return kinematic ? 0.0 : 1.0 / mass; }
};

struct Collider {
  BodyId body = 0;
  Shape shape;
  Pose local;  // collider frame relative to the body frame

  Pose world_pose(const RigidBody& b) const { return b.pose() * local; }
};

struct Contact {
  BodyId body_a = 0;
  BodyId body_b = 0;
  std::uint32_t collider_a = 0;
  std::uint32_t collider_b = 0;
  Vec3 point = Vec3::Zero();
  Vec3 normal = kUp;  // unit, from a into b
  double penetration = 0.0;
  double impulse = 0.0;
};

struct JointAxis {
  Vec3 axis = kLeft;  // in the parent bone frame
  double lo = -kPi;
  double hi = kPi;
  double max_torque = 1.0;
  double angle = 0.0;
  double velocity = 0.0;
  double torque = 0.0;  // applied this step, N·m
};

struct Joint {
  int parent_bone = -1;
  int child_bone = 0;
  std::vector<JointAxis> axes;
  double inertia = 0.05;  // kg·m² per axis
  double damping = 4.0;   // 1/s
};

/// Returns true when the pair should be tested.
using ContactFilter = std::function<bool(const RigidBody&, const RigidBody&)>;

/// Every overlapping collider pair accepted by `filter` (all pairs when empty),
/// sorted by (body_a, body_b, point). Throws UnsupportedPair for shape
/// combinations without a narrow-phase routine.
std::vector<Contact> detect_contacts(std::span<const RigidBody> bodies,
                                     std::span<const Collider> colliders,
                                     const ContactFilter& filter = {});

/// Narrow phase for one pair of posed shapes. Normal points from a into b.
std::optional<Contact> collide_shapes(const Shape& a, const Pose& pa, const Shape& b,
                                      const Pose& pb);

/// Agent/object interaction. `contact.normal` must point from the agent into
/// the object. Objects lighter than `mass_threshold` take the whole impulse and
/// are pushed out; heavier (or kinematic) objects stay put and the agent is
/// translated out of penetration with its approach velocity removed.
std::pair<RigidBody, RigidBody> resolve_light_heavy(RigidBody agent, RigidBody object,
                                                    const Contact& contact,
                                                    double mass_threshold,
                                                    double restitution = 0.0);

/// Impulse-based resolution for two bodies; writes the applied impulse into
/// `contact`.
void resolve_impulse(RigidBody& a, RigidBody& b, Contact& contact, double restitution);

int total_dof(std::span<const Joint> joints);

/// Sets per-axis torque = component × max_torque. Throws InvalidAction naming
/// the offending index for a wrong length or a component outside [-1, 1].
void apply_torque(std::span<Joint> joints, std::span<const double> normalized);

/// Semi-implicit Euler on joint angles with hard limit clamping.
void integrate_joints(std::span<Joint> joints, double dt);

struct PhysicsConfig {
  Vec3 gravity{0.0, -9.81, 0.0};
  double restitution = 0.0;
  double mass_threshold = 10.0;
};

class PhysicsWorld {
 public:
  explicit PhysicsWorld(PhysicsConfig config = {}) : config_(config) {}

  const PhysicsConfig& config() const { return config_; }

  BodyId add_body(RigidBody body);
  std::uint32_t add_collider(Collider collider);

  RigidBody& body(BodyId id);
  const RigidBody& body(BodyId id) const;
  std::vector<RigidBody>& bodies() { return bodies_; }
  const std::vector<RigidBody>& bodies() const { return bodies_; }
  const std::vector<Collider>& colliders() const { return colliders_; }
  std::vector<Joint>& joints() { return joints_; }
  const std::vector<Joint>& joints() const { return joints_; }
  /// Colliders attached to `id`.
  std::vector<std::uint32_t> colliders_of(BodyId id) const;

  /// Contacts resolved during the most recent step.
  const std::vector<Contact>& last_contacts() const { return last_contacts_; }

  /// Integrates joints and bodies, then detects and resolves contacts.
  /// Throws SimulationDiverged when any state becomes non-finite.
  void step(double dt);

  /// Filter used by step(): skips pairs that cannot move each other.
  bool should_collide(const RigidBody& a, const RigidBody& b) const;

 private:
  void resolve(Contact& c);

  PhysicsConfig config_;
  std::vector<RigidBody> bodies_;
  std::vector<Collider> colliders_;
  std::vector<Joint> joints_;
  std::vector<Contact> last_contacts_;
};

}  // namespace embsim
