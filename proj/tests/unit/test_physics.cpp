#include "embsim/error.hpp"
#include "embsim/physics/world.hpp"
#include "embsim/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

using namespace embsim;

namespace {

RigidBody make_body(const Vec3& pos, double mass = 1.0, bool kinematic = false) {
  RigidBody b;
  b.position = pos;
  b.mass = mass;
  b.kinematic = kinematic;
  return b;
}

RigidBody ground_body() {
  RigidBody g = make_body(Vec3::Zero(), 1.0, true);
  g.scenery = true;
  g.name = "ground";
  return g;
}

}  // namespace

TEST(DetectContacts, OverlappingSpheres) {
  std::vector<RigidBody> bodies{make_body({0, 0, 0}), make_body({0.8, 0, 0})};
  bodies[1].id = 1;
  std::vector<Collider> colliders{{0, Sphere{0.5}, {}}, {1, Sphere{0.5}, {}}};
  const auto contacts = detect_contacts(bodies, colliders);
  ASSERT_EQ(contacts.size(), 1u);
  EXPECT_NEAR(contacts[0].penetration, 0.2, 1e-12);
  EXPECT_NEAR((contacts[0].normal - Vec3(1, 0, 0)).norm(), 0.0, 1e-12);
  EXPECT_NEAR(contacts[0].normal.norm(), 1.0, 1e-6);
}

TEST(DetectContacts, TouchingSpheresHaveZeroPenetration) {
  std::vector<RigidBody> bodies{make_body({0, 0, 0}), make_body({1.0, 0, 0})};
  bodies[1].id = 1;
  std::vector<Collider> colliders{{0, Sphere{0.5}, {}}, {1, Sphere{0.5}, {}}};
  for (const Contact& c : detect_contacts(bodies, colliders)) {
    EXPECT_NEAR(c.penetration, 0.0, 1e-12);
  }
}

TEST(DetectContacts, SeparatedSpheresProduceNothing) {
  std::vector<RigidBody> bodies{make_body({0, 0, 0}), make_body({1.2, 0, 0})};
  bodies[1].id = 1;
  std::vector<Collider> colliders{{0, Sphere{0.5}, {}}, {1, Sphere{0.5}, {}}};
  EXPECT_TRUE(detect_contacts(bodies, colliders).empty());
}

TEST(DetectContacts, SphereOnGroundPlane) {
  std::vector<RigidBody> bodies{ground_body(), make_body({0, 0.3, 0})};
  bodies[1].id = 1;
  std::vector<Collider> colliders{{0, Plane{kUp, 0.0}, {}}, {1, Sphere{0.5}, {}}};
  const auto contacts = detect_contacts(bodies, colliders);
  ASSERT_EQ(contacts.size(), 1u);
  EXPECT_EQ(contacts[0].body_a, 0u);
  EXPECT_NEAR(contacts[0].penetration, 0.2, 1e-12);
  EXPECT_NEAR((contacts[0].normal - kUp).norm(), 0.0, 1e-12);
}

TEST(DetectContacts, PairOrderOnlyFlipsNormal) {
  const Pose pa{Vec3(0, 0, 0), Quat::Identity()};
  const Pose pb{Vec3(0.3, 0.5, 0.1), Quat(Eigen::AngleAxisd(0.4, Vec3(1, 1, 0).normalized()))};
  const Shape sa = Capsule{0.3, 0.4};
  const Shape sb = Box{Vec3(0.3, 0.2, 0.25)};
  auto ab = collide_shapes(sa, pa, sb, pb);
  auto ba = collide_shapes(sb, pb, sa, pa);
  ASSERT_TRUE(ab && ba);
  EXPECT_NEAR(ab->penetration, ba->penetration, 1e-9);
  EXPECT_NEAR((ab->normal + ba->normal).norm(), 0.0, 1e-6);
}

TEST(DetectContacts, MirroredSceneMirrorsContacts) {
  RngStream rng = derive_stream(5, 0);
  const Eigen::Vector3d mirror(-1, 1, 1);
  for (int trial = 0; trial < 50; ++trial) {
    const Vec3 a(rng.uniform(-0.3, 0.3), rng.uniform(0.1, 0.6), rng.uniform(-0.3, 0.3));
    const Vec3 b = a + Vec3(rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6));
    for (bool with_plane : {false, true}) {
      std::vector<RigidBody> bodies{make_body(a), make_body(b)};
      bodies[1].id = 1;
      std::vector<Collider> colliders{{0, Sphere{0.4}, {}},
                                      {1, with_plane ? Shape(Plane{kUp, 0.0}) : Shape(Sphere{0.35}), {}}};
      auto mirrored = bodies;
      mirrored[0].position = a.cwiseProduct(mirror);
      mirrored[1].position = b.cwiseProduct(mirror);
      if (with_plane) mirrored[1].position = bodies[1].position = Vec3::Zero();
      const auto c1 = detect_contacts(bodies, colliders);
      const auto c2 = detect_contacts(mirrored, colliders);
      ASSERT_EQ(c1.size(), c2.size());
      for (std::size_t i = 0; i < c1.size(); ++i) {
        EXPECT_NEAR((c1[i].point.cwiseProduct(mirror) - c2[i].point).norm(), 0.0, 1e-9);
        EXPECT_NEAR((c1[i].normal.cwiseProduct(mirror) - c2[i].normal).norm(), 0.0, 1e-9);
        EXPECT_NEAR(c1[i].penetration, c2[i].penetration, 1e-12);
      }
    }
  }
}

TEST(DetectContacts, UnsupportedPairIsAnError) {
  auto mesh = std::make_shared<MeshData>(make_box_mesh(Vec3::Constant(0.2)));
  std::vector<RigidBody> bodies{make_body({0, 0, 0}), make_body({0.1, 0, 0})};
  bodies[1].id = 1;
  std::vector<Collider> colliders{{0, TriangleMesh{mesh}, {}}, {1, TriangleMesh{mesh}, {}}};
  try {
    detect_contacts(bodies, colliders);
    FAIL() << "expected an unsupported-pair error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnsupportedPair);
  }
  std::vector<Collider> planes{{0, Plane{}, {}}, {1, Plane{}, {}}};
  EXPECT_THROW(detect_contacts(bodies, planes), Error);
}

TEST(DetectContacts, CapsuleBoxAndBoxPlane) {
  const auto cb = collide_shapes(Capsule{0.1, 0.3}, Pose{Vec3(0, 0.55, 0), Quat::Identity()},
                                 Box{Vec3(1, 0.2, 1)}, Pose{});
  ASSERT_TRUE(cb);
  EXPECT_NEAR(cb->penetration, 0.05, 1e-6);
  EXPECT_NEAR((cb->normal - Vec3(0, -1, 0)).norm(), 0.0, 1e-6);

  const auto bp = collide_shapes(Box{Vec3::Constant(0.1)}, Pose{Vec3(0, 0.08, 0), Quat::Identity()},
                                 Plane{kUp, 0.0}, Pose{});
  ASSERT_TRUE(bp);
  EXPECT_NEAR(bp->penetration, 0.02, 1e-12);
  EXPECT_NEAR(bp->point.y(), -0.02, 1e-12);
}

TEST(DetectContacts, MeshAgainstSphereAndBox) {
  auto pyramid = std::make_shared<MeshData>(make_pyramid_mesh(0.05, 0.08));
  const auto ms = collide_shapes(TriangleMesh{pyramid}, Pose{Vec3(0, 0.035, 0), Quat::Identity()},
                                 Box{Vec3(0.2, 0.1, 0.2)}, Pose{Vec3(0, -0.09, 0), Quat::Identity()});
  ASSERT_TRUE(ms);
  EXPECT_NEAR(ms->penetration, 0.015, 1e-9);
  const auto sp = collide_shapes(Sphere{0.05}, Pose{Vec3(0, 0.08, 0), Quat::Identity()},
                                 TriangleMesh{pyramid}, Pose{});
  ASSERT_TRUE(sp);
  EXPECT_GT(sp->penetration, 0.0);
}

TEST(LightHeavy, LightObjectTakesTheImpulse) {
  RigidBody agent = make_body({0, 0, 0}, 15.0, true);
  agent.agent = 0;
  agent.agent_root = true;
  agent.linear_velocity = Vec3(0, 0, 1);
  RigidBody ball = make_body({0, 0, 0.3}, 1.0);
  Contact c;
  c.normal = Vec3(0, 0, 1);
  c.penetration = 0.01;
  const auto [a2, b2] = resolve_light_heavy(agent, ball, c, 10.0);
  EXPECT_EQ(a2.linear_velocity, agent.linear_velocity);
  EXPECT_EQ(a2.position, agent.position);
  EXPECT_GT(b2.linear_velocity.dot(c.normal), 0.0);
  EXPECT_NEAR(b2.linear_velocity.z(), 1.0, 1e-12);
}

TEST(LightHeavy, HeavyObjectPushesAgentOut) {
  RigidBody agent = make_body({0, 0, 0}, 15.0, true);
  agent.agent_root = true;
  agent.linear_velocity = Vec3(0, 0, 1);
  RigidBody wall = make_body({0, 0, 1}, 100.0);
  Contact c;
  c.normal = Vec3(0, 0, 1);
  c.penetration = 0.05;
  const auto [a2, w2] = resolve_light_heavy(agent, wall, c, 10.0);
  EXPECT_NEAR((a2.position - Vec3(0, 0, -0.05)).norm(), 0.0, 1e-12);
  EXPECT_NEAR(a2.linear_velocity.z(), 0.0, 1e-12);
  EXPECT_EQ(w2.position, wall.position);
  EXPECT_EQ(w2.linear_velocity, wall.linear_velocity);
  // Residual penetration after the push.
  const double residual = c.penetration - (agent.position - a2.position).dot(c.normal);
  EXPECT_LE(residual, 1e-4);
}

TEST(LightHeavy, ZeroPenetrationZeroApproachIsNoOp) {
  RigidBody agent = make_body({0, 0, 0}, 15.0, true);
  RigidBody ball = make_body({0, 0, 0.5}, 1.0);
  Contact c;
  c.normal = Vec3(0, 0, 1);
  c.penetration = 0.0;
  const auto [a2, b2] = resolve_light_heavy(agent, ball, c, 10.0);
  EXPECT_EQ(a2.position, agent.position);
  EXPECT_EQ(b2.position, ball.position);
  EXPECT_EQ(b2.linear_velocity, ball.linear_velocity);
}

TEST(ResolveImpulse, RestitutionBoundAndPenetrationNeverGrows) {
  RngStream rng = derive_stream(11, 0);
  for (int trial = 0; trial < 500; ++trial) {
    RigidBody a = make_body(Vec3::Zero(), rng.uniform(0.1, 5.0));
    RigidBody b = make_body(Vec3(rng.uniform(0.3, 0.59), 0, 0), rng.uniform(0.1, 5.0));
    b.id = 1;
    a.linear_velocity = Vec3(rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3));
    b.linear_velocity = Vec3(rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3));
    if (rng.uniform() < 0.3) a.kinematic = true;
    const double e = rng.uniform();
    std::vector<Collider> colliders{{0, Sphere{0.3}, {}}, {1, Sphere{0.3}, {}}};
    std::vector<RigidBody> bodies{a, b};
    auto contacts = detect_contacts(bodies, colliders);
    ASSERT_EQ(contacts.size(), 1u);
    Contact c = contacts[0];
    const double pre = std::max(0.0, -(bodies[1].linear_velocity - bodies[0].linear_velocity).dot(c.normal));
    resolve_impulse(bodies[0], bodies[1], c, e);
    const double post = std::max(0.0, -(bodies[1].linear_velocity - bodies[0].linear_velocity).dot(c.normal));
    EXPECT_LE(post, e * pre + 1e-6);
    const auto after = detect_contacts(bodies, colliders);
    const double pen_after = after.empty() ? 0.0 : after[0].penetration;
    EXPECT_LE(pen_after, c.penetration + 1e-12);
  }
}

TEST(Torque, ScalesByMaxTorque) {
  std::vector<Joint> joints(1);
  joints[0].axes.resize(2);
  joints[0].axes[0].max_torque = 5.0;
  joints[0].axes[1].max_torque = 2.0;
  const std::vector<double> u{1.0, -0.5};
  apply_torque(joints, u);
  EXPECT_EQ(joints[0].axes[0].torque, 5.0);
  EXPECT_EQ(joints[0].axes[1].torque, -1.0);
}

TEST(Torque, ZeroVectorGivesNoActuation) {
  std::vector<Joint> joints(1);
  joints[0].axes.resize(3);
  const std::vector<double> u{0.0, 0.0, 0.0};
  apply_torque(joints, u);
  integrate_joints(joints, 0.004);
  for (const auto& ax : joints[0].axes) {
    EXPECT_EQ(ax.velocity, 0.0);
    EXPECT_EQ(ax.angle, 0.0);
  }
}

TEST(Torque, WrongLengthOrRangeIsInvalidAction) {
  std::vector<Joint> joints(1);
  joints[0].axes.resize(3);
  const std::vector<double> short_vec{0.0, 0.0};
  try {
    apply_torque(joints, short_vec);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidAction);
  }
  const std::vector<double> bad{0.0, 1.5, 0.0};
  try {
    apply_torque(joints, bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidAction);
    EXPECT_NE(std::string(e.what()).find("component 1"), std::string::npos);
  }
}

TEST(StepPhysics, FreeFallOneStep) {
  PhysicsWorld world;
  const BodyId id = world.add_body(make_body({0, 5, 0}));
  world.add_collider({id, Sphere{0.1}, {}});
  world.step(0.004);
  EXPECT_NEAR(world.body(id).linear_velocity.y(), -0.03924, 1e-15);
  EXPECT_EQ(world.body(id).linear_velocity.x(), 0.0);
  EXPECT_EQ(world.body(id).linear_velocity.z(), 0.0);
}

TEST(StepPhysics, RestingBodyStaysOnGround) {
  PhysicsWorld world;
  const BodyId g = world.add_body(ground_body());
  world.add_collider({g, Plane{kUp, 0.0}, {}});
  const BodyId s = world.add_body(make_body({0, 0.2, 0}));
  world.add_collider({s, Sphere{0.2}, {}});
  const BodyId b = world.add_body(make_body({1, 0.1, 0}));
  world.add_collider({b, Box{Vec3::Constant(0.1)}, {}});
  for (int i = 0; i < 250; ++i) {
    world.step(0.004);
    EXPECT_LE(std::abs(world.body(s).position.y() - 0.2), 1e-3);
    EXPECT_LE(std::abs(world.body(b).position.y() - 0.1), 1e-3);
    EXPECT_NEAR(world.body(s).orientation.norm(), 1.0, 1e-6);
  }
}

TEST(StepPhysics, JointAtUpperLimitStays) {
  PhysicsWorld world;
  Joint j;
  JointAxis ax;
  ax.lo = -1.0;
  ax.hi = 0.5;
  ax.angle = 0.5;
  ax.max_torque = 5.0;
  j.axes.push_back(ax);
  world.joints().push_back(j);
  for (int i = 0; i < 100; ++i) {
    const std::vector<double> u{1.0};
    apply_torque(world.joints(), u);
    world.step(0.004);
    EXPECT_EQ(world.joints()[0].axes[0].angle, 0.5);
  }
}

TEST(StepPhysics, JointLimitsHoldUnderRandomTorques) {
  PhysicsWorld world;
  Joint j;
  j.axes.resize(3);
  for (auto& ax : j.axes) {
    ax.lo = -0.3;
    ax.hi = 0.7;
    ax.max_torque = 10.0;
  }
  world.joints().push_back(j);
  RngStream rng = derive_stream(3, 0);
  for (int i = 0; i < 1000; ++i) {
    const std::vector<double> u{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    apply_torque(world.joints(), u);
    world.step(0.004);
    for (const auto& ax : world.joints()[0].axes) {
      ASSERT_GE(ax.angle, ax.lo);
      ASSERT_LE(ax.angle, ax.hi);
    }
  }
}

TEST(StepPhysics, NonFiniteStateIsReported) {
  PhysicsWorld world;
  RigidBody b = make_body({0, 1, 0});
  b.name = "probe";
  b.linear_velocity = Vec3(std::numeric_limits<double>::quiet_NaN(), 0, 0);
  world.add_body(b);
  try {
    world.step(0.004);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SimulationDiverged);
    EXPECT_NE(std::string(e.what()).find("probe"), std::string::npos);
  }
}

TEST(StepPhysics, ObjectsStopAgainstEachOtherInelastically) {
  PhysicsWorld world;
  RigidBody a = make_body({0, 1, 0});
  a.gravity = false;
  a.linear_velocity = Vec3(1, 0, 0);
  RigidBody b = make_body({0.45, 1, 0});
  b.gravity = false;
  const BodyId ia = world.add_body(a);
  const BodyId ib = world.add_body(b);
  world.add_collider({ia, Sphere{0.25}, {}});
  world.add_collider({ib, Sphere{0.25}, {}});
  world.step(0.004);
  ASSERT_EQ(world.last_contacts().size(), 1u);
  EXPECT_NEAR(world.body(ia).linear_velocity.x(), 0.5, 1e-12);
  EXPECT_NEAR(world.body(ib).linear_velocity.x(), 0.5, 1e-12);
  EXPECT_NEAR(world.last_contacts()[0].impulse, 0.5, 1e-12);
}

TEST(Shapes, ValidationRejectsBadDimensions) {
  EXPECT_THROW(validate_shape(Sphere{0.0}), Error);
  EXPECT_THROW(validate_shape(Box{Vec3(1, 0, 1)}), Error);
  EXPECT_THROW(validate_shape(Capsule{0.1, -1}), Error);
  EXPECT_THROW(validate_shape(TriangleMesh{}), Error);
  EXPECT_NO_THROW(validate_shape(TriangleMesh{std::make_shared<MeshData>(make_cylinder_mesh(0.1, 0.1))}));
}

TEST(Shapes, RaycastAndExitDistance) {
  const Pose p{Vec3(0, 0, 2), Quat::Identity()};
  auto hit = raycast(Sphere{0.5}, p, Vec3::Zero(), kForward);
  ASSERT_TRUE(hit);
  EXPECT_NEAR(hit->t, 1.5, 1e-12);
  EXPECT_NEAR((hit->normal - Vec3(0, 0, -1)).norm(), 0.0, 1e-12);
  EXPECT_NEAR(exit_distance(Box{Vec3::Constant(0.5)}, p, Vec3(0, 0.3, 2), kUp), 0.2, 1e-12);
  EXPECT_EQ(exit_distance(Box{Vec3::Constant(0.5)}, p, Vec3(0, 0.8, 2), kUp), 0.0);
  auto mesh = std::make_shared<MeshData>(make_box_mesh(Vec3::Constant(0.5), 2));
  auto mhit = raycast(TriangleMesh{mesh}, p, Vec3::Zero(), kForward);
  ASSERT_TRUE(mhit);
  EXPECT_NEAR(mhit->t, 1.5, 1e-12);
  EXPECT_NEAR(exit_distance(TriangleMesh{mesh}, p, Vec3(0, 0.3, 2), kUp), 0.2, 1e-12);
  const auto q = signed_distance(TriangleMesh{mesh}, p, Vec3(0, 0.3, 2));
  EXPECT_NEAR(q.distance, -0.2, 1e-12);
}
