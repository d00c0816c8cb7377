#include "embsim/error.hpp"
#include "embsim/humanoid/agent.hpp"
#include "embsim/sensors/tactile.hpp"

#include <gtest/gtest.h>

#include <memory>
#include <numeric>

using namespace embsim;

namespace {

struct Rig {
  PhysicsWorld world;
  Agent agent;
  TactileSkin skin{simple18()};

  Rig() {
    agent = Agent::spawn(world, std::make_shared<SkeletonConfig>(simple18()), 0, AgentConfig{},
                         Vec3::Zero(), 0.0);
    agent.update_kinematics(world, 0.0);
    skin.update(agent.bone_poses());
  }

  BodyId add_sphere(const Vec3& c, double r) {
    RigidBody b;
    b.kinematic = true;
    b.position = c;
    const BodyId id = world.add_body(b);
    world.add_collider({id, Sphere{r}, {}});
    return id;
  }

  double bone_sum(const std::vector<double>& reading, int bone) const {
    const auto v = skin.by_bone(reading, bone);
    return std::accumulate(v.begin(), v.end(), 0.0);
  }
};

}  // namespace

TEST(Tactile, ResponseLaw) {
  EXPECT_EQ(tactile_response(0.0, 0.01), 0.0);
  EXPECT_DOUBLE_EQ(tactile_response(0.005, 0.01), 0.5);
  EXPECT_EQ(tactile_response(0.02, 0.01), 1.0);
  EXPECT_THROW(TactileSkin(simple18(), 0.0), Error);
}

TEST(Tactile, LayoutAndBarycentrics) {
  const TactileSkin skin(simple18());
  EXPECT_EQ(skin.size(), 6 * skin.mesh().triangles.size());
  EXPECT_EQ(skin.size(), 3456u);
  for (const auto& b : taxel_barycentrics()) {
    EXPECT_NEAR(b[0] + b[1] + b[2], 1.0, 1e-15);
    for (double w : b) EXPECT_GE(w, 0.0);
  }
}

TEST(Tactile, BonePartition) {
  const TactileSkin skin(simple18());
  std::vector<int> seen(skin.size(), 0);
  for (int b = 0; b < static_cast<int>(simple18().bones.size()); ++b) {
    for (int i : skin.taxels_of_bone(b)) ++seen[i];
  }
  for (int n : seen) EXPECT_EQ(n, 1);
  EXPECT_THROW(skin.taxels_of_bone(99), Error);
}

TEST(Tactile, TaxelsFollowBonePoses) {
  TactileSkin skin(simple18());
  const auto& cfg = simple18();
  std::vector<Pose> rest(cfg.bones.size());
  skin.update(rest);
  for (std::size_t i = 0; i < skin.size(); ++i) {
    const Taxel& t = skin.taxels()[i];
    const auto& tri = skin.mesh().triangles[t.triangle];
    Vec3 expected = Vec3::Zero();
    for (int k = 0; k < 3; ++k) expected += t.barycentric[k] * tri.local[k];
    EXPECT_LT((skin.positions()[i] - expected).norm(), 1e-12);
  }
  const Vec3 shift(1.5, -0.2, 3.0);
  const Quat q = yaw_rotation(0.8);
  std::vector<Pose> moved(cfg.bones.size(), Pose{shift, q});
  const auto before = skin.positions();
  skin.update(moved);
  for (std::size_t i = 0; i < skin.size(); ++i) {
    EXPECT_LT((skin.positions()[i] - (q * before[i] + shift)).norm(), 1e-12);
    EXPECT_NEAR(skin.normals()[i].norm(), 1.0, 1e-12);
  }
}

TEST(Tactile, NoContactReadsZero) {
  Rig r;
  for (double v : r.skin.sense(r.world, 0)) EXPECT_EQ(v, 0.0);
}

TEST(Tactile, OwnBodiesAreIgnored) {
  Rig r;
  // The agent's bone colliders overlap its own skin at the joints.
  const auto d = r.skin.displacements(r.world, 0);
  EXPECT_TRUE(std::all_of(d.begin(), d.end(), [](double v) { return v == 0.0; }));
}

TEST(Tactile, ObjectOnRightPalmOnly) {
  Rig r;
  const auto& cfg = simple18();
  r.add_sphere(r.agent.palm_center(Hand::Right), 0.05);
  const auto reading = r.skin.sense(r.world, 0);
  for (double v : reading) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  EXPECT_GT(r.bone_sum(reading, cfg.hand_bones[1]), 0.0);
  for (double v : r.skin.by_bone(reading, cfg.hand_bones[0])) EXPECT_EQ(v, 0.0);
}

TEST(Tactile, TwoHandsTwoObjects) {
  Rig r;
  const auto& cfg = simple18();
  r.add_sphere(r.agent.palm_center(Hand::Left), 0.05);
  r.add_sphere(r.agent.palm_center(Hand::Right), 0.05);
  const auto reading = r.skin.sense(r.world, 0);
  EXPECT_GT(r.bone_sum(reading, cfg.hand_bones[0]), 0.0);
  EXPECT_GT(r.bone_sum(reading, cfg.hand_bones[1]), 0.0);
  EXPECT_EQ(r.bone_sum(reading, cfg.head_bone), 0.0);
}

TEST(Tactile, HiddenBodiesAreIgnored) {
  Rig r;
  const BodyId s = r.add_sphere(r.agent.palm_center(Hand::Right), 0.05);
  r.world.body(s).hidden = true;
  for (double v : r.skin.sense(r.world, 0)) EXPECT_EQ(v, 0.0);
}

TEST(Tactile, DeeperPressReadsHigher) {
  const auto& cfg = simple18();
  double prev = -1.0;
  for (double radius : {0.03, 0.045, 0.06}) {
    Rig r;
    r.add_sphere(r.agent.palm_center(Hand::Right), radius);
    const double s = r.bone_sum(r.skin.sense(r.world, 0), cfg.hand_bones[1]);
    EXPECT_GT(s, prev);
    prev = s;
  }
}
