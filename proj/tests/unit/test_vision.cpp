#include "embsim/error.hpp"
#include "embsim/humanoid/agent.hpp"
#include "embsim/sensors/vision.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <memory>

using namespace embsim;

namespace {

BodyId add_sphere(PhysicsWorld& w, const Vec3& c, double r, const Vec3& color = Vec3::Ones()) {
  RigidBody b;
  b.kinematic = true;
  b.position = c;
  b.color = color;
  const BodyId id = w.add_body(b);
  w.add_collider({id, Sphere{r}, {}});
  return id;
}

BodyId add_box(PhysicsWorld& w, const Vec3& c, const Vec3& half, const Vec3& color) {
  RigidBody b;
  b.kinematic = true;
  b.position = c;
  b.color = color;
  const BodyId id = w.add_body(b);
  w.add_collider({id, Box{half}, {}});
  return id;
}

Camera camera_at(const Vec3& p) { return Camera{Pose{p, Quat::Identity()}, 60.0, 84, 84}; }

// Centroid column of the pixels showing `body`.
double centroid_x(const RenderResult& r, int width, int body) {
  double sum = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < r.ids.size(); ++i) {
    if (r.ids[i] == body) {
      sum += static_cast<double>(i % width) + 0.5;
      ++n;
    }
  }
  return n ? sum / n : std::nan("");
}

Image random_image(int c, int h, int w, unsigned seed) {
  Image img(c, h, w);
  unsigned s = seed;
  for (float& v : img.data) {
    s = s * 1664525u + 1013904223u;
    v = static_cast<float>((s >> 8) & 0xffff) / 65535.0f;
  }
  return img;
}

}  // namespace

TEST(Render, EmptySceneIsBackground) {
  PhysicsWorld w;
  Lighting light;
  const RenderResult r = render(w, camera_at(Vec3::Zero()), light);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < 84; ++y) {
      for (int x = 0; x < 84; ++x) {
        EXPECT_EQ(r.image.at(c, y, x), static_cast<float>(light.background[c]));
      }
    }
  }
  for (double d : r.depth) EXPECT_TRUE(std::isinf(d));
  for (int id : r.ids) EXPECT_EQ(id, -1);
}

TEST(Render, CentredSphereIsCentred) {
  PhysicsWorld w;
  const BodyId s = add_sphere(w, Vec3(0, 0, 4), 1.0);
  const RenderResult r = render(w, camera_at(Vec3::Zero()));
  const auto box = bounding_box(r.ids, 84, 84, static_cast<int>(s));
  ASSERT_TRUE(box);
  EXPECT_NEAR(box->center_x(), 42.0, 1.0);
  EXPECT_NEAR(box->center_y(), 42.0, 1.0);
}

TEST(Render, ShadingIdentity) {
  PhysicsWorld w;
  add_box(w, Vec3(0, 0, 3), Vec3(2, 2, 0.5), Vec3::Ones());
  Lighting light;
  light.to_light = Vec3(0, 0, -1);
  light.ambient = 0.0;
  light.intensity = 1.0;
  const RenderResult r = render(w, camera_at(Vec3::Zero()), light);
  for (int c = 0; c < 3; ++c) EXPECT_EQ(r.image.at(c, 42, 42), 1.0f);
  EXPECT_NEAR(r.depth[42 * 84 + 42], 2.5, 1e-3);
}

TEST(Render, TransparentBodiesAreSkipped) {
  PhysicsWorld w;
  const BodyId back = add_sphere(w, Vec3(0, 0, 4), 1.0);
  const BodyId pane = add_box(w, Vec3(0, 0, 2), Vec3(2, 2, 0.01), Vec3(0, 0, 1));
  w.body(pane).transparent = true;
  const RenderResult r = render(w, camera_at(Vec3::Zero()));
  EXPECT_EQ(r.ids[42 * 84 + 42], static_cast<int>(back));
}

TEST(Render, DeterministicAndInRange) {
  PhysicsWorld w;
  add_sphere(w, Vec3(0.3, 0.1, 3), 0.7, Vec3(0.9, 0.2, 0.1));
  add_box(w, Vec3(-1, -0.5, 4), Vec3(0.5, 0.5, 0.5), Vec3(0.1, 0.8, 0.3));
  RigidBody floor;
  floor.kinematic = true;
  const BodyId f = w.add_body(floor);
  w.add_collider({f, Plane{kUp, -1.0}, {}});
  const Camera cam = camera_at(Vec3::Zero());
  const RenderResult a = render(w, cam);
  const RenderResult b = render(w, cam);
  EXPECT_EQ(a.image.data, b.image.data);
  EXPECT_EQ(a.depth, b.depth);
  for (float v : a.image.data) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
  for (double d : a.depth) EXPECT_TRUE(d > 0.0);
}

TEST(Render, CameraValidation) {
  PhysicsWorld w;
  Camera cam = camera_at(Vec3::Zero());
  cam.width = 0;
  EXPECT_THROW(render(w, cam), Error);
  cam.width = 84;
  cam.vertical_fov_deg = 180.0;
  EXPECT_THROW(render(w, cam), Error);
}

TEST(Filters, AllOffIsIdentity) {
  const Image img = random_image(3, 20, 24, 1);
  const std::vector<double> depth(20 * 24, 2.0);
  EXPECT_EQ(apply_filters(img, depth, VisionConfig{}).data, img.data);
}

TEST(Filters, GrayscaleOfWhiteIsOne) {
  const Image img(3, 8, 8, 1.0f);
  VisionConfig cfg;
  cfg.grayscale = true;
  const Image g = apply_filters(img, std::vector<double>(64, 1.0), cfg);
  ASSERT_EQ(g.channels, 1);
  for (float v : g.data) EXPECT_NEAR(v, 1.0f, 1e-6);
}

TEST(Filters, LumaWeights) {
  Image img(3, 1, 1);
  img.at(0, 0, 0) = 1.0f;
  EXPECT_NEAR(to_grayscale(img).at(0, 0, 0), 0.299f, 1e-7);
  img.at(0, 0, 0) = 0.0f;
  img.at(1, 0, 0) = 1.0f;
  EXPECT_NEAR(to_grayscale(img).at(0, 0, 0), 0.587f, 1e-7);
}

TEST(Filters, DepthOfFieldAtFocusIsIdentity) {
  const Image img = random_image(3, 16, 16, 2);
  VisionConfig cfg;
  cfg.depth_of_field = true;
  cfg.aperture = 5.0;
  cfg.focal_distance = 1.7;
  EXPECT_EQ(apply_filters(img, std::vector<double>(256, 1.7), cfg).data, img.data);
  const Image blurred = apply_filters(img, std::vector<double>(256, 0.3), cfg);
  EXPECT_NE(blurred.data, img.data);
}

TEST(Filters, GrayscaleAndBlurCommute) {
  const Image img = random_image(3, 30, 30, 3);
  const Image a = gaussian_blur(to_grayscale(img), 1.5);
  const Image b = to_grayscale(gaussian_blur(img, 1.5));
  ASSERT_EQ(a.data.size(), b.data.size());
  for (std::size_t i = 0; i < a.data.size(); ++i) EXPECT_NEAR(a.data[i], b.data[i], 1e-6);
}

TEST(Filters, BlurPreservesConstantImage) {
  const Image img(3, 10, 10, 0.25f);
  for (float v : gaussian_blur(img, 2.0).data) EXPECT_NEAR(v, 0.25f, 1e-6);
}

TEST(Binocular, DisparityMatchesProjectiveGeometry) {
  const double ipd = 0.06;
  for (double z : {0.5, 0.8, 1.0, 2.0, 3.5, 5.0}) {
    PhysicsWorld w;
    const BodyId s = add_sphere(w, Vec3(0, 0, z), 0.08 * z);
    const Camera left = camera_at(Vec3(ipd / 2, 0, 0));
    const Camera right = camera_at(Vec3(-ipd / 2, 0, 0));
    const double xl = centroid_x(render(w, left), 84, static_cast<int>(s));
    const double xr = centroid_x(render(w, right), 84, static_cast<int>(s));
    const double expected = left.focal_px() * ipd / z;
    EXPECT_GT(xl - xr, 0.0) << "z=" << z;
    EXPECT_NEAR(xl - xr, expected, 1.0) << "z=" << z;
  }
}

TEST(Binocular, DisparityVanishesAtInfinity) {
  PhysicsWorld w;
  const BodyId s = add_sphere(w, Vec3(0, 0, 5000), 400);
  const auto l = render(w, camera_at(Vec3(0.03, 0, 0)));
  const auto r = render(w, camera_at(Vec3(-0.03, 0, 0)));
  const auto bl = bounding_box(l.ids, 84, 84, static_cast<int>(s));
  const auto br = bounding_box(r.ids, 84, 84, static_cast<int>(s));
  ASSERT_TRUE(bl && br);
  EXPECT_EQ(bl->x0, br->x0);
  EXPECT_EQ(bl->x1, br->x1);
}

TEST(Binocular, MirroredSceneSwapsEyes) {
  auto build = [](double sign) {
    PhysicsWorld w;
    add_sphere(w, Vec3(sign * 0.6, 0.2, 3), 0.5, Vec3(0.9, 0.1, 0.1));
    add_box(w, Vec3(sign * -0.8, -0.3, 4), Vec3(0.4, 0.6, 0.3), Vec3(0.1, 0.9, 0.2));
    return w;
  };
  const PhysicsWorld original = build(1.0);
  const PhysicsWorld mirrored = build(-1.0);
  const Image right = render(original, camera_at(Vec3(-0.03, 0, 0))).image;
  const Image left_m = render(mirrored, camera_at(Vec3(0.03, 0, 0))).image;
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < 84; ++y) {
      for (int x = 0; x < 84; ++x) {
        EXPECT_NEAR(left_m.at(c, y, x), right.at(c, y, 83 - x), 1e-6);
      }
    }
  }
}

TEST(Binocular, LookTowardPointCentresObjectInBothEyes) {
  PhysicsWorld w;
  RigidBody ground;
  ground.kinematic = true;
  ground.scenery = true;
  const BodyId g = w.add_body(ground);
  w.add_collider({g, Plane{kUp, 0.0}, {}});
  Agent agent = Agent::spawn(w, std::make_shared<SkeletonConfig>(simple18()), 0, AgentConfig{},
                             Vec3::Zero(), 0.3);
  const Vec3 target(0.7, 0.4, 1.6);
  const BodyId s = add_sphere(w, target, 0.1);
  agent.look_toward_point(target);
  agent.update_kinematics(w, 0.0);
  const StereoFrame f = render_binocular(w, agent, VisionConfig{});
  for (const auto& eye : f.eyes) {
    const auto box = bounding_box(eye.ids, 84, 84, static_cast<int>(s));
    ASSERT_TRUE(box);
    EXPECT_NEAR(box->center_x(), 42.0, 1.0);
    EXPECT_NEAR(box->center_y(), 42.0, 1.0);
  }
}
