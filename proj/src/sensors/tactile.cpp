#include "embsim/sensors/tactile.hpp"

#include "embsim/error.hpp"

#include <algorithm>
#include <cmath>

namespace embsim {

namespace {

double segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  const double len2 = ab.squaredNorm();
  const double t = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  return (p - (a + t * ab)).norm();
}

}  // namespace

double tactile_response(double displacement, double d_max) {
  if (displacement <= 0.0) return 0.0;
  return std::min(1.0, displacement / d_max);
}

const std::array<std::array<double, 3>, 6>& taxel_barycentrics() {
  static const std::array<std::array<double, 3>, 6> kBary = {{
      {0.5, 0.5, 0.0},
      {0.0, 0.5, 0.5},
      {0.5, 0.0, 0.5},
      {2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0},
      {1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0},
      {1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0},
  }};
  return kBary;
}

TactileSkin::TactileSkin(const SkeletonConfig& skeleton, double d_max)
    : d_max_(d_max), mesh_(build_skin(skeleton, d_max)) {
  if (!(d_max > 0.0)) throw Error(ErrorCode::Configuration, "d_max must be positive");
  const std::size_t bones = skeleton.bones.size();
  const std::vector<std::vector<double>> rest_angles = [&] {
    std::vector<std::vector<double>> a;
    for (const BoneDef& b : skeleton.bones) a.push_back(b.rest_angles);
    return a;
  }();
  const std::vector<Pose> rest = forward_kinematics(skeleton, Pose{}, rest_angles);
  std::vector<std::pair<Vec3, Vec3>> segments;
  for (std::size_t b = 0; b < bones; ++b) {
    const auto [s0, s1] = bone_segment(skeleton.bones[b]);
    segments.emplace_back(rest[b].apply(s0), rest[b].apply(s1));
  }

  by_bone_.assign(bones, {});
  by_skin_bone_.assign(bones, {});
  for (std::size_t t = 0; t < mesh_.triangles.size(); ++t) {
    const SkinTriangle& tri = mesh_.triangles[t];
    for (const auto& bc : taxel_barycentrics()) {
      Taxel x;
      x.triangle = static_cast<int>(t);
      x.skin_bone = tri.bone;
      x.barycentric = bc;
      x.local_position = bc[0] * tri.local[0] + bc[1] * tri.local[1] + bc[2] * tri.local[2];
      x.local_normal = tri.local_normal;
      const Vec3 p = rest[tri.bone].apply(x.local_position);
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t b = 0; b < bones; ++b) {
        const double d = segment_distance(p, segments[b].first, segments[b].second);
        if (d < best) {
          best = d;
          x.nearest_bone = static_cast<int>(b);
        }
      }
      const int index = static_cast<int>(taxels_.size());
      by_bone_[x.nearest_bone].push_back(index);
      by_skin_bone_[tri.bone].push_back(index);
      taxels_.push_back(x);
    }
  }
  positions_.resize(taxels_.size());
  normals_.resize(taxels_.size());
  bone_bounds_.resize(bones);
  update(rest);
}

void TactileSkin::update(std::span<const Pose> bone_poses) {
  if (bone_poses.size() != by_bone_.size()) {
    throw Error(ErrorCode::InvalidArgument, "bone pose count does not match the skeleton");
  }
  for (std::size_t i = 0; i < taxels_.size(); ++i) {
    const Pose& pose = bone_poses[taxels_[i].skin_bone];
    positions_[i] = pose.apply(taxels_[i].local_position);
    normals_[i] = pose.orientation * taxels_[i].local_normal;
  }
  for (std::size_t b = 0; b < by_skin_bone_.size(); ++b) {
    Aabb box{Vec3::Constant(std::numeric_limits<double>::infinity()),
             Vec3::Constant(-std::numeric_limits<double>::infinity())};
    for (int i : by_skin_bone_[b]) {
      box.lo = box.lo.cwiseMin(positions_[i]);
      box.hi = box.hi.cwiseMax(positions_[i]);
    }
    bone_bounds_[b] = box;
  }
}

std::vector<double> TactileSkin::displacements(const PhysicsWorld& world, int agent) const {
  std::vector<double> d(taxels_.size(), 0.0);
  const auto& bodies = world.bodies();
  for (const Collider& c : world.colliders()) {
    const RigidBody& body = bodies[c.body];
    if (body.hidden || (agent >= 0 && body.agent == agent)) continue;
    const Pose pose = c.world_pose(body);
    const Aabb cb = bounds(c.shape, pose);
    for (std::size_t b = 0; b < by_skin_bone_.size(); ++b) {
      if (by_skin_bone_[b].empty() || !cb.overlaps(bone_bounds_[b])) continue;
      for (int i : by_skin_bone_[b]) {
        if (!cb.contains(positions_[i])) continue;
        const double e = exit_distance(c.shape, pose, positions_[i], -normals_[i]);
        d[i] = std::max(d[i], e);
      }
    }
  }
  return d;
}

std::vector<double> TactileSkin::sense(const PhysicsWorld& world, int agent) const {
  std::vector<double> t = displacements(world, agent);
  for (double& v : t) v = tactile_response(v, d_max_);
  return t;
}

const std::vector<int>& TactileSkin::taxels_of_bone(int bone) const {
  if (bone < 0 || bone >= static_cast<int>(by_bone_.size())) {
    throw Error(ErrorCode::NotFound, "unknown bone " + std::to_string(bone));
  }
  return by_bone_[bone];
}

std::vector<double> TactileSkin::by_bone(std::span<const double> reading, int bone) const {
  if (reading.size() != taxels_.size()) {
    throw Error(ErrorCode::InvalidArgument, "reading length does not match taxel count");
  }
  std::vector<double> out;
  for (int i : taxels_of_bone(bone)) out.push_back(reading[i]);
  return out;
}

}  // namespace embsim
