#pragma once

#include "embsim/humanoid/skeleton.hpp"
#include "embsim/physics/world.hpp"

#include <array>
#include <span>
#include <vector>

namespace embsim {

/// Normalised response min(1, d / d_max) for compression d >= 0.
double tactile_response(double displacement, double d_max);

struct Taxel {
  int triangle = 0;
  int skin_bone = 0;     // bone carrying the triangle
  int nearest_bone = 0;  // bone the taxel reports under
  std::array<double, 3> barycentric{};
  Vec3 local_position = Vec3::Zero();  // skin_bone frame
  Vec3 local_normal = kUp;
};

/// Six taxels per skin triangle: the three edge midpoints, then the three
/// (2/3, 1/6, 1/6) points in cyclic order.
const std::array<std::array<double, 3>, 6>& taxel_barycentrics();

class TactileSkin {
 public:
  explicit TactileSkin(const SkeletonConfig& skeleton, double d_max = 0.01);

  double d_max() const { return d_max_; }
  std::size_t size() const { return taxels_.size(); }
  const std::vector<Taxel>& taxels() const { return taxels_; }
  const SkinMesh& mesh() const { return mesh_; }

  /// Moves taxels with the bones.
  void update(std::span<const Pose> bone_poses);
  const std::vector<Vec3>& positions() const { return positions_; }
  const std::vector<Vec3>& normals() const { return normals_; }

  /// Compression of each taxel by colliders not owned by `agent` (hidden
  /// bodies excluded), measured along the inward taxel normal.
  std::vector<double> displacements(const PhysicsWorld& world, int agent) const;
  std::vector<double> sense(const PhysicsWorld& world, int agent) const;

  /// Indices of the taxels assigned to `bone` by the nearest-bone rule.
  const std::vector<int>& taxels_of_bone(int bone) const;
  std::vector<double> by_bone(std::span<const double> reading, int bone) const;

 private:
  double d_max_;
  SkinMesh mesh_;
  std::vector<Taxel> taxels_;
  std::vector<Vec3> positions_;
  std::vector<Vec3> normals_;
  std::vector<std::vector<int>> by_bone_;
  std::vector<std::vector<int>> by_skin_bone_;
  std::vector<Aabb> bone_bounds_;
};

}  // namespace embsim
