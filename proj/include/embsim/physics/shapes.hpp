#pragma once

#include "embsim/math.hpp"

#include <array>
#include <limits>
#include <memory>
#include <optional>
#include <variant>
#include <vector>

namespace embsim {

struct Sphere {
  double radius = 0.5;
};

struct Box {
  Vec3 half_extents = Vec3::Constant(0.5);
};

/// Capsule with its axis along local +y.
struct Capsule {
  double radius = 0.25;
  double half_height = 0.5;
};

/// Half-space {p : normal·p <= offset} in the collider frame; the solid side is
/// opposite the normal.
struct Plane {
  Vec3 normal = kUp;
  double offset = 0.0;
};

struct MeshData {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> triangles;  // counter-clockwise seen from outside
};

/// Closed triangle mesh.
struct TriangleMesh {
  std::shared_ptr<const MeshData> data;
};

using Shape = std::variant<Sphere, Box, Capsule, Plane, TriangleMesh>;

enum class ShapeKind { Sphere = 0, Box = 1, Capsule = 2, Plane = 3, Mesh = 4 };

inline ShapeKind kind_of(const Shape& s) { return static_cast<ShapeKind>(s.index()); }
const char* to_string(ShapeKind kind) noexcept;

/// Throws InvalidGeometry for non-positive dimensions, degenerate planes, or
/// open/empty meshes.
void validate_shape(const Shape& shape);

struct Aabb {
  Vec3 lo = Vec3::Constant(-std::numeric_limits<double>::infinity());
  Vec3 hi = Vec3::Constant(std::numeric_limits<double>::infinity());

  bool overlaps(const Aabb& o) const {
    return (lo.array() <= o.hi.array()).all() && (o.lo.array() <= hi.array()).all();
  }
  bool contains(const Vec3& p) const {
    return (lo.array() <= p.array()).all() && (p.array() <= hi.array()).all();
  }
  Aabb inflated(double margin) const {
    return {lo - Vec3::Constant(margin), hi + Vec3::Constant(margin)};
  }
};

Aabb bounds(const Shape& shape, const Pose& pose);

/// Signed distance to the surface (negative inside), the outward unit
/// gradient at the query point, and the closest surface point. World frame.
struct SurfaceQuery {
  double distance = 0.0;
  Vec3 normal = kUp;
  Vec3 closest = Vec3::Zero();
};

SurfaceQuery signed_distance(const Shape& shape, const Pose& pose, const Vec3& p);

struct RayHit {
  double t = 0.0;
  Vec3 normal = kUp;  // outward surface normal at the hit
};

/// First surface crossing with t in [0, t_max] for a ray starting outside the
/// shape. `dir` must be unit length. Rays starting inside report no hit.
std::optional<RayHit> raycast(const Shape& shape, const Pose& pose, const Vec3& origin,
                              const Vec3& dir,
                              double t_max = std::numeric_limits<double>::infinity());

/// Distance along unit `dir` from an interior point to where the ray leaves the
/// shape; 0 when `p` is outside.
double exit_distance(const Shape& shape, const Pose& pose, const Vec3& p, const Vec3& dir);

/// World-space corner/vertex set for polyhedral shapes (box, mesh); empty otherwise.
std::vector<Vec3> hull_vertices(const Shape& shape, const Pose& pose);

/// Closed axis-aligned box mesh, each face split into `subdiv`×`subdiv` quads.
MeshData make_box_mesh(const Vec3& half_extents, int subdiv = 1);
/// Square pyramid with base on y = -height/2 and apex on y = +height/2.
MeshData make_pyramid_mesh(double base_half, double height);
/// Closed prism approximating a cylinder along local y.
MeshData make_cylinder_mesh(double radius, double half_height, int segments = 16);

}  // namespace embsim
