#include "embsim/physics/shapes.hpp"

#include "embsim/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace embsim {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kEps = 1e-12;

struct Interval {
  double t_in = kInf;
  double t_out = -kInf;
  bool empty() const { return t_in > t_out; }
};

Interval sphere_interval(const Vec3& center, double r, const Vec3& o, const Vec3& d) {
  const Vec3 oc = o - center;
  const double b = oc.dot(d);
  const double c = oc.squaredNorm() - r * r;
  const double disc = b * b - c;
  if (disc < 0.0) return {};
  const double s = std::sqrt(disc);
  return {-b - s, -b + s};
}

Interval box_interval(const Vec3& h, const Vec3& o, const Vec3& d) {
  Interval iv{-kInf, kInf};
  for (int i = 0; i < 3; ++i) {
    if (std::abs(d[i]) < kEps) {
      if (o[i] < -h[i] || o[i] > h[i]) return {};
      continue;
    }
    double t0 = (-h[i] - o[i]) / d[i];
    double t1 = (h[i] - o[i]) / d[i];
    if (t0 > t1) std::swap(t0, t1);
    iv.t_in = std::max(iv.t_in, t0);
    iv.t_out = std::min(iv.t_out, t1);
    if (iv.empty()) return {};
  }
  return iv;
}

Interval capsule_interval(const Capsule& c, const Vec3& o, const Vec3& d) {
  Interval result;
  auto merge = [&](const Interval& iv) {
    if (iv.empty()) return;
    result.t_in = std::min(result.t_in, iv.t_in);
    result.t_out = std::max(result.t_out, iv.t_out);
  };
  merge(sphere_interval(Vec3(0, c.half_height, 0), c.radius, o, d));
  merge(sphere_interval(Vec3(0, -c.half_height, 0), c.radius, o, d));

  // Finite cylinder between the cap centers.
  const double a = d.x() * d.x() + d.z() * d.z();
  const double b = o.x() * d.x() + o.z() * d.z();
  const double cc = o.x() * o.x() + o.z() * o.z() - c.radius * c.radius;
  Interval cyl{-kInf, kInf};
  if (a < kEps) {
    if (cc > 0.0) cyl = {};
  } else {
    const double disc = b * b - a * cc;
    if (disc < 0.0) {
      cyl = {};
    } else {
      const double s = std::sqrt(disc);
      cyl = {(-b - s) / a, (-b + s) / a};
    }
  }
  if (!cyl.empty()) {
    if (std::abs(d.y()) < kEps) {
      if (o.y() < -c.half_height || o.y() > c.half_height) cyl = {};
    } else {
      double t0 = (-c.half_height - o.y()) / d.y();
      double t1 = (c.half_height - o.y()) / d.y();
      if (t0 > t1) std::swap(t0, t1);
      cyl.t_in = std::max(cyl.t_in, t0);
      cyl.t_out = std::min(cyl.t_out, t1);
    }
  }
  merge(cyl);
  return result;
}

Interval plane_interval(const Plane& pl, const Vec3& o, const Vec3& d) {
  const double s = pl.normal.dot(o) - pl.offset;
  const double dn = pl.normal.dot(d);
  if (std::abs(dn) < kEps) {
    if (s <= 0.0) return {-kInf, kInf};
    return {};
  }
  const double t = -s / dn;
  if (dn < 0.0) return {t, kInf};
  return {-kInf, t};
}

Vec3 closest_on_segment(const Vec3& a, const Vec3& b, const Vec3& p) {
  const Vec3 ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 < kEps) return a;
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return a + t * ab;
}

// Closest point on triangle abc to p (Ericson, Real-Time Collision Detection 5.1.5).
Vec3 closest_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0 && d2 <= 0) return a;
  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0 && d4 <= d3) return b;
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) return a + (d1 / (d1 - d3)) * ab;
  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0 && d5 <= d6) return c;
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) return a + (d2 / (d2 - d6)) * ac;
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) {
    return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);
  }
  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

Vec3 triangle_normal(const MeshData& m, const std::array<int, 3>& t) {
  const Vec3& a = m.vertices[t[0]];
  return (m.vertices[t[1]] - a).cross(m.vertices[t[2]] - a).normalized();
}

struct MeshCrossing {
  double t = kInf;
  Vec3 normal = kUp;
  bool found = false;
};

// Nearest triangle crossing along a local-frame ray (both facings).
MeshCrossing mesh_nearest_crossing(const MeshData& m, const Vec3& o, const Vec3& d) {
  MeshCrossing best;
  for (const auto& tri : m.triangles) {
    const Vec3& v0 = m.vertices[tri[0]];
    const Vec3 e1 = m.vertices[tri[1]] - v0;
    const Vec3 e2 = m.vertices[tri[2]] - v0;
    const Vec3 pv = d.cross(e2);
    const double det = e1.dot(pv);
    if (std::abs(det) < 1e-14) continue;
    const double inv = 1.0 / det;
    const Vec3 tv = o - v0;
    const double u = tv.dot(pv) * inv;
    if (u < 0.0 || u > 1.0) continue;
    const Vec3 qv = tv.cross(e1);
    const double v = d.dot(qv) * inv;
    if (v < 0.0 || u + v > 1.0) continue;
    const double t = e2.dot(qv) * inv;
    if (t >= 0.0 && t < best.t) {
      best.t = t;
      best.normal = e1.cross(e2).normalized();
      best.found = true;
    }
  }
  return best;
}

bool mesh_contains(const MeshData& m, const Vec3& local) {
  static const Vec3 kProbe = Vec3(0.3713, 0.8402, 0.3953).normalized();
  const MeshCrossing c = mesh_nearest_crossing(m, local, kProbe);
  return c.found && c.normal.dot(kProbe) > 0.0;
}

SurfaceQuery local_sdf(const Shape& shape, const Vec3& p) {
  SurfaceQuery q;
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Sphere>) {
          const double len = p.norm();
          q.normal = len > kEps ? Vec3(p / len) : kUp;
          q.distance = len - s.radius;
          q.closest = q.normal * s.radius;
        } else if constexpr (std::is_same_v<T, Box>) {
          const Vec3& h = s.half_extents;
          const Vec3 qd = p.cwiseAbs() - h;
          if ((qd.array() > 0.0).any()) {
            const Vec3 clamped = p.cwiseMax(-h).cwiseMin(h);
            const Vec3 diff = p - clamped;
            q.distance = diff.norm();
            q.normal = diff / q.distance;
            q.closest = clamped;
          } else {
            int axis = 0;
            qd.maxCoeff(&axis);
            q.distance = qd[axis];
            q.normal = Vec3::Zero();
            q.normal[axis] = p[axis] >= 0.0 ? 1.0 : -1.0;
            q.closest = p;
            q.closest[axis] = q.normal[axis] * h[axis];
          }
        } else if constexpr (std::is_same_v<T, Capsule>) {
          const Vec3 c = closest_on_segment(Vec3(0, -s.half_height, 0),
                                            Vec3(0, s.half_height, 0), p);
          const Vec3 diff = p - c;
          const double len = diff.norm();
          q.normal = len > kEps ? Vec3(diff / len) : kLeft;
          q.distance = len - s.radius;
          q.closest = c + q.normal * s.radius;
        } else if constexpr (std::is_same_v<T, Plane>) {
          const Vec3 n = s.normal.normalized();
          q.distance = n.dot(p) - s.offset;
          q.normal = n;
          q.closest = p - q.distance * n;
        } else {
          const MeshData& m = *s.data;
          double best = kInf;
          Vec3 best_point = Vec3::Zero();
          Vec3 best_tri_normal = kUp;
          for (const auto& tri : m.triangles) {
            const Vec3 c = closest_on_triangle(p, m.vertices[tri[0]], m.vertices[tri[1]],
                                               m.vertices[tri[2]]);
            const double d2 = (p - c).squaredNorm();
            if (d2 < best) {
              best = d2;
              best_point = c;
              best_tri_normal = triangle_normal(m, tri);
            }
          }
          const double dist = std::sqrt(best);
          const bool inside = mesh_contains(m, p);
          q.distance = inside ? -dist : dist;
          q.closest = best_point;
          if (dist > 1e-9) {
            q.normal = (p - best_point) / dist;
            if (inside) q.normal = -q.normal;
          } else {
            q.normal = best_tri_normal;
          }
        }
      },
      shape);
  return q;
}

Interval local_interval(const Shape& shape, const Vec3& o, const Vec3& d) {
  switch (kind_of(shape)) {
    case ShapeKind::Sphere:
      return sphere_interval(Vec3::Zero(), std::get<Sphere>(shape).radius, o, d);
    case ShapeKind::Box: return box_interval(std::get<Box>(shape).half_extents, o, d);
    case ShapeKind::Capsule: return capsule_interval(std::get<Capsule>(shape), o, d);
    case ShapeKind::Plane: return plane_interval(std::get<Plane>(shape), o, d);
    case ShapeKind::Mesh: break;
  }
  return {};
}

void orient_outward(MeshData& m) {
  Vec3 center = Vec3::Zero();
  for (const Vec3& v : m.vertices) center += v;
  center /= static_cast<double>(m.vertices.size());
  for (auto& tri : m.triangles) {
    const Vec3 n = (m.vertices[tri[1]] - m.vertices[tri[0]])
                       .cross(m.vertices[tri[2]] - m.vertices[tri[0]]);
    const Vec3 centroid = (m.vertices[tri[0]] + m.vertices[tri[1]] + m.vertices[tri[2]]) / 3.0;
    if (n.dot(centroid - center) < 0.0) std::swap(tri[1], tri[2]);
  }
}

}  // namespace

const char* to_string(ShapeKind kind) noexcept {
  switch (kind) {
    case ShapeKind::Sphere: return "sphere";
    case ShapeKind::Box: return "box";
    case ShapeKind::Capsule: return "capsule";
    case ShapeKind::Plane: return "plane";
    case ShapeKind::Mesh: return "triangle-mesh";
  }
  return "unknown";
}

void validate_shape(const Shape& shape) {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::InvalidGeometry, msg); };
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Sphere>) {
          if (!(s.radius > 0.0)) fail("sphere radius must be positive");
        } else if constexpr (std::is_same_v<T, Box>) {
          if (!(s.half_extents.array() > 0.0).all()) fail("box half-extents must be positive");
        } else if constexpr (std::is_same_v<T, Capsule>) {
          if (!(s.radius > 0.0) || !(s.half_height > 0.0)) {
            fail("capsule radius and half-height must be positive");
          }
        } else if constexpr (std::is_same_v<T, Plane>) {
          if (s.normal.norm() < 1e-9) fail("plane normal must be nonzero");
        } else {
          if (!s.data || s.data->triangles.size() < 4) fail("triangle mesh must be closed");
          for (const auto& tri : s.data->triangles) {
            for (int idx : tri) {
              if (idx < 0 || idx >= static_cast<int>(s.data->vertices.size())) {
                fail("triangle mesh index out of range");
              }
            }
          }
        }
      },
      shape);
}

Aabb bounds(const Shape& shape, const Pose& pose) {
  const Eigen::Matrix3d rot = pose.orientation.toRotationMatrix();
  auto from_half = [&](const Vec3& center_local, const Vec3& h) {
    const Vec3 c = pose.apply(center_local);
    const Vec3 e = rot.cwiseAbs() * h;
    return Aabb{c - e, c + e};
  };
  switch (kind_of(shape)) {
    case ShapeKind::Sphere: {
      const double r = std::get<Sphere>(shape).radius;
      return {pose.position - Vec3::Constant(r), pose.position + Vec3::Constant(r)};
    }
    case ShapeKind::Box: return from_half(Vec3::Zero(), std::get<Box>(shape).half_extents);
    case ShapeKind::Capsule: {
      const auto& c = std::get<Capsule>(shape);
      Aabb box = from_half(Vec3::Zero(), Vec3(0.0, c.half_height, 0.0));
      return box.inflated(c.radius);
    }
    case ShapeKind::Plane: return Aabb{};
    case ShapeKind::Mesh: {
      Aabb box{Vec3::Constant(kInf), Vec3::Constant(-kInf)};
      for (const Vec3& v : std::get<TriangleMesh>(shape).data->vertices) {
        const Vec3 w = pose.apply(v);
        box.lo = box.lo.cwiseMin(w);
        box.hi = box.hi.cwiseMax(w);
      }
      return box;
    }
  }
  return Aabb{};
}

SurfaceQuery signed_distance(const Shape& shape, const Pose& pose, const Vec3& p) {
  SurfaceQuery q = local_sdf(shape, pose.inverse_apply(p));
  q.normal = pose.orientation * q.normal;
  q.closest = pose.apply(q.closest);
  return q;
}

std::optional<RayHit> raycast(const Shape& shape, const Pose& pose, const Vec3& origin,
                              const Vec3& dir, double t_max) {
  const Vec3 o = pose.inverse_apply(origin);
  const Vec3 d = pose.orientation.conjugate() * dir;
  if (kind_of(shape) == ShapeKind::Mesh) {
    const MeshCrossing c = mesh_nearest_crossing(*std::get<TriangleMesh>(shape).data, o, d);
    if (!c.found || c.t > t_max || c.normal.dot(d) >= 0.0) return std::nullopt;
    return RayHit{c.t, pose.orientation * c.normal};
  }
  const Interval iv = local_interval(shape, o, d);
  if (iv.empty() || iv.t_in < 0.0 || iv.t_in > t_max) return std::nullopt;
  RayHit hit{iv.t_in, kUp};
  hit.normal = pose.orientation * local_sdf(shape, o + iv.t_in * d).normal;
  return hit;
}

double exit_distance(const Shape& shape, const Pose& pose, const Vec3& p, const Vec3& dir) {
  const Vec3 o = pose.inverse_apply(p);
  const Vec3 d = pose.orientation.conjugate() * dir;
  if (kind_of(shape) == ShapeKind::Mesh) {
    const MeshCrossing c = mesh_nearest_crossing(*std::get<TriangleMesh>(shape).data, o, d);
    if (c.found && c.normal.dot(d) > 0.0) return c.t;
    return 0.0;
  }
  const Interval iv = local_interval(shape, o, d);
  if (iv.empty() || iv.t_in > 0.0 || iv.t_out < 0.0) return 0.0;
  return iv.t_out;
}

std::vector<Vec3> hull_vertices(const Shape& shape, const Pose& pose) {
  std::vector<Vec3> out;
  if (const auto* box = std::get_if<Box>(&shape)) {
    out.reserve(8);
    for (int i = 0; i < 8; ++i) {
      const Vec3 corner((i & 1) ? box->half_extents.x() : -box->half_extents.x(),
                        (i & 2) ? box->half_extents.y() : -box->half_extents.y(),
                        (i & 4) ? box->half_extents.z() : -box->half_extents.z());
      out.push_back(pose.apply(corner));
    }
  } else if (const auto* mesh = std::get_if<TriangleMesh>(&shape)) {
    out.reserve(mesh->data->vertices.size());
    for (const Vec3& v : mesh->data->vertices) out.push_back(pose.apply(v));
  }
  return out;
}

MeshData make_box_mesh(const Vec3& h, int subdiv) {
  if (subdiv < 1) throw Error(ErrorCode::InvalidGeometry, "box mesh subdivision must be >= 1");
  MeshData m;
  for (int axis = 0; axis < 3; ++axis) {
    const int u = (axis + 1) % 3;
    const int v = (axis + 2) % 3;
    for (int sign : {-1, 1}) {
      const int base = static_cast<int>(m.vertices.size());
      for (int i = 0; i <= subdiv; ++i) {
        for (int j = 0; j <= subdiv; ++j) {
          Vec3 p;
          p[axis] = sign * h[axis];
          p[u] = -h[u] + 2.0 * h[u] * i / subdiv;
          p[v] = -h[v] + 2.0 * h[v] * j / subdiv;
          m.vertices.push_back(p);
        }
      }
      auto idx = [&](int i, int j) { return base + i * (subdiv + 1) + j; };
      for (int i = 0; i < subdiv; ++i) {
        for (int j = 0; j < subdiv; ++j) {
          std::array<int, 3> t0{idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)};
          std::array<int, 3> t1{idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)};
          if (sign < 0) {
            std::swap(t0[1], t0[2]);
            std::swap(t1[1], t1[2]);
          }
          m.triangles.push_back(t0);
          m.triangles.push_back(t1);
        }
      }
    }
  }
  return m;
}

MeshData make_pyramid_mesh(double base_half, double height) {
  MeshData m;
  const double y0 = -height / 2.0;
  m.vertices = {{-base_half, y0, -base_half}, {base_half, y0, -base_half},
                {base_half, y0, base_half},   {-base_half, y0, base_half},
                {0.0, height / 2.0, 0.0}};
  m.triangles = {{0, 1, 2}, {0, 2, 3}, {0, 1, 4}, {1, 2, 4}, {2, 3, 4}, {3, 0, 4}};
  orient_outward(m);
  return m;
}

MeshData make_cylinder_mesh(double radius, double half_height, int segments) {
  MeshData m;
  for (int i = 0; i < segments; ++i) {
    const double a = 2.0 * kPi * i / segments;
    m.vertices.emplace_back(radius * std::cos(a), -half_height, radius * std::sin(a));
    m.vertices.emplace_back(radius * std::cos(a), half_height, radius * std::sin(a));
  }
  const int bottom = static_cast<int>(m.vertices.size());
  m.vertices.emplace_back(0.0, -half_height, 0.0);
  m.vertices.emplace_back(0.0, half_height, 0.0);
  for (int i = 0; i < segments; ++i) {
    const int j = (i + 1) % segments;
    m.triangles.push_back({2 * i, 2 * j, 2 * j + 1});
    m.triangles.push_back({2 * i, 2 * j + 1, 2 * i + 1});
    m.triangles.push_back({bottom, 2 * j, 2 * i});
    m.triangles.push_back({bottom + 1, 2 * i + 1, 2 * j + 1});
  }
  orient_outward(m);
  return m;
}

}  // namespace embsim
