#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>
#include <numbers>

namespace embsim {

using Vec3 = Eigen::Vector3d;
using Quat = Eigen::Quaterniond;

inline constexpr double kPi = std::numbers::pi;

// World convention: +y up, +z forward, +x left (right-handed).
inline const Vec3 kUp{0.0, 1.0, 0.0};
inline const Vec3 kForward{0.0, 0.0, 1.0};
inline const Vec3 kLeft{1.0, 0.0, 0.0};

struct Pose {
  Vec3 position = Vec3::Zero();
  Quat orientation = Quat::Identity();

  Vec3 apply(const Vec3& local) const { return position + orientation * local; }
  Vec3 inverse_apply(const Vec3& world) const {
    return orientation.conjugate() * (world - position);
  }
  Pose operator*(const Pose& child) const {
    return {apply(child.position), (orientation * child.orientation).normalized()};
  }
  Vec3 forward() const { return orientation * kForward; }
  Vec3 left() const { return orientation * kLeft; }
  Vec3 up() const { return orientation * kUp; }
};

inline double deg_to_rad(double deg) { return deg * kPi / 180.0; }
inline double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

inline Quat yaw_rotation(double yaw) { return Quat(Eigen::AngleAxisd(yaw, kUp)); }

inline Vec3 horizontal(const Vec3& v) { return {v.x(), 0.0, v.z()}; }

// Rotation whose +z axis points along `dir` with +y as close to `up` as possible.
inline Quat look_rotation(const Vec3& dir, const Vec3& up = kUp) {
  Vec3 f = dir.normalized();
  Vec3 l = up.cross(f);
  if (l.squaredNorm() < 1e-18) l = kLeft;  // looking straight up/down
  l.normalize();
  Vec3 u = f.cross(l);
  Eigen::Matrix3d m;
  m.col(0) = l;
  m.col(1) = u;
  m.col(2) = f;
  return Quat(m).normalized();
}

inline bool all_finite(const Vec3& v) {
  return std::isfinite(v.x()) && std::isfinite(v.y()) && std::isfinite(v.z());
}

}  // namespace embsim
