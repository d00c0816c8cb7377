#include "embsim/physics/world.hpp"

#include "embsim/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <tuple>

namespace embsim {
namespace {

std::optional<Contact> flipped(std::optional<Contact> c) {
  if (c) c->normal = -c->normal;
  return c;
}

[[noreturn]] void unsupported(ShapeKind a, ShapeKind b) {
  throw Error(ErrorCode::UnsupportedPair, std::string("no contact routine for ") +
                                              to_string(a) + " vs " + to_string(b));
}

std::optional<Contact> sphere_vs(double radius, const Vec3& center, const Shape& b,
                                 const Pose& pb) {
  const SurfaceQuery q = signed_distance(b, pb, center);
  const double pen = radius - q.distance;
  if (pen < 0.0) return std::nullopt;
  Contact c;
  c.point = q.closest;
  c.normal = -q.normal;
  c.penetration = pen;
  return c;
}

std::optional<Contact> capsule_vs(const Capsule& cap, const Pose& pc, const Shape& b,
                                  const Pose& pb) {
  const Vec3 p0 = pc.apply(Vec3(0, -cap.half_height, 0));
  const Vec3 p1 = pc.apply(Vec3(0, cap.half_height, 0));
  auto f = [&](double t) { return signed_distance(b, pb, p0 + t * (p1 - p0)).distance; };

  // Coarse scan then golden-section refinement; the distance along a segment is
  // convex for convex targets.
  constexpr int kSamples = 9;
  int best = 0;
  double best_val = f(0.0);
  for (int i = 1; i < kSamples; ++i) {
    const double v = f(static_cast<double>(i) / (kSamples - 1));
    if (v < best_val) {
      best_val = v;
      best = i;
    }
  }
  double lo = std::max(0.0, (best - 1.0) / (kSamples - 1));
  double hi = std::min(1.0, (best + 1.0) / (kSamples - 1));
  constexpr double kGolden = 0.6180339887498949;
  double x1 = hi - kGolden * (hi - lo), x2 = lo + kGolden * (hi - lo);
  double f1 = f(x1), f2 = f(x2);
  for (int it = 0; it < 40 && hi - lo > 1e-9; ++it) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - kGolden * (hi - lo);
      f1 = f(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + kGolden * (hi - lo);
      f2 = f(x2);
    }
  }
  double t = 0.5 * (lo + hi);
  double val = f(t);
  if (best_val < val) {
    t = static_cast<double>(best) / (kSamples - 1);
  }
  return sphere_vs(cap.radius, p0 + t * (p1 - p0), b, pb);
}

// Closest points between segments p1q1 and p2q2 (Ericson 5.1.9).
std::pair<Vec3, Vec3> closest_between_segments(const Vec3& p1, const Vec3& q1, const Vec3& p2,
                                               const Vec3& q2) {
  const Vec3 d1 = q1 - p1, d2 = q2 - p2, r = p1 - p2;
  const double a = d1.squaredNorm(), e = d2.squaredNorm(), f = d2.dot(r);
  double s = 0.0, t = 0.0;
  if (a <= 1e-15 && e <= 1e-15) return {p1, p2};
  if (a <= 1e-15) {
    t = std::clamp(f / e, 0.0, 1.0);
  } else {
    const double c = d1.dot(r);
    if (e <= 1e-15) {
      s = std::clamp(-c / a, 0.0, 1.0);
    } else {
      const double b = d1.dot(d2);
      const double denom = a * e - b * b;
      s = denom > 1e-15 ? std::clamp((b * f - c * e) / denom, 0.0, 1.0) : 0.0;
      t = (b * s + f) / e;
      if (t < 0.0) {
        t = 0.0;
        s = std::clamp(-c / a, 0.0, 1.0);
      } else if (t > 1.0) {
        t = 1.0;
        s = std::clamp((b - c) / a, 0.0, 1.0);
      }
    }
  }
  return {p1 + d1 * s, p2 + d2 * t};
}

std::optional<Contact> capsule_capsule(const Capsule& a, const Pose& pa, const Capsule& b,
                                       const Pose& pb) {
  const auto [ca, cb] = closest_between_segments(
      pa.apply(Vec3(0, -a.half_height, 0)), pa.apply(Vec3(0, a.half_height, 0)),
      pb.apply(Vec3(0, -b.half_height, 0)), pb.apply(Vec3(0, b.half_height, 0)));
  const Vec3 diff = cb - ca;
  const double dist = diff.norm();
  const double pen = a.radius + b.radius - dist;
  if (pen < 0.0) return std::nullopt;
  Contact c;
  c.normal = dist > 1e-12 ? Vec3(diff / dist) : kUp;
  c.point = ca + c.normal * (a.radius - 0.5 * pen);
  c.penetration = pen;
  return c;
}

std::optional<Contact> hull_vs_plane(const Shape& hull, const Pose& ph, const Shape& plane,
                                     const Pose& pp) {
  Contact c;
  c.penetration = -1.0;
  Vec3 sum = Vec3::Zero();
  int count = 0;
  Vec3 plane_normal = kUp;
  for (const Vec3& v : hull_vertices(hull, ph)) {
    const SurfaceQuery q = signed_distance(plane, pp, v);
    plane_normal = q.normal;
    if (q.distance < 0.0) {
      sum += v;
      ++count;
      c.penetration = std::max(c.penetration, -q.distance);
    }
  }
  if (count == 0) return std::nullopt;
  c.point = sum / count;
  c.normal = -plane_normal;
  return c;
}

std::optional<Contact> hull_vs_hull(const Shape& a, const Pose& pa, const Shape& b,
                                    const Pose& pb) {
  std::optional<Contact> best;
  for (const Vec3& v : hull_vertices(a, pa)) {
    const SurfaceQuery q = signed_distance(b, pb, v);
    if (q.distance < 0.0 && (!best || -q.distance > best->penetration)) {
      best = Contact{};
      best->point = v;
      best->normal = -q.normal;
      best->penetration = -q.distance;
    }
  }
  for (const Vec3& v : hull_vertices(b, pb)) {
    const SurfaceQuery q = signed_distance(a, pa, v);
    if (q.distance < 0.0 && (!best || -q.distance > best->penetration)) {
      best = Contact{};
      best->point = v;
      best->normal = q.normal;
      best->penetration = -q.distance;
    }
  }
  return best;
}

void push_apart(RigidBody& a, RigidBody& b, const Vec3& n, double pen, double wa, double wb) {
  const double total = wa + wb;
  if (total <= 0.0 || pen <= 0.0) return;
  a.position -= n * (pen * wa / total);
  b.position += n * (pen * wb / total);
}

// Returns the impulse magnitude given to the object.
double light_heavy_in_place(RigidBody& agent, RigidBody& object, const Vec3& n, double pen,
                            double mass_threshold, double restitution) {
  const bool heavy = object.kinematic || object.mass >= mass_threshold;
  if (heavy) {
    if (pen > 0.0) agent.position -= n * pen;
    const double vn = agent.linear_velocity.dot(n);
    if (vn > 0.0) agent.linear_velocity -= vn * n;
    return 0.0;
  }
  const double v_rel = (object.linear_velocity - agent.linear_velocity).dot(n);
  double j = 0.0;
  if (v_rel < 0.0) {
    j = -(1.0 + restitution) * v_rel * object.mass;
    object.linear_velocity += (j / object.mass) * n;
  }
  if (pen > 0.0) object.position += n * pen;
  return j;
}

}  // namespace

std::optional<Contact> collide_shapes(const Shape& a, const Pose& pa, const Shape& b,
                                      const Pose& pb) {
  const ShapeKind ka = kind_of(a), kb = kind_of(b);
  if (ka == ShapeKind::Sphere) return sphere_vs(std::get<Sphere>(a).radius, pa.position, b, pb);
  if (kb == ShapeKind::Sphere) {
    return flipped(sphere_vs(std::get<Sphere>(b).radius, pb.position, a, pa));
  }
  if (ka == ShapeKind::Capsule && kb == ShapeKind::Capsule) {
    return capsule_capsule(std::get<Capsule>(a), pa, std::get<Capsule>(b), pb);
  }
  if (ka == ShapeKind::Capsule) return capsule_vs(std::get<Capsule>(a), pa, b, pb);
  if (kb == ShapeKind::Capsule) return flipped(capsule_vs(std::get<Capsule>(b), pb, a, pa));
  if (ka == ShapeKind::Plane && kb == ShapeKind::Plane) unsupported(ka, kb);
  if (ka == ShapeKind::Plane) return flipped(hull_vs_plane(b, pb, a, pa));
  if (kb == ShapeKind::Plane) return hull_vs_plane(a, pa, b, pb);
  if (ka == ShapeKind::Mesh && kb == ShapeKind::Mesh) unsupported(ka, kb);
  return hull_vs_hull(a, pa, b, pb);
}

std::vector<Contact> detect_contacts(std::span<const RigidBody> bodies,
                                     std::span<const Collider> colliders,
                                     const ContactFilter& filter) {
  const std::size_t n = colliders.size();
  std::vector<Pose> poses(n);
  std::vector<Aabb> boxes(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (colliders[i].body >= bodies.size()) {
      throw Error(ErrorCode::NotFound,
                  "collider " + std::to_string(i) + " references a missing body");
    }
    poses[i] = colliders[i].world_pose(bodies[colliders[i].body]);
    boxes[i] = bounds(colliders[i].shape, poses[i]);
  }

  std::vector<Contact> out;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const Collider& ci = colliders[i];
      const Collider& cj = colliders[j];
      if (ci.body == cj.body) continue;
      if (filter && !filter(bodies[ci.body], bodies[cj.body])) continue;
      if (!boxes[i].overlaps(boxes[j])) continue;
      auto c = collide_shapes(ci.shape, poses[i], cj.shape, poses[j]);
      if (!c) continue;
      c->body_a = ci.body;
      c->body_b = cj.body;
      c->collider_a = static_cast<std::uint32_t>(i);
      c->collider_b = static_cast<std::uint32_t>(j);
      if (c->body_a > c->body_b) {
        std::swap(c->body_a, c->body_b);
        std::swap(c->collider_a, c->collider_b);
        c->normal = -c->normal;
      }
      out.push_back(*c);
    }
  }
  std::sort(out.begin(), out.end(), [](const Contact& x, const Contact& y) {
    return std::tie(x.body_a, x.body_b, x.point.x(), x.point.y(), x.point.z(), x.collider_a,
                    x.collider_b) < std::tie(y.body_a, y.body_b, y.point.x(), y.point.y(),
                                             y.point.z(), y.collider_a, y.collider_b);
  });
  return out;
}

std::pair<RigidBody, RigidBody> resolve_light_heavy(RigidBody agent, RigidBody object,
                                                    const Contact& contact,
                                                    double mass_threshold,
                                                    double restitution) {
  light_heavy_in_place(agent, object, contact.normal, contact.penetration, mass_threshold,
                       restitution);
  return {std::move(agent), std::move(object)};
}

void resolve_impulse(RigidBody& a, RigidBody& b, Contact& c, double restitution) {
  const double wa = a.inverse_mass(), wb = b.inverse_mass();
  if (wa + wb <= 0.0) return;
  const Vec3& n = c.normal;
  const double v_rel = (b.linear_velocity - a.linear_velocity).dot(n);
  if (v_rel < 0.0) {
    const double j = -(1.0 + restitution) * v_rel / (wa + wb);
    a.linear_velocity -= (j * wa) * n;
    b.linear_velocity += (j * wb) * n;
    c.impulse = j;
  }
  push_apart(a, b, n, c.penetration, wa, wb);
}

int total_dof(std::span<const Joint> joints) {
  int dof = 0;
  for (const Joint& j : joints) dof += static_cast<int>(j.axes.size());
  return dof;
}

void apply_torque(std::span<Joint> joints, std::span<const double> normalized) {
  const int dof = total_dof(joints);
  if (static_cast<int>(normalized.size()) != dof) {
    throw Error(ErrorCode::InvalidAction, "torque vector has length " +
                                              std::to_string(normalized.size()) +
                                              ", expected " + std::to_string(dof));
  }
  for (std::size_t i = 0; i < normalized.size(); ++i) {
    const double u = normalized[i];
    if (!std::isfinite(u) || u < -1.0 || u > 1.0) {
      throw Error(ErrorCode::InvalidAction,
                  "torque component " + std::to_string(i) + " outside [-1, 1]");
    }
  }
  std::size_t k = 0;
  for (Joint& j : joints) {
    for (JointAxis& ax : j.axes) {
      ax.torque = normalized[k++] * ax.max_torque;
    }
  }
}

void integrate_joints(std::span<Joint> joints, double dt) {
  for (Joint& j : joints) {
    for (JointAxis& ax : j.axes) {
      ax.velocity += (ax.torque / j.inertia - j.damping * ax.velocity) * dt;
      ax.angle += ax.velocity * dt;
      if (ax.angle >= ax.hi) {
        ax.angle = ax.hi;
        if (ax.velocity > 0.0) ax.velocity = 0.0;
      } else if (ax.angle <= ax.lo) {
        ax.angle = ax.lo;
        if (ax.velocity < 0.0) ax.velocity = 0.0;
      }
    }
  }
}

BodyId PhysicsWorld::add_body(RigidBody body) {
  if (body.dynamic() && !(body.mass > 0.0)) {
    throw Error(ErrorCode::InvalidGeometry, "dynamic body '" + body.name + "' needs mass > 0");
  }
  body.id = static_cast<BodyId>(bodies_.size());
  body.orientation.normalize();
  bodies_.push_back(std::move(body));
  return bodies_.back().id;
}

std::uint32_t PhysicsWorld::add_collider(Collider collider) {
  if (collider.body >= bodies_.size()) {
    throw Error(ErrorCode::NotFound, "collider references unknown body");
  }
  validate_shape(collider.shape);
  colliders_.push_back(std::move(collider));
  return static_cast<std::uint32_t>(colliders_.size() - 1);
}

RigidBody& PhysicsWorld::body(BodyId id) {
  if (id >= bodies_.size()) throw Error(ErrorCode::NotFound, "unknown body " + std::to_string(id));
  return bodies_[id];
}

const RigidBody& PhysicsWorld::body(BodyId id) const {
  if (id >= bodies_.size()) throw Error(ErrorCode::NotFound, "unknown body " + std::to_string(id));
  return bodies_[id];
}

std::vector<std::uint32_t> PhysicsWorld::colliders_of(BodyId id) const {
  std::vector<std::uint32_t> out;
  for (std::uint32_t i = 0; i < colliders_.size(); ++i) {
    if (colliders_[i].body == id) out.push_back(i);
  }
  return out;
}

bool PhysicsWorld::should_collide(const RigidBody& a, const RigidBody& b) const {
  if (a.agent >= 0 && a.agent == b.agent) return false;
  if (!a.dynamic() && !b.dynamic()) {
    if (a.agent_root && b.agent_root) return true;
    return (a.agent_root && b.agent < 0) || (b.agent_root && a.agent < 0);
  }
  return true;
}

void PhysicsWorld::resolve(Contact& c) {
  RigidBody& a = bodies_[c.body_a];
  RigidBody& b = bodies_[c.body_b];
  const bool a_agent = a.agent >= 0, b_agent = b.agent >= 0;
  if (a_agent && b_agent) {
    if (a.agent_root && b.agent_root) {
      push_apart(a, b, c.normal, c.penetration, 1.0, 1.0);
      const double va = a.linear_velocity.dot(c.normal);
      if (va > 0.0) a.linear_velocity -= va * c.normal;
      const double vb = b.linear_velocity.dot(c.normal);
      if (vb < 0.0) b.linear_velocity -= vb * c.normal;
    }
    return;
  }
  if (a_agent || b_agent) {
    RigidBody& agent = a_agent ? a : b;
    RigidBody& object = a_agent ? b : a;
    const Vec3 n = a_agent ? c.normal : Vec3(-c.normal);
    const bool heavy = object.kinematic || object.mass >= config_.mass_threshold;
    if (heavy && !agent.agent_root) return;
    c.impulse = light_heavy_in_place(agent, object, n, c.penetration, config_.mass_threshold,
                                     config_.restitution);
    return;
  }
  resolve_impulse(a, b, c, config_.restitution);
}

void PhysicsWorld::step(double dt) {
  integrate_joints(joints_, dt);
  for (const Joint& j : joints_) {
    for (const JointAxis& ax : j.axes) {
      if (!std::isfinite(ax.angle) || !std::isfinite(ax.velocity)) {
        throw Error(ErrorCode::SimulationDiverged,
                    "joint of bone " + std::to_string(j.child_bone) + " diverged");
      }
    }
  }

  for (RigidBody& b : bodies_) {
    if (b.dynamic()) {
      if (b.gravity) b.linear_velocity += config_.gravity * dt;
      if (b.linear_damping > 0.0) {
        b.linear_velocity *= std::max(0.0, 1.0 - b.linear_damping * dt);
      }
    }
    if (b.driven) continue;
    b.position += b.linear_velocity * dt;
    const double w = b.angular_velocity.norm();
    if (w > 0.0) {
      b.orientation =
          (Quat(Eigen::AngleAxisd(w * dt, b.angular_velocity / w)) * b.orientation).normalized();
    }
  }

  auto check = [this] {
    for (const RigidBody& b : bodies_) {
      if (!all_finite(b.position) || !all_finite(b.linear_velocity) ||
          !all_finite(b.angular_velocity) || !std::isfinite(b.orientation.w())) {
        throw Error(ErrorCode::SimulationDiverged, "body '" + b.name + "' (id " +
                                                       std::to_string(b.id) +
                                                       ") has non-finite state");
      }
    }
  };
  check();

  std::vector<Contact> contacts = detect_contacts(
      bodies_, colliders_,
      [this](const RigidBody& a, const RigidBody& b) { return should_collide(a, b); });
  for (Contact& c : contacts) resolve(c);
  check();
  last_contacts_ = std::move(contacts);
}

}  // namespace embsim
