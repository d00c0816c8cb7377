#include "embsim/sensors/vision.hpp"

#include "embsim/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace embsim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct PixelRect {
  int x0, y0, x1, y1;  // half-open
  bool empty() const { return x0 >= x1 || y0 >= y1; }
};

// Conservative screen rectangle covering a collider, from its world AABB.
PixelRect screen_rect(const Aabb& box, const Camera& cam, double f) {
  const PixelRect full{0, 0, cam.width, cam.height};
  if (!box.lo.allFinite() || !box.hi.allFinite()) return full;
  double umin = kInf, umax = -kInf, vmin = kInf, vmax = -kInf;
  int behind = 0;
  for (int i = 0; i < 8; ++i) {
    const Vec3 corner((i & 1) ? box.hi.x() : box.lo.x(), (i & 2) ? box.hi.y() : box.lo.y(),
                      (i & 4) ? box.hi.z() : box.lo.z());
    const Vec3 c = cam.frame.inverse_apply(corner);
    if (c.z() <= 1e-6) {
      ++behind;
      continue;
    }
    const double u = cam.width / 2.0 - f * c.x() / c.z();
    const double v = cam.height / 2.0 - f * c.y() / c.z();
    umin = std::min(umin, u);
    umax = std::max(umax, u);
    vmin = std::min(vmin, v);
    vmax = std::max(vmax, v);
  }
  if (behind == 8) return {0, 0, 0, 0};
  if (behind > 0) return full;
  PixelRect r;
  r.x0 = std::clamp(static_cast<int>(std::floor(umin)) - 1, 0, cam.width);
  r.x1 = std::clamp(static_cast<int>(std::ceil(umax)) + 1, 0, cam.width);
  r.y0 = std::clamp(static_cast<int>(std::floor(vmin)) - 1, 0, cam.height);
  r.y1 = std::clamp(static_cast<int>(std::ceil(vmax)) + 1, 0, cam.height);
  return r;
}

std::vector<double> gaussian_kernel(double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    sum += k[i + radius];
  }
  for (double& w : k) w /= sum;
  return k;
}

}  // namespace

double Camera::focal_px() const {
  return (height / 2.0) / std::tan(deg_to_rad(vertical_fov_deg) / 2.0);
}

void Camera::validate() const {
  if (width < 1 || height < 1) {
    throw Error(ErrorCode::Configuration, "camera resolution must be at least 1x1");
  }
  if (!(vertical_fov_deg > 0.0 && vertical_fov_deg < 180.0)) {
    throw Error(ErrorCode::Configuration, "camera fov must lie in (0, 180) degrees");
  }
}

RenderResult render(const PhysicsWorld& world, const Camera& cam, const Lighting& light) {
  cam.validate();
  const int w = cam.width, h = cam.height;
  const std::size_t n = std::size_t(w) * h;
  const double f = cam.focal_px();

  std::vector<Vec3> dirs(n);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Vec3 local(-(x + 0.5 - w / 2.0) / f, -(y + 0.5 - h / 2.0) / f, 1.0);
      dirs[std::size_t(y) * w + x] = cam.frame.orientation * local.normalized();
    }
  }

  std::vector<double> depth(n, kInf);
  std::vector<int> ids(n, -1);
  std::vector<Vec3> normals(n, Vec3::Zero());
  const auto& bodies = world.bodies();
  const Vec3 origin = cam.frame.position;
  for (const Collider& c : world.colliders()) {
    const RigidBody& b = bodies[c.body];
    if (b.hidden || b.transparent) continue;
    const Pose pose = c.world_pose(b);
    const PixelRect r = screen_rect(bounds(c.shape, pose), cam, f);
    for (int y = r.y0; y < r.y1; ++y) {
      for (int x = r.x0; x < r.x1; ++x) {
        const std::size_t i = std::size_t(y) * w + x;
        const auto hit = raycast(c.shape, pose, origin, dirs[i], depth[i]);
        if (!hit || hit->t >= depth[i]) continue;
        depth[i] = hit->t;
        ids[i] = static_cast<int>(c.body);
        normals[i] = hit->normal;
      }
    }
  }

  RenderResult out;
  out.image = Image(3, h, w);
  for (std::size_t i = 0; i < n; ++i) {
    Vec3 rgb = light.background;
    if (ids[i] >= 0) {
      const double lambert = std::max(0.0, normals[i].dot(light.to_light));
      rgb = bodies[ids[i]].color * (lambert * light.intensity) + Vec3::Constant(light.ambient);
    }
    for (int ch = 0; ch < 3; ++ch) {
      out.image.data[ch * n + i] = static_cast<float>(std::clamp(rgb[ch], 0.0, 1.0));
    }
  }
  out.depth = std::move(depth);
  out.ids = std::move(ids);
  return out;
}

Image gaussian_blur(const Image& in, double sigma) {
  if (sigma <= 0.0) return in;
  const auto k = gaussian_kernel(sigma);
  const int radius = static_cast<int>(k.size() / 2);
  Image tmp = in, out = in;
  for (int c = 0; c < in.channels; ++c) {
    for (int y = 0; y < in.height; ++y) {
      for (int x = 0; x < in.width; ++x) {
        double acc = 0.0;
        for (int j = -radius; j <= radius; ++j) {
          acc += k[j + radius] * in.at(c, y, std::clamp(x + j, 0, in.width - 1));
        }
        tmp.at(c, y, x) = static_cast<float>(acc);
      }
    }
    for (int y = 0; y < in.height; ++y) {
      for (int x = 0; x < in.width; ++x) {
        double acc = 0.0;
        for (int j = -radius; j <= radius; ++j) {
          acc += k[j + radius] * tmp.at(c, std::clamp(y + j, 0, in.height - 1), x);
        }
        out.at(c, y, x) = static_cast<float>(std::clamp(acc, 0.0, 1.0));
      }
    }
  }
  return out;
}

Image to_grayscale(const Image& in) {
  if (in.channels == 1) return in;
  Image out(1, in.height, in.width);
  for (int y = 0; y < in.height; ++y) {
    for (int x = 0; x < in.width; ++x) {
      const double luma =
          0.299 * in.at(0, y, x) + 0.587 * in.at(1, y, x) + 0.114 * in.at(2, y, x);
      out.at(0, y, x) = static_cast<float>(std::clamp(luma, 0.0, 1.0));
    }
  }
  return out;
}

namespace {

Image depth_of_field(const Image& in, std::span<const double> depth, double aperture,
                     double focal_distance) {
  Image out = in;
  const double inv_focus = 1.0 / focal_distance;
  for (int y = 0; y < in.height; ++y) {
    for (int x = 0; x < in.width; ++x) {
      const double z = depth[std::size_t(y) * in.width + x];
      const double inv_z = std::isinf(z) ? 0.0 : 1.0 / z;
      const double sigma = std::clamp(aperture * std::abs(inv_z - inv_focus), 0.0, 8.0);
      if (sigma < 1e-9) continue;
      const int radius = static_cast<int>(std::ceil(3.0 * sigma));
      for (int c = 0; c < in.channels; ++c) {
        double acc = 0.0, wsum = 0.0;
        for (int dy = -radius; dy <= radius; ++dy) {
          const int yy = std::clamp(y + dy, 0, in.height - 1);
          for (int dx = -radius; dx <= radius; ++dx) {
            const int xx = std::clamp(x + dx, 0, in.width - 1);
            const double wgt = std::exp(-0.5 * (dx * dx + dy * dy) / (sigma * sigma));
            acc += wgt * in.at(c, yy, xx);
            wsum += wgt;
          }
        }
        out.at(c, y, x) = static_cast<float>(std::clamp(acc / wsum, 0.0, 1.0));
      }
    }
  }
  return out;
}

}  // namespace

Image apply_filters(const Image& image, std::span<const double> depth, const VisionConfig& cfg) {
  if (depth.size() != std::size_t(image.height) * image.width) {
    throw Error(ErrorCode::InvalidArgument, "depth map does not match image resolution");
  }
  if (cfg.blur_sigma < 0.0 || cfg.aperture < 0.0 || !(cfg.focal_distance > 0.0)) {
    throw Error(ErrorCode::Configuration, "blur sigma and aperture must be >= 0, focus > 0");
  }
  Image out = image;
  if (cfg.depth_of_field && cfg.aperture > 0.0) {
    out = depth_of_field(out, depth, cfg.aperture, cfg.focal_distance);
  }
  if (cfg.grayscale) out = to_grayscale(out);
  if (cfg.blur_sigma > 0.0) out = gaussian_blur(out, cfg.blur_sigma);
  return out;
}

Camera eye_camera(const Agent& agent, Eye eye) {
  const CameraIntrinsics& k = agent.config().camera;
  return Camera{agent.eye_pose(eye), k.vertical_fov_deg, k.width, k.height};
}

StereoFrame render_binocular(const PhysicsWorld& world, const Agent& agent,
                             const VisionConfig& config, const Lighting& light) {
  StereoFrame frame;
  for (Eye e : {Eye::Left, Eye::Right}) {
    RenderResult r = render(world, eye_camera(agent, e), light);
    r.image = apply_filters(r.image, r.depth, config);
    frame.eyes[int(e)] = std::move(r);
  }
  return frame;
}

std::optional<PixelBox> bounding_box(std::span<const int> ids, int width, int height, int body) {
  std::optional<PixelBox> box;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      if (ids[std::size_t(y) * width + x] != body) continue;
      if (!box) {
        box = PixelBox{x, y, x, y};
      } else {
        box->x0 = std::min(box->x0, x);
        box->x1 = std::max(box->x1, x);
        box->y0 = std::min(box->y0, y);
        box->y1 = std::max(box->y1, y);
      }
    }
  }
  return box;
}

}  // namespace embsim
