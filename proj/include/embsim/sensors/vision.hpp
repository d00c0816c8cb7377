#pragma once

#include "embsim/humanoid/agent.hpp"
#include "embsim/physics/world.hpp"

#include <array>
#include <optional>
#include <span>
#include <vector>

namespace embsim {

/// Pinhole camera looking along +z of `frame`; +x is image-left, +y image-up.
struct Camera {
  Pose frame;
  double vertical_fov_deg = 60.0;
  int width = 84;
  int height = 84;

  /// Focal length in pixels.
  double focal_px() const;
  void validate() const;
};

/// Filters run in the order depth-of-field, grayscale, blur.
struct VisionConfig {
  bool grayscale = false;
  double blur_sigma = 0.0;  // px
  bool depth_of_field = false;
  double aperture = 0.0;
  double focal_distance = 1.0;  // m
};

struct Lighting {
  Vec3 to_light = Vec3(0.0, 1.0, -0.5).normalized();
  double intensity = 1.0;
  double ambient = 0.2;
  Vec3 background = Vec3(0.55, 0.7, 0.85);
};

/// Planar channel-major image, top-left origin, values in [0, 1].
struct Image {
  int channels = 3;
  int height = 0;
  int width = 0;
  std::vector<float> data;

  Image() = default;
  Image(int c, int h, int w, float fill = 0.0f)
      : channels(c), height(h), width(w), data(std::size_t(c) * h * w, fill) {}
  float& at(int c, int y, int x) { return data[(std::size_t(c) * height + y) * width + x]; }
  float at(int c, int y, int x) const { return data[(std::size_t(c) * height + y) * width + x]; }
};

struct RenderResult {
  Image image;
  std::vector<double> depth;  // hit distance per pixel, +inf on miss
  std::vector<int> ids;       // body id per pixel, -1 on miss
};

RenderResult render(const PhysicsWorld& world, const Camera& camera, const Lighting& light = {});

Image apply_filters(const Image& image, std::span<const double> depth, const VisionConfig& config);

/// Separable Gaussian with clamped borders. sigma 0 returns the input.
Image gaussian_blur(const Image& image, double sigma);
Image to_grayscale(const Image& image);

struct StereoFrame {
  std::array<RenderResult, 2> eyes;  // left, right; images already filtered
};

Camera eye_camera(const Agent& agent, Eye eye);
StereoFrame render_binocular(const PhysicsWorld& world, const Agent& agent,
                             const VisionConfig& config, const Lighting& light = {});

struct PixelBox {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // inclusive
  double center_x() const { return 0.5 * (x0 + x1 + 1); }
  double center_y() const { return 0.5 * (y0 + y1 + 1); }
};

/// Tight box around the pixels showing `body`, if any.
std::optional<PixelBox> bounding_box(std::span<const int> ids, int width, int height, int body);

}  // namespace embsim
