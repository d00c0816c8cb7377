#pragma once

#include "embsim/math.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace embsim {

enum class AudioMode { Mono, Stereo, Hrtf };

const char* to_string(AudioMode mode) noexcept;
AudioMode audio_mode_from_string(const std::string& name);

struct AudioConfig {
  int fs = 22050;
  double dt_control = 0.02;
  double speed_of_sound = 343.0;
  double head_radius = 0.0875;
  int fft_window = 1024;
  double d_floor = 0.1;
  /// Contralateral single-pole low-pass in stereo mode.
  bool head_shadow = false;
  double shadow_cutoff_hz = 2000.0;
  /// Use the Woodworth ITD model when hrtf mode has no table.
  bool woodworth_fallback = true;

  int frame_samples() const;
  void validate() const;
};

using Clip = std::vector<float>;

struct AudioSource {
  Vec3 position = Vec3::Zero();
  std::shared_ptr<const Clip> clip;
  /// Samples emitted so far. Lookups use absolute clip positions so delayed
  /// paths stay continuous across frames.
  std::uint64_t cursor = 0;
  bool loop = false;
  double gain = 1.0;

  /// Clip sample at absolute index j: zero before the start and, unless
  /// looping, after the end.
  double sample(std::int64_t j) const;
};

struct Listener {
  Pose head;
  Vec3 ear_left = Vec3(0.0875, 0.0, 0.0);  // head frame
  Vec3 ear_right = Vec3(-0.0875, 0.0, 0.0);
  AudioMode mode = AudioMode::Stereo;

  Vec3 ear_position(int ear) const { return head.apply(ear == 0 ? ear_left : ear_right); }
};

/// Axis-aligned shoebox spanning [origin, origin + size].
struct RoomAcoustics {
  Vec3 origin = Vec3::Zero();
  Vec3 size = Vec3(6.0, 3.0, 6.0);
  double beta = 0.5;
  int max_order = 2;

  void validate() const;
  bool contains(const Vec3& p) const;
};

struct HrirPair {
  double azimuth_deg = 0.0;    // positive toward the listener's left
  double elevation_deg = 0.0;  // positive up
  std::vector<float> left;
  std::vector<float> right;
};

struct HrtfTable {
  int sample_rate = 22050;
  std::vector<HrirPair> entries;

  std::size_t taps() const { return entries.empty() ? 0 : entries.front().left.size(); }
  /// Entry with the smallest angle to the given direction; first wins ties.
  const HrirPair& nearest(double azimuth_deg, double elevation_deg) const;
  void validate() const;
};

/// Reads a VHRT file, resampling the filters to `target_fs` if needed.
HrtfTable load_hrtf(const std::filesystem::path& path, int target_fs);
void save_hrtf(const HrtfTable& table, const std::filesystem::path& path);

struct ImageSource {
  Vec3 position;
  int reflections = 0;
  double distance = 0.0;
  int delay = 0;  // samples
  double amplitude = 0.0;
};

/// All image sources with at most room.max_order reflections.
std::vector<ImageSource> image_sources(const RoomAcoustics& room, const Vec3& src,
                                       const Vec3& mic, const AudioConfig& config);
/// Dense impulse response; taps that land on the same index add.
std::vector<double> compute_rir(const RoomAcoustics& room, const Vec3& src, const Vec3& mic,
                                const AudioConfig& config);

/// Woodworth spherical-head ITD in seconds for lateral angle theta in [0, pi/2].
double woodworth_itd(double theta, double head_radius, double speed_of_sound);

/// Two channels (left, right) of equal length.
using StereoBuffer = std::array<std::vector<float>, 2>;

StereoBuffer spatialize(const AudioSource& source, const Listener& listener,
                        const HrtfTable* hrtf, const RoomAcoustics* room,
                        const AudioConfig& config, int n);

/// Per-listener sum over sources, clipped to [-1, 1]. Cursors of all sources
/// advance by n once. The room applies to a source/listener pair only when
/// both lie inside it; otherwise the direct path is used.
std::vector<StereoBuffer> mix_frame(std::span<const Listener> listeners,
                                    std::span<AudioSource> sources, const HrtfTable* hrtf,
                                    const RoomAcoustics* room, const AudioConfig& config, int n);

/// Non-overlapping windows, zero-padded, magnitude of the window/2 + 1
/// nonnegative bins. Result is [windows][bins].
std::vector<std::vector<double>> fft_magnitude(std::span<const float> signal, int window);
/// Stereo spectra laid out [windows, 2, bins], flattened.
std::vector<float> stereo_spectra(const StereoBuffer& buffer, int window, int* windows_out);

/// Lag (samples) maximising the cross-correlation sum_i left[i] * right[i + lag]
/// over |lag| <= max_lag. Positive means the right channel lags: source on the left.
int itd_lag(std::span<const float> left, std::span<const float> right, int max_lag);
/// +1 left, -1 right, 0 undecidable.
int localize_left_right(const StereoBuffer& buffer, int max_lag);

/// Unit-amplitude sine clip.
Clip sine_clip(double freq_hz, double seconds, int fs, double amplitude = 1.0);

}  // namespace embsim
