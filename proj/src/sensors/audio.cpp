#include "embsim/sensors/audio.hpp"

#include "embsim/error.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstring>
#include <fstream>
#include <map>
#include <mutex>

namespace embsim {

namespace {

struct Tap {
  int delay;
  double amplitude;
};

int delay_samples(double distance, const AudioConfig& cfg) {
  // nearbyint honours the default round-half-to-even mode.
  return static_cast<int>(std::nearbyint(distance * cfg.fs / cfg.speed_of_sound));
}

std::vector<Tap> path_taps(const Vec3& src, const Vec3& mic, const RoomAcoustics* room,
                           const AudioConfig& cfg) {
  std::vector<Tap> taps;
  if (room) {
    for (const ImageSource& im : image_sources(*room, src, mic, cfg)) {
      if (im.amplitude != 0.0) taps.push_back({im.delay, im.amplitude});
    }
  } else {
    const double d = (src - mic).norm();
    taps.push_back({delay_samples(d, cfg), 1.0 / std::max(d, cfg.d_floor)});
  }
  return taps;
}

// Signal arriving at a point: x(j) = gain * sum_k a_k s(j - delay_k).
double arrival(const AudioSource& s, const std::vector<Tap>& taps, std::int64_t j) {
  double acc = 0.0;
  for (const Tap& t : taps) acc += t.amplitude * s.sample(j - t.delay);
  return s.gain * acc;
}

void low_pass(std::vector<double>& x, std::size_t warmup, double cutoff_hz, int fs,
              std::vector<float>& out) {
  const double a = std::exp(-2.0 * kPi * cutoff_hz / fs);
  double y = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    y = (1.0 - a) * x[i] + a * y;
    if (i >= warmup) out[i - warmup] = static_cast<float>(y);
  }
}

std::mutex& fftw_mutex() {
  static std::mutex m;
  return m;
}

fftw_plan plan_for(int window) {
  // Plans are created once per size; fftw_execute_dft_r2c on them is thread-safe.
  static std::map<int, fftw_plan> plans;
  std::lock_guard<std::mutex> lock(fftw_mutex());
  auto it = plans.find(window);
  if (it != plans.end()) return it->second;
  double* in = fftw_alloc_real(window);
  fftw_complex* out = fftw_alloc_complex(window / 2 + 1);
  fftw_plan p = fftw_plan_dft_r2c_1d(window, in, out, FFTW_ESTIMATE | FFTW_UNALIGNED);
  fftw_free(in);
  fftw_free(out);
  plans.emplace(window, p);
  return p;
}

}  // namespace

const char* to_string(AudioMode mode) noexcept {
  switch (mode) {
    case AudioMode::Mono: return "mono";
    case AudioMode::Stereo: return "stereo";
    case AudioMode::Hrtf: return "hrtf";
  }
  return "?";
}

AudioMode audio_mode_from_string(const std::string& name) {
  if (name == "mono") return AudioMode::Mono;
  if (name == "stereo") return AudioMode::Stereo;
  if (name == "hrtf") return AudioMode::Hrtf;
  throw Error(ErrorCode::Configuration, "unknown audio mode '" + name + "'");
}

int AudioConfig::frame_samples() const {
  return static_cast<int>(std::lround(fs * dt_control));
}

void AudioConfig::validate() const {
  if (fs <= 0 || !(dt_control > 0.0) || !(speed_of_sound > 0.0) || !(head_radius > 0.0) ||
      fft_window < 2 || !(d_floor > 0.0)) {
    throw Error(ErrorCode::Configuration, "invalid audio configuration");
  }
}

double AudioSource::sample(std::int64_t j) const {
  if (!clip || clip->empty() || j < 0) return 0.0;
  const auto len = static_cast<std::int64_t>(clip->size());
  if (j >= len) {
    if (!loop) return 0.0;
    j %= len;
  }
  return (*clip)[static_cast<std::size_t>(j)];
}

void RoomAcoustics::validate() const {
  if (!((size.array() > 0.0).all()) || !(beta >= 0.0 && beta <= 1.0) || max_order < 0) {
    throw Error(ErrorCode::InvalidGeometry, "room needs positive size, beta in [0,1], order >= 0");
  }
}

bool RoomAcoustics::contains(const Vec3& p) const {
  const Vec3 q = p - origin;
  return (q.array() > 0.0).all() && (q.array() < size.array()).all();
}

const HrirPair& HrtfTable::nearest(double azimuth_deg, double elevation_deg) const {
  if (entries.empty()) throw Error(ErrorCode::Configuration, "HRTF table is empty");
  auto unit = [](double az, double el) {
    const double a = deg_to_rad(az), e = deg_to_rad(el);
    return Vec3(std::cos(e) * std::sin(a), std::sin(e), std::cos(e) * std::cos(a));
  };
  const Vec3 q = unit(azimuth_deg, elevation_deg);
  std::size_t best = 0;
  double best_dot = -2.0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const double d = q.dot(unit(entries[i].azimuth_deg, entries[i].elevation_deg));
    if (d > best_dot) {
      best_dot = d;
      best = i;
    }
  }
  return entries[best];
}

void HrtfTable::validate() const {
  const std::size_t n = taps();
  for (const HrirPair& e : entries) {
    if (e.left.size() != n || e.right.size() != n) {
      throw Error(ErrorCode::Configuration, "HRTF entries differ in tap count");
    }
    if (!(e.azimuth_deg >= -180.0 && e.azimuth_deg < 180.0) ||
        !(e.elevation_deg >= -90.0 && e.elevation_deg <= 90.0)) {
      throw Error(ErrorCode::Configuration, "HRTF direction out of range");
    }
  }
}

namespace {

template <typename T>
T read_le(std::istream& in, const std::filesystem::path& path) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw Error(ErrorCode::Io, "truncated HRTF file " + path.string());
  return v;
}

template <typename T>
void write_le(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

std::vector<float> resample_linear(const std::vector<float>& x, int from, int to) {
  if (from == to || x.empty()) return x;
  const auto n = static_cast<std::size_t>(
      std::max<long>(1, std::lround(static_cast<double>(x.size()) * to / from)));
  std::vector<float> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) * from / to;
    const auto k = static_cast<std::size_t>(t);
    const double frac = t - k;
    const double a = k < x.size() ? x[k] : 0.0;
    const double b = k + 1 < x.size() ? x[k + 1] : 0.0;
    y[i] = static_cast<float>(a + frac * (b - a));
  }
  return y;
}

}  // namespace

HrtfTable load_hrtf(const std::filesystem::path& path, int target_fs) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open HRTF file " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "VHRT", 4) != 0) {
    throw Error(ErrorCode::Io, "not a VHRT file: " + path.string());
  }
  const auto count = read_le<std::uint32_t>(in, path);
  const auto taps = read_le<std::uint32_t>(in, path);
  const auto rate = read_le<std::uint32_t>(in, path);
  if (rate == 0 || taps == 0) throw Error(ErrorCode::Io, "bad VHRT header in " + path.string());
  HrtfTable table;
  table.sample_rate = target_fs;
  table.entries.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    HrirPair e;
    e.azimuth_deg = read_le<float>(in, path);
    e.elevation_deg = read_le<float>(in, path);
    e.left.resize(taps);
    e.right.resize(taps);
    for (auto& v : e.left) v = read_le<float>(in, path);
    for (auto& v : e.right) v = read_le<float>(in, path);
    e.left = resample_linear(e.left, static_cast<int>(rate), target_fs);
    e.right = resample_linear(e.right, static_cast<int>(rate), target_fs);
    table.entries.push_back(std::move(e));
  }
  table.validate();
  return table;
}

void save_hrtf(const HrtfTable& table, const std::filesystem::path& path) {
  table.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out.write("VHRT", 4);
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(table.entries.size()));
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(table.taps()));
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(table.sample_rate));
  for (const HrirPair& e : table.entries) {
    write_le<float>(out, static_cast<float>(e.azimuth_deg));
    write_le<float>(out, static_cast<float>(e.elevation_deg));
    for (float v : e.left) write_le<float>(out, v);
    for (float v : e.right) write_le<float>(out, v);
  }
}

std::vector<ImageSource> image_sources(const RoomAcoustics& room, const Vec3& src,
                                       const Vec3& mic, const AudioConfig& cfg) {
  room.validate();
  if (!room.contains(src) || !room.contains(mic)) {
    throw Error(ErrorCode::InvalidGeometry, "source and microphone must lie inside the room");
  }
  const Vec3 s = src - room.origin;
  const int order = room.max_order;
  // Per axis: coordinate (1 - 2q) s + 2 n L with |2n - q| reflections.
  struct AxisImage {
    double coord;
    int reflections;
  };
  std::array<std::vector<AxisImage>, 3> axes;
  for (int a = 0; a < 3; ++a) {
    for (int n = -order; n <= order; ++n) {
      for (int q = 0; q <= 1; ++q) {
        const int r = std::abs(2 * n - q);
        if (r > order) continue;
        axes[a].push_back({(1 - 2 * q) * s[a] + 2.0 * n * room.size[a], r});
      }
    }
  }
  std::vector<ImageSource> out;
  for (const AxisImage& x : axes[0]) {
    for (const AxisImage& y : axes[1]) {
      if (x.reflections + y.reflections > order) continue;
      for (const AxisImage& z : axes[2]) {
        const int k = x.reflections + y.reflections + z.reflections;
        if (k > order) continue;
        ImageSource im;
        im.position = room.origin + Vec3(x.coord, y.coord, z.coord);
        im.reflections = k;
        im.distance = (im.position - mic).norm();
        im.delay = delay_samples(im.distance, cfg);
        im.amplitude = std::pow(room.beta, k) / std::max(im.distance, cfg.d_floor);
        out.push_back(im);
      }
    }
  }
  return out;
}

std::vector<double> compute_rir(const RoomAcoustics& room, const Vec3& src, const Vec3& mic,
                                const AudioConfig& cfg) {
  const auto images = image_sources(room, src, mic, cfg);
  int len = 0;
  for (const ImageSource& im : images) len = std::max(len, im.delay + 1);
  std::vector<double> rir(len, 0.0);
  for (const ImageSource& im : images) rir[im.delay] += im.amplitude;
  return rir;
}

double woodworth_itd(double theta, double head_radius, double speed_of_sound) {
  return head_radius / speed_of_sound * (theta + std::sin(theta));
}

StereoBuffer spatialize(const AudioSource& source, const Listener& listener,
                        const HrtfTable* hrtf, const RoomAcoustics* room,
                        const AudioConfig& cfg, int n) {
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "frame length must be >= 1");
  StereoBuffer out{std::vector<float>(n, 0.0f), std::vector<float>(n, 0.0f)};
  const auto start = static_cast<std::int64_t>(source.cursor);
  const Vec3 head = listener.head.position;

  switch (listener.mode) {
    case AudioMode::Mono: {
      const double amp = source.gain / std::max((source.position - head).norm(), cfg.d_floor);
      for (int i = 0; i < n; ++i) {
        out[0][i] = out[1][i] = static_cast<float>(amp * source.sample(start + i));
      }
      break;
    }
    case AudioMode::Stereo: {
      const Vec3 left_axis = listener.head.orientation * kLeft;
      const double side = (source.position - head).dot(left_axis);
      for (int ear = 0; ear < 2; ++ear) {
        const auto taps = path_taps(source.position, listener.ear_position(ear), room, cfg);
        const bool shadowed = cfg.head_shadow && (ear == 0 ? side < 0.0 : side > 0.0);
        if (!shadowed) {
          for (int i = 0; i < n; ++i) {
            out[ear][i] = static_cast<float>(arrival(source, taps, start + i));
          }
          continue;
        }
        constexpr std::size_t kWarmup = 128;
        std::vector<double> x(n + kWarmup);
        for (std::size_t i = 0; i < x.size(); ++i) {
          x[i] = arrival(source, taps, start + static_cast<std::int64_t>(i) - kWarmup);
        }
        low_pass(x, kWarmup, cfg.shadow_cutoff_hz, cfg.fs, out[ear]);
      }
      break;
    }
    case AudioMode::Hrtf: {
      const auto taps = path_taps(source.position, head, room, cfg);
      const Vec3 local = listener.head.inverse_apply(source.position);
      if (hrtf && !hrtf->entries.empty()) {
        const double az = rad_to_deg(std::atan2(local.x(), local.z()));
        const double el = rad_to_deg(std::atan2(local.y(), std::hypot(local.x(), local.z())));
        const HrirPair& pair = hrtf->nearest(az, el);
        const int m = static_cast<int>(pair.left.size());
        std::vector<double> x(n + m - 1);
        for (std::size_t i = 0; i < x.size(); ++i) {
          x[i] = arrival(source, taps, start + static_cast<std::int64_t>(i) - (m - 1));
        }
        for (int ear = 0; ear < 2; ++ear) {
          const auto& h = ear == 0 ? pair.left : pair.right;
          for (int i = 0; i < n; ++i) {
            double acc = 0.0;
            for (int k = 0; k < m; ++k) acc += h[k] * x[i + m - 1 - k];
            out[ear][i] = static_cast<float>(acc);
          }
        }
        break;
      }
      if (!cfg.woodworth_fallback) {
        throw Error(ErrorCode::Configuration, "hrtf mode needs a table or the parametric fallback");
      }
      const double dist = local.norm();
      const double lateral = dist > 0.0 ? std::clamp(local.x() / dist, -1.0, 1.0) : 0.0;
      const double theta = std::asin(std::abs(lateral));
      const int lag = static_cast<int>(
          std::nearbyint(woodworth_itd(theta, cfg.head_radius, cfg.speed_of_sound) * cfg.fs));
      const int far_ear = lateral > 0.0 ? 1 : (lateral < 0.0 ? 0 : -1);
      for (int ear = 0; ear < 2; ++ear) {
        const int extra = ear == far_ear ? lag : 0;
        for (int i = 0; i < n; ++i) {
          out[ear][i] = static_cast<float>(arrival(source, taps, start + i - extra));
        }
      }
      break;
    }
  }
  return out;
}

std::vector<StereoBuffer> mix_frame(std::span<const Listener> listeners,
                                    std::span<AudioSource> sources, const HrtfTable* hrtf,
                                    const RoomAcoustics* room, const AudioConfig& cfg, int n) {
  std::vector<StereoBuffer> out;
  out.reserve(listeners.size());
  for (const Listener& l : listeners) {
    std::array<std::vector<double>, 2> acc{std::vector<double>(n, 0.0),
                                           std::vector<double>(n, 0.0)};
    for (const AudioSource& s : sources) {
      const bool inside = room && room->contains(s.position) && room->contains(l.head.position) &&
                          room->contains(l.ear_position(0)) && room->contains(l.ear_position(1));
      const StereoBuffer part = spatialize(s, l, hrtf, inside ? room : nullptr, cfg, n);
      for (int ch = 0; ch < 2; ++ch) {
        for (int i = 0; i < n; ++i) acc[ch][i] += part[ch][i];
      }
    }
    StereoBuffer buf{std::vector<float>(n), std::vector<float>(n)};
    for (int ch = 0; ch < 2; ++ch) {
      for (int i = 0; i < n; ++i) buf[ch][i] = static_cast<float>(std::clamp(acc[ch][i], -1.0, 1.0));
    }
    out.push_back(std::move(buf));
  }
  for (AudioSource& s : sources) s.cursor += static_cast<std::uint64_t>(n);
  return out;
}

std::vector<std::vector<double>> fft_magnitude(std::span<const float> signal, int window) {
  if (window < 2) throw Error(ErrorCode::InvalidArgument, "fft window must be >= 2");
  const fftw_plan plan = plan_for(window);
  const std::size_t windows =
      std::max<std::size_t>(1, (signal.size() + window - 1) / static_cast<std::size_t>(window));
  const int bins = window / 2 + 1;
  std::vector<double> in(window);
  std::vector<std::complex<double>> spec(bins);
  std::vector<std::vector<double>> out(windows, std::vector<double>(bins));
  for (std::size_t w = 0; w < windows; ++w) {
    for (int i = 0; i < window; ++i) {
      const std::size_t j = w * window + i;
      in[i] = j < signal.size() ? signal[j] : 0.0;
    }
    fftw_execute_dft_r2c(plan, in.data(), reinterpret_cast<fftw_complex*>(spec.data()));
    for (int b = 0; b < bins; ++b) out[w][b] = std::abs(spec[b]);
  }
  return out;
}

std::vector<float> stereo_spectra(const StereoBuffer& buffer, int window, int* windows_out) {
  const auto l = fft_magnitude(buffer[0], window);
  const auto r = fft_magnitude(buffer[1], window);
  const int bins = window / 2 + 1;
  std::vector<float> out;
  out.reserve(l.size() * 2 * bins);
  for (std::size_t w = 0; w < l.size(); ++w) {
    for (double v : l[w]) out.push_back(static_cast<float>(v));
    for (double v : r[w]) out.push_back(static_cast<float>(v));
  }
  if (windows_out) *windows_out = static_cast<int>(l.size());
  return out;
}

int itd_lag(std::span<const float> left, std::span<const float> right, int max_lag) {
  const auto n = static_cast<int>(std::min(left.size(), right.size()));
  auto corr = [&](int lag) {
    double acc = 0.0;
    for (int i = std::max(0, -lag); i < n && i + lag < n; ++i) {
      acc += static_cast<double>(left[i]) * right[i + lag];
    }
    return acc;
  };
  int best = 0;
  double best_c = corr(0);
  for (int k = 1; k <= max_lag; ++k) {
    for (int lag : {k, -k}) {
      const double c = corr(lag);
      if (c > best_c) {
        best_c = c;
        best = lag;
      }
    }
  }
  return best;
}

int localize_left_right(const StereoBuffer& buffer, int max_lag) {
  const int lag = itd_lag(buffer[0], buffer[1], max_lag);
  return lag > 0 ? 1 : (lag < 0 ? -1 : 0);
}

Clip sine_clip(double freq_hz, double seconds, int fs, double amplitude) {
  const auto n = static_cast<std::size_t>(std::lround(seconds * fs));
  Clip c(n);
  for (std::size_t i = 0; i < n; ++i) {
    c[i] = static_cast<float>(amplitude * std::sin(2.0 * kPi * freq_hz * i / fs));
  }
  return c;
}

}  // namespace embsim
