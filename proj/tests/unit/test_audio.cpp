#include "embsim/error.hpp"
#include "embsim/rng.hpp"
#include "embsim/sensors/audio.hpp"

#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>

using namespace embsim;

namespace {

std::shared_ptr<const Clip> impulse_clip(std::size_t n = 2048) {
  auto c = std::make_shared<Clip>(n, 0.0f);
  (*c)[0] = 1.0f;
  return c;
}

std::shared_ptr<const Clip> noise_clip(std::size_t n, std::uint64_t seed) {
  RngStream rng(seed, 99);
  auto c = std::make_shared<Clip>(n);
  for (float& v : *c) v = static_cast<float>(0.3 * rng.normal());
  return c;
}

AudioSource source_at(const Vec3& p, std::shared_ptr<const Clip> clip, double gain = 1.0) {
  AudioSource s;
  s.position = p;
  s.clip = std::move(clip);
  s.gain = gain;
  return s;
}

Listener listener_at(const Vec3& p, AudioMode mode, double yaw = 0.0) {
  Listener l;
  l.head = Pose{p, yaw_rotation(yaw)};
  l.mode = mode;
  return l;
}

int first_nonzero(const std::vector<float>& x) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] != 0.0f) return static_cast<int>(i);
  }
  return -1;
}

// Direct DFT magnitude, used as an independent reference for the FFT path.
std::vector<double> dft_magnitude(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<double> out(n / 2 + 1);
  for (std::size_t k = 0; k < out.size(); ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      acc += x[t] * std::polar(1.0, -2.0 * kPi * double(k) * double(t) / double(n));
    }
    out[k] = std::abs(acc);
  }
  return out;
}

// Image enumeration over explicit reflection-count triples.
std::map<int, double> reference_rir(const RoomAcoustics& room, const Vec3& src, const Vec3& mic,
                                    const AudioConfig& cfg) {
  std::map<int, double> taps;
  const Vec3 s = src - room.origin;
  const Vec3 m = mic - room.origin;
  const int N = room.max_order + 1;
  for (int nx = -N; nx <= N; ++nx)
    for (int ny = -N; ny <= N; ++ny)
      for (int nz = -N; nz <= N; ++nz)
        for (int qx = 0; qx < 2; ++qx)
          for (int qy = 0; qy < 2; ++qy)
            for (int qz = 0; qz < 2; ++qz) {
              const int k = std::abs(2 * nx - qx) + std::abs(2 * ny - qy) + std::abs(2 * nz - qz);
              if (k > room.max_order) continue;
              const Vec3 p(qx ? 2 * nx * room.size.x() - s.x() : 2 * nx * room.size.x() + s.x(),
                           qy ? 2 * ny * room.size.y() - s.y() : 2 * ny * room.size.y() + s.y(),
                           qz ? 2 * nz * room.size.z() - s.z() : 2 * nz * room.size.z() + s.z());
              const double d = (p - m).norm();
              const int delay = static_cast<int>(std::nearbyint(d * cfg.fs / cfg.speed_of_sound));
              taps[delay] += std::pow(room.beta, k) / std::max(d, cfg.d_floor);
            }
  return taps;
}

}  // namespace

TEST(AudioConfig, FrameLengthAndValidation) {
  AudioConfig c;
  EXPECT_EQ(c.frame_samples(), 441);
  c.fs = 0;
  EXPECT_THROW(c.validate(), Error);
  EXPECT_EQ(audio_mode_from_string("hrtf"), AudioMode::Hrtf);
  EXPECT_STREQ(to_string(AudioMode::Mono), "mono");
  EXPECT_THROW(audio_mode_from_string("surround"), Error);
}

TEST(Rir, AnechoicHasOneTap) {
  RoomAcoustics room;
  room.beta = 0.0;
  const AudioConfig cfg;
  const auto rir = compute_rir(room, Vec3(1, 1.5, 1), Vec3(4, 1.5, 4), cfg);
  int nonzero = 0;
  for (double v : rir) nonzero += v != 0.0;
  EXPECT_EQ(nonzero, 1);
}

TEST(Rir, DirectTapIndex) {
  RoomAcoustics room;
  room.beta = 0.0;
  const AudioConfig cfg;
  const auto rir = compute_rir(room, Vec3(1, 1.5, 1), Vec3(4.43, 1.5, 1), cfg);
  ASSERT_GT(rir.size(), 220u);
  EXPECT_NEAR(rir[220], 1.0 / 3.43, 1e-12);
  for (std::size_t i = 0; i < rir.size(); ++i) {
    if (i != 220) EXPECT_EQ(rir[i], 0.0);
  }
}

TEST(Rir, FirstOrderHasSevenImages) {
  RoomAcoustics room;
  room.max_order = 1;
  const auto im = image_sources(room, Vec3(1, 1, 2), Vec3(3, 2, 4), AudioConfig{});
  EXPECT_EQ(im.size(), 7u);
  int direct = 0;
  for (const auto& i : im) direct += i.reflections == 0;
  EXPECT_EQ(direct, 1);
}

TEST(Rir, MatchesReferenceEnumeration) {
  RoomAcoustics room;
  room.origin = Vec3(-2, 0, -1);
  room.size = Vec3(5, 3, 4);
  room.beta = 0.7;
  room.max_order = 3;
  const AudioConfig cfg;
  const Vec3 src(0.3, 1.1, 0.5), mic(1.9, 1.6, 2.2);
  const auto rir = compute_rir(room, src, mic, cfg);
  const auto ref = reference_rir(room, src, mic, cfg);
  std::vector<double> dense(rir.size(), 0.0);
  for (auto [k, v] : ref) {
    ASSERT_LT(k, static_cast<int>(dense.size()));
    dense[k] = v;
  }
  for (std::size_t i = 0; i < rir.size(); ++i) EXPECT_NEAR(rir[i], dense[i], 1e-12);
}

TEST(Rir, EnergyDecaysWithOrderAndGrowsWithBeta) {
  const AudioConfig cfg;
  const Vec3 src(1, 1.2, 2), mic(4, 1.5, 3.5);
  auto energy = [&](double beta, int order) {
    RoomAcoustics room;
    room.beta = beta;
    room.max_order = order;
    double e = 0.0;
    for (const auto& im : image_sources(room, src, mic, cfg)) e += im.amplitude * im.amplitude;
    return e;
  };
  double prev = 0.0;
  for (double beta : {0.0, 0.2, 0.5, 0.9}) {
    const double e = energy(beta, 3);
    EXPECT_GE(e, prev);
    prev = e;
  }
  RoomAcoustics room;
  room.beta = 0.6;
  room.max_order = 4;
  std::vector<double> per_order(5, 0.0);
  for (const auto& im : image_sources(room, src, mic, cfg)) {
    per_order[im.reflections] += im.amplitude * im.amplitude;
  }
  for (int k = 1; k < 5; ++k) EXPECT_LT(per_order[k], per_order[k - 1]) << k;
}

TEST(Rir, OutsideRoomIsRejected) {
  RoomAcoustics room;
  try {
    image_sources(room, Vec3(7, 1, 1), Vec3(1, 1, 1), AudioConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidGeometry);
  }
}

TEST(Spatialize, StereoAheadGivesEqualChannels) {
  const auto clip = noise_clip(4000, 1);
  const auto s = source_at(Vec3(0, 1.6, 3), clip);
  const auto buf = spatialize(s, listener_at(Vec3(0, 1.6, 0), AudioMode::Stereo), nullptr, nullptr,
                              AudioConfig{}, 441);
  EXPECT_EQ(buf[0], buf[1]);
}

TEST(Spatialize, WoodworthAtNinetyDegrees) {
  const AudioConfig cfg;
  const double itd = woodworth_itd(kPi / 2, cfg.head_radius, cfg.speed_of_sound);
  EXPECT_NEAR(itd, 0.0875 / 343.0 * (kPi / 2 + 1.0), 1e-15);
  EXPECT_EQ(std::nearbyint(itd * cfg.fs), 14.0);

  // Parametric hrtf renders that lag on the far ear.
  const auto s = source_at(Vec3(3, 0, 0), impulse_clip());
  const auto buf =
      spatialize(s, listener_at(Vec3::Zero(), AudioMode::Hrtf), nullptr, nullptr, cfg, 441);
  EXPECT_EQ(first_nonzero(buf[1]) - first_nonzero(buf[0]), 14);
}

TEST(Spatialize, ParametricHrtfNeedsFallback) {
  AudioConfig cfg;
  cfg.woodworth_fallback = false;
  const auto s = source_at(Vec3(1, 0, 1), impulse_clip());
  EXPECT_THROW(spatialize(s, listener_at(Vec3::Zero(), AudioMode::Hrtf), nullptr, nullptr, cfg, 64),
               Error);
}

TEST(Spatialize, MonoIgnoresHeadRotation) {
  const auto clip = noise_clip(2000, 2);
  const auto s = source_at(Vec3(1.3, 0.2, -0.7), clip);
  const auto a = spatialize(s, listener_at(Vec3::Zero(), AudioMode::Mono, 0.0), nullptr, nullptr,
                            AudioConfig{}, 441);
  const auto b = spatialize(s, listener_at(Vec3::Zero(), AudioMode::Mono, 1.9), nullptr, nullptr,
                            AudioConfig{}, 441);
  EXPECT_EQ(a[0], b[0]);
  EXPECT_EQ(a[0], a[1]);
}

TEST(Spatialize, MirrorSwapsChannels) {
  const auto clip = noise_clip(3000, 3);
  RoomAcoustics room;
  room.origin = Vec3(-3, 0, -3);
  for (AudioMode mode : {AudioMode::Stereo, AudioMode::Hrtf}) {
    for (const RoomAcoustics* r : std::array<const RoomAcoustics*, 2>{nullptr, &room}) {
      const auto l = listener_at(Vec3(0, 1.5, 0), mode);
      const auto a = spatialize(source_at(Vec3(1.2, 1.0, 0.8), clip), l, nullptr, r,
                                AudioConfig{}, 441);
      const auto b = spatialize(source_at(Vec3(-1.2, 1.0, 0.8), clip), l, nullptr, r,
                                AudioConfig{}, 441);
      EXPECT_EQ(a[0], b[1]);
      EXPECT_EQ(a[1], b[0]);
    }
  }
}

TEST(Spatialize, OnsetShiftMatchesDistance) {
  const AudioConfig cfg;
  const Listener l = listener_at(Vec3::Zero(), AudioMode::Stereo);
  const Vec3 dir = Vec3(0.3, 0.1, 1.0).normalized();
  const Vec3 ear = l.ear_position(0);
  for (double d : {0.5, 1.0, 2.0, 3.7}) {
    const auto s = source_at(ear + dir * d, impulse_clip());
    const auto buf = spatialize(s, l, nullptr, nullptr, cfg, 441);
    EXPECT_EQ(first_nonzero(buf[0]), static_cast<int>(std::nearbyint(d * cfg.fs / cfg.speed_of_sound)));
    EXPECT_NEAR(buf[0][first_nonzero(buf[0])], 1.0 / d, 1e-6);
  }
}

TEST(Spatialize, HeadShadowAttenuatesFarEar) {
  AudioConfig cfg;
  cfg.head_shadow = true;
  const auto clip = std::make_shared<Clip>(sine_clip(6000.0, 0.5, cfg.fs));
  const auto s = source_at(Vec3(2, 0, 0), clip);
  AudioSource later = s;
  later.cursor = 2000;
  const auto buf = spatialize(later, listener_at(Vec3::Zero(), AudioMode::Stereo), nullptr,
                              nullptr, cfg, 441);
  double el = 0.0, er = 0.0;
  for (int i = 0; i < 441; ++i) {
    el += buf[0][i] * buf[0][i];
    er += buf[1][i] * buf[1][i];
  }
  EXPECT_LT(er, 0.5 * el);
}

TEST(Spatialize, HrirConvolution) {
  HrtfTable t;
  HrirPair p;
  p.azimuth_deg = 90;
  p.left = {0.5f, 0.0f, 0.0f};
  p.right = {0.0f, 0.0f, 0.25f};
  t.entries.push_back(p);
  p.azimuth_deg = -90;
  std::swap(p.left, p.right);
  t.entries.push_back(p);
  const auto s = source_at(Vec3(2, 0, 0), impulse_clip());
  const auto buf =
      spatialize(s, listener_at(Vec3::Zero(), AudioMode::Hrtf), &t, nullptr, AudioConfig{}, 441);
  const int d = static_cast<int>(std::nearbyint(2.0 * 22050 / 343.0));
  EXPECT_EQ(first_nonzero(buf[0]), d);
  EXPECT_NEAR(buf[0][d], 0.25, 1e-7);
  EXPECT_EQ(first_nonzero(buf[1]), d + 2);
  EXPECT_NEAR(buf[1][d + 2], 0.125, 1e-7);
}

TEST(Mix, SilenceWithoutSources) {
  const std::vector<Listener> ls{listener_at(Vec3::Zero(), AudioMode::Stereo)};
  std::vector<AudioSource> none;
  const auto out = mix_frame(ls, none, nullptr, nullptr, AudioConfig{}, 441);
  ASSERT_EQ(out.size(), 1u);
  for (int ch = 0; ch < 2; ++ch) {
    for (float v : out[0][ch]) EXPECT_EQ(v, 0.0f);
  }
}

TEST(Mix, LinearAndCursorsAdvanceOnce) {
  const AudioConfig cfg;
  RoomAcoustics room;
  room.origin = Vec3(-3, 0, -3);
  const std::vector<Listener> ls{listener_at(Vec3(0, 1.5, 0), AudioMode::Stereo),
                                 listener_at(Vec3(1, 1.5, 1), AudioMode::Hrtf, 0.7)};
  const auto c1 = noise_clip(5000, 4), c2 = noise_clip(5000, 5);
  std::vector<AudioSource> both{source_at(Vec3(1, 1, 2), c1, 0.2),
                                source_at(Vec3(-2, 1, -1), c2, 0.2)};
  std::vector<AudioSource> one{both[0]}, two{both[1]};
  for (int frame = 0; frame < 3; ++frame) {
    const auto m = mix_frame(ls, both, nullptr, &room, cfg, 441);
    const auto m1 = mix_frame(ls, one, nullptr, &room, cfg, 441);
    const auto m2 = mix_frame(ls, two, nullptr, &room, cfg, 441);
    for (std::size_t l = 0; l < ls.size(); ++l) {
      for (int ch = 0; ch < 2; ++ch) {
        for (int i = 0; i < 441; ++i) {
          EXPECT_NEAR(m[l][ch][i], m1[l][ch][i] + m2[l][ch][i], 1e-5);
        }
      }
    }
    EXPECT_EQ(both[0].cursor, std::uint64_t(441 * (frame + 1)));
    EXPECT_EQ(both[1].cursor, one[0].cursor);
  }
}

TEST(Mix, ListenerOutsideRoomUsesDirectPath) {
  const AudioConfig cfg;
  RoomAcoustics room;
  const auto l = listener_at(Vec3(10, 1, 10), AudioMode::Stereo);
  std::vector<AudioSource> a{source_at(Vec3(1, 1, 1), impulse_clip())};
  std::vector<AudioSource> b = a;
  const auto with = mix_frame(std::span(&l, 1), a, nullptr, &room, cfg, 441);
  const auto without = mix_frame(std::span(&l, 1), b, nullptr, nullptr, cfg, 441);
  EXPECT_EQ(with[0][0], without[0][0]);
}

TEST(Mix, OutputIsClipped) {
  std::vector<AudioSource> s{source_at(Vec3(0, 0, 0.2), noise_clip(500, 6), 50.0)};
  const auto l = listener_at(Vec3::Zero(), AudioMode::Mono);
  const auto out = mix_frame(std::span(&l, 1), s, nullptr, nullptr, AudioConfig{}, 441);
  for (float v : out[0][0]) {
    EXPECT_GE(v, -1.0f);
    EXPECT_LE(v, 1.0f);
  }
}

TEST(Source, SampleIndexing) {
  AudioSource s;
  s.clip = std::make_shared<Clip>(Clip{1.0f, 2.0f, 3.0f});
  EXPECT_EQ(s.sample(-1), 0.0);
  EXPECT_EQ(s.sample(2), 3.0);
  EXPECT_EQ(s.sample(3), 0.0);
  s.loop = true;
  EXPECT_EQ(s.sample(4), 2.0);
  EXPECT_EQ(s.sample(-1), 0.0);
}

TEST(Fft, DcAndSingleBin) {
  const std::vector<float> dc(1024, 0.5f);
  const auto m = fft_magnitude(dc, 1024);
  ASSERT_EQ(m.size(), 1u);
  ASSERT_EQ(m[0].size(), 513u);
  EXPECT_NEAR(m[0][0], 512.0, 1e-9);
  for (int b = 1; b < 513; ++b) EXPECT_NEAR(m[0][b], 0.0, 1e-9);

  std::vector<float> tone(1024);
  for (int i = 0; i < 1024; ++i) tone[i] = static_cast<float>(std::sin(2 * kPi * 21 * i / 1024.0));
  const auto t = fft_magnitude(tone, 1024);
  std::size_t peak = 0;
  for (std::size_t b = 0; b < t[0].size(); ++b) {
    if (t[0][b] > t[0][peak]) peak = b;
  }
  EXPECT_EQ(peak, 21u);
  EXPECT_NEAR(t[0][21], 512.0, 1e-3);
}

TEST(Fft, MatchesDirectDftAndParseval) {
  const auto clip = noise_clip(600, 7);
  const int window = 256;
  const auto m = fft_magnitude(*clip, window);
  ASSERT_EQ(m.size(), 3u);  // 600 samples -> 3 windows, last zero-padded
  for (std::size_t w = 0; w < m.size(); ++w) {
    std::vector<double> x(window, 0.0);
    for (int i = 0; i < window; ++i) {
      const std::size_t j = w * window + i;
      if (j < clip->size()) x[i] = (*clip)[j];
    }
    const auto ref = dft_magnitude(x);
    for (std::size_t b = 0; b < ref.size(); ++b) EXPECT_NEAR(m[w][b], ref[b], 1e-9);
    double time = 0.0, freq = 0.0;
    for (double v : x) time += v * v;
    for (std::size_t b = 0; b < ref.size(); ++b) {
      const double wgt = (b == 0 || b == ref.size() - 1) ? 1.0 : 2.0;
      freq += wgt * m[w][b] * m[w][b];
    }
    EXPECT_NEAR(freq / window, time, 1e-9 * window);
  }
}

TEST(Fft, StereoLayout) {
  StereoBuffer b{std::vector<float>(441, 1.0f), std::vector<float>(441, 0.0f)};
  int windows = 0;
  const auto s = stereo_spectra(b, 128, &windows);
  EXPECT_EQ(windows, 4);
  ASSERT_EQ(s.size(), 4u * 2 * 65);
  EXPECT_NEAR(s[0], 128.0f, 1e-4);
  EXPECT_EQ(s[65], 0.0f);
}

TEST(Localize, SignFollowsSide) {
  const AudioConfig cfg;
  const auto clip = noise_clip(3000, 8);
  for (AudioMode mode : {AudioMode::Stereo, AudioMode::Hrtf}) {
    for (double az : {-80.0, -40.0, -10.0, 10.0, 40.0, 80.0}) {
      const double a = deg_to_rad(az);
      AudioSource s = source_at(Vec3(std::sin(a), 0, std::cos(a)) * 2.0, clip);
      s.cursor = 500;
      const auto buf = spatialize(s, listener_at(Vec3::Zero(), mode), nullptr, nullptr, cfg, 441);
      EXPECT_EQ(localize_left_right(buf, 20), az > 0 ? 1 : -1) << to_string(mode) << " " << az;
    }
  }
}

TEST(Localize, MonoIsUndecidable) {
  const auto clip = noise_clip(3000, 9);
  AudioSource s = source_at(Vec3(2, 0, 0.5), clip);
  s.cursor = 500;
  const auto buf = spatialize(s, listener_at(Vec3::Zero(), AudioMode::Mono), nullptr, nullptr,
                              AudioConfig{}, 441);
  EXPECT_EQ(itd_lag(buf[0], buf[1], 20), 0);
}

TEST(Hrtf, FileRoundTripAndResample) {
  HrtfTable t;
  t.sample_rate = 22050;
  for (double az : {-90.0, 0.0, 90.0}) {
    HrirPair p;
    p.azimuth_deg = az;
    p.elevation_deg = 10.0;
    p.left = {1.0f, 0.5f, 0.25f, 0.0f};
    p.right = {0.0f, 0.25f, 0.5f, 1.0f};
    t.entries.push_back(p);
  }
  const auto path = std::filesystem::temp_directory_path() / "embsim_test.vhrt";
  save_hrtf(t, path);
  const auto same = load_hrtf(path, 22050);
  ASSERT_EQ(same.entries.size(), 3u);
  EXPECT_EQ(same.entries[2].left, t.entries[2].left);
  EXPECT_EQ(same.entries[0].azimuth_deg, -90.0);
  EXPECT_EQ(&same.nearest(70.0, 0.0), &same.entries[2]);
  EXPECT_EQ(&same.nearest(-20.0, 0.0), &same.entries[1]);
  const auto doubled = load_hrtf(path, 44100);
  EXPECT_EQ(doubled.taps(), 8u);
  EXPECT_EQ(doubled.sample_rate, 44100);

  {
    std::ofstream bad(path, std::ios::binary);
    bad << "NOPE";
  }
  try {
    load_hrtf(path, 22050);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Io);
  }
  std::filesystem::remove(path);
}
