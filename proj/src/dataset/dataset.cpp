#include "embsim/dataset/dataset.hpp"

#include "embsim/env/scene.hpp"
#include "embsim/error.hpp"
#include "embsim/humanoid/skeleton.hpp"
#include "embsim/rng.hpp"
#include "embsim/sensors/tactile.hpp"
#include "embsim/sensors/vision.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <memory>

namespace embsim::dataset {

using nlohmann::json;

namespace {

constexpr int kImageSize = 84;
constexpr double kIpd = 0.06;
constexpr int kSoundSamples = 4410;  // 0.2 s at 22050 Hz
constexpr int kMaxRetries = 64;

std::string num(double v) { return fmt::format("{:.17g}", v); }

Tensor to_u8(std::vector<std::uint32_t> shape, std::span<const float> values) {
  std::vector<std::uint8_t> px(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    px[i] = static_cast<std::uint8_t>(std::lround(std::clamp(values[i], 0.0f, 1.0f) * 255.0f));
  }
  return Tensor::from_u8(std::move(shape), px);
}

// Shared empty SimpleEnv room; samples copy it before adding their object.
const PhysicsWorld& simple_room() {
  static const PhysicsWorld world = [] {
    PhysicsWorld w;
    build_scene(load_playground("SimpleEnv"), w);
    return w;
  }();
  return world;
}

Camera camera(const Vec3& eye, const Quat& q) {
  return Camera{Pose{eye, q}, 60.0, kImageSize, kImageSize};
}

struct VisionScene {
  PhysicsWorld world;
  BodyId object = 0;
  int cls = 0;
  Vec3 eye;
  Quat orientation;
};

// One object on the floor of SimpleEnv, viewed from a random pose that keeps it in view.
VisionScene vision_scene(RngStream& rng, int cls) {
  for (int attempt = 0; attempt < kMaxRetries; ++attempt) {
    VisionScene s{simple_room(), 0, cls, {}, {}};
    const Vec3 base(rng.uniform(-1.5, 1.5), 0.0, rng.uniform(-1.5, 1.5));
    s.object = add_vision_object(s.world, cls, base, rng.uniform(-kPi, kPi));
    const Vec3 centre = s.world.body(s.object).position;
    const double d = rng.uniform(0.8, 3.0);
    const double az = rng.uniform(-kPi, kPi);
    const double h = rng.uniform(0.3, 1.6);
    const Vec3 offset(std::sin(az), 0.0, std::cos(az));
    const double flat = std::sqrt(std::max(d * d - (h - centre.y()) * (h - centre.y()), 0.01));
    s.eye = Vec3(centre.x() + offset.x() * flat, h, centre.z() + offset.z() * flat);
    if (std::abs(s.eye.x()) > 2.8 || std::abs(s.eye.z()) > 2.8) continue;
    const Vec3 aim = centre + Vec3(rng.uniform(-0.15, 0.15), rng.uniform(-0.15, 0.15),
                                   rng.uniform(-0.15, 0.15));
    s.orientation = look_at(s.eye, aim);
    const RenderResult r = render(s.world, camera(s.eye, s.orientation));
    if (bounding_box(r.ids, kImageSize, kImageSize, static_cast<int>(s.object))) return s;
  }
  throw Error(ErrorCode::InvalidGeometry, "no camera pose keeps the object in view");
}

Tensor binocular(const VisionScene& s) {
  const Vec3 left = s.orientation * kLeft;
  std::vector<float> px;
  for (double side : {1.0, -1.0}) {
    const Image img = render(s.world, camera(s.eye + side * left * kIpd / 2, s.orientation)).image;
    px.insert(px.end(), img.data.begin(), img.data.end());
  }
  return to_u8({2, 3, kImageSize, kImageSize}, px);
}

std::vector<float> noise_burst(RngStream& rng, int n) {
  std::vector<float> burst(n);
  for (float& v : burst) v = static_cast<float>(0.3 * rng.normal());
  return burst;
}

const SkeletonConfig& skeleton() { return simple18(); }

std::shared_ptr<const MeshData> mesh(const std::string& key) {
  static const std::map<std::string, std::shared_ptr<const MeshData>> meshes{
      {"vision_pyramid", std::make_shared<MeshData>(make_pyramid_mesh(0.13, 0.26))},
      {"tactile_pyramid", std::make_shared<MeshData>(make_pyramid_mesh(0.025, 0.045))},
      {"tactile_cylinder", std::make_shared<MeshData>(make_cylinder_mesh(0.02, 0.02, 16))},
  };
  return meshes.at(key);
}

// Palm faces local +x of the right hand; rotating +x onto +y turns it up.
const Quat kPalmUp(Eigen::AngleAxisd(kPi / 2, Vec3::UnitZ()));

}  // namespace

Kind kind_from_string(const std::string& name) {
  for (Kind k : {Kind::ImageClassification, Kind::TactileClassification, Kind::Distance,
                 Kind::BoundingBox, Kind::SoundLocalization}) {
    if (name == to_string(k)) return k;
  }
  throw Error(ErrorCode::Configuration, "unknown dataset kind '" + name + "'");
}

const char* to_string(Kind kind) noexcept {
  switch (kind) {
    case Kind::ImageClassification: return "image";
    case Kind::TactileClassification: return "tactile";
    case Kind::Distance: return "distance";
    case Kind::BoundingBox: return "bbox";
    case Kind::SoundLocalization: return "sound";
  }
  return "?";
}

std::vector<std::string> kind_names() { return {"image", "bbox", "distance", "sound", "tactile"}; }

std::vector<std::uint8_t> encode_vten(const Tensor& t) {
  t.validate();
  std::vector<std::uint8_t> out{'V', 'T', 'E', 'N', static_cast<std::uint8_t>(t.dtype),
                                static_cast<std::uint8_t>(t.shape.size())};
  for (std::uint32_t d : t.shape) {
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(d >> (8 * b)));
  }
  out.insert(out.end(), t.bytes.begin(), t.bytes.end());
  return out;
}

Tensor decode_vten(std::span<const std::uint8_t> in) {
  if (in.size() < 6 || std::memcmp(in.data(), "VTEN", 4) != 0) {
    throw Error(ErrorCode::Io, "not a VTEN tensor");
  }
  if (in[4] > 1) throw Error(ErrorCode::Io, "unknown VTEN element type");
  Tensor t;
  t.dtype = static_cast<DType>(in[4]);
  const std::size_t ndim = in[5];
  if (in.size() < 6 + 4 * ndim) throw Error(ErrorCode::Io, "truncated VTEN header");
  for (std::size_t d = 0; d < ndim; ++d) {
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b) v |= std::uint32_t(in[6 + 4 * d + b]) << (8 * b);
    t.shape.push_back(v);
  }
  t.bytes.assign(in.begin() + 6 + 4 * ndim, in.end());
  try {
    t.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::Io, std::string("VTEN payload: ") + e.what());
  }
  return t;
}

void write_vten(const std::filesystem::path& path, const Tensor& t) {
  const auto bytes = encode_vten(t);
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
}

Tensor read_vten(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  return decode_vten(bytes);
}

Quat look_at(const Vec3& eye, const Vec3& target) {
  const Vec3 fwd = (target - eye).normalized();
  Vec3 left = kUp.cross(fwd);
  if (left.norm() < 1e-9) left = kLeft;
  left.normalize();
  Eigen::Matrix3d m;
  m.col(0) = left;
  m.col(1) = fwd.cross(left);
  m.col(2) = fwd;
  return Quat(m).normalized();
}

const std::vector<std::string>& vision_classes() {
  static const std::vector<std::string> c{"doll", "ball", "pyramid"};
  return c;
}

const std::vector<std::string>& tactile_classes() {
  static const std::vector<std::string> c{"pyramid", "sphere", "cube", "cylinder"};
  return c;
}

BodyId add_vision_object(PhysicsWorld& world, int cls, const Vec3& base, double yaw) {
  RigidBody b;
  b.kinematic = true;
  b.gravity = false;
  b.name = vision_classes().at(cls);
  b.orientation = yaw_rotation(yaw);
  switch (cls) {
    case 0: b.position = base + Vec3(0, 0.15, 0); b.color = Vec3(0.95, 0.75, 0.6); break;
    case 1: b.position = base + Vec3(0, 0.12, 0); b.color = Vec3(0.9, 0.25, 0.2); break;
    default: b.position = base + Vec3(0, 0.13, 0); b.color = Vec3(0.25, 0.45, 0.9); break;
  }
  const BodyId id = world.add_body(b);
  switch (cls) {
    case 0:
      world.add_collider({id, Capsule{0.07, 0.08}, {}});
      world.add_collider({id, Sphere{0.07}, Pose{Vec3(0, 0.22, 0), Quat::Identity()}});
      break;
    case 1: world.add_collider({id, Sphere{0.12}, {}}); break;
    default: world.add_collider({id, TriangleMesh{mesh("vision_pyramid")}, {}}); break;
  }
  return id;
}

VisionView vision_view(std::uint64_t seed, int index) {
  RngStream rng = derive_stream(seed, static_cast<std::uint64_t>(index));
  const VisionScene s = vision_scene(rng, index % 3);
  return {s.cls, s.eye, s.orientation, s.world.body(s.object).position};
}

Sample image_sample(std::uint64_t seed, int index) {
  RngStream rng = derive_stream(seed, static_cast<std::uint64_t>(index));
  const int cls = index % 3;
  const VisionScene s = vision_scene(rng, cls);
  return {binocular(s), {vision_classes()[cls], std::to_string(cls)}};
}

Sample bbox_sample(std::uint64_t seed, int index) {
  RngStream rng = derive_stream(seed, static_cast<std::uint64_t>(index));
  const int cls = index % 3;
  const VisionScene s = vision_scene(rng, cls);
  const RenderResult r = render(s.world, camera(s.eye, s.orientation));
  const auto box = *bounding_box(r.ids, kImageSize, kImageSize, static_cast<int>(s.object));
  return {to_u8({3, kImageSize, kImageSize}, r.image.data),
          {vision_classes()[cls], num(box.center_x()), num(box.center_y()),
           std::to_string(box.y1 - box.y0 + 1), std::to_string(box.x1 - box.x0 + 1)}};
}

Sample distance_sample(std::uint64_t seed, int index) {
  RngStream rng = derive_stream(seed, static_cast<std::uint64_t>(index));
  const int cls = index % 3;
  const VisionScene s = vision_scene(rng, cls);
  const double d = (s.world.body(s.object).position - s.eye).norm();
  return {binocular(s), {vision_classes()[cls], num(d)}};
}

Sample render_sound(const SoundScene& scene, std::span<const float> burst,
                    const SoundSetup& setup) {
  static const RoomAcoustics room = load_playground("SimpleEnv").audio_room;
  const AudioConfig cfg;
  Listener l;
  l.head = scene.head;
  l.mode = setup.mode;
  std::vector<AudioSource> src(1);
  src[0].position = scene.source;
  src[0].clip = std::make_shared<Clip>(burst.begin(), burst.end());
  const auto out = mix_frame(std::span(&l, 1), src, setup.hrtf, setup.room ? &room : nullptr, cfg,
                             kSoundSamples);
  std::vector<float> data(out[0][0]);
  data.insert(data.end(), out[0][1].begin(), out[0][1].end());
  const Vec3 dir = scene.head.inverse_apply(scene.source).normalized();
  return {Tensor::from_f32({2, kSoundSamples}, data), {num(dir.x()), num(dir.y()), num(dir.z())}};
}

Sample sound_sample(std::uint64_t seed, int index, const SoundSetup& setup) {
  RngStream rng = derive_stream(seed, static_cast<std::uint64_t>(index));
  SoundScene scene;
  const Vec3 head(rng.uniform(-2.5, 2.5), rng.uniform(1.0, 1.7), rng.uniform(-2.5, 2.5));
  scene.head = Pose{head, yaw_rotation(rng.uniform(-kPi, kPi))};
  do {
    scene.source = Vec3(rng.uniform(-2.8, 2.8), rng.uniform(0.2, 2.5), rng.uniform(-2.8, 2.8));
  } while ((scene.source - head).norm() < 0.5);
  const auto burst = noise_burst(rng, kSoundSamples);
  return render_sound(scene, burst, setup);
}

Tensor record_drop(const TactileDrop& drop) {
  const SkeletonConfig& sk = skeleton();
  const int hand = sk.hand_bones[1];
  const BoneDef& bone = sk.bones[hand];

  PhysicsWorld world;
  // Hand collider centred on the origin with the palm facing up.
  const Pose hand_pose{-(kPalmUp * bone.collider_center), kPalmUp};
  RigidBody h;
  h.kinematic = true;
  h.gravity = false;
  h.agent = 0;
  h.position = hand_pose.position;
  h.orientation = hand_pose.orientation;
  const BodyId hid = world.add_body(h);
  world.add_collider({hid, Box{bone.collider_half}, Pose{bone.collider_center, Quat::Identity()}});
  const double palm_y = bone.collider_half.x();

  Shape shape;
  switch (drop.cls) {
    case 0: shape = TriangleMesh{mesh("tactile_pyramid")}; break;
    case 1: shape = Sphere{0.022}; break;
    case 2: shape = Box{Vec3::Constant(0.02)}; break;
    default: shape = TriangleMesh{mesh("tactile_cylinder")}; break;
  }
  RigidBody o;
  o.name = tactile_classes().at(drop.cls);
  o.mass = 0.1;
  o.orientation = drop.orientation;
  o.position = Vec3::Zero();
  double lowest = -bounds(shape, Pose{Vec3::Zero(), drop.orientation}).lo.y();
  o.position = Vec3(drop.offset.x(), palm_y + drop.height + lowest, drop.offset.z());
  const BodyId oid = world.add_body(o);
  world.add_collider({oid, shape, {}});

  TactileSkin skin(sk);
  std::vector<Pose> poses(sk.bones.size(), Pose{Vec3(0, -100, 0), Quat::Identity()});
  poses[hand] = hand_pose;
  skin.update(poses);

  const double dt = 0.004;
  std::vector<double> values;
  for (int s = 0; s < kTactileSteps; ++s) {
    world.step(dt);
    const auto reading = skin.sense(world, 0);
    const auto part = skin.by_bone(reading, hand);
    values.insert(values.end(), part.begin(), part.end());
  }
  const auto taxels = static_cast<std::uint32_t>(skin.taxels_of_bone(hand).size());
  return Tensor::from_f64({kTactileSteps, taxels}, values);
}

Sample tactile_sample(std::uint64_t seed, int index) {
  RngStream rng = derive_stream(seed, static_cast<std::uint64_t>(index));
  TactileDrop d;
  d.cls = index % 4;
  d.offset = Vec3(rng.uniform(-0.015, 0.015), 0.0, rng.uniform(-0.012, 0.012));
  d.height = rng.uniform(0.02, 0.08);
  // Contacts carry no torque, so objects are dropped in a resting orientation.
  d.orientation = yaw_rotation(rng.uniform(-kPi, kPi));
  if (d.cls == 3 && rng.uniform() < 0.5) {
    d.orientation = d.orientation * Quat(Eigen::AngleAxisd(kPi / 2, Vec3::UnitX()));
  }
  return {record_drop(d), {tactile_classes()[d.cls], std::to_string(d.cls)}};
}

namespace {

std::vector<std::string> label_columns(Kind k) {
  switch (k) {
    case Kind::ImageClassification:
    case Kind::TactileClassification: return {"label", "class_id"};
    case Kind::Distance: return {"object", "distance_m"};
    case Kind::BoundingBox: return {"object", "x", "y", "h", "w"};
    case Kind::SoundLocalization: return {"dir_x", "dir_y", "dir_z"};
  }
  return {};
}

json sensor_json(const GenOptions& o) {
  switch (o.kind) {
    case Kind::ImageClassification:
    case Kind::Distance:
      return {{"camera", "binocular"}, {"width", kImageSize}, {"height", kImageSize},
              {"vertical_fov_deg", 60.0}, {"ipd", kIpd}, {"dtype", "u8"}, {"playground", "SimpleEnv"}};
    case Kind::BoundingBox:
      return {{"camera", "mono"}, {"width", kImageSize}, {"height", kImageSize},
              {"vertical_fov_deg", 60.0}, {"dtype", "u8"}, {"playground", "SimpleEnv"}};
    case Kind::SoundLocalization:
      return {{"audio_mode", embsim::to_string(o.audio_mode)}, {"sample_rate", 22050},
              {"samples", kSoundSamples}, {"room", "SimpleEnv"},
              {"hrtf_file", o.hrtf_file ? o.hrtf_file->string() : ""}};
    case Kind::TactileClassification:
      return {{"hand", "right"}, {"steps", kTactileSteps}, {"dt_physics", 0.004}, {"d_max", 0.01}};
  }
  return {};
}

}  // namespace

json generate(const GenOptions& o) {
  if (o.n < 1) throw Error(ErrorCode::Configuration, "sample count must be >= 1");
  std::error_code ec;
  std::filesystem::create_directories(o.out, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create " + o.out.string() + ": " + ec.message());

  std::optional<HrtfTable> hrtf;
  if (o.hrtf_file) hrtf = load_hrtf(*o.hrtf_file, 22050);
  const SoundSetup sound{o.audio_mode, hrtf ? &*hrtf : nullptr, true};

  const auto columns = label_columns(o.kind);
  std::ofstream labels(o.out / "labels.csv");
  if (!labels) throw Error(ErrorCode::Io, "cannot write labels.csv in " + o.out.string());
  labels << "index,file";
  for (const auto& c : columns) labels << ',' << c;
  labels << '\n';

  json files = json::array();
  for (int i = 0; i < o.n; ++i) {
    Sample s;
    switch (o.kind) {
      case Kind::ImageClassification: s = image_sample(o.seed, i); break;
      case Kind::BoundingBox: s = bbox_sample(o.seed, i); break;
      case Kind::Distance: s = distance_sample(o.seed, i); break;
      case Kind::SoundLocalization: s = sound_sample(o.seed, i, sound); break;
      case Kind::TactileClassification: s = tactile_sample(o.seed, i); break;
    }
    const std::string name = fmt::format("data_{:06d}.vten", i);
    write_vten(o.out / name, s.data);
    labels << i << ',' << name;
    for (const auto& v : s.label) labels << ',' << v;
    labels << '\n';
    files.push_back({{"name", name},
                     {"dtype", s.data.dtype == DType::F32 ? "f32" : "u8"},
                     {"shape", s.data.shape},
                     {"bytes", encode_vten(s.data).size()}});
    if ((i + 1) % 100 == 0) spdlog::info("{}: {}/{} samples", to_string(o.kind), i + 1, o.n);
  }
  labels.close();
  if (!labels) throw Error(ErrorCode::Io, "failed writing labels.csv");

  json schema{{"columns", columns}};
  if (o.kind == Kind::ImageClassification || o.kind == Kind::BoundingBox ||
      o.kind == Kind::Distance) {
    schema["classes"] = vision_classes();
  }
  if (o.kind == Kind::TactileClassification) schema["classes"] = tactile_classes();
  if (o.kind == Kind::BoundingBox) schema["units"] = "pixels; x,y box centre, h,w size";
  if (o.kind == Kind::Distance) schema["units"] = "metres, eye midpoint to object centre";
  if (o.kind == Kind::SoundLocalization) schema["units"] = "unit vector in the head frame (+x left, +y up, +z forward)";

  json manifest{{"format", "embsim-dataset"},
                {"version", 1},
                {"kind", to_string(o.kind)},
                {"n", o.n},
                {"seed", o.seed},
                {"sensor", sensor_json(o)},
                {"label_schema", schema},
                {"labels", "labels.csv"},
                {"files", files}};
  if (o.kind != Kind::SoundLocalization && o.kind != Kind::TactileClassification) {
    manifest["notes"] = {"doll is a capsule torso with a sphere head"};
  }
  std::ofstream mf(o.out / "manifest.json");
  mf << manifest.dump(2) << '\n';
  if (!mf) throw Error(ErrorCode::Io, "cannot write manifest.json");
  return manifest;
}

int validate_dataset(const std::filesystem::path& dir) {
  std::ifstream mf(dir / "manifest.json");
  if (!mf) throw Error(ErrorCode::Io, "missing manifest.json in " + dir.string());
  const json m = json::parse(mf);
  const int n = m.at("n").get<int>();
  if (n < 1) throw Error(ErrorCode::Io, "manifest sample count below 1");
  const auto& files = m.at("files");
  if (static_cast<int>(files.size()) != n) throw Error(ErrorCode::Io, "manifest file list length != n");
  for (const auto& f : files) {
    const auto path = dir / f.at("name").get<std::string>();
    if (!std::filesystem::exists(path)) throw Error(ErrorCode::Io, "missing " + path.string());
    if (std::filesystem::file_size(path) != f.at("bytes").get<std::uintmax_t>()) {
      throw Error(ErrorCode::Io, "size mismatch for " + path.string());
    }
    const Tensor t = read_vten(path);
    if (t.shape != f.at("shape").get<std::vector<std::uint32_t>>()) {
      throw Error(ErrorCode::Io, "shape mismatch for " + path.string());
    }
  }
  std::ifstream labels(dir / m.at("labels").get<std::string>());
  if (!labels) throw Error(ErrorCode::Io, "missing labels file");
  std::string line;
  int rows = -1;  // header
  while (std::getline(labels, line)) {
    if (!line.empty()) ++rows;
  }
  if (rows != n) throw Error(ErrorCode::Io, "labels.csv rows != n");
  return n;
}

}  // namespace embsim::dataset
