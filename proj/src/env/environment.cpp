#include "embsim/env/environment.hpp"

#include "embsim/error.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <set>

namespace embsim {

using nlohmann::json;

namespace {

constexpr double kBallRadius = 0.1;
constexpr double kBallMass = 0.45;

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

json pose_json(const Pose& p) {
  const Quat& q = p.orientation;
  return {{"position", vec_json(p.position)}, {"orientation", {q.w(), q.x(), q.y(), q.z()}}};
}

std::size_t expected_length(ActionKind kind, int dof) {
  switch (kind) {
    case ActionKind::Walk:
    case ActionKind::RotateHead: return 2;
    case ActionKind::Look: return 3;
    case ActionKind::Torque: return static_cast<std::size_t>(dof);
    default: return 0;
  }
}

bool animation_only(ActionKind kind) {
  return kind == ActionKind::Walk || kind == ActionKind::Kick || kind == ActionKind::Grab ||
         kind == ActionKind::Release;
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const std::size_t end = s.find(',', start);
    const std::string item = s.substr(start, end == std::string::npos ? std::string::npos : end - start);
    if (!item.empty()) out.push_back(item);
    if (end == std::string::npos) break;
    start = end + 1;
  }
  return out;
}

}  // namespace

int EnvConfig::episode_limit() const { return max_steps > 0 ? max_steps : default_max_steps(task); }

EnvConfig env_config_from_json(const json& doc) {
  static const std::set<std::string> kKeys = {
      "task",      "playground",  "scene_file",     "agents",     "obs",
      "audio_fft", "audio_mode",  "hrtf_file",      "max_steps",  "helper_rewards",
      "vision",    "camera",      "dt_physics",     "substeps",   "interact_distance",
      "tactile_d_max", "sample_rate", "head_shadow"};
  if (!doc.is_object()) throw Error(ErrorCode::Configuration, "configuration must be an object");
  for (const auto& [k, v] : doc.items()) {
    if (!kKeys.count(k)) throw Error(ErrorCode::Configuration, "unknown configuration key '" + k + "'");
  }
  try {
    EnvConfig c;
    if (doc.contains("task")) c.task = task_from_string(doc["task"].get<std::string>());
    c.playground = doc.value("playground", c.playground);
    if (doc.contains("scene_file") && !doc["scene_file"].is_null()) {
      c.scene_file = doc["scene_file"].get<std::string>();
    }
    c.agents = doc.value("agents", c.agents);
    if (doc.contains("obs")) {
      const json& o = doc["obs"];
      const std::vector<std::string> keys =
          o.is_string() ? split_csv(o.get<std::string>()) : o.get<std::vector<std::string>>();
      c.obs.vision = c.obs.audio = c.obs.tactile = c.obs.proprio = false;
      for (const std::string& k : keys) {
        if (k == "vision") c.obs.vision = true;
        else if (k == "audio") c.obs.audio = true;
        else if (k == "tactile") c.obs.tactile = true;
        else if (k == "proprio") c.obs.proprio = true;
        else throw Error(ErrorCode::Configuration, "unknown observation '" + k + "'");
      }
    }
    c.obs.audio_fft = doc.value("audio_fft", c.obs.audio_fft);
    if (doc.contains("audio_mode")) c.audio_mode = audio_mode_from_string(doc["audio_mode"].get<std::string>());
    if (doc.contains("hrtf_file") && !doc["hrtf_file"].is_null()) {
      c.hrtf_file = doc["hrtf_file"].get<std::string>();
    }
    c.max_steps = doc.value("max_steps", c.max_steps);
    c.helper_rewards = doc.value("helper_rewards", c.helper_rewards);
    if (doc.contains("vision")) {
      const json& v = doc["vision"];
      c.vision.grayscale = v.value("grayscale", c.vision.grayscale);
      c.vision.blur_sigma = v.value("blur_sigma", c.vision.blur_sigma);
      c.vision.depth_of_field = v.value("depth_of_field", c.vision.depth_of_field);
      c.vision.aperture = v.value("aperture", c.vision.aperture);
      c.vision.focal_distance = v.value("focal_distance", c.vision.focal_distance);
    }
    if (doc.contains("camera")) {
      const json& k = doc["camera"];
      c.agent.camera.vertical_fov_deg = k.value("fov", c.agent.camera.vertical_fov_deg);
      c.agent.camera.width = k.value("width", c.agent.camera.width);
      c.agent.camera.height = k.value("height", c.agent.camera.height);
    }
    c.dt_physics = doc.value("dt_physics", c.dt_physics);
    c.substeps = doc.value("substeps", c.substeps);
    c.agent.interact_distance = doc.value("interact_distance", c.agent.interact_distance);
    c.tactile_d_max = doc.value("tactile_d_max", c.tactile_d_max);
    c.audio.fs = doc.value("sample_rate", c.audio.fs);
    c.audio.head_shadow = doc.value("head_shadow", c.audio.head_shadow);
    return c;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Configuration, std::string("malformed configuration: ") + e.what());
  }
}

json env_config_to_json(const EnvConfig& c) {
  std::vector<std::string> obs;
  if (c.obs.vision) obs.push_back("vision");
  if (c.obs.audio) obs.push_back("audio");
  if (c.obs.tactile) obs.push_back("tactile");
  if (c.obs.proprio) obs.push_back("proprio");
  json doc{{"task", to_string(c.task)},
           {"playground", c.playground},
           {"agents", c.agents},
           {"obs", obs},
           {"audio_fft", c.obs.audio_fft},
           {"audio_mode", to_string(c.audio_mode)},
           {"max_steps", c.episode_limit()},
           {"helper_rewards", c.helper_rewards},
           {"vision",
            {{"grayscale", c.vision.grayscale},
             {"blur_sigma", c.vision.blur_sigma},
             {"depth_of_field", c.vision.depth_of_field},
             {"aperture", c.vision.aperture},
             {"focal_distance", c.vision.focal_distance}}},
           {"camera",
            {{"fov", c.agent.camera.vertical_fov_deg},
             {"width", c.agent.camera.width},
             {"height", c.agent.camera.height}}},
           {"dt_physics", c.dt_physics},
           {"substeps", c.substeps},
           {"interact_distance", c.agent.interact_distance},
           {"tactile_d_max", c.tactile_d_max},
           {"sample_rate", c.audio.fs},
           {"head_shadow", c.audio.head_shadow}};
  if (c.scene_file) doc["scene_file"] = c.scene_file->string();
  if (c.hrtf_file) doc["hrtf_file"] = c.hrtf_file->string();
  return doc;
}

Environment::Environment(EnvConfig config) : config_(std::move(config)) {
  if (!(config_.dt_physics > 0.0) || config_.substeps < 1) {
    throw Error(ErrorCode::Configuration, "dt_physics must be > 0 and substeps >= 1");
  }
  config_.audio.dt_control = config_.dt_control();
  config_.audio.validate();
  Camera{Pose{}, config_.agent.camera.vertical_fov_deg, config_.agent.camera.width,
         config_.agent.camera.height}
      .validate();
  scene_ = config_.scene_file ? load_scene(*config_.scene_file) : load_playground(config_.playground);
  check_task_scene(config_.task, scene_.room_count(), config_.agents);
  config_.agent.mode = task_action_mode(config_.task);
  skeleton_ = std::make_shared<SkeletonConfig>(simple18());
  skin_ = std::make_unique<TactileSkin>(*skeleton_, config_.tactile_d_max);
  if (config_.hrtf_file) hrtf_ = load_hrtf(*config_.hrtf_file, config_.audio.fs);
  buzz_ = std::make_shared<Clip>(sine_clip(kBuzzHz, 1.0, config_.audio.fs, 1.0));
  clock_ = SimClock(config_.dt_physics);
}

Vec3 Environment::sample_free_point(RngStream& rng, const RoomSpec& room, double clearance,
                                    const std::vector<Vec3>& taken, double taken_clearance) {
  for (int attempt = 0; attempt < 500; ++attempt) {
    const double hx = room.size.x() / 2.0 - clearance;
    const double hz = room.size.z() / 2.0 - clearance;
    const Vec3 p(room.center_x + rng.uniform(-hx, hx), 0.0, room.center_z + rng.uniform(-hz, hz));
    bool ok = true;
    for (BodyId id : built_.props) {
      for (std::uint32_t c : world_->colliders_of(id)) {
        const Collider& col = world_->colliders()[c];
        const Aabb box = bounds(col.shape, col.world_pose(world_->body(id))).inflated(clearance);
        if (p.x() >= box.lo.x() && p.x() <= box.hi.x() && p.z() >= box.lo.z() && p.z() <= box.hi.z()) {
          ok = false;
        }
      }
    }
    for (const Vec3& t : taken) {
      if (horizontal(t - p).norm() < taken_clearance) ok = false;
    }
    if (ok) return p;
  }
  throw Error(ErrorCode::Configuration, "no free spawn point in room " + room.name);
}

void Environment::respawn_ball(TaskObject& ball) {
  std::vector<const RoomSpec*> rooms;
  for (const RoomSpec& r : scene_.rooms) {
    if (!r.corridor) rooms.push_back(&r);
  }
  const RoomSpec& room = *rooms[task_rng_.uniform_int(rooms.size())];
  const int wall = static_cast<int>(task_rng_.uniform_int(4));
  const double inset = 0.25;
  const bool along_x = wall < 2;
  const double half_len = (along_x ? room.size.x() : room.size.z()) / 2.0 - 0.4;
  const double s = task_rng_.uniform(-half_len, half_len);
  Vec3 pos, vel;
  switch (wall) {
    case 0:  // north
      pos = Vec3(room.center_x + s, kBallRadius, room.center_z + room.size.z() / 2.0 - inset);
      vel = Vec3(0, 0, -kRespawnSpeed);
      break;
    case 1:  // south
      pos = Vec3(room.center_x + s, kBallRadius, room.center_z - room.size.z() / 2.0 + inset);
      vel = Vec3(0, 0, kRespawnSpeed);
      break;
    case 2:  // east
      pos = Vec3(room.center_x + room.size.x() / 2.0 - inset, kBallRadius, room.center_z + s);
      vel = Vec3(-kRespawnSpeed, 0, 0);
      break;
    default:  // west
      pos = Vec3(room.center_x - room.size.x() / 2.0 + inset, kBallRadius, room.center_z + s);
      vel = Vec3(kRespawnSpeed, 0, 0);
      break;
  }
  RigidBody& b = world_->body(ball.body);
  b.position = pos;
  b.orientation = Quat::Identity();
  b.linear_velocity = vel;
  b.angular_velocity.setZero();
}

void Environment::spawn_task() {
  RngStream scene_rng = derive_stream(seed_, StreamId::SceneSampling);
  std::vector<const RoomSpec*> rooms;
  for (const RoomSpec& r : scene_.rooms) {
    if (!r.corridor) rooms.push_back(&r);
  }
  auto random_room = [&]() -> const RoomSpec& { return *rooms[scene_rng.uniform_int(rooms.size())]; };
  std::vector<Vec3> taken;
  AgentConfig acfg = config_.agent;

  agents_.clear();
  for (int i = 0; i < config_.agents; ++i) {
    const RoomSpec& room = config_.task == TaskId::MultiAgentNav ? *rooms[i] : random_room();
    const Vec3 p = sample_free_point(scene_rng, room, 0.6, taken, 1.0);
    double yaw = scene_rng.uniform(-kPi, kPi);
    if (config_.task == TaskId::GrabObject) yaw = 0.0;
    taken.push_back(p);
    agents_.push_back(Agent::spawn(*world_, skeleton_, i, acfg, p, yaw));
  }

  auto add_object = [&](const std::string& kind, const Shape& shape, const Vec3& pos,
                        const Vec3& color, double mass, bool fixed, double footprint) {
    RigidBody b;
    b.name = kind;
    b.mass = mass;
    b.kinematic = fixed;
    b.gravity = !fixed;
    b.color = color;
    b.position = pos;
    const BodyId id = world_->add_body(b);
    world_->add_collider({id, shape, {}});
    objects_.push_back({id, kind, footprint});
    return id;
  };

  switch (config_.task) {
    case TaskId::KickTheBall: {
      const BodyId id = add_object("ball", Sphere{kBallRadius}, Vec3(0, kBallRadius, 0),
                                   Vec3(0.9, 0.15, 0.1), kBallMass, false, kBallRadius);
      world_->body(id).linear_damping = 0.3;
      respawn_ball(objects_.back());
      AudioSource buzz;
      buzz.clip = buzz_;
      buzz.loop = true;
      buzz.gain = 0.5;
      buzz.position = world_->body(id).position;
      sources_.push_back(buzz);
      break;
    }
    case TaskId::ObjectNav: {
      struct Kind {
        const char* name;
        Shape shape;
        double y;
        Vec3 color;
        double footprint;
      };
      const Kind kinds[] = {
          {"ball", Sphere{0.15}, 0.15, Vec3(0.9, 0.15, 0.1), 0.15},
          {"box", Box{Vec3::Constant(0.15)}, 0.15, Vec3(0.1, 0.7, 0.2), 0.15},
          {"capsule", Capsule{0.12, 0.15}, 0.27, Vec3(0.15, 0.3, 0.9), 0.12},
      };
      for (const Kind& k : kinds) {
        Vec3 p = sample_free_point(scene_rng, random_room(), 0.5, taken, 1.2);
        taken.push_back(p);
        p.y() = k.y;
        add_object(k.name, k.shape, p, k.color, 1.0, true, k.footprint);
      }
      target_ = 0;
      break;
    }
    case TaskId::GrabObject: {
      const Pose root = agents_.front().root_pose(*world_);
      const Vec3 base = root.apply(Vec3(0, 0, 0.35));
      RigidBody pedestal;
      pedestal.name = "pedestal";
      pedestal.kinematic = true;
      pedestal.gravity = false;
      pedestal.mass = 50.0;
      pedestal.color = Vec3(0.6, 0.6, 0.6);
      pedestal.position = base + Vec3(0, 0.13, 0);
      const BodyId ped = world_->add_body(pedestal);
      world_->add_collider({ped, Box{Vec3(0.12, 0.13, 0.12)}, {}});
      add_object("block", Box{Vec3::Constant(0.04)}, base + Vec3(0, 0.30, 0),
                 Vec3(0.95, 0.85, 0.1), 0.2, false, 0.04);
      break;
    }
    case TaskId::MultiAgentNav: {
      const RoomSpec& room = *rooms[scene_rng.uniform_int(rooms.size())];
      Vec3 p = sample_free_point(scene_rng, room, 0.6, taken, 1.2);
      p.y() = 0.15;
      add_object("ball", Sphere{0.15}, p, Vec3(0.9, 0.15, 0.1), 1.0, true, 0.15);
      target_ = 0;
      break;
    }
  }
  for (Agent& a : agents_) {
    if (config_.task == TaskId::GrabObject) a.look_toward_point(world_->body(objects_[0].body).position);
    a.update_kinematics(*world_, 0.0);
  }
}

Listener Environment::listener(int agent) const {
  const Agent& a = agents_.at(agent);
  const Pose head = a.head_pose();
  Listener l;
  l.head = Pose{head.apply(Vec3(0.0, a.skeleton().eye_offset.y(), 0.0)), head.orientation};
  l.ear_left = Vec3(config_.audio.head_radius, 0.0, 0.0);
  l.ear_right = Vec3(-config_.audio.head_radius, 0.0, 0.0);
  l.mode = config_.audio_mode;
  return l;
}

std::vector<ObservationFrame> Environment::reset(std::uint64_t seed) {
  seed_ = seed;
  world_ = std::make_unique<PhysicsWorld>();
  built_ = build_scene(scene_, *world_);
  sources_.clear();
  objects_.clear();
  target_.reset();
  task_rng_ = derive_stream(seed, StreamId::Task);
  clock_.reset();
  steps_ = 0;
  done_ = false;
  spawn_task();
  reached_.assign(agents_.size(), false);
  prev_hand_distance_.clear();
  if (config_.task == TaskId::GrabObject) {
    const Vec3 o = world_->body(objects_[0].body).position;
    for (const Agent& a : agents_) {
      prev_hand_distance_.push_back(
          hand_object_distance(a.palm_center(Hand::Left), a.palm_center(Hand::Right), o));
    }
  }
  spdlog::debug("reset seed={} task={} scene={}", seed, to_string(config_.task), scene_.name);
  return observe();
}

void Environment::validate_action(const Agent& agent, const Action& a) const {
  const auto kind = static_cast<int>(a.kind);
  if (kind < 0 || kind > static_cast<int>(ActionKind::Torque)) {
    throw Error(ErrorCode::InvalidAction, "unknown action kind " + std::to_string(kind));
  }
  if (agent.mode() == ActionMode::JointTorque && animation_only(a.kind)) {
    throw Error(ErrorCode::ModeConflict, "agent is in joint-torque mode");
  }
  if (agent.mode() == ActionMode::Animation && a.kind == ActionKind::Torque) {
    throw Error(ErrorCode::ModeConflict, "agent is in animation mode");
  }
  for (float v : a.data) {
    if (!std::isfinite(v)) throw Error(ErrorCode::InvalidAction, "action values must be finite");
  }
  const int dof = agent.skeleton().total_dof();
  if (a.kind == ActionKind::Sound) return;
  if ((a.kind == ActionKind::Kick || a.kind == ActionKind::Grab) && a.data.size() <= 1) {
    if (a.data.size() == 1 && (a.data[0] < 0.0f || a.data[0] >= world_->bodies().size())) {
      throw Error(ErrorCode::InvalidAction, "object id out of range");
    }
    return;
  }
  if (a.data.size() != expected_length(a.kind, dof)) {
    throw Error(ErrorCode::InvalidAction,
                "action kind " + std::to_string(kind) + " expects " +
                    std::to_string(expected_length(a.kind, dof)) + " values, got " +
                    std::to_string(a.data.size()));
  }
  if (a.kind == ActionKind::Walk && (std::abs(a.data[0]) > 3.0f || std::abs(a.data[1]) > 4.0f * kPi)) {
    throw Error(ErrorCode::InvalidAction, "walk speed or turn rate out of range");
  }
}

void Environment::make_sound(int agent, std::span<const float> samples) {
  if (samples.empty()) return;
  AudioSource s;
  s.clip = std::make_shared<Clip>(samples.begin(), samples.end());
  s.position = listener(agent).head.position;
  sources_.push_back(std::move(s));
}

StepResult Environment::step(std::span<const Action> actions) {
  if (!world_) throw Error(ErrorCode::NotReset, "step before reset");
  if (done_) throw Error(ErrorCode::EpisodeFinished, "episode is done; call reset");
  if (actions.size() != agents_.size()) {
    throw Error(ErrorCode::InvalidAction, "expected " + std::to_string(agents_.size()) +
                                              " actions, got " + std::to_string(actions.size()));
  }
  for (std::size_t i = 0; i < actions.size(); ++i) {
    try {
      validate_action(agents_[i], actions[i]);
    } catch (const Error& e) {
      throw Error(e.code(), "agent " + std::to_string(i) + ": " + e.what());
    }
  }

  const double dt_control = config_.dt_control();
  json events = json::array();
  std::vector<Vec3> root_before;
  for (const Agent& a : agents_) root_before.push_back(world_->body(a.root_body()).position);
  std::vector<double> object_y_before;
  for (const TaskObject& o : objects_) object_y_before.push_back(world_->body(o.body).position.y());

  // Interaction targets are chosen on the pre-step state for every agent.
  std::vector<std::optional<BodyId>> chosen(agents_.size());
  for (std::size_t i = 0; i < agents_.size(); ++i) {
    const Action& a = actions[i];
    if (a.kind != ActionKind::Kick && a.kind != ActionKind::Grab) continue;
    if (!a.data.empty()) {
      chosen[i] = static_cast<BodyId>(a.data[0]);
    } else {
      const auto list = agents_[i].interactable_objects(*world_);
      if (!list.empty()) chosen[i] = list.front();
    }
  }

  std::vector<bool> kicked(agents_.size(), false);
  auto refuse = [&](std::size_t i, const std::string& what, const std::string& why) {
    events.push_back({{"agent", i}, {"type", "refused"}, {"action", what}, {"reason", why}});
  };
  for (std::size_t i = 0; i < agents_.size(); ++i) {
    if (actions[i].kind != ActionKind::Release) continue;
    if (const auto held = agents_[i].grabbed()) {
      agents_[i].release(*world_);
      events.push_back({{"agent", i}, {"type", "released"}, {"object", *held}});
    }
  }
  for (std::size_t i = 0; i < agents_.size(); ++i) {
    const ActionKind k = actions[i].kind;
    if (k != ActionKind::Kick && k != ActionKind::Grab) continue;
    const char* name = k == ActionKind::Kick ? "kick" : "grab";
    if (!chosen[i]) {
      refuse(i, name, "nothing interactable");
      continue;
    }
    try {
      if (k == ActionKind::Kick) {
        agents_[i].kick(*world_, *chosen[i]);
        kicked[i] = true;
        events.push_back({{"agent", i}, {"type", "kicked"}, {"object", *chosen[i]}});
      } else {
        agents_[i].grab(*world_, *chosen[i]);
        events.push_back({{"agent", i}, {"type", "grabbed"}, {"object", *chosen[i]}});
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::InteractionRefused && e.code() != ErrorCode::NotFound) throw;
      refuse(i, name, e.what());
    }
  }

  for (std::size_t i = 0; i < agents_.size(); ++i) {
    Agent& agent = agents_[i];
    const Action& a = actions[i];
    world_->body(agent.root_body()).linear_velocity.setZero();
    if (agent.mode() == ActionMode::JointTorque) {
      for (Joint& j : agent.joints(*world_)) {
        for (JointAxis& ax : j.axes) ax.torque = 0.0;
      }
    }
    switch (a.kind) {
      case ActionKind::Walk: agent.walk(*world_, a.data[0], a.data[1], dt_control); break;
      case ActionKind::Look: agent.look_toward_point(Vec3(a.data[0], a.data[1], a.data[2])); break;
      case ActionKind::ReleaseLook: agent.release_look(); break;
      case ActionKind::RotateHead: agent.rotate_head(a.data[0], a.data[1]); break;
      case ActionKind::Sound: make_sound(static_cast<int>(i), a.data); break;
      case ActionKind::Torque: {
        const std::vector<double> u(a.data.begin(), a.data.end());
        agent.apply_torque(*world_, u);
        break;
      }
      default: break;
    }
    if (config_.task == TaskId::GrabObject) {
      agent.look_toward_point(world_->body(objects_[0].body).position);
    }
  }

  const double dt = config_.dt_physics;
  for (int k = 0; k < config_.substeps; ++k) {
    world_->step(dt);
    for (Agent& a : agents_) a.update_kinematics(*world_, dt);
    clock_.advance();
  }
  ++steps_;

  // Rewards on the post-step state.
  StepResult result;
  json inputs = json::array();
  bool terminal = false;
  std::vector<Vec3> velocity;
  for (std::size_t i = 0; i < agents_.size(); ++i) {
    velocity.push_back((world_->body(agents_[i].root_body()).position - root_before[i]) / dt_control);
  }
  auto visible = [&](const Agent& a, BodyId id) {
    return a.is_visible(*world_, id, Eye::Left) || a.is_visible(*world_, id, Eye::Right);
  };
  for (std::size_t i = 0; i < agents_.size(); ++i) {
    const Agent& agent = agents_[i];
    const Pose root = agent.root_pose(*world_);
    json in{{"velocity", vec_json(velocity[i])}};
    RewardBreakdown r;
    switch (config_.task) {
      case TaskId::KickTheBall: {
        const Vec3 ball = world_->body(objects_[0].body).position;
        r = kick_the_ball_reward(velocity[i], root.position, ball, kicked[i]);
        in["position"] = vec_json(root.position);
        in["ball"] = vec_json(ball);
        in["kicked"] = static_cast<bool>(kicked[i]);
        break;
      }
      case TaskId::ObjectNav: {
        NavOutcome outcome = NavOutcome::None;
        for (std::size_t k = 0; k < objects_.size(); ++k) {
          const Vec3 p = world_->body(objects_[k].body).position;
          if (reach_distance(root.position, p, objects_[k].footprint) < kReachRadius) {
            if (k == *target_) {
              outcome = NavOutcome::Target;
            } else if (outcome == NavOutcome::None) {
              outcome = NavOutcome::Wrong;
            }
          }
        }
        const TaskObject& t = objects_[*target_];
        const Vec3 target = world_->body(t.body).position;
        const bool vis = visible(agent, t.body);
        r = object_nav_reward(velocity[i], root, target, vis, outcome);
        in["root"] = pose_json(root);
        in["target"] = vec_json(target);
        in["visible"] = vis;
        in["outcome"] = static_cast<int>(outcome);
        if (outcome != NavOutcome::None) {
          terminal = true;
          events.push_back({{"agent", i},
                            {"type", outcome == NavOutcome::Target ? "reached" : "reached_wrong"}});
        }
        break;
      }
      case TaskId::GrabObject: {
        const Vec3 o = world_->body(objects_[0].body).position;
        const Vec3 lh = agent.palm_center(Hand::Left);
        const Vec3 rh = agent.palm_center(Hand::Right);
        const double rise = o.y() - object_y_before[0];
        std::vector<double> act(agent.skeleton().total_dof(), 0.0);
        if (actions[i].kind == ActionKind::Torque) act.assign(actions[i].data.begin(), actions[i].data.end());
        r = grab_object_reward(lh, rh, o, rise, prev_hand_distance_[i], act);
        in["left_hand"] = vec_json(lh);
        in["right_hand"] = vec_json(rh);
        in["object"] = vec_json(o);
        in["rise"] = rise;
        in["previous_distance"] = prev_hand_distance_[i];
        in["action"] = act;
        prev_hand_distance_[i] = hand_object_distance(lh, rh, o);
        break;
      }
      case TaskId::MultiAgentNav: {
        const TaskObject& t = objects_[0];
        const Vec3 p = world_->body(t.body).position;
        const bool now = !reached_[i] && reach_distance(root.position, p, t.footprint) < kReachRadius;
        if (now) {
          reached_[i] = true;
          events.push_back({{"agent", i}, {"type", "reached"}});
        }
        const bool vis = visible(agent, t.body);
        r = multi_agent_nav_reward(velocity[i], root, p, vis, now);
        in["root"] = pose_json(root);
        in["object"] = vec_json(p);
        in["visible"] = vis;
        in["reached_now"] = now;
        break;
      }
    }
    if (!config_.helper_rewards) r.helper = r.penalty = 0.0;
    result.breakdown.push_back(r);
    result.rewards.push_back(r.total());
    inputs.push_back(std::move(in));
  }
  if (config_.task == TaskId::MultiAgentNav) {
    terminal = std::all_of(reached_.begin(), reached_.end(), [](bool b) { return b; });
  }
  if (config_.task == TaskId::KickTheBall &&
      std::any_of(kicked.begin(), kicked.end(), [](bool b) { return b; })) {
    respawn_ball(objects_[0]);
    events.push_back({{"type", "respawned"}, {"object", objects_[0].body}});
  }
  const bool truncated = !terminal && steps_ >= config_.episode_limit();
  done_ = terminal || truncated;
  result.done = done_;

  json rewards = json::array();
  for (const RewardBreakdown& r : result.breakdown) rewards.push_back(to_json(r));
  result.info = {{"step", steps_},
                 {"time", clock_.time()},
                 {"task", to_string(config_.task)},
                 {"events", events},
                 {"terminal", terminal},
                 {"truncated", truncated},
                 {"rewards", rewards},
                 {"reward_inputs", inputs}};
  result.observations = observe();
  return result;
}

std::vector<ObservationFrame> Environment::observe() {
  const std::size_t n_agents = agents_.size();
  std::vector<ObservationFrame> frames(n_agents);

  if (config_.task == TaskId::KickTheBall && !objects_.empty() && !sources_.empty()) {
    sources_[0].position = world_->body(objects_[0].body).position;
  }
  std::vector<StereoBuffer> audio;
  if (config_.obs.audio) {
    std::vector<Listener> listeners;
    for (std::size_t i = 0; i < n_agents; ++i) listeners.push_back(listener(static_cast<int>(i)));
    audio = mix_frame(listeners, sources_, hrtf_ ? &*hrtf_ : nullptr, &scene_.audio_room,
                      config_.audio, config_.audio.frame_samples());
    const auto tail = static_cast<std::uint64_t>(config_.audio.fs);
    std::erase_if(sources_, [&](const AudioSource& s) {
      return !s.loop && s.cursor > s.clip->size() + tail;
    });
  }

  for (std::size_t i = 0; i < n_agents; ++i) {
    const Agent& agent = agents_[i];
    ObservationFrame& f = frames[i];
    if (config_.obs.vision) {
      const StereoFrame sf = render_binocular(*world_, agent, config_.vision);
      const Image& l = sf.eyes[0].image;
      std::vector<float> px;
      px.reserve(l.data.size() * 2);
      for (const auto& eye : sf.eyes) px.insert(px.end(), eye.image.data.begin(), eye.image.data.end());
      f.add("vision", Tensor::from_f32({2u, std::uint32_t(l.channels), std::uint32_t(l.height),
                                        std::uint32_t(l.width)},
                                       px));
    }
    if (config_.obs.audio) {
      const StereoBuffer& buf = audio[i];
      if (config_.obs.audio_fft) {
        int windows = 0;
        const auto spec = stereo_spectra(buf, config_.audio.fft_window, &windows);
        f.add("audio", Tensor::from_f32({std::uint32_t(windows), 2u,
                                         std::uint32_t(config_.audio.fft_window / 2 + 1)},
                                        spec));
      } else {
        std::vector<float> raw(buf[0]);
        raw.insert(raw.end(), buf[1].begin(), buf[1].end());
        f.add("audio", Tensor::from_f32({2u, std::uint32_t(buf[0].size())}, raw));
      }
    }
    if (config_.obs.tactile) {
      skin_->update(agent.bone_poses());
      const auto t = skin_->sense(*world_, static_cast<int>(i));
      f.add("tactile", Tensor::from_f64({std::uint32_t(t.size())}, t));
    }
    if (config_.obs.proprio) {
      const auto p = agent.proprioception(*world_);
      f.add("proprio", Tensor::from_f64({std::uint32_t(p.size())}, p));
    }
  }
  return frames;
}

}  // namespace embsim
