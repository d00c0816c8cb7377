#include "embsim/env/tasks.hpp"

#include "embsim/error.hpp"

#include <cmath>

namespace embsim {

using nlohmann::json;

namespace {

Vec3 vec(const json& j) { return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()}; }

Pose pose(const json& j) {
  const json& q = j.at("orientation");
  return {vec(j.at("position")),
          Quat(q[0].get<double>(), q[1].get<double>(), q[2].get<double>(), q[3].get<double>())};
}

RewardBreakdown strip_helpers(RewardBreakdown r, bool enabled) {
  if (!enabled) r.helper = r.penalty = 0.0;
  return r;
}

}  // namespace

json to_json(const RewardBreakdown& r) {
  return {{"sparse", r.sparse}, {"helper", r.helper}, {"penalty", r.penalty}, {"total", r.total()}};
}

RewardBreakdown kick_the_ball_reward(const Vec3& agent_velocity, const Vec3& agent_position,
                                     const Vec3& ball_position, bool kicked) {
  RewardBreakdown r;
  r.sparse = kicked ? 1.0 : 0.0;
  const Vec3 v = horizontal(agent_velocity);
  const Vec3 d = horizontal(ball_position - agent_position);
  if (v.norm() >= 1e-6 && d.norm() > 0.0) {
    r.helper = 0.01 * v.dot(d) / (v.norm() * d.norm());
  }
  return r;
}

double nav_helper(const Vec3& agent_velocity, const Pose& root, const Vec3& target,
                  bool target_visible) {
  if (!target_visible) return 0.0;
  const double a_f = agent_velocity.dot(root.forward());
  const double a_l = agent_velocity.dot(root.left());
  const double side = (target - root.position).dot(root.left());
  const double L = side > 0.0 ? 1.0 : -1.0;
  return 0.05 * a_f + 0.03 * a_l * L;
}

RewardBreakdown object_nav_reward(const Vec3& agent_velocity, const Pose& root,
                                  const Vec3& target, bool target_visible, NavOutcome outcome) {
  RewardBreakdown r;
  if (outcome == NavOutcome::Target) r.sparse = 1.0;
  if (outcome == NavOutcome::Wrong) r.sparse = -1.0;
  r.helper = nav_helper(agent_velocity, root, target, target_visible);
  return r;
}

double hand_object_distance(const Vec3& left_hand, const Vec3& right_hand, const Vec3& object) {
  return (right_hand - object).norm() + (left_hand - object).norm();
}

RewardBreakdown grab_object_reward(const Vec3& left_hand, const Vec3& right_hand,
                                   const Vec3& object, double object_rise,
                                   double previous_distance, std::span<const double> action,
                                   double hold_radius) {
  RewardBreakdown r;
  const bool held =
      (left_hand - object).norm() < hold_radius && (right_hand - object).norm() < hold_radius;
  r.sparse = held ? object_rise : 0.0;
  r.helper = previous_distance - hand_object_distance(left_hand, right_hand, object);
  double a2 = 0.0;
  for (double a : action) a2 += a * a;
  r.penalty = -0.004 * a2;
  return r;
}

RewardBreakdown multi_agent_nav_reward(const Vec3& agent_velocity, const Pose& root,
                                       const Vec3& object, bool object_visible, bool reached_now) {
  RewardBreakdown r;
  r.sparse = reached_now ? 1.0 : 0.0;
  r.helper = nav_helper(agent_velocity, root, object, object_visible);
  return r;
}

double reach_distance(const Vec3& root, const Vec3& object, double footprint_radius) {
  return horizontal(object - root).norm() - footprint_radius;
}

RewardBreakdown recompute_reward(const std::string& task, const json& in, bool helpers) {
  switch (task_from_string(task)) {
    case TaskId::KickTheBall:
      return strip_helpers(kick_the_ball_reward(vec(in.at("velocity")), vec(in.at("position")),
                                                vec(in.at("ball")), in.at("kicked").get<bool>()),
                           helpers);
    case TaskId::ObjectNav:
      return strip_helpers(
          object_nav_reward(vec(in.at("velocity")), pose(in.at("root")), vec(in.at("target")),
                            in.at("visible").get<bool>(),
                            static_cast<NavOutcome>(in.at("outcome").get<int>())),
          helpers);
    case TaskId::GrabObject: {
      const auto action = in.at("action").get<std::vector<double>>();
      return strip_helpers(
          grab_object_reward(vec(in.at("left_hand")), vec(in.at("right_hand")),
                             vec(in.at("object")), in.at("rise").get<double>(),
                             in.at("previous_distance").get<double>(), action),
          helpers);
    }
    case TaskId::MultiAgentNav:
      return strip_helpers(
          multi_agent_nav_reward(vec(in.at("velocity")), pose(in.at("root")),
                                 vec(in.at("object")), in.at("visible").get<bool>(),
                                 in.at("reached_now").get<bool>()),
          helpers);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown task " + task);
}

TaskId task_from_string(const std::string& name) {
  if (name == "kick_the_ball") return TaskId::KickTheBall;
  if (name == "object_nav") return TaskId::ObjectNav;
  if (name == "grab_object") return TaskId::GrabObject;
  if (name == "multi_agent_nav") return TaskId::MultiAgentNav;
  throw Error(ErrorCode::Configuration, "unknown task '" + name + "'");
}

const char* to_string(TaskId task) noexcept {
  switch (task) {
    case TaskId::KickTheBall: return "kick_the_ball";
    case TaskId::ObjectNav: return "object_nav";
    case TaskId::GrabObject: return "grab_object";
    case TaskId::MultiAgentNav: return "multi_agent_nav";
  }
  return "?";
}

ActionMode task_action_mode(TaskId task) {
  return task == TaskId::GrabObject ? ActionMode::JointTorque : ActionMode::Animation;
}

int default_max_steps(TaskId task) {
  switch (task) {
    case TaskId::KickTheBall: return 500;
    case TaskId::ObjectNav: return 1000;
    case TaskId::GrabObject: return 500;
    case TaskId::MultiAgentNav: return 2000;
  }
  return 500;
}

void check_task_scene(TaskId task, int room_count, int agents) {
  if (agents < 1) throw Error(ErrorCode::Configuration, "need at least one agent");
  if (task == TaskId::MultiAgentNav) {
    if (room_count < 2) {
      throw Error(ErrorCode::Configuration, "multi_agent_nav needs a multi-room playground");
    }
    if (agents > room_count) {
      throw Error(ErrorCode::Configuration, "multi_agent_nav places one agent per room; " +
                                                std::to_string(room_count) + " rooms available");
    }
  }
}

}  // namespace embsim
