#pragma once

#include "embsim/humanoid/agent.hpp"
#include "embsim/math.hpp"

#include <nlohmann/json.hpp>

#include <span>
#include <string>
#include <vector>

namespace embsim {

struct RewardBreakdown {
  double sparse = 0.0;
  double helper = 0.0;
  double penalty = 0.0;

  double total() const { return sparse + helper + penalty; }
};

nlohmann::json to_json(const RewardBreakdown& r);

constexpr double kReachRadius = 0.5;  // m
constexpr double kHoldRadius = 0.15;  // m
constexpr double kBuzzHz = 440.0;
constexpr double kRespawnSpeed = 1.5;  // m/s

/// 0.01·cos θ between the agent's horizontal velocity and its displacement to
/// the ball; zero below 1e-6 m/s. Sparse +1 when kicked.
RewardBreakdown kick_the_ball_reward(const Vec3& agent_velocity, const Vec3& agent_position,
                                     const Vec3& ball_position, bool kicked);

enum class NavOutcome { None = 0, Target = 1, Wrong = 2 };

/// Helper Vis·(0.05·a_f + 0.03·a_l·L) in the agent's root frame, L = +1 when
/// the target lies on the agent's left, else -1.
double nav_helper(const Vec3& agent_velocity, const Pose& agent_root, const Vec3& target,
                  bool target_visible);
RewardBreakdown object_nav_reward(const Vec3& agent_velocity, const Pose& agent_root,
                                  const Vec3& target, bool target_visible, NavOutcome outcome);

/// |R - O| + |L - O|.
double hand_object_distance(const Vec3& left_hand, const Vec3& right_hand, const Vec3& object);
/// Sparse is the object's rise this step while both hands are within
/// hold_radius; helper d_{t-1} - d_t; penalty -0.004·|a|².
RewardBreakdown grab_object_reward(const Vec3& left_hand, const Vec3& right_hand,
                                   const Vec3& object, double object_rise,
                                   double previous_distance, std::span<const double> action,
                                   double hold_radius = kHoldRadius);

RewardBreakdown multi_agent_nav_reward(const Vec3& agent_velocity, const Pose& agent_root,
                                       const Vec3& object, bool object_visible, bool reached_now);

/// Horizontal distance from the agent root to the object's footprint edge.
double reach_distance(const Vec3& root, const Vec3& object, double footprint_radius);

/// Recomputes a reward from a logged reward_inputs record.
RewardBreakdown recompute_reward(const std::string& task, const nlohmann::json& inputs,
                                 bool helpers_enabled);

enum class TaskId { KickTheBall, ObjectNav, GrabObject, MultiAgentNav };

TaskId task_from_string(const std::string& name);
const char* to_string(TaskId task) noexcept;
ActionMode task_action_mode(TaskId task);
int default_max_steps(TaskId task);
/// Throws Configuration when the scene cannot host the task.
void check_task_scene(TaskId task, int room_count, int agents);

}  // namespace embsim
