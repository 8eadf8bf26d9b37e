#pragma once

// Constant-twist state-lattice planner used both as the classical baseline
// and as the teacher that labels detour trajectories for distillation.

#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "lmnav/core.hpp"
#include "lmnav/geometry.hpp"

namespace lmnav {

inline constexpr int kPrimitiveCount = 15;

// The fixed (v, omega) lattice. Order matters: ties in cost resolve to the
// lowest index, so keep this list exactly as is.
inline const std::array<Twist, kPrimitiveCount>& primitive_motions() {
  static const std::array<Twist, kPrimitiveCount> motions = {{
      {0.0, 0.0},
      {0.2, 0.0},
      {0.2, 0.3},
      {0.2, 0.6},
      {0.2, 0.9},
      {0.2, -0.3},
      {0.2, -0.6},
      {0.2, -0.9},
      {0.5, 0.0},
      {0.5, 0.3},
      {0.5, 0.6},
      {0.5, 0.9},
      {0.5, -0.3},
      {0.5, -0.6},
      {0.5, -0.9},
  }};
  return motions;
}

struct PrimitiveSet {
  int steps = 8;
  double dt = 0.333;  // lookahead horizon = steps * dt = 2.664 s
};

struct PlannerConfig {
  PrimitiveSet primitives;
  double robot_radius = 0.3;
  double collision_penalty = 1000.0;
};

// Forward-simulated pose sequences for all primitives from p0.
inline std::array<std::vector<Pose2>, kPrimitiveCount> primitive_rollouts(
    const Pose2& p0, const PrimitiveSet& set) {
  std::array<std::vector<Pose2>, kPrimitiveCount> out;
  for (int j = 0; j < kPrimitiveCount; ++j) {
    CommandSequence seq;
    seq.dt = set.dt;
    seq.commands.assign(set.steps, primitive_motions()[j]);
    out[j] = rollout(p0, seq);
  }
  return out;
}

// Closest-approach squared distance to the goal plus a flat penalty if any
// pose of the primitive comes within robot_radius of an obstacle point.
inline double primitive_cost(const std::vector<Pose2>& traj, const Vec2& goal,
                             const std::vector<Vec2>& obstacles, const PlannerConfig& cfg) {
  if (traj.empty()) throw std::invalid_argument("empty primitive trajectory");
  double best = std::numeric_limits<double>::infinity();
  double min_clearance = std::numeric_limits<double>::infinity();
  for (const Pose2& p : traj) {
    best = std::min(best, squared_norm(p.position() - goal));
    for (const Vec2& ob : obstacles)
      min_clearance = std::min(min_clearance, distance(p.position(), ob));
  }
  double cost = best;
  if (min_clearance < cfg.robot_radius) cost += cfg.collision_penalty;
  return cost;
}

// One planning cycle: all primitive costs plus the argmin.
struct PlanEvaluation {
  std::array<double, kPrimitiveCount> costs{};
  int chosen = 0;
};

inline PlanEvaluation evaluate_primitives(const Pose2& p0, const Vec2& goal,
                                          const std::vector<Vec2>& obstacles,
                                          const PlannerConfig& cfg) {
  const auto rollouts = primitive_rollouts(p0, cfg.primitives);
  PlanEvaluation ev;
  double best = std::numeric_limits<double>::infinity();
  for (int j = 0; j < kPrimitiveCount; ++j) {
    ev.costs[j] = primitive_cost(rollouts[j], goal, obstacles, cfg);
    if (ev.costs[j] < best) {  // strict: equal cost keeps the earlier primitive
      best = ev.costs[j];
      ev.chosen = j;
    }
  }
  return ev;
}

inline Twist plan_step(const Pose2& p0, const Vec2& goal, const std::vector<Vec2>& obstacles,
                       const PlannerConfig& cfg) {
  return primitive_motions()[evaluate_primitives(p0, goal, obstacles, cfg).chosen];
}

// Closed-loop teacher: plan, apply the first interval, re-plan; records the
// m poses visited. Output is in the same frame as p0.
inline std::vector<Pose2> teacher_trajectory(const Pose2& p0, const Vec2& goal,
                                             const std::vector<Vec2>& obstacles,
                                             const PlannerConfig& cfg, int m) {
  if (m < 1) throw std::invalid_argument("teacher horizon must be positive");
  std::vector<Pose2> traj;
  traj.reserve(m);
  Pose2 p = p0;
  for (int k = 0; k < m; ++k) {
    const Twist u = plan_step(p, goal, obstacles, cfg);
    p = integrate_step(p, u, cfg.primitives.dt);
    traj.push_back(p);
  }
  return traj;
}

enum class RunOutcome { success, collision, timeout };

struct ControlStep {
  PlanEvaluation evaluation;
  Twist command;
  Pose2 pose;  // pose after applying command
};

struct ControlRun {
  Pose2 start;
  std::vector<ControlStep> steps;
  RunOutcome outcome = RunOutcome::timeout;
  double final_distance = 0.0;
};

// Receding-horizon execution toward a static goal. Success when within
// success_radius (boundary inclusive); collision when a step lands within
// robot_radius of an obstacle point.
inline ControlRun receding_horizon_control(const Pose2& p0, const Vec2& goal,
                                           const std::vector<Vec2>& obstacles,
                                           const PlannerConfig& cfg, int max_steps,
                                           double success_radius = 0.2) {
  ControlRun run;
  run.start = p0;
  Pose2 p = p0;
  for (int k = 0; k < max_steps; ++k) {
    if (distance(p.position(), goal) <= success_radius) {
      run.outcome = RunOutcome::success;
      run.final_distance = distance(p.position(), goal);
      return run;
    }
    ControlStep step;
    step.evaluation = evaluate_primitives(p, goal, obstacles, cfg);
    step.command = primitive_motions()[step.evaluation.chosen];
    p = integrate_step(p, step.command, cfg.primitives.dt);
    step.pose = p;
    run.steps.push_back(step);
    for (const Vec2& ob : obstacles) {
      if (distance(p.position(), ob) < cfg.robot_radius) {
        run.outcome = RunOutcome::collision;
        run.final_distance = distance(p.position(), goal);
        return run;
      }
    }
  }
  run.final_distance = distance(p.position(), goal);
  run.outcome = distance(p.position(), goal) <= success_radius ? RunOutcome::success
                                                               : RunOutcome::timeout;
  return run;
}

}  // namespace lmnav
