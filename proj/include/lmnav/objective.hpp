#pragma once

// Training objective for the velocity-command policy: terminal goal distance,
// teacher-trajectory distillation (masked out near the goal), and command
// smoothness, plus its analytic gradient through the kinematic rollout.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "lmnav/core.hpp"
#include "lmnav/geometry.hpp"

namespace lmnav {

struct ObjectiveConfig {
  int horizon = 24;          // commands per sequence (N)
  int teacher_horizon = 8;   // distilled prefix length (M), M <= N
  double mask_radius = 1.0;  // distillation disabled when the goal is closer than this
  double lambda_col = 1.0;   // distillation weight

  void validate() const {
    if (horizon < 2) throw std::invalid_argument("horizon must be at least 2");
    if (teacher_horizon < 1 || teacher_horizon > horizon)
      throw std::invalid_argument("teacher horizon must be in [1, horizon]");
    if (!(mask_radius > 0.0)) throw std::invalid_argument("mask radius must be positive");
    if (lambda_col < 0.0) throw std::invalid_argument("negative distillation weight");
  }
};

// One evaluation of the objective, split into its terms.
// total = j_pose + lambda_col * epsilon * j_col + j_smooth, recomposed from
// exactly these fields.
struct ObjectiveBreakdown {
  double j_pose = 0.0;
  double j_col = 0.0;
  double j_smooth = 0.0;
  double total = 0.0;
  int epsilon = 1;
};

// Squared planar distance from the final rollout pose to the goal.
inline double j_pose(const std::vector<Pose2>& poses, const Vec2& goal) {
  if (poses.empty()) throw std::invalid_argument("empty rollout");
  return squared_norm(poses.back().position() - goal);
}

// Squared planar deviation from the teacher over the first M poses.
inline double j_col(const std::vector<Pose2>& poses, const std::vector<Pose2>& teacher) {
  if (teacher.size() > poses.size()) throw std::invalid_argument("teacher length mismatch");
  double sum = 0.0;
  for (std::size_t k = 0; k < teacher.size(); ++k)
    sum += squared_norm(poses[k].position() - teacher[k].position());
  return sum;
}

// Sum of squared consecutive command differences, both channels.
inline double j_smooth(const CommandSequence& seq) {
  double sum = 0.0;
  for (std::size_t k = 0; k + 1 < seq.commands.size(); ++k) {
    const double dv = seq.commands[k + 1].v - seq.commands[k].v;
    const double dw = seq.commands[k + 1].omega - seq.commands[k].omega;
    sum += dv * dv + dw * dw;
  }
  return sum;
}

inline int close_goal_epsilon(const Pose2& p0, const Vec2& goal, const ObjectiveConfig& cfg) {
  return distance(p0.position(), goal) < cfg.mask_radius ? 0 : 1;
}

inline ObjectiveBreakdown total_objective(const CommandSequence& seq, const Pose2& p0,
                                          const Vec2& goal, const std::vector<Pose2>& teacher,
                                          const ObjectiveConfig& cfg) {
  cfg.validate();
  if (static_cast<int>(seq.commands.size()) != cfg.horizon)
    throw std::invalid_argument("command count does not match horizon");
  if (static_cast<int>(teacher.size()) != cfg.teacher_horizon)
    throw std::invalid_argument("teacher length mismatch");
  const std::vector<Pose2> poses = rollout(p0, seq);
  ObjectiveBreakdown b;
  b.j_pose = j_pose(poses, goal);
  b.j_col = j_col(poses, teacher);
  b.j_smooth = j_smooth(seq);
  b.epsilon = close_goal_epsilon(p0, goal, cfg);
  b.total = b.j_pose + cfg.lambda_col * b.epsilon * b.j_col + b.j_smooth;
  return b;
}

// d(total)/d(command_k) for every k, via the rollout's reverse pass.
// When breakdown is non-null the forward evaluation is stored there.
inline std::vector<TwistGrad> objective_gradient(const CommandSequence& seq, const Pose2& p0,
                                                 const Vec2& goal,
                                                 const std::vector<Pose2>& teacher,
                                                 const ObjectiveConfig& cfg,
                                                 ObjectiveBreakdown* breakdown = nullptr) {
  const ObjectiveBreakdown b = total_objective(seq, p0, goal, teacher, cfg);
  if (breakdown) *breakdown = b;
  const std::vector<Pose2> poses = rollout(p0, seq);
  const int n = cfg.horizon;

  std::vector<Eigen::Vector3d> pose_grads(n, Eigen::Vector3d::Zero());
  const Vec2 end_err = poses.back().position() - goal;
  pose_grads[n - 1](0) += 2.0 * end_err.x;
  pose_grads[n - 1](1) += 2.0 * end_err.y;
  if (b.epsilon != 0 && cfg.lambda_col > 0.0) {
    for (int k = 0; k < cfg.teacher_horizon; ++k) {
      const Vec2 err = poses[k].position() - teacher[k].position();
      pose_grads[k](0) += 2.0 * cfg.lambda_col * err.x;
      pose_grads[k](1) += 2.0 * cfg.lambda_col * err.y;
    }
  }
  std::vector<TwistGrad> grads = rollout_backward(p0, seq, pose_grads);

  for (int k = 0; k < n; ++k) {
    if (k > 0) {
      grads[k].v += 2.0 * (seq.commands[k].v - seq.commands[k - 1].v);
      grads[k].omega += 2.0 * (seq.commands[k].omega - seq.commands[k - 1].omega);
    }
    if (k + 1 < n) {
      grads[k].v -= 2.0 * (seq.commands[k + 1].v - seq.commands[k].v);
      grads[k].omega -= 2.0 * (seq.commands[k + 1].omega - seq.commands[k].omega);
    }
  }
  return grads;
}

}  // namespace lmnav
