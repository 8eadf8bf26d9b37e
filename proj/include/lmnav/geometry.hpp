#pragma once

// SE(2) kinematics with exact constant-twist integration and its analytic
// derivatives, plus the pinhole depth-camera operations used for labeling.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "lmnav/core.hpp"

namespace lmnav {

// Below this |omega| the arc formulas lose precision; use the straight-line limit.
inline constexpr double kOmegaStraightEps = 1e-9;

inline void require_finite(const Pose2& p) {
  if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.theta))
    throw std::domain_error("non-finite pose");
}

inline void require_finite(const Twist& u) {
  if (!std::isfinite(u.v) || !std::isfinite(u.omega))
    throw std::domain_error("non-finite command");
}

// Exact pose after holding command u for dt seconds (constant-twist arc).
inline Pose2 integrate_step(const Pose2& p, const Twist& u, double dt) {
  require_finite(p);
  require_finite(u);
  if (!std::isfinite(dt) || !(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  const double th = p.theta;
  double nx, ny;
  if (std::abs(u.omega) < kOmegaStraightEps) {
    nx = p.x + u.v * dt * std::cos(th);
    ny = p.y + u.v * dt * std::sin(th);
  } else {
    const double th1 = th + u.omega * dt;
    nx = p.x + u.v / u.omega * (std::sin(th1) - std::sin(th));
    ny = p.y - u.v / u.omega * (std::cos(th1) - std::cos(th));
  }
  return {nx, ny, normalize_angle(th + u.omega * dt)};
}

// Poses after each command; result[k] is the pose once commands 0..k have run.
inline std::vector<Pose2> rollout(const Pose2& p0, const CommandSequence& seq) {
  std::vector<Pose2> poses;
  poses.reserve(seq.commands.size());
  Pose2 p = p0;
  for (const Twist& u : seq.commands) {
    p = integrate_step(p, u, seq.dt);
    poses.push_back(p);
  }
  return poses;
}

// Partial derivatives of integrate_step at (p, u): wrt_pose is d(next)/d(p),
// wrt_command is d(next)/d(v, omega).
struct StepDerivatives {
  Eigen::Matrix3d wrt_pose;
  Eigen::Matrix<double, 3, 2> wrt_command;
};

inline StepDerivatives integrate_step_derivatives(const Pose2& p, const Twist& u, double dt) {
  const double th = p.theta, v = u.v, w = u.omega;
  StepDerivatives d;
  d.wrt_pose.setIdentity();
  d.wrt_command.setZero();
  if (std::abs(w) < kOmegaStraightEps) {
    const double c = std::cos(th), s = std::sin(th);
    d.wrt_pose(0, 2) = -v * dt * s;
    d.wrt_pose(1, 2) = v * dt * c;
    d.wrt_command(0, 0) = dt * c;
    d.wrt_command(1, 0) = dt * s;
    // omega -> 0 limits of the arc derivatives.
    d.wrt_command(0, 1) = -0.5 * v * dt * dt * s;
    d.wrt_command(1, 1) = 0.5 * v * dt * dt * c;
    d.wrt_command(2, 1) = dt;
  } else {
    const double th1 = th + w * dt;
    const double s0 = std::sin(th), c0 = std::cos(th);
    const double s1 = std::sin(th1), c1 = std::cos(th1);
    d.wrt_pose(0, 2) = v / w * (c1 - c0);
    d.wrt_pose(1, 2) = v / w * (s1 - s0);
    d.wrt_command(0, 0) = (s1 - s0) / w;
    d.wrt_command(1, 0) = -(c1 - c0) / w;
    d.wrt_command(0, 1) = v * (c1 * dt * w - (s1 - s0)) / (w * w);
    d.wrt_command(1, 1) = v * (s1 * dt * w + (c1 - c0)) / (w * w);
    d.wrt_command(2, 1) = dt;
  }
  return d;
}

// Dense Jacobian of every rollout pose with respect to every command.
// block(k, j) = d(pose_k)/d(v_j, omega_j); zero for j > k (causality).
struct RolloutJacobian {
  int steps = 0;
  std::vector<Eigen::Matrix<double, 3, 2>> blocks;
  const Eigen::Matrix<double, 3, 2>& block(int k, int j) const {
    return blocks[static_cast<std::size_t>(k) * steps + j];
  }
  Eigen::Matrix<double, 3, 2>& block(int k, int j) {
    return blocks[static_cast<std::size_t>(k) * steps + j];
  }
};

inline RolloutJacobian rollout_jacobian(const Pose2& p0, const CommandSequence& seq) {
  const int n = static_cast<int>(seq.commands.size());
  RolloutJacobian jac;
  jac.steps = n;
  jac.blocks.assign(static_cast<std::size_t>(n) * n, Eigen::Matrix<double, 3, 2>::Zero());
  Pose2 p = p0;
  for (int k = 0; k < n; ++k) {
    const StepDerivatives d = integrate_step_derivatives(p, seq.commands[k], seq.dt);
    for (int j = 0; j < k; ++j) jac.block(k, j) = d.wrt_pose * jac.block(k - 1, j);
    jac.block(k, k) = d.wrt_command;
    p = integrate_step(p, seq.commands[k], seq.dt);
  }
  return jac;
}

// Reverse-mode pass: pose_grads[k] holds dL/d(pose_k); returns dL/d(command_k).
// Equivalent to contracting against rollout_jacobian but O(N) in blocks.
inline std::vector<TwistGrad> rollout_backward(const Pose2& p0, const CommandSequence& seq,
                                               const std::vector<Eigen::Vector3d>& pose_grads) {
  const int n = static_cast<int>(seq.commands.size());
  if (static_cast<int>(pose_grads.size()) != n)
    throw std::invalid_argument("pose gradient count must match command count");
  std::vector<StepDerivatives> steps;
  steps.reserve(n);
  Pose2 p = p0;
  for (int k = 0; k < n; ++k) {
    steps.push_back(integrate_step_derivatives(p, seq.commands[k], seq.dt));
    p = integrate_step(p, seq.commands[k], seq.dt);
  }
  std::vector<TwistGrad> grads(n);
  Eigen::Vector3d g = Eigen::Vector3d::Zero();
  for (int k = n - 1; k >= 0; --k) {
    g += pose_grads[k];
    const Eigen::Vector2d gu = steps[k].wrt_command.transpose() * g;
    grads[k] = {gu(0), gu(1)};
    g = steps[k].wrt_pose.transpose() * g;
  }
  return grads;
}

// Planar rigid transforms.
inline Vec2 rotate(const Vec2& v, double th) {
  const double c = std::cos(th), s = std::sin(th);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

inline Vec2 to_world(const Pose2& frame, const Vec2& local) {
  return frame.position() + rotate(local, frame.theta);
}

inline Vec2 to_local(const Pose2& frame, const Vec2& world) {
  return rotate(world - frame.position(), -frame.theta);
}

inline Pose2 to_world_pose(const Pose2& frame, const Pose2& local) {
  const Vec2 p = to_world(frame, local.position());
  return {p.x, p.y, normalize_angle(frame.theta + local.theta)};
}

inline Pose2 to_local_pose(const Pose2& frame, const Pose2& world) {
  const Vec2 p = to_local(frame, world.position());
  return {p.x, p.y, normalize_angle(world.theta - frame.theta)};
}

// Depth image in meters, row-major; NaN marks an invalid pixel.
struct DepthMap {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  static DepthMap invalid_filled(int w, int h) {
    DepthMap d;
    d.width = w;
    d.height = h;
    d.values.assign(static_cast<std::size_t>(w) * h,
                    std::numeric_limits<double>::quiet_NaN());
    return d;
  }
  double at(int u, int v) const { return values[static_cast<std::size_t>(v) * width + u]; }
  double& at(int u, int v) { return values[static_cast<std::size_t>(v) * width + u]; }
  bool valid(int u, int v) const {
    const double d = at(u, v);
    return std::isfinite(d) && d > 0.0;
  }
};

// Camera-frame ray through pixel (u, v) scaled so z equals the stored depth.
inline Point3 back_project_pixel(double u, double v, double depth, const CameraIntrinsics& intr) {
  return {(u - intr.cx) / intr.fx * depth, (v - intr.cy) / intr.fy * depth, depth};
}

// All valid pixels as camera-frame points, row-major pixel order.
inline std::vector<Point3> back_project(const DepthMap& depth, const CameraIntrinsics& intr) {
  std::vector<Point3> cloud;
  cloud.reserve(depth.values.size());
  for (int v = 0; v < depth.height; ++v)
    for (int u = 0; u < depth.width; ++u)
      if (depth.valid(u, v)) cloud.push_back(back_project_pixel(u, v, depth.at(u, v), intr));
  return cloud;
}

struct PixelCoord {
  double u = 0.0;
  double v = 0.0;
  bool in_bounds = false;
};

inline PixelCoord project_to_pixel(const Point3& pt, const CameraIntrinsics& intr) {
  if (!(pt.z > 0.0)) throw std::invalid_argument("behind camera");
  PixelCoord px;
  px.u = intr.fx * pt.x / pt.z + intr.cx;
  px.v = intr.fy * pt.y / pt.z + intr.cy;
  px.in_bounds = px.u >= 0.0 && px.u < intr.width && px.v >= 0.0 && px.v < intr.height;
  return px;
}

// Componentwise median over the selected subset; even counts average the two
// middle values. The selection mask runs parallel to the cloud.
inline Point3 masked_median_pose(const std::vector<Point3>& cloud,
                                 const std::vector<std::uint8_t>& mask) {
  if (mask.size() != cloud.size()) throw std::invalid_argument("mask size mismatch");
  std::vector<double> xs, ys, zs;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (!mask[i]) continue;
    xs.push_back(cloud[i].x);
    ys.push_back(cloud[i].y);
    zs.push_back(cloud[i].z);
  }
  if (xs.empty()) throw std::invalid_argument("empty mask");
  auto median = [](std::vector<double>& v) {
    const std::size_t n = v.size();
    const std::size_t mid = n / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    double m = v[mid];
    if (n % 2 == 0) {
      const double lo = *std::max_element(v.begin(), v.begin() + mid);
      m = 0.5 * (lo + m);
    }
    return m;
  };
  return {median(xs), median(ys), median(zs)};
}

// Which camera axis points along gravity, i.e. which coordinate to drop when
// flattening a 3D point onto the motion plane.
enum class HeightAxis {
  camera_y,  // forward-looking camera (z fwd, x right, y down): planar = (z, -x)
  world_z,   // already a ground-frame point (z up): planar = (x, y)
};

inline Vec2 to_planar(const Point3& pt, HeightAxis axis = HeightAxis::camera_y) {
  switch (axis) {
    case HeightAxis::camera_y:
      return {pt.z, -pt.x};
    case HeightAxis::world_z:
      return {pt.x, pt.y};
  }
  throw std::invalid_argument("unknown height axis");
}

}  // namespace lmnav
