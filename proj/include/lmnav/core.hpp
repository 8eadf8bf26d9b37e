#pragma once

// Shared value types: planar poses, velocity commands, camera intrinsics,
// and the deterministic RNG used everywhere randomness is needed.

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace lmnav {

inline constexpr double kPi = 3.14159265358979323846;

// Wrap an angle to (-pi, pi].
inline double normalize_angle(double a) {
  double r = std::fmod(a + kPi, 2.0 * kPi);
  if (r <= 0.0) r += 2.0 * kPi;
  return r - kPi;
}

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

inline Vec2 operator+(const Vec2& a, const Vec2& b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(const Vec2& a, const Vec2& b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, const Vec2& a) { return {s * a.x, s * a.y}; }
inline double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }
inline double squared_norm(const Vec2& a) { return a.x * a.x + a.y * a.y; }
inline double norm(const Vec2& a) { return std::sqrt(squared_norm(a)); }
inline double distance(const Vec2& a, const Vec2& b) { return norm(a - b); }

// Planar robot pose; theta is kept in (-pi, pi] by the integrator.
struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
  Vec2 position() const { return {x, y}; }
};

// 3D point, camera or world frame depending on context.
struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

// Velocity command: linear speed v [m/s], yaw rate omega [rad/s].
struct Twist {
  double v = 0.0;
  double omega = 0.0;
};

struct TwistLimits {
  double v_min = 0.0;
  double v_max = 0.5;
  double omega_max = 0.9;
  bool contains(const Twist& u) const {
    return u.v >= v_min && u.v <= v_max && std::abs(u.omega) <= omega_max;
  }
};

// Gradient of a scalar with respect to one command.
struct TwistGrad {
  double v = 0.0;
  double omega = 0.0;
};

// Fixed-interval command sequence; the policy emits one of these per frame.
struct CommandSequence {
  std::vector<Twist> commands;
  double dt = 0.333;
};

inline void validate_commands(const CommandSequence& seq, const TwistLimits& limits) {
  if (!(seq.dt > 0.0)) throw std::invalid_argument("command dt must be positive");
  for (const Twist& u : seq.commands) {
    if (!std::isfinite(u.v) || !std::isfinite(u.omega))
      throw std::domain_error("non-finite command");
    if (!limits.contains(u)) throw std::invalid_argument("command outside twist limits");
  }
}

// Pinhole camera: z forward, x right, y down; pixel (cx, cy) is the optical axis.
struct CameraIntrinsics {
  double fx = 48.0;
  double fy = 48.0;
  double cx = 48.0;
  double cy = 36.0;
  int width = 96;
  int height = 72;
  // Half of the horizontal field of view, for planar frustum checks.
  double half_fov_x() const { return std::atan2(0.5 * width, fx); }
};

// splitmix64: tiny, platform-stable, good enough for scene/prompt sampling.
// All randomness in the project flows through this so artifacts are
// byte-identical across reruns.
class DeterministicRng {
 public:
  explicit DeterministicRng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n); rejection sampling keeps it exactly uniform.
  std::size_t uniform_index(std::size_t n) {
    if (n == 0) throw std::invalid_argument("uniform_index over empty range");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    for (;;) {
      const std::uint64_t x = next();
      if (x < limit) return static_cast<std::size_t>(x % n);
    }
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Derive an independent stream, e.g. one per annotated frame, so frame
  // results do not depend on processing order.
  DeterministicRng fork(std::uint64_t stream) const {
    DeterministicRng r(state_ ^ (0x632be59bd9b4e019ULL * (stream + 1)));
    r.next();
    return r;
  }

 private:
  std::uint64_t state_;
};

// FNV-1a, used to hash tokens into embedding seeds.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace lmnav
