#pragma once

// Procedural content: randomized desk-scale worlds, annotation tours through
// them, evaluation episode suites per difficulty category, and the large
// multi-room layout used for beyond-sensor-range navigation.
//
// All generation flows through DeterministicRng so a seed fully fixes every
// artifact.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "lmnav/annotate.hpp"
#include "lmnav/core.hpp"
#include "lmnav/sim.hpp"
#include "lmnav/world.hpp"

namespace lmnav {

inline const std::vector<std::string>& noun_pool() {
  static const std::vector<std::string> nouns = {"ball",   "box",  "cone",  "mug",
                                                 "book",   "bottle", "plant", "lamp",
                                                 "basket", "block",  "vase",  "bowl"};
  return nouns;
}

inline const std::vector<std::string>& color_pool() {
  static const std::vector<std::string> colors = {"red",   "blue",  "green", "white",
                                                  "black", "brown", "gray",  "teal"};
  return colors;
}

namespace detail {
inline std::vector<std::size_t> shuffled_indices(std::size_t n, DeterministicRng& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.uniform_index(i)]);
  return idx;
}
}  // namespace detail

struct WorldGenConfig {
  int objects = 12;
  int obstacle_clusters = 0;
  int points_per_cluster = 12;
  double arena_half = 6.0;
  double min_separation = 1.2;  // between object centers
  std::uint64_t seed = 0;
};

// Rejection-sampled layout: unique nouns while the pool lasts, one color
// attribute each, centers kept apart and away from the origin (the usual
// robot start).
inline World make_world(const WorldGenConfig& cfg) {
  if (cfg.objects < 1) throw std::invalid_argument("need at least one object");
  World w;
  w.bounds = {-cfg.arena_half, cfg.arena_half, -cfg.arena_half, cfg.arena_half};
  DeterministicRng rng(cfg.seed);
  const std::vector<std::size_t> noun_order = detail::shuffled_indices(noun_pool().size(), rng);

  const double lo = -cfg.arena_half * 0.85, hi = cfg.arena_half * 0.85;
  for (int i = 0; i < cfg.objects; ++i) {
    ObjectSpec o;
    o.id = i;
    o.noun = noun_pool()[noun_order[i % noun_order.size()]];
    o.attributes = {color_pool()[rng.uniform_index(color_pool().size())]};
    o.footprint_radius = rng.uniform(0.18, 0.3);
    for (int attempt = 0; attempt < 1000; ++attempt) {
      const Vec2 p = {rng.uniform(lo, hi), rng.uniform(lo, hi)};
      bool ok = norm(p) > 1.2;
      for (const ObjectSpec& other : w.objects)
        if (distance(p, {other.position.x, other.position.y}) < cfg.min_separation) ok = false;
      if (ok) {
        o.position = {p.x, p.y, rng.uniform(0.12, 0.4)};
        break;
      }
      if (attempt == 999) throw std::runtime_error("could not place objects; arena too dense");
    }
    w.objects.push_back(std::move(o));
  }

  for (int c = 0; c < cfg.obstacle_clusters; ++c) {
    Vec2 center;
    for (int attempt = 0; attempt < 1000; ++attempt) {
      center = {rng.uniform(lo, hi), rng.uniform(lo, hi)};
      bool ok = norm(center) > 1.5;
      for (const ObjectSpec& o : w.objects)
        if (distance(center, {o.position.x, o.position.y}) < 1.0) ok = false;
      if (ok) break;
    }
    std::vector<Vec2> pts;
    for (int i = 0; i < cfg.points_per_cluster; ++i) {
      const double a = rng.uniform(0.0, 2.0 * kPi);
      const double r = 0.35 * std::sqrt(rng.uniform());
      pts.push_back({center.x + r * std::cos(a), center.y + r * std::sin(a)});
    }
    w.obstacles.push_back(std::move(pts));
  }
  return w;
}

struct TourConfig {
  double speed = 0.35;          // m/s along the path
  double view_distance = 1.6;   // how far back from each object the tour stands
  int rounds = 1;               // times the object list is revisited
  std::uint64_t seed = 0;
};

// A teleoperation-style tour: stand in front of each object in a shuffled
// order, facing it, then walk straight in for a close look before moving on.
// The walk-in leg matters: it records head-on approach frames across the
// whole distance range a goal-reaching run passes through, including the
// final half metre where commands get small.
inline Traversal make_tour_traversal(const World& world, const TourConfig& cfg) {
  if (world.objects.empty()) throw std::invalid_argument("empty world");
  DeterministicRng rng(cfg.seed);
  std::vector<Vec2> stops;
  std::vector<Vec2> faced;
  std::vector<double> gaze;  // facing offset, so objects appear off-axis too
  for (int round = 0; round < cfg.rounds; ++round) {
    for (std::size_t i : detail::shuffled_indices(world.objects.size(), rng)) {
      const ObjectSpec& o = world.objects[i];
      const Vec2 c = {o.position.x, o.position.y};
      // Stand back toward the arena center so the viewpoint stays in bounds.
      const double away = std::atan2(-c.y, -c.x) + rng.uniform(-0.5, 0.5);
      const double far = cfg.view_distance * rng.uniform(0.85, 1.15);
      const double near = rng.uniform(0.25, 0.8);
      stops.push_back({c.x + far * std::cos(away), c.y + far * std::sin(away)});
      faced.push_back(c);
      gaze.push_back(rng.uniform(-0.5, 0.5));
      stops.push_back({c.x + near * std::cos(away), c.y + near * std::sin(away)});
      faced.push_back(c);
      gaze.push_back(rng.uniform(-0.5, 0.5));
    }
  }

  Traversal tour;
  double t = 0.0;
  Vec2 prev = {0.0, 0.0};
  for (std::size_t i = 0; i < stops.size(); ++i) {
    t += distance(prev, stops[i]) / cfg.speed;
    const double heading =
        std::atan2(faced[i].y - stops[i].y, faced[i].x - stops[i].x) + gaze[i];
    tour.waypoints.push_back({t, {stops[i].x, stops[i].y, heading}});
    // A short dwell at the stop keeps several frames looking at the object.
    t += 2.0;
    tour.waypoints.push_back({t, {stops[i].x, stops[i].y, heading}});
    prev = stops[i];
  }
  return tour;
}

struct SuiteGenConfig {
  int episodes = 100;
  EpisodeCategory category = EpisodeCategory::simple;
  ControllerKind controller = ControllerKind::policy;
  bool with_blockers = false;  // plant an object on the start-goal line
  int max_steps = 120;
  double success_radius = 0.2;
  double start_distance_lo = 1.5;
  double start_distance_hi = 3.0;
  std::uint64_t seed = 0;
};

namespace detail {
// Places n distractors keeping the start-goal corridor clear.
inline void place_distractors(World& w, const Vec2& start, const Vec2& goal, int n,
                              DeterministicRng& rng,
                              const std::vector<std::size_t>& noun_order, int first_id) {
  const double lo = w.bounds.x_min * 0.85, hi = w.bounds.x_max * 0.85;
  for (int i = 0; i < n; ++i) {
    ObjectSpec o;
    o.id = first_id + i;
    o.noun = noun_pool()[noun_order[(first_id + i) % noun_order.size()]];
    o.attributes = {color_pool()[rng.uniform_index(color_pool().size())]};
    o.footprint_radius = 0.22;
    bool placed = false;
    for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
      const Vec2 p = {rng.uniform(lo, hi), rng.uniform(lo, hi)};
      bool ok = segment_distance(start, goal, p) > 0.9 && distance(p, goal) > 1.2 &&
                distance(p, start) > 0.9;
      for (const ObjectSpec& other : w.objects)
        if (distance(p, {other.position.x, other.position.y}) < 1.2) ok = false;
      if (ok) {
        o.position = {p.x, p.y, rng.uniform(0.12, 0.4)};
        placed = true;
      }
    }
    if (placed) w.objects.push_back(std::move(o));
  }
}
}  // namespace detail

// One self-contained episode per draw: a fresh small world, a start pose
// facing the target, a prompt in the requested style.
inline std::vector<Episode> make_episode_suite(const SuiteGenConfig& cfg) {
  std::vector<Episode> suite;
  const DeterministicRng base(cfg.seed);
  for (int e = 0; e < cfg.episodes; ++e) {
    DeterministicRng rng = base.fork(static_cast<std::uint64_t>(e));
    Episode ep;
    ep.category = cfg.category;
    ep.controller = cfg.controller;
    ep.max_steps = cfg.max_steps;
    ep.success_radius = cfg.success_radius;
    ep.world.bounds = {-6.0, 6.0, -6.0, 6.0};

    const std::vector<std::size_t> noun_order =
        detail::shuffled_indices(noun_pool().size(), rng);

    ObjectSpec target;
    target.id = 0;
    target.noun = noun_pool()[noun_order[0]];
    target.attributes = {color_pool()[rng.uniform_index(color_pool().size())]};
    target.footprint_radius = 0.22;
    target.position = {rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0),
                       rng.uniform(0.12, 0.4)};
    ep.target_id = 0;
    const Vec2 goal = {target.position.x, target.position.y};
    ep.world.objects.push_back(target);

    const double bearing = rng.uniform(0.0, 2.0 * kPi);
    const double dist = rng.uniform(cfg.start_distance_lo, cfg.start_distance_hi);
    const Vec2 start = {goal.x + dist * std::cos(bearing), goal.y + dist * std::sin(bearing)};
    const double heading =
        std::atan2(goal.y - start.y, goal.x - start.x) + rng.uniform(-0.25, 0.25);
    ep.start = {start.x, start.y, normalize_angle(heading)};

    detail::place_distractors(ep.world, start, goal, 3, rng, noun_order, 1);

    switch (cfg.category) {
      case EpisodeCategory::simple:
        ep.instruction = "go to the " + canonical_description(target);
        break;
      case EpisodeCategory::noisy: {
        // Wrong attribute, right noun; nouns are unique in the episode.
        const std::vector<std::string>& decoys = default_decoy_adjectives();
        ep.instruction =
            "go to the " + decoys[rng.uniform_index(decoys.size())] + " " + target.noun;
        break;
      }
      case EpisodeCategory::multi_object: {
        // A same-noun twin with a different color; the attribute decides.
        ObjectSpec twin;
        twin.id = static_cast<int>(ep.world.objects.size());
        twin.noun = target.noun;
        twin.footprint_radius = 0.22;
        do {
          twin.attributes = {color_pool()[rng.uniform_index(color_pool().size())]};
        } while (twin.attributes == target.attributes);
        // Fallback: the corner opposite the start-goal corridor, always clear.
        const Vec2 mid = {0.5 * (start.x + goal.x), 0.5 * (start.y + goal.y)};
        twin.position = {mid.x < 0.0 ? 4.5 : -4.5, mid.y < 0.0 ? 4.5 : -4.5,
                         rng.uniform(0.12, 0.4)};
        for (int attempt = 0; attempt < 1000; ++attempt) {
          const Vec2 p = {rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0)};
          bool ok = segment_distance(start, goal, p) > 0.9 && distance(p, goal) > 1.5 &&
                    distance(p, start) > 0.9;
          for (const ObjectSpec& other : ep.world.objects)
            if (distance(p, {other.position.x, other.position.y}) < 1.2) ok = false;
          if (ok) {
            twin.position = {p.x, p.y, twin.position.z};
            break;
          }
        }
        ep.world.objects.push_back(twin);
        ep.instruction = "go to the " + canonical_description(target);
        break;
      }
      case EpisodeCategory::dynamic: {
        // The target drifts slowly; the episode definition pins the path.
        const double drift_dir = rng.uniform(0.0, 2.0 * kPi);
        const double drift = 0.8;
        const Vec2 end = {
            std::clamp(goal.x + drift * std::cos(drift_dir), -5.0, 5.0),
            std::clamp(goal.y + drift * std::sin(drift_dir), -5.0, 5.0)};
        ep.world.dynamics.push_back({0, {{0.0, goal.x, goal.y}, {60.0, end.x, end.y}}});
        ep.instruction = "go to the " + canonical_description(target);
        break;
      }
    }

    if (cfg.with_blockers) {
      ObjectSpec blocker;
      blocker.id = static_cast<int>(ep.world.objects.size());
      blocker.noun = noun_pool()[noun_order[blocker.id % noun_order.size()]];
      blocker.attributes = {color_pool()[rng.uniform_index(color_pool().size())]};
      blocker.footprint_radius = 0.22;
      const Vec2 mid = {0.5 * (start.x + goal.x), 0.5 * (start.y + goal.y)};
      const double side = std::atan2(goal.y - start.y, goal.x - start.x) + 0.5 * kPi;
      const double off = rng.uniform(-0.12, 0.12);
      blocker.position = {mid.x + off * std::cos(side), mid.y + off * std::sin(side),
                          rng.uniform(0.12, 0.4)};
      ep.world.objects.push_back(blocker);
    }
    suite.push_back(std::move(ep));
  }
  return suite;
}

// Fixture for beyond-sensor-range navigation: a chain of recorded viewpoints
// snaking across a large arena, landmark objects along the way, the target
// past the far end.
struct LongDistanceSetup {
  World world;
  std::vector<Pose2> node_poses;
  int target_id = 0;
  std::string instruction;
  Pose2 start;
};

inline LongDistanceSetup make_long_distance_setup(std::uint64_t seed, int nodes = 12) {
  if (nodes < 2) throw std::invalid_argument("need at least two nodes");
  LongDistanceSetup setup;
  setup.world.bounds = {-9.0, 9.0, -9.0, 9.0};
  DeterministicRng rng(seed);

  // S-shaped chain from one corner to the other.
  std::vector<Vec2> pts;
  for (int i = 0; i < nodes; ++i) {
    const double s = static_cast<double>(i) / (nodes - 1);
    pts.push_back({-7.0 + 14.0 * s, -7.0 + 14.0 * s + 2.0 * std::sin(2.0 * kPi * s)});
  }
  for (int i = 0; i < nodes; ++i) {
    const Vec2& p = pts[i];
    const Vec2& q = pts[std::min(i + 1, nodes - 1)];
    const Vec2& o = pts[i == nodes - 1 ? nodes - 2 : i];
    const double heading = std::atan2(q.y - o.y, q.x - o.x);
    setup.node_poses.push_back({p.x, p.y, heading});
  }
  setup.start = setup.node_poses.front();

  // Landmarks offset sideways from interior nodes, distinct nouns.
  const std::vector<std::size_t> noun_order = detail::shuffled_indices(noun_pool().size(), rng);
  int id = 0;
  for (int i = 2; i + 2 < nodes && id < 6; i += 2, ++id) {
    const Pose2& node = setup.node_poses[i];
    const double side = node.theta + (id % 2 == 0 ? 0.5 : -0.5) * kPi;
    ObjectSpec o;
    o.id = id;
    o.noun = noun_pool()[noun_order[id]];
    o.attributes = {color_pool()[rng.uniform_index(color_pool().size())]};
    o.footprint_radius = 0.22;
    o.position = {node.x + 1.5 * std::cos(side), node.y + 1.5 * std::sin(side),
                  rng.uniform(0.12, 0.4)};
    setup.world.objects.push_back(std::move(o));
  }

  // The target sits ahead of the final node so only late nodes can see it.
  const Pose2& last = setup.node_poses.back();
  ObjectSpec target;
  target.id = id;
  target.noun = noun_pool()[noun_order[id]];
  target.attributes = {color_pool()[rng.uniform_index(color_pool().size())]};
  target.footprint_radius = 0.22;
  target.position = {last.x + 1.6 * std::cos(last.theta), last.y + 1.6 * std::sin(last.theta),
                     0.25};
  setup.world.objects.push_back(target);
  setup.target_id = id;
  setup.instruction = "go to the " + canonical_description(setup.world.objects.back());
  return setup;
}

}  // namespace lmnav
