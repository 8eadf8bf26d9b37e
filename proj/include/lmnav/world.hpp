#pragma once

// Desk-scale world model: a rectangular arena with labeled objects (spheres
// sitting at a height), raw obstacle point sets, and optional piecewise-linear
// motion scripts. JSON schema is versioned.

#include <nlohmann/json.hpp>
#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "lmnav/core.hpp"
#include "lmnav/geometry.hpp"

namespace lmnav {

using json = nlohmann::json;

inline constexpr int kWorldSchemaVersion = 1;
inline const char* kWorldSchemaName = "lmnav.world";

struct ObjectSpec {
  int id = 0;
  std::string noun;
  std::vector<std::string> attributes;
  Point3 position;              // x, y on the ground plane, z = center height
  double footprint_radius = 0.25;
};

// "white chair", "desk" — the phrase an annotator would write for the object.
inline std::string canonical_description(const ObjectSpec& obj) {
  std::string out;
  for (const std::string& a : obj.attributes) {
    out += a;
    out += ' ';
  }
  out += obj.noun;
  return out;
}

// Timed planar waypoints; the object holds the first position before the
// first timestamp and the last after the final one.
struct DynamicScript {
  int object_id = 0;
  std::vector<std::array<double, 3>> waypoints;  // (t, x, y), t strictly increasing
};

struct ArenaBounds {
  double x_min = -6.0, x_max = 6.0;
  double y_min = -6.0, y_max = 6.0;
  bool contains(const Vec2& p) const {
    return p.x >= x_min && p.x <= x_max && p.y >= y_min && p.y <= y_max;
  }
};

struct World {
  ArenaBounds bounds;
  std::vector<ObjectSpec> objects;
  std::vector<std::vector<Vec2>> obstacles;  // raw point sets
  std::vector<DynamicScript> dynamics;
};

inline const ObjectSpec* find_object(const World& w, int id) {
  for (const ObjectSpec& o : w.objects)
    if (o.id == id) return &o;
  return nullptr;
}

inline std::vector<std::string> validate_world(const World& w) {
  std::vector<std::string> problems;
  if (!(w.bounds.x_max > w.bounds.x_min) || !(w.bounds.y_max > w.bounds.y_min))
    problems.push_back("degenerate arena bounds");
  std::vector<int> ids;
  for (const ObjectSpec& o : w.objects) {
    if (o.noun.empty()) problems.push_back("object " + std::to_string(o.id) + " has no noun");
    if (!(o.footprint_radius > 0.0))
      problems.push_back("object " + std::to_string(o.id) + " has non-positive footprint");
    if (!w.bounds.contains({o.position.x, o.position.y}))
      problems.push_back("object " + std::to_string(o.id) + " outside arena");
    if (std::find(ids.begin(), ids.end(), o.id) != ids.end())
      problems.push_back("duplicate object id " + std::to_string(o.id));
    ids.push_back(o.id);
  }
  for (const auto& set : w.obstacles)
    for (const Vec2& p : set)
      if (!w.bounds.contains(p)) problems.push_back("obstacle point outside arena");
  for (const DynamicScript& s : w.dynamics) {
    if (!find_object(w, s.object_id))
      problems.push_back("script for unknown object " + std::to_string(s.object_id));
    for (std::size_t i = 1; i < s.waypoints.size(); ++i)
      if (!(s.waypoints[i][0] > s.waypoints[i - 1][0]))
        problems.push_back("script timestamps not increasing for object " +
                           std::to_string(s.object_id));
  }
  return problems;
}

// Planar position of an object at time t, honoring its script if any.
inline Vec2 object_position_at(const World& w, const ObjectSpec& obj, double t) {
  for (const DynamicScript& s : w.dynamics) {
    if (s.object_id != obj.id || s.waypoints.empty()) continue;
    const auto& wp = s.waypoints;
    if (t <= wp.front()[0]) return {wp.front()[1], wp.front()[2]};
    if (t >= wp.back()[0]) return {wp.back()[1], wp.back()[2]};
    for (std::size_t i = 1; i < wp.size(); ++i) {
      if (t <= wp[i][0]) {
        const double a = (t - wp[i - 1][0]) / (wp[i][0] - wp[i - 1][0]);
        return {wp[i - 1][1] + a * (wp[i][1] - wp[i - 1][1]),
                wp[i - 1][2] + a * (wp[i][2] - wp[i - 1][2])};
      }
    }
  }
  return {obj.position.x, obj.position.y};
}

// Obstacle point set for planning/collision at time t: raw obstacle points
// plus each object's center and footprint ring. exclude_id removes the
// navigation target so the goal itself never repels the robot.
inline std::vector<Vec2> obstacle_points(const World& w, double t, int exclude_id = -1,
                                         int ring_points = 8) {
  std::vector<Vec2> pts;
  for (const auto& set : w.obstacles) pts.insert(pts.end(), set.begin(), set.end());
  for (const ObjectSpec& o : w.objects) {
    if (o.id == exclude_id) continue;
    const Vec2 c = object_position_at(w, o, t);
    pts.push_back(c);
    for (int i = 0; i < ring_points; ++i) {
      const double a = 2.0 * kPi * i / ring_points;
      pts.push_back({c.x + o.footprint_radius * std::cos(a),
                     c.y + o.footprint_radius * std::sin(a)});
    }
  }
  return pts;
}

// A recorded robot path through the world, e.g. a teleoperated tour that the
// annotation pipeline samples frames from.
struct TimedPose {
  double t = 0.0;
  Pose2 pose;
};

struct Traversal {
  std::vector<TimedPose> waypoints;  // timestamps strictly increasing

  double duration() const {
    if (waypoints.size() < 2) return 0.0;
    return waypoints.back().t - waypoints.front().t;
  }

  // Linear interpolation in position, shortest-path in heading.
  Pose2 pose_at(double t) const {
    if (waypoints.empty()) throw std::invalid_argument("empty traversal");
    if (t <= waypoints.front().t) return waypoints.front().pose;
    if (t >= waypoints.back().t) return waypoints.back().pose;
    for (std::size_t i = 1; i < waypoints.size(); ++i) {
      if (t <= waypoints[i].t) {
        const TimedPose& a = waypoints[i - 1];
        const TimedPose& b = waypoints[i];
        const double s = (t - a.t) / (b.t - a.t);
        const double dth = normalize_angle(b.pose.theta - a.pose.theta);
        return {a.pose.x + s * (b.pose.x - a.pose.x), a.pose.y + s * (b.pose.y - a.pose.y),
                normalize_angle(a.pose.theta + s * dth)};
      }
    }
    return waypoints.back().pose;
  }
};

// JSON round-trip.

inline json to_json(const World& w) {
  json j;
  j["schema"] = kWorldSchemaName;
  j["version"] = kWorldSchemaVersion;
  j["bounds"] = {{"x", {w.bounds.x_min, w.bounds.x_max}},
                 {"y", {w.bounds.y_min, w.bounds.y_max}}};
  j["objects"] = json::array();
  for (const ObjectSpec& o : w.objects)
    j["objects"].push_back({{"id", o.id},
                            {"noun", o.noun},
                            {"attributes", o.attributes},
                            {"position", {o.position.x, o.position.y, o.position.z}},
                            {"footprint_radius", o.footprint_radius}});
  j["obstacles"] = json::array();
  for (const auto& set : w.obstacles) {
    json pts = json::array();
    for (const Vec2& p : set) pts.push_back({p.x, p.y});
    j["obstacles"].push_back(pts);
  }
  j["dynamics"] = json::array();
  for (const DynamicScript& s : w.dynamics) {
    json wps = json::array();
    for (const auto& wp : s.waypoints) wps.push_back({wp[0], wp[1], wp[2]});
    j["dynamics"].push_back({{"object", s.object_id}, {"waypoints", wps}});
  }
  return j;
}

inline World world_from_json(const json& j) {
  if (j.value("schema", "") != kWorldSchemaName)
    throw std::runtime_error("not a world file");
  if (j.value("version", 0) != kWorldSchemaVersion)
    throw std::runtime_error("unsupported world schema version");
  World w;
  w.bounds.x_min = j["bounds"]["x"][0];
  w.bounds.x_max = j["bounds"]["x"][1];
  w.bounds.y_min = j["bounds"]["y"][0];
  w.bounds.y_max = j["bounds"]["y"][1];
  for (const json& jo : j["objects"]) {
    ObjectSpec o;
    o.id = jo["id"];
    o.noun = jo["noun"];
    o.attributes = jo["attributes"].get<std::vector<std::string>>();
    o.position = {jo["position"][0], jo["position"][1], jo["position"][2]};
    o.footprint_radius = jo["footprint_radius"];
    w.objects.push_back(o);
  }
  for (const json& js : j["obstacles"]) {
    std::vector<Vec2> set;
    for (const json& jp : js) set.push_back({jp[0], jp[1]});
    w.obstacles.push_back(set);
  }
  for (const json& js : j["dynamics"]) {
    DynamicScript s;
    s.object_id = js["object"];
    for (const json& jw : js["waypoints"])
      s.waypoints.push_back({jw[0].get<double>(), jw[1].get<double>(), jw[2].get<double>()});
    w.dynamics.push_back(s);
  }
  return w;
}

inline void write_world_file(const std::string& path, const World& w) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << to_json(w).dump(2) << '\n';
}

inline World read_world_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  json j;
  in >> j;
  World w = world_from_json(j);
  const std::vector<std::string> problems = validate_world(w);
  if (!problems.empty()) throw std::runtime_error("invalid world: " + problems.front());
  return w;
}

}  // namespace lmnav
