#pragma once

// Closed-loop episode simulator and evaluation harness: frustum-based object
// observation, receding-horizon execution of either controller, topological
// memory for beyond-sensor-range goals, and per-category reporting.

#include <nlohmann/json.hpp>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "lmnav/core.hpp"
#include "lmnav/dataset.hpp"
#include "lmnav/embedding.hpp"
#include "lmnav/geometry.hpp"
#include "lmnav/planner.hpp"
#include "lmnav/policy.hpp"
#include "lmnav/world.hpp"

namespace lmnav {

inline constexpr int kSuiteSchemaVersion = 1;
inline const char* kSuiteSchemaName = "lmnav.suite";
inline constexpr int kReportSchemaVersion = 1;
inline const char* kReportSchemaName = "lmnav.report";

// Simulation state beyond the robot pose; object positions are pure
// functions of time via their scripts.
struct WorldState {
  double t = 0.0;
};

struct StepResult {
  Pose2 robot;
  WorldState state;
  bool collision = false;
};

// Advance one control interval and check the arrived pose against obstacle
// points and non-target object footprints. Larger radius can only add
// collisions (checks are distance thresholds).
inline StepResult step_world(const World& world, const WorldState& state, const Pose2& robot,
                             const Twist& u, double dt, double robot_radius,
                             int exclude_id = -1) {
  StepResult r;
  r.robot = integrate_step(robot, u, dt);
  r.state.t = state.t + dt;
  for (const auto& set : world.obstacles)
    for (const Vec2& p : set)
      if (distance(r.robot.position(), p) < robot_radius) r.collision = true;
  for (const ObjectSpec& o : world.objects) {
    if (o.id == exclude_id) continue;
    const Vec2 c = object_position_at(world, o, r.state.t);
    if (distance(r.robot.position(), c) < robot_radius + o.footprint_radius)
      r.collision = true;
  }
  return r;
}

struct SensorConfig {
  CameraIntrinsics intrinsics;
  double max_range = 8.0;
};

// Candidate slots for every object inside the planar frustum and range,
// similarity scored against the active instruction.
inline std::vector<SlotFeature> observe_slots(const World& world, const WorldState& state,
                                              const Pose2& robot,
                                              const Eigen::VectorXd& instr,
                                              const SensorConfig& sensor, int k,
                                              EmbeddingCache& cache) {
  const double half_fov = sensor.intrinsics.half_fov_x();
  std::vector<SlotCandidate> candidates;
  for (const ObjectSpec& o : world.objects) {
    const Vec2 rel = to_local(robot, object_position_at(world, o, state.t));
    const double dist = norm(rel);
    if (dist > sensor.max_range) continue;
    if (rel.x <= 0.0 || std::abs(std::atan2(rel.y, rel.x)) > half_fov) continue;
    candidates.push_back({rel, cosine(instr, cache.get(canonical_description(o)))});
  }
  return fill_slots(std::move(candidates), k);
}

inline ObservationFeature observe(const World& world, const WorldState& state,
                                  const Pose2& robot, const Eigen::VectorXd& instr,
                                  const SensorConfig& sensor, const PolicyConfig& cfg,
                                  const std::vector<SlotFeature>& previous,
                                  EmbeddingCache& cache) {
  ObservationFeature obs;
  obs.current = observe_slots(world, state, robot, instr, sensor, cfg.slots, cache);
  obs.previous.assign(static_cast<std::size_t>(cfg.slots) * cfg.history, SlotFeature{});
  if (cfg.history >= 1)
    std::copy(previous.begin(),
              previous.begin() + std::min(previous.size(),
                                          obs.previous.size()),
              obs.previous.begin());
  return obs;
}

enum class ControllerKind { policy, planner };
enum class EpisodeCategory { simple, noisy, multi_object, dynamic };

inline const char* to_string(EpisodeCategory c) {
  switch (c) {
    case EpisodeCategory::simple: return "simple";
    case EpisodeCategory::noisy: return "noisy";
    case EpisodeCategory::multi_object: return "multi_object";
    case EpisodeCategory::dynamic: return "dynamic";
  }
  return "simple";
}

inline EpisodeCategory episode_category_from_string(const std::string& s) {
  if (s == "simple") return EpisodeCategory::simple;
  if (s == "noisy") return EpisodeCategory::noisy;
  if (s == "multi_object") return EpisodeCategory::multi_object;
  if (s == "dynamic") return EpisodeCategory::dynamic;
  throw std::runtime_error("unknown episode category: " + s);
}

struct Episode {
  World world;
  Pose2 start;
  std::string instruction;
  int target_id = 0;
  ControllerKind controller = ControllerKind::policy;
  int max_steps = 120;
  double success_radius = 0.2;
  EpisodeCategory category = EpisodeCategory::simple;
};

struct TimedState {
  double t = 0.0;
  Pose2 pose;
  Twist command;
};

struct EpisodeResult {
  RunOutcome outcome = RunOutcome::timeout;
  int steps = 0;
  double final_distance = 0.0;
  std::vector<TimedState> trace;  // first entry is the start pose, zero command
};

struct SimConfig {
  SensorConfig sensor;
  PlannerConfig planner;  // also supplies the collision radius
};

// Closed loop: observe, take the first command of the emitted sequence,
// advance, repeat. Success is measured against the target's current position
// every step, boundary inclusive.
inline EpisodeResult run_episode(const Episode& ep, const SimConfig& sim,
                                 const PolicyParams* policy) {
  const ObjectSpec* target = find_object(ep.world, ep.target_id);
  if (!target) throw std::invalid_argument("episode target not in world");
  if (ep.controller == ControllerKind::policy && !policy)
    throw std::invalid_argument("policy episode without checkpoint");

  EmbeddingCache cache(policy ? policy->config.embedding_dim : kDefaultEmbeddingDim);
  Eigen::VectorXd instr;
  PolicyConfig pcfg;
  if (ep.controller == ControllerKind::policy) {
    pcfg = policy->config;
    instr = encode_instruction(ep.instruction, pcfg.embedding_dim).vec;
  }
  const double dt = ep.controller == ControllerKind::policy ? pcfg.dt
                                                            : sim.planner.primitives.dt;

  EpisodeResult res;
  WorldState state;
  Pose2 robot = ep.start;
  std::vector<SlotFeature> prev_slots;
  res.trace.push_back({0.0, robot, Twist{}});

  for (int k = 0; k < ep.max_steps; ++k) {
    const Vec2 target_pos = object_position_at(ep.world, *target, state.t);
    res.final_distance = distance(robot.position(), target_pos);
    if (res.final_distance <= ep.success_radius) {
      res.outcome = RunOutcome::success;
      return res;
    }

    Twist u;
    if (ep.controller == ControllerKind::policy) {
      const ObservationFeature obs =
          observe(ep.world, state, robot, instr, sim.sensor, pcfg, prev_slots, cache);
      u = policy_forward(*policy, obs, {instr}).commands.front();
      prev_slots = obs.current;
    } else {
      u = plan_step(robot, target_pos, obstacle_points(ep.world, state.t, ep.target_id),
                    sim.planner);
    }

    const StepResult step =
        step_world(ep.world, state, robot, u, dt, sim.planner.robot_radius, ep.target_id);
    robot = step.robot;
    state = step.state;
    res.steps = k + 1;
    res.trace.push_back({state.t, robot, u});
    if (step.collision) {
      res.outcome = RunOutcome::collision;
      res.final_distance =
          distance(robot.position(), object_position_at(ep.world, *target, state.t));
      return res;
    }
  }
  const Vec2 target_pos = object_position_at(ep.world, *target, state.t);
  res.final_distance = distance(robot.position(), target_pos);
  res.outcome = res.final_distance <= ep.success_radius ? RunOutcome::success
                                                        : RunOutcome::timeout;
  return res;
}

// Topological memory: sparse recorded viewpoints with what was visible from
// each, as embedding vectors plus a recorded visibility weight.
struct NodeObservation {
  Eigen::VectorXd embedding;
  double visibility = 1.0;
};

struct TopoNode {
  Pose2 pose;
  std::vector<NodeObservation> visible;
};

struct TopoMemory {
  std::vector<TopoNode> nodes;
};

// Record a memory from a list of poses; visibility fades linearly with range.
inline TopoMemory build_topo_memory(const World& world, const std::vector<Pose2>& poses,
                                    const SensorConfig& sensor, EmbeddingCache& cache) {
  TopoMemory mem;
  const double half_fov = sensor.intrinsics.half_fov_x();
  for (const Pose2& p : poses) {
    TopoNode node;
    node.pose = p;
    for (const ObjectSpec& o : world.objects) {
      const Vec2 rel = to_local(p, {o.position.x, o.position.y});
      const double dist = norm(rel);
      if (dist > sensor.max_range) continue;
      if (rel.x <= 0.0 || std::abs(std::atan2(rel.y, rel.x)) > half_fov) continue;
      node.visible.push_back(
          {cache.get(canonical_description(o)), std::max(0.0, 1.0 - dist / sensor.max_range)});
    }
    mem.nodes.push_back(std::move(node));
  }
  return mem;
}

struct NodeScores {
  std::vector<double> scores;
  int best = 0;
};

// Node score: best visibility-weighted cosine match between the instruction
// and anything seen from that node. Ties keep the lowest index.
inline NodeScores score_nodes(const TopoMemory& mem, const Eigen::VectorXd& instr) {
  if (mem.nodes.empty()) throw std::invalid_argument("empty memory");
  NodeScores out;
  out.scores.reserve(mem.nodes.size());
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < mem.nodes.size(); ++i) {
    double s = 0.0;
    for (const NodeObservation& obs : mem.nodes[i].visible)
      s = std::max(s, cosine(instr, obs.embedding) * obs.visibility);
    out.scores.push_back(s);
    if (s > best) {
      best = s;
      out.best = static_cast<int>(i);
    }
  }
  return out;
}

struct LongNavResult {
  EpisodeResult result;
  int selected_node = 0;
  int switch_step = -1;  // step index at which control passed to the policy
};

// Two-phase navigation: walk the memory graph with the planner toward
// successive node poses; the moment the nearest node (Euclidean proxy for
// temporal distance) is the goal node, hand over to the policy for the last
// meter. The handover happens exactly once by construction.
inline LongNavResult long_distance_navigate(const World& world, const TopoMemory& mem,
                                            const std::string& instruction, int target_id,
                                            const Pose2& start, const SimConfig& sim,
                                            const PolicyParams& policy, int max_steps = 400,
                                            double success_radius = 0.2,
                                            double waypoint_radius = 0.5) {
  const ObjectSpec* target = find_object(world, target_id);
  if (!target) throw std::invalid_argument("unknown target object");
  EmbeddingCache cache(policy.config.embedding_dim);
  const Eigen::VectorXd instr =
      encode_instruction(instruction, policy.config.embedding_dim).vec;

  LongNavResult out;
  out.selected_node = score_nodes(mem, instr).best;

  WorldState state;
  Pose2 robot = start;
  out.result.trace.push_back({0.0, robot, Twist{}});
  const double dt = sim.planner.primitives.dt;
  int waypoint = 0;
  int k = 0;

  auto nearest_node = [&](const Pose2& p) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < mem.nodes.size(); ++i) {
      const double d = distance(p.position(), mem.nodes[i].pose.position());
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(i);
      }
    }
    return best;
  };

  // Phase 1: follow recorded nodes until the selected one is nearest.
  for (; k < max_steps; ++k) {
    if (nearest_node(robot) == out.selected_node) break;
    if (waypoint < static_cast<int>(mem.nodes.size()) - 1 &&
        distance(robot.position(), mem.nodes[waypoint].pose.position()) < waypoint_radius)
      ++waypoint;
    const Twist u = plan_step(robot, mem.nodes[waypoint].pose.position(),
                              obstacle_points(world, state.t, target_id), sim.planner);
    const StepResult step =
        step_world(world, state, robot, u, dt, sim.planner.robot_radius, target_id);
    robot = step.robot;
    state = step.state;
    out.result.trace.push_back({state.t, robot, u});
    out.result.steps = k + 1;
    if (step.collision) {
      out.result.outcome = RunOutcome::collision;
      out.result.final_distance =
          distance(robot.position(), object_position_at(world, *target, state.t));
      return out;
    }
  }
  out.switch_step = k;

  // Phase 2: the trained policy closes the remaining distance.
  std::vector<SlotFeature> prev_slots;
  for (; k < max_steps; ++k) {
    const Vec2 target_pos = object_position_at(world, *target, state.t);
    out.result.final_distance = distance(robot.position(), target_pos);
    if (out.result.final_distance <= success_radius) {
      out.result.outcome = RunOutcome::success;
      return out;
    }
    const ObservationFeature obs =
        observe(world, state, robot, instr, sim.sensor, policy.config, prev_slots, cache);
    const Twist u = policy_forward(policy, obs, {instr}).commands.front();
    prev_slots = obs.current;
    const StepResult step =
        step_world(world, state, robot, u, policy.config.dt, sim.planner.robot_radius,
                   target_id);
    robot = step.robot;
    state = step.state;
    out.result.trace.push_back({state.t, robot, u});
    out.result.steps = k + 1;
    if (step.collision) {
      out.result.outcome = RunOutcome::collision;
      out.result.final_distance =
          distance(robot.position(), object_position_at(world, *target, state.t));
      return out;
    }
  }
  out.result.final_distance =
      distance(robot.position(), object_position_at(world, *target, state.t));
  out.result.outcome = out.result.final_distance <= success_radius ? RunOutcome::success
                                                                   : RunOutcome::timeout;
  return out;
}

// Episode suites on disk: JSON Lines, one self-contained episode per line.

inline json episode_to_json(const Episode& ep) {
  json j;
  j["world"] = to_json(ep.world);
  j["start"] = {ep.start.x, ep.start.y, ep.start.theta};
  j["instruction"] = ep.instruction;
  j["target"] = ep.target_id;
  j["controller"] = ep.controller == ControllerKind::policy ? "policy" : "planner";
  j["max_steps"] = ep.max_steps;
  j["success_radius"] = ep.success_radius;
  j["category"] = to_string(ep.category);
  return j;
}

inline Episode episode_from_json(const json& j) {
  Episode ep;
  ep.world = world_from_json(j["world"]);
  ep.start = {j["start"][0], j["start"][1], j["start"][2]};
  ep.instruction = j["instruction"];
  ep.target_id = j["target"];
  const std::string ctl = j["controller"];
  if (ctl == "policy") ep.controller = ControllerKind::policy;
  else if (ctl == "planner") ep.controller = ControllerKind::planner;
  else throw std::runtime_error("unknown controller: " + ctl);
  ep.max_steps = j["max_steps"];
  ep.success_radius = j["success_radius"];
  ep.category = episode_category_from_string(j["category"]);
  return ep;
}

inline void write_suite_jsonl(const std::string& path, const std::vector<Episode>& suite) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  json header;
  header["schema"] = kSuiteSchemaName;
  header["version"] = kSuiteSchemaVersion;
  header["episodes"] = suite.size();
  out << header.dump() << '\n';
  for (const Episode& ep : suite) out << episode_to_json(ep).dump() << '\n';
}

inline std::vector<Episode> read_suite_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty suite file");
  const json header = json::parse(line);
  if (header.value("schema", "") != kSuiteSchemaName)
    throw std::runtime_error("not a suite file");
  if (header.value("version", 0) != kSuiteSchemaVersion)
    throw std::runtime_error("unsupported suite schema version");
  std::vector<Episode> suite;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    suite.push_back(episode_from_json(json::parse(line)));
  }
  return suite;
}

// Aggregated evaluation results.

struct CategoryStats {
  int episodes = 0;
  int successes = 0;
  double rate() const { return episodes == 0 ? 0.0 : static_cast<double>(successes) / episodes; }
};

struct EpisodeRecord {
  int index = 0;
  EpisodeCategory category = EpisodeCategory::simple;
  RunOutcome outcome = RunOutcome::timeout;
  int steps = 0;
  double final_distance = 0.0;
  bool blocked = false;  // an obstacle or non-target object sits on the start-goal line
};

struct EvalReport {
  int episodes = 0;
  int successes = 0;
  int collisions = 0;
  std::map<std::string, CategoryStats> categories;
  CategoryStats blocked_stats;    // episodes with something in the way
  CategoryStats open_stats;       // unobstructed episodes
  std::vector<EpisodeRecord> records;

  double success_rate() const {
    return episodes == 0 ? 0.0 : static_cast<double>(successes) / episodes;
  }
  double collision_rate() const {
    return episodes == 0 ? 0.0 : static_cast<double>(collisions) / episodes;
  }
};

inline const char* to_string(RunOutcome o) {
  switch (o) {
    case RunOutcome::success: return "success";
    case RunOutcome::collision: return "collision";
    case RunOutcome::timeout: return "timeout";
  }
  return "timeout";
}

inline RunOutcome outcome_from_string(const std::string& s) {
  if (s == "success") return RunOutcome::success;
  if (s == "collision") return RunOutcome::collision;
  if (s == "timeout") return RunOutcome::timeout;
  throw std::runtime_error("unknown outcome: " + s);
}

// Distance from point p to the segment a-b.
inline double segment_distance(const Vec2& a, const Vec2& b, const Vec2& p) {
  const Vec2 ab = b - a;
  const double len2 = squared_norm(ab);
  if (len2 < 1e-12) return distance(a, p);
  const double s = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
  return distance({a.x + s * ab.x, a.y + s * ab.y}, p);
}

// An episode counts as blocked when some non-target entity sits within half a
// meter of the straight start-to-goal line (and is not hugging the goal).
inline bool episode_blocked(const Episode& ep) {
  const ObjectSpec* target = find_object(ep.world, ep.target_id);
  if (!target) return false;
  const Vec2 goal = object_position_at(ep.world, *target, 0.0);
  const Vec2 start = ep.start.position();
  auto blocking = [&](const Vec2& p) {
    return segment_distance(start, goal, p) < 0.5 && distance(p, goal) > 0.5;
  };
  for (const auto& set : ep.world.obstacles)
    for (const Vec2& p : set)
      if (blocking(p)) return true;
  for (const ObjectSpec& o : ep.world.objects)
    if (o.id != ep.target_id && blocking(object_position_at(ep.world, o, 0.0))) return true;
  return false;
}

inline EvalReport evaluate(const std::vector<Episode>& suite, const SimConfig& sim,
                           const PolicyParams* policy) {
  EvalReport report;
  for (std::size_t i = 0; i < suite.size(); ++i) {
    const Episode& ep = suite[i];
    const EpisodeResult res = run_episode(ep, sim, policy);
    EpisodeRecord rec;
    rec.index = static_cast<int>(i);
    rec.category = ep.category;
    rec.outcome = res.outcome;
    rec.steps = res.steps;
    rec.final_distance = res.final_distance;
    rec.blocked = episode_blocked(ep);
    report.records.push_back(rec);

    ++report.episodes;
    CategoryStats& cat = report.categories[to_string(ep.category)];
    ++cat.episodes;
    CategoryStats& split = rec.blocked ? report.blocked_stats : report.open_stats;
    ++split.episodes;
    if (res.outcome == RunOutcome::success) {
      ++report.successes;
      ++cat.successes;
      ++split.successes;
    }
    if (res.outcome == RunOutcome::collision) ++report.collisions;
  }
  return report;
}

inline json report_to_json(const EvalReport& r) {
  json j;
  j["schema"] = kReportSchemaName;
  j["version"] = kReportSchemaVersion;
  j["episodes"] = r.episodes;
  j["successes"] = r.successes;
  j["collisions"] = r.collisions;
  j["success_rate"] = r.success_rate();
  j["collision_rate"] = r.collision_rate();
  json cats = json::object();
  for (const auto& [name, st] : r.categories)
    cats[name] = {{"episodes", st.episodes}, {"successes", st.successes}, {"rate", st.rate()}};
  j["categories"] = cats;
  j["blocked"] = {{"episodes", r.blocked_stats.episodes},
                  {"successes", r.blocked_stats.successes},
                  {"rate", r.blocked_stats.rate()}};
  j["open"] = {{"episodes", r.open_stats.episodes},
               {"successes", r.open_stats.successes},
               {"rate", r.open_stats.rate()}};
  json recs = json::array();
  for (const EpisodeRecord& rec : r.records)
    recs.push_back({{"index", rec.index},
                    {"category", to_string(rec.category)},
                    {"outcome", to_string(rec.outcome)},
                    {"steps", rec.steps},
                    {"final_distance", rec.final_distance},
                    {"blocked", rec.blocked}});
  j["records"] = recs;
  return j;
}

inline EvalReport report_from_json(const json& j) {
  if (j.value("schema", "") != kReportSchemaName)
    throw std::runtime_error("not a report file");
  EvalReport r;
  r.episodes = j["episodes"];
  r.successes = j["successes"];
  r.collisions = j["collisions"];
  for (const auto& [name, st] : j["categories"].items())
    r.categories[name] = {st["episodes"], st["successes"]};
  r.blocked_stats = {j["blocked"]["episodes"], j["blocked"]["successes"]};
  r.open_stats = {j["open"]["episodes"], j["open"]["successes"]};
  for (const json& jr : j["records"]) {
    EpisodeRecord rec;
    rec.index = jr["index"];
    rec.category = episode_category_from_string(jr["category"]);
    rec.outcome = outcome_from_string(jr["outcome"]);
    rec.steps = jr["steps"];
    rec.final_distance = jr["final_distance"];
    rec.blocked = jr["blocked"];
    r.records.push_back(rec);
  }
  return r;
}

}  // namespace lmnav
