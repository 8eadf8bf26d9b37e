#pragma once

// Synthetic annotation pipeline: ray-cast depth/mask rendering, visibility
// filtering, prompt generation (clean through deliberately wrong), grounded
// pose labels from masked depth medians, and planner-teacher trajectories.
//
// The backend boundary (segment / describe / propose_prompts) is a virtual
// interface taking rendered frames, so a real segmentation + captioning
// client can replace the mock without touching the pipeline.

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "lmnav/core.hpp"
#include "lmnav/dataset.hpp"
#include "lmnav/geometry.hpp"
#include "lmnav/planner.hpp"
#include "lmnav/world.hpp"

namespace lmnav {

// Per-pixel boolean region, same layout as the depth map.
struct Mask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;

  static Mask empty(int w, int h) {
    Mask m;
    m.width = w;
    m.height = h;
    m.bits.assign(static_cast<std::size_t>(w) * h, 0);
    return m;
  }
  std::uint8_t at(int u, int v) const { return bits[static_cast<std::size_t>(v) * width + u]; }
  void set(int u, int v) { bits[static_cast<std::size_t>(v) * width + u] = 1; }
  std::size_t count() const {
    std::size_t n = 0;
    for (std::uint8_t b : bits) n += b;
    return n;
  }
};

// Robot-mounted camera: at the robot origin, height above ground, looking
// along the robot's heading (z forward, x right, y down).
struct CameraRig {
  CameraIntrinsics intrinsics;
  double height = 0.35;
};

struct RenderResult {
  DepthMap depth;                 // z-depth in meters, NaN where nothing hit
  std::vector<Mask> masks;        // parallel to world.objects
  std::vector<double> visibility; // frontmost / projected-in-frame, in [0, 1]
};

// Ray-cast every pixel against the object spheres; nearest hit owns the
// pixel. Visibility counts occlusion but not image-border truncation.
inline RenderResult render_frame(const World& world, const Pose2& robot,
                                 const CameraRig& rig, double t = 0.0) {
  const CameraIntrinsics& intr = rig.intrinsics;
  RenderResult out;
  out.depth = DepthMap::invalid_filled(intr.width, intr.height);
  out.masks.assign(world.objects.size(), Mask::empty(intr.width, intr.height));
  out.visibility.assign(world.objects.size(), 0.0);

  const double cth = std::cos(robot.theta), sth = std::sin(robot.theta);
  // Sphere centers in camera coordinates.
  std::vector<Point3> centers(world.objects.size());
  for (std::size_t i = 0; i < world.objects.size(); ++i) {
    const Vec2 pos = object_position_at(world, world.objects[i], t);
    const double dx = pos.x - robot.x;
    const double dy = pos.y - robot.y;
    const double dz = world.objects[i].position.z - rig.height;
    // right = (sth, -cth, 0), down = (0, 0, -1), forward = (cth, sth, 0)
    centers[i] = {dx * sth - dy * cth, -dz, dx * cth + dy * sth};
  }

  std::vector<std::size_t> projected(world.objects.size(), 0);
  std::vector<std::size_t> frontmost(world.objects.size(), 0);
  for (int v = 0; v < intr.height; ++v) {
    for (int u = 0; u < intr.width; ++u) {
      const double rx = (u - intr.cx) / intr.fx;
      const double ry = (v - intr.cy) / intr.fy;
      // Ray p(d) = d * (rx, ry, 1); d is z-depth.
      const double a = rx * rx + ry * ry + 1.0;
      double best_depth = 0.0;
      int best_obj = -1;
      for (std::size_t i = 0; i < world.objects.size(); ++i) {
        const Point3& c = centers[i];
        const double r = world.objects[i].footprint_radius;
        const double b = rx * c.x + ry * c.y + c.z;
        const double disc = b * b - a * (c.x * c.x + c.y * c.y + c.z * c.z - r * r);
        if (disc < 0.0) continue;
        const double sq = std::sqrt(disc);
        double d = (b - sq) / a;
        if (d <= 0.0) d = (b + sq) / a;  // camera inside the sphere
        if (d <= 0.0) continue;
        ++projected[i];
        if (best_obj < 0 || d < best_depth) {
          best_depth = d;
          best_obj = static_cast<int>(i);
        }
      }
      if (best_obj >= 0) {
        out.depth.at(u, v) = best_depth;
        out.masks[best_obj].set(u, v);
        ++frontmost[best_obj];
      }
    }
  }
  for (std::size_t i = 0; i < world.objects.size(); ++i)
    if (projected[i] > 0)
      out.visibility[i] = static_cast<double>(frontmost[i]) / projected[i];
  return out;
}

// Keep a detection only when enough of the object is actually seen.
inline bool confidence_filter(double visibility, double threshold = 0.5) {
  if (!(visibility >= 0.0) || visibility > 1.0)
    throw std::invalid_argument("visibility outside [0, 1]");
  return visibility >= threshold;
}

// back_project -> masked componentwise median -> drop height. The mask is
// re-indexed onto the valid-pixel cloud so the three steps compose directly.
inline Vec2 label_object_pose(const DepthMap& depth, const Mask& mask,
                              const CameraIntrinsics& intr) {
  if (mask.width != depth.width || mask.height != depth.height)
    throw std::invalid_argument("mask size mismatch");
  const std::vector<Point3> cloud = back_project(depth, intr);
  std::vector<std::uint8_t> cloud_mask;
  cloud_mask.reserve(cloud.size());
  for (int v = 0; v < depth.height; ++v)
    for (int u = 0; u < depth.width; ++u)
      if (depth.valid(u, v)) cloud_mask.push_back(mask.at(u, v));
  const Point3 med = masked_median_pose(cloud, cloud_mask);
  return to_planar(med, HeightAxis::camera_y);
}

// Built-in decoy adjectives used when no data file is configured. The file
// data/decoy_adjectives.txt ships the same list.
inline const std::vector<std::string>& default_decoy_adjectives() {
  static const std::vector<std::string> decoys = {
      "yellow", "purple", "orange", "striped", "shiny",
      "broken", "ancient", "tiny",  "huge",    "pink"};
  return decoys;
}

struct PromptGenConfig {
  double noisy_prob = 0.3;
  double implicit_prob = 0.3;
  std::vector<std::string> decoys = default_decoy_adjectives();
};

inline std::string join_words(const std::vector<std::string>& words) {
  std::string out;
  for (const std::string& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

// Prompt set for one object: always a plain form, a descriptive form when
// there is material for one, and (with configured probability) a variant with
// a wrong attribute and an attribute-only one. Deterministic under the rng.
inline std::vector<PromptLabel> generate_prompts(const ObjectSpec& obj,
                                                 const std::vector<ObjectSpec>& neighbors,
                                                 DeterministicRng& rng,
                                                 const PromptGenConfig& cfg = {}) {
  if (obj.noun.empty()) throw std::invalid_argument("object without noun");
  std::vector<PromptLabel> prompts;
  prompts.push_back({"go to the " + obj.noun, PromptCategory::simple});

  const ObjectSpec* nearest = nullptr;
  double best = std::numeric_limits<double>::infinity();
  for (const ObjectSpec& nb : neighbors) {
    if (nb.id == obj.id) continue;
    const double d = std::hypot(nb.position.x - obj.position.x,
                                nb.position.y - obj.position.y);
    if (d < best) {
      best = d;
      nearest = &nb;
    }
  }

  const std::string attrs = join_words(obj.attributes);
  if (!obj.attributes.empty())
    prompts.push_back({"go to the " + attrs + " " + obj.noun, PromptCategory::descriptive});
  if (nearest)
    prompts.push_back({"go to the " + obj.noun + " next to the " + nearest->noun,
                       PromptCategory::descriptive});
  if (!obj.attributes.empty() && nearest)
    prompts.push_back({"go to the " + attrs + " " + obj.noun + " next to the " +
                           nearest->noun,
                       PromptCategory::descriptive});

  if (!cfg.decoys.empty() && rng.bernoulli(cfg.noisy_prob)) {
    const std::string decoy = cfg.decoys[rng.uniform_index(cfg.decoys.size())];
    if (obj.attributes.empty()) {
      prompts.push_back({"go to the " + decoy + " " + obj.noun, PromptCategory::noisy});
    } else {
      std::vector<std::string> wrong = obj.attributes;
      wrong[rng.uniform_index(wrong.size())] = decoy;
      prompts.push_back(
          {"go to the " + join_words(wrong) + " " + obj.noun, PromptCategory::noisy});
    }
  }

  if (rng.bernoulli(cfg.implicit_prob)) {
    if (!obj.attributes.empty())
      prompts.push_back({"go to the " + attrs + " one", PromptCategory::implicit});
    else if (nearest)
      prompts.push_back(
          {"go to the one next to the " + nearest->noun, PromptCategory::implicit});
  }
  return prompts;
}

// Pixel box around the goal for crop-style supervision: the goal's planar
// position at a sampled height, projected and expanded to a sampled size.
struct PixelBox {
  int u = 0, v = 0, w = 0, h = 0;  // top-left corner, size
};

inline PixelBox crop_goal_box(const Vec2& goal, const CameraRig& rig, double height_lo,
                              double height_hi, int size_lo, int size_hi,
                              DeterministicRng& rng) {
  if (!(goal.x > 0.0)) throw std::invalid_argument("behind camera");
  if (!(height_hi >= height_lo) || size_lo < 1 || size_hi < size_lo)
    throw std::invalid_argument("bad crop sampling ranges");
  const double h = rng.uniform(height_lo, height_hi);
  const Point3 cam = {-goal.y, rig.height - h, goal.x};
  const PixelCoord px = project_to_pixel(cam, rig.intrinsics);
  const int size = size_lo + static_cast<int>(rng.uniform_index(
                                 static_cast<std::size_t>(size_hi - size_lo + 1)));
  PixelBox box;
  box.u = static_cast<int>(std::lround(px.u)) - size / 2;
  box.v = static_cast<int>(std::lround(px.v)) - size / 2;
  box.w = size;
  box.h = size;
  // Clip to the image, never below 1x1.
  const int w = rig.intrinsics.width, hh = rig.intrinsics.height;
  box.u = std::clamp(box.u, 0, w - 1);
  box.v = std::clamp(box.v, 0, hh - 1);
  box.w = std::clamp(box.w, 1, w - box.u);
  box.h = std::clamp(box.h, 1, hh - box.v);
  return box;
}

// One detected region handed across the backend boundary. object_id is the
// ground-truth association when the backend has one (the mock does); a
// learned client may return -1 and let the pose label key the record.
struct SegmentedObject {
  int object_id = -1;
  Mask mask;
  double visibility = 0.0;
};

struct ScoredPrompt {
  PromptLabel prompt;
  double confidence = 1.0;
};

// Request/response contract with the annotation models: rendered frame in,
// masks and texts out.
class AnnotationBackend {
 public:
  virtual ~AnnotationBackend() = default;
  virtual std::vector<SegmentedObject> segment(const RenderResult& frame) = 0;
  virtual std::string describe(const RenderResult& frame, const SegmentedObject& region) = 0;
  virtual std::vector<ScoredPrompt> propose_prompts(const SegmentedObject& region,
                                                    const std::string& description,
                                                    DeterministicRng& rng) = 0;
};

// Deterministic stand-in for the real detectors: ground-truth masks from the
// renderer, template captions from the object specs.
class MockBackend : public AnnotationBackend {
 public:
  explicit MockBackend(const World& world, PromptGenConfig prompt_cfg = {})
      : world_(&world), prompt_cfg_(std::move(prompt_cfg)) {}

  std::vector<SegmentedObject> segment(const RenderResult& frame) override {
    std::vector<SegmentedObject> out;
    for (std::size_t i = 0; i < frame.masks.size(); ++i) {
      if (frame.masks[i].count() == 0) continue;
      out.push_back({world_->objects[i].id, frame.masks[i], frame.visibility[i]});
    }
    return out;
  }

  std::string describe(const RenderResult&, const SegmentedObject& region) override {
    const ObjectSpec* obj = find_object(*world_, region.object_id);
    if (!obj) throw std::runtime_error("mock backend: unknown region association");
    return canonical_description(*obj);
  }

  std::vector<ScoredPrompt> propose_prompts(const SegmentedObject& region,
                                            const std::string&,
                                            DeterministicRng& rng) override {
    const ObjectSpec* obj = find_object(*world_, region.object_id);
    if (!obj) throw std::runtime_error("mock backend: unknown region association");
    std::vector<ScoredPrompt> out;
    for (PromptLabel& pl : generate_prompts(*obj, world_->objects, rng, prompt_cfg_))
      out.push_back({std::move(pl), 1.0});
    return out;
  }

 private:
  const World* world_;
  PromptGenConfig prompt_cfg_;
};

struct AnnotationConfig {
  double fps = 2.0;
  double visibility_threshold = 0.5;
  // Depth labels degrade with range, and action labels beyond the command
  // horizon's reach teach nothing but full throttle; objects farther than
  // this are left unlabeled.
  double max_label_range = 8.0;
  CameraRig rig;
  int teacher_horizon = 8;
  PlannerConfig planner;
  std::uint64_t seed = 0;
};

// Sample the traversal at fps, render, filter, label, and attach teacher
// trajectories. Frames get independent rng streams so results do not depend
// on processing order.
inline Dataset annotate_dataset(const World& world, const Traversal& traversal,
                                AnnotationBackend& backend, const AnnotationConfig& cfg) {
  if (!(cfg.fps > 0.0)) throw std::invalid_argument("fps must be positive");
  Dataset ds;
  ds.header.teacher_horizon = cfg.teacher_horizon;
  ds.header.fps = cfg.fps;
  ds.header.seed = cfg.seed;

  const double duration = traversal.duration();
  const int frame_count = static_cast<int>(std::floor(duration * cfg.fps + 1e-9));
  const DeterministicRng base(cfg.seed);

  std::vector<CandidateObservation> prev_candidates;
  for (int k = 0; k < frame_count; ++k) {
    const double t = traversal.waypoints.front().t + k / cfg.fps;
    const Pose2 robot = traversal.pose_at(t);
    DeterministicRng rng = base.fork(static_cast<std::uint64_t>(k));

    AnnotatedFrame frame;
    frame.frame_id = k;
    frame.t = t;
    frame.robot = robot;
    frame.previous = prev_candidates;

    const RenderResult render = render_frame(world, robot, cfg.rig, t);
    for (SegmentedObject& seg : backend.segment(render)) {
      if (!confidence_filter(seg.visibility, cfg.visibility_threshold)) continue;
      AnnotatedObject obj;
      obj.object_id = seg.object_id;
      const ObjectSpec* spec = find_object(world, seg.object_id);
      if (spec) {
        obj.noun = spec->noun;
        obj.attributes = spec->attributes;
      }
      obj.rel = label_object_pose(render.depth, seg.mask, cfg.rig.intrinsics);
      if (norm(obj.rel) > cfg.max_label_range) continue;
      const std::string description = backend.describe(render, seg);
      for (ScoredPrompt& sp : backend.propose_prompts(seg, description, rng))
        obj.prompts.push_back(std::move(sp.prompt));
      // Teacher runs in the robot frame: start at the origin, goal at the
      // labeled pose, every other entity an obstacle.
      std::vector<Vec2> obstacles;
      for (const Vec2& p : obstacle_points(world, t, seg.object_id))
        obstacles.push_back(to_local(robot, p));
      obj.teacher = teacher_trajectory(Pose2{}, obj.rel, obstacles, cfg.planner,
                                       cfg.teacher_horizon);
      frame.objects.push_back(std::move(obj));
    }

    prev_candidates.clear();
    for (const AnnotatedObject& o : frame.objects)
      prev_candidates.push_back({o.object_id, o.noun, o.attributes, o.rel});
    ds.frames.push_back(std::move(frame));
  }
  return ds;
}

}  // namespace lmnav
