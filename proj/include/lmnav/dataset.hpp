#pragma once

// Annotated-frame dataset: JSON Lines on disk with a versioned header line,
// plus the batch sampling and feature instantiation used during training.
//
// Frames store geometry-only candidate blocks (current + previous). The
// similarity channel of the K-slot feature depends on the instruction, so it
// is filled in at sampling time against whichever prompt was drawn.

#include <nlohmann/json.hpp>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "lmnav/core.hpp"
#include "lmnav/embedding.hpp"
#include "lmnav/policy.hpp"
#include "lmnav/world.hpp"

namespace lmnav {

inline constexpr int kDatasetSchemaVersion = 1;
inline const char* kDatasetSchemaName = "lmnav.dataset";

enum class PromptCategory { simple, descriptive, noisy, implicit };

inline const char* to_string(PromptCategory c) {
  switch (c) {
    case PromptCategory::simple: return "simple";
    case PromptCategory::descriptive: return "descriptive";
    case PromptCategory::noisy: return "noisy";
    case PromptCategory::implicit: return "implicit";
  }
  return "simple";
}

inline PromptCategory prompt_category_from_string(const std::string& s) {
  if (s == "simple") return PromptCategory::simple;
  if (s == "descriptive") return PromptCategory::descriptive;
  if (s == "noisy") return PromptCategory::noisy;
  if (s == "implicit") return PromptCategory::implicit;
  throw std::runtime_error("unknown prompt category: " + s);
}

struct PromptLabel {
  std::string text;
  PromptCategory category = PromptCategory::simple;
};

// An object another frame saw: enough to rebuild its feature slot later.
struct CandidateObservation {
  int object_id = 0;
  std::string noun;
  std::vector<std::string> attributes;
  Vec2 rel;  // planar position in that frame's robot frame
};

// One confidently-detected object in a frame, with its grounded label.
struct AnnotatedObject {
  int object_id = 0;
  std::string noun;
  std::vector<std::string> attributes;
  Vec2 rel;                          // labeled planar pose, robot frame
  std::vector<PromptLabel> prompts;  // at least one, each starting "go to"
  std::vector<Pose2> teacher;        // detour trajectory, robot frame, length M
};

struct AnnotatedFrame {
  int frame_id = 0;
  double t = 0.0;
  Pose2 robot;                                  // world frame, for diagnostics
  std::vector<CandidateObservation> previous;   // empty at sequence start
  std::vector<AnnotatedObject> objects;
};

struct DatasetHeader {
  int version = kDatasetSchemaVersion;
  int teacher_horizon = 8;
  double fps = 2.0;
  std::uint64_t seed = 0;
};

struct Dataset {
  DatasetHeader header;
  std::vector<AnnotatedFrame> frames;
};

inline bool starts_with_go_to(const std::string& text) {
  std::string head;
  for (char c : text) {
    if (head.size() >= 5) break;
    head.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return head == "go to";
}

// Structural schema check; returns human-readable violations, empty when clean.
inline std::vector<std::string> validate_dataset(const Dataset& ds) {
  std::vector<std::string> problems;
  for (const AnnotatedFrame& f : ds.frames) {
    const std::string where = "frame " + std::to_string(f.frame_id);
    for (const AnnotatedObject& o : f.objects) {
      if (o.noun.empty()) problems.push_back(where + ": object without noun");
      if (o.prompts.empty()) problems.push_back(where + ": object without prompts");
      if (!std::isfinite(o.rel.x) || !std::isfinite(o.rel.y))
        problems.push_back(where + ": non-finite label");
      if (static_cast<int>(o.teacher.size()) != ds.header.teacher_horizon)
        problems.push_back(where + ": teacher length " + std::to_string(o.teacher.size()));
      for (const PromptLabel& pl : o.prompts) {
        if (!starts_with_go_to(pl.text))
          problems.push_back(where + ": prompt does not start with 'go to': " + pl.text);
        if (pl.text.empty()) problems.push_back(where + ": empty prompt");
      }
    }
  }
  return problems;
}

// JSON Lines serialization.

namespace detail {
inline json frame_to_json(const AnnotatedFrame& f) {
  json j;
  j["frame"] = f.frame_id;
  j["t"] = f.t;
  j["robot"] = {f.robot.x, f.robot.y, f.robot.theta};
  json prev = json::array();
  for (const CandidateObservation& c : f.previous)
    prev.push_back({{"id", c.object_id},
                    {"noun", c.noun},
                    {"attributes", c.attributes},
                    {"rel", {c.rel.x, c.rel.y}}});
  j["previous"] = prev;
  json objs = json::array();
  for (const AnnotatedObject& o : f.objects) {
    json jo;
    jo["id"] = o.object_id;
    jo["noun"] = o.noun;
    jo["attributes"] = o.attributes;
    jo["rel"] = {o.rel.x, o.rel.y};
    json prompts = json::array();
    for (const PromptLabel& pl : o.prompts)
      prompts.push_back({{"text", pl.text}, {"category", to_string(pl.category)}});
    jo["prompts"] = prompts;
    json teacher = json::array();
    for (const Pose2& p : o.teacher) teacher.push_back({p.x, p.y, p.theta});
    jo["teacher"] = teacher;
    objs.push_back(jo);
  }
  j["objects"] = objs;
  return j;
}

inline AnnotatedFrame frame_from_json(const json& j) {
  AnnotatedFrame f;
  f.frame_id = j["frame"];
  f.t = j["t"];
  f.robot = {j["robot"][0], j["robot"][1], j["robot"][2]};
  for (const json& jc : j["previous"]) {
    CandidateObservation c;
    c.object_id = jc["id"];
    c.noun = jc["noun"];
    c.attributes = jc["attributes"].get<std::vector<std::string>>();
    c.rel = {jc["rel"][0], jc["rel"][1]};
    f.previous.push_back(c);
  }
  for (const json& jo : j["objects"]) {
    AnnotatedObject o;
    o.object_id = jo["id"];
    o.noun = jo["noun"];
    o.attributes = jo["attributes"].get<std::vector<std::string>>();
    o.rel = {jo["rel"][0], jo["rel"][1]};
    for (const json& jp : jo["prompts"])
      o.prompts.push_back({jp["text"], prompt_category_from_string(jp["category"])});
    for (const json& jt : jo["teacher"])
      o.teacher.push_back({jt[0], jt[1], jt[2]});
    f.objects.push_back(o);
  }
  return f;
}
}  // namespace detail

inline void write_dataset_jsonl(const std::string& path, const Dataset& ds) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  json header;
  header["schema"] = kDatasetSchemaName;
  header["version"] = ds.header.version;
  header["teacher_horizon"] = ds.header.teacher_horizon;
  header["fps"] = ds.header.fps;
  header["seed"] = ds.header.seed;
  out << header.dump() << '\n';
  for (const AnnotatedFrame& f : ds.frames) out << detail::frame_to_json(f).dump() << '\n';
}

inline Dataset read_dataset_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty dataset file");
  const json header = json::parse(line);
  if (header.value("schema", "") != kDatasetSchemaName)
    throw std::runtime_error("not a dataset file");
  if (header.value("version", 0) != kDatasetSchemaVersion)
    throw std::runtime_error("unsupported dataset schema version");
  Dataset ds;
  ds.header.version = header["version"];
  ds.header.teacher_horizon = header["teacher_horizon"];
  ds.header.fps = header["fps"];
  ds.header.seed = header["seed"];
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ds.frames.push_back(detail::frame_from_json(json::parse(line)));
  }
  return ds;
}

// Feature instantiation: slots from the frame's candidates, similarity taken
// against the active instruction.

inline std::vector<SlotFeature> slots_from_candidates(
    const std::vector<CandidateObservation>& candidates, const Eigen::VectorXd& instr,
    int k, EmbeddingCache& cache) {
  std::vector<SlotCandidate> entries;
  entries.reserve(candidates.size());
  for (const CandidateObservation& c : candidates) {
    ObjectSpec tmp;
    tmp.noun = c.noun;
    tmp.attributes = c.attributes;
    entries.push_back({c.rel, cosine(instr, cache.get(canonical_description(tmp)))});
  }
  return fill_slots(std::move(entries), k);
}

inline ObservationFeature build_observation(const AnnotatedFrame& frame,
                                            const Eigen::VectorXd& instr,
                                            const PolicyConfig& cfg, EmbeddingCache& cache) {
  std::vector<CandidateObservation> current;
  current.reserve(frame.objects.size());
  for (const AnnotatedObject& o : frame.objects)
    current.push_back({o.object_id, o.noun, o.attributes, o.rel});
  ObservationFeature obs;
  obs.current = slots_from_candidates(current, instr, cfg.slots, cache);
  obs.previous.assign(static_cast<std::size_t>(cfg.slots) * cfg.history, SlotFeature{});
  if (cfg.history >= 1 && !frame.previous.empty()) {
    const std::vector<SlotFeature> prev =
        slots_from_candidates(frame.previous, instr, cfg.slots, cache);
    std::copy(prev.begin(), prev.end(), obs.previous.begin());
  }
  return obs;
}

// Uniform (frame -> object -> prompt) draw, mirroring the data hierarchy.
struct SampleRef {
  int frame_index = 0;
  int object_index = 0;
  int prompt_index = 0;
};

inline std::vector<SampleRef> sample_batch(const Dataset& ds, DeterministicRng& rng,
                                           int batch_size) {
  std::vector<int> eligible;
  for (int i = 0; i < static_cast<int>(ds.frames.size()); ++i)
    if (!ds.frames[i].objects.empty()) eligible.push_back(i);
  if (eligible.empty()) throw std::invalid_argument("dataset has no annotated objects");
  std::vector<SampleRef> batch;
  batch.reserve(batch_size);
  for (int b = 0; b < batch_size; ++b) {
    SampleRef s;
    s.frame_index = eligible[rng.uniform_index(eligible.size())];
    const AnnotatedFrame& f = ds.frames[s.frame_index];
    s.object_index = static_cast<int>(rng.uniform_index(f.objects.size()));
    s.prompt_index = static_cast<int>(
        rng.uniform_index(f.objects[s.object_index].prompts.size()));
    batch.push_back(s);
  }
  return batch;
}

}  // namespace lmnav
