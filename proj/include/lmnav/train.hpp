#pragma once

// Policy optimization: minibatch gradient descent on the composite objective,
// open-loop evaluation for dataset-size ablations, and checkpoint files.
//
// Training is two-stage by configuration rather than by code path: the first
// stage runs with the distillation weight at zero, the second warm-starts from
// the first stage's weights with the weight enabled. Both stages call the same
// train() below.

#include <nlohmann/json.hpp>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "lmnav/core.hpp"
#include "lmnav/dataset.hpp"
#include "lmnav/embedding.hpp"
#include "lmnav/geometry.hpp"
#include "lmnav/objective.hpp"
#include "lmnav/policy.hpp"

namespace lmnav {

inline constexpr int kCheckpointSchemaVersion = 1;
inline const char* kCheckpointSchemaName = "lmnav.checkpoint";

struct TrainConfig {
  PolicyConfig policy;
  ObjectiveConfig objective;
  double lr = 1e-4;
  double lr_final = 0.0;  // > 0: geometric per-epoch decay from lr down to lr_final
  int batch_size = 256;
  int epochs = 30;
  std::uint64_t seed = 1;
  double data_fraction = 1.0;  // fraction of frames used, for ablations

  void validate() const {
    policy.validate();
    objective.validate();
    if (objective.horizon != policy.horizon)
      throw std::invalid_argument("objective and policy horizons differ");
    if (!(lr > 0.0)) throw std::invalid_argument("learning rate must be positive");
    if (lr_final < 0.0) throw std::invalid_argument("final learning rate must be >= 0");
    if (batch_size < 1 || epochs < 1) throw std::invalid_argument("bad training sizes");
    if (!(data_fraction > 0.0) || data_fraction > 1.0)
      throw std::invalid_argument("data fraction must be in (0, 1]");
  }
};

// Per-epoch means over every sample drawn that epoch.
struct EpochStats {
  int epoch = 0;
  double total = 0.0;
  double pose = 0.0;
  double col = 0.0;
  double smooth = 0.0;
  double epsilon_active = 0.0;  // fraction of samples with distillation enabled
};

struct TrainResult {
  PolicyParams params;
  std::vector<EpochStats> curve;
};

// Deterministic frame subset: shuffle indices with the seed, keep the first
// ceil(fraction * n), restore chronological order.
inline Dataset subsample_dataset(const Dataset& ds, double fraction, std::uint64_t seed) {
  if (fraction >= 1.0) return ds;
  const std::size_t n = ds.frames.size();
  const std::size_t keep =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(fraction * n)));
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  DeterministicRng rng(seed);
  for (std::size_t i = n; i > 1; --i)
    std::swap(idx[i - 1], idx[rng.uniform_index(i)]);
  idx.resize(keep);
  std::sort(idx.begin(), idx.end());
  Dataset sub;
  sub.header = ds.header;
  for (std::size_t i : idx) sub.frames.push_back(ds.frames[i]);
  return sub;
}

// One gradient evaluation of a (frame, object, prompt) sample. The rollout
// starts at the origin because labels and teachers live in the robot frame.
inline PolicyTensors sample_gradient(const PolicyParams& params, const AnnotatedFrame& frame,
                                     const AnnotatedObject& obj, const std::string& prompt,
                                     const ObjectiveConfig& ocfg, EmbeddingCache& cache,
                                     ObjectiveBreakdown* breakdown = nullptr) {
  const InstructionEmbedding instr{cache.get(prompt)};
  const ObservationFeature obs = build_observation(frame, instr.vec, params.config, cache);
  const CommandSequence seq = policy_forward(params, obs, instr);
  const std::vector<TwistGrad> upstream =
      objective_gradient(seq, Pose2{}, obj.rel, obj.teacher, ocfg, breakdown);
  return policy_backward(params, obs, instr, upstream);
}

inline TrainResult train(const Dataset& full, const TrainConfig& cfg,
                         const PolicyParams* warm_start = nullptr) {
  cfg.validate();
  if (cfg.objective.teacher_horizon != full.header.teacher_horizon)
    throw std::invalid_argument("teacher horizon does not match dataset");
  const Dataset ds = subsample_dataset(full, cfg.data_fraction, cfg.seed);

  TrainResult out;
  if (warm_start) {
    // Weights carry over; the optimizer state restarts because the objective
    // (and hence the gradient scale) changes between stages.
    if (warm_start->config.input_dim() != cfg.policy.input_dim() ||
        warm_start->config.hidden != cfg.policy.hidden ||
        warm_start->config.horizon != cfg.policy.horizon ||
        warm_start->config.embedding_dim != cfg.policy.embedding_dim)
      throw std::invalid_argument("warm start shape mismatch");
    out.params.config = cfg.policy;
    out.params.weights = warm_start->weights;
    out.params.adam_m = PolicyTensors::zeros(cfg.policy);
    out.params.adam_v = PolicyTensors::zeros(cfg.policy);
    out.params.step = 0;
  } else {
    out.params = init_policy(cfg.policy, cfg.seed);
  }

  int eligible = 0;
  for (const AnnotatedFrame& f : ds.frames)
    if (!f.objects.empty()) ++eligible;
  if (eligible == 0) throw std::invalid_argument("dataset has no annotated objects");
  const int steps_per_epoch =
      std::max(1, (eligible + cfg.batch_size - 1) / cfg.batch_size);

  EmbeddingCache cache(cfg.policy.embedding_dim);
  DeterministicRng base(cfg.seed);
  DeterministicRng sampler = base.fork(1);
  const double inv_batch = 1.0 / cfg.batch_size;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    EpochStats stats;
    stats.epoch = epoch;
    int samples = 0;
    for (int step = 0; step < steps_per_epoch; ++step) {
      const std::vector<SampleRef> batch = sample_batch(ds, sampler, cfg.batch_size);
      PolicyTensors acc = PolicyTensors::zeros(cfg.policy);
      for (const SampleRef& ref : batch) {
        const AnnotatedFrame& frame = ds.frames[ref.frame_index];
        const AnnotatedObject& obj = frame.objects[ref.object_index];
        ObjectiveBreakdown bd;
        acc += sample_gradient(out.params, frame, obj,
                               obj.prompts[ref.prompt_index].text, cfg.objective, cache,
                               &bd);
        stats.total += bd.total;
        stats.pose += bd.j_pose;
        stats.col += bd.j_col;
        stats.smooth += bd.j_smooth;
        stats.epsilon_active += bd.epsilon;
        ++samples;
      }
      acc *= inv_batch;
      adam_step(out.params, acc, cfg.lr);
    }
    stats.total /= samples;
    stats.pose /= samples;
    stats.col /= samples;
    stats.smooth /= samples;
    stats.epsilon_active /= samples;
    out.curve.push_back(stats);
  }
  return out;
}

inline void write_loss_csv(const std::string& path, const std::vector<EpochStats>& curve) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "epoch,total,pose,col,smooth,epsilon_active\n";
  out.precision(17);
  for (const EpochStats& e : curve)
    out << e.epoch << ',' << e.total << ',' << e.pose << ',' << e.col << ',' << e.smooth
        << ',' << e.epsilon_active << '\n';
}

// Open-loop endpoint error: run every (frame, object) pair through the policy
// with its first prompt and measure the rolled-out endpoint against the label.
struct OpenLoopStats {
  int samples = 0;
  double mean_sq_error = 0.0;
  double median_error = 0.0;
};

inline OpenLoopStats evaluate_open_loop(const Dataset& ds, const PolicyParams& params) {
  EmbeddingCache cache(params.config.embedding_dim);
  std::vector<double> errors;
  double sq_sum = 0.0;
  for (const AnnotatedFrame& frame : ds.frames) {
    for (const AnnotatedObject& obj : frame.objects) {
      if (obj.prompts.empty()) continue;
      const InstructionEmbedding instr{cache.get(obj.prompts.front().text)};
      const ObservationFeature obs =
          build_observation(frame, instr.vec, params.config, cache);
      const CommandSequence seq = policy_forward(params, obs, instr);
      const std::vector<Pose2> poses = rollout(Pose2{}, seq);
      const double err = distance(poses.back().position(), obj.rel);
      errors.push_back(err);
      sq_sum += err * err;
    }
  }
  OpenLoopStats st;
  st.samples = static_cast<int>(errors.size());
  if (errors.empty()) return st;
  st.mean_sq_error = sq_sum / st.samples;
  const std::size_t mid = errors.size() / 2;
  std::nth_element(errors.begin(), errors.begin() + mid, errors.end());
  st.median_error = errors[mid];
  if (errors.size() % 2 == 0) {
    const double lower = *std::max_element(errors.begin(), errors.begin() + mid);
    st.median_error = 0.5 * (st.median_error + lower);
  }
  return st;
}

// Dataset-size sweep: train from scratch on each fraction, evaluate open loop
// on the held-out set.
struct AblationPoint {
  double fraction = 1.0;
  int frames_used = 0;
  double median_error = 0.0;
  double mean_sq_error = 0.0;
};

inline std::vector<AblationPoint> run_ablation(const Dataset& train_set,
                                               const Dataset& eval_set,
                                               const TrainConfig& base,
                                               const std::vector<double>& fractions) {
  std::vector<AblationPoint> points;
  for (double f : fractions) {
    TrainConfig cfg = base;
    cfg.data_fraction = f;
    const TrainResult result = train(train_set, cfg);
    const OpenLoopStats st = evaluate_open_loop(eval_set, result.params);
    AblationPoint pt;
    pt.fraction = f;
    pt.frames_used =
        static_cast<int>(subsample_dataset(train_set, f, cfg.seed).frames.size());
    pt.median_error = st.median_error;
    pt.mean_sq_error = st.mean_sq_error;
    points.push_back(pt);
  }
  return points;
}

// Checkpoint files: full optimizer state so training can resume bit-exactly.

namespace detail {
inline json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Eigen::MatrixXd matrix_from_json(const json& j, Eigen::Index rows, Eigen::Index cols) {
  if (static_cast<Eigen::Index>(j.size()) != rows)
    throw std::runtime_error("checkpoint matrix row mismatch");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (static_cast<Eigen::Index>(j[r].size()) != cols)
      throw std::runtime_error("checkpoint matrix column mismatch");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j[r][c];
  }
  return m;
}

inline json vector_to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

inline Eigen::VectorXd vector_from_json(const json& j, Eigen::Index size) {
  if (static_cast<Eigen::Index>(j.size()) != size)
    throw std::runtime_error("checkpoint vector size mismatch");
  Eigen::VectorXd v(size);
  for (Eigen::Index i = 0; i < size; ++i) v(i) = j[i];
  return v;
}

inline json tensors_to_json(const PolicyTensors& t) {
  json j;
  j["w1"] = matrix_to_json(t.w1);
  j["b1"] = vector_to_json(t.b1);
  j["wf"] = matrix_to_json(t.wf);
  j["bf"] = vector_to_json(t.bf);
  j["w2"] = matrix_to_json(t.w2);
  j["b2"] = vector_to_json(t.b2);
  j["w3"] = matrix_to_json(t.w3);
  j["b3"] = vector_to_json(t.b3);
  return j;
}

inline PolicyTensors tensors_from_json(const json& j, const PolicyConfig& cfg) {
  PolicyTensors t;
  t.w1 = matrix_from_json(j["w1"], cfg.hidden, cfg.input_dim());
  t.b1 = vector_from_json(j["b1"], cfg.hidden);
  t.wf = matrix_from_json(j["wf"], 2 * cfg.hidden, cfg.embedding_dim);
  t.bf = vector_from_json(j["bf"], 2 * cfg.hidden);
  t.w2 = matrix_from_json(j["w2"], cfg.hidden, cfg.hidden);
  t.b2 = vector_from_json(j["b2"], cfg.hidden);
  t.w3 = matrix_from_json(j["w3"], 2 * cfg.horizon, cfg.hidden);
  t.b3 = vector_from_json(j["b3"], 2 * cfg.horizon);
  return t;
}
}  // namespace detail

inline json checkpoint_to_json(const PolicyParams& p) {
  json j;
  j["schema"] = kCheckpointSchemaName;
  j["version"] = kCheckpointSchemaVersion;
  j["config"] = {{"slots", p.config.slots},
                 {"history", p.config.history},
                 {"embedding_dim", p.config.embedding_dim},
                 {"hidden", p.config.hidden},
                 {"horizon", p.config.horizon},
                 {"dt", p.config.dt},
                 {"v_min", p.config.limits.v_min},
                 {"v_max", p.config.limits.v_max},
                 {"omega_max", p.config.limits.omega_max}};
  j["step"] = p.step;
  j["weights"] = detail::tensors_to_json(p.weights);
  j["adam_m"] = detail::tensors_to_json(p.adam_m);
  j["adam_v"] = detail::tensors_to_json(p.adam_v);
  return j;
}

inline PolicyParams checkpoint_from_json(const json& j) {
  if (j.value("schema", "") != kCheckpointSchemaName)
    throw std::runtime_error("not a checkpoint file");
  if (j.value("version", 0) != kCheckpointSchemaVersion)
    throw std::runtime_error("unsupported checkpoint version");
  PolicyParams p;
  const json& c = j["config"];
  p.config.slots = c["slots"];
  p.config.history = c["history"];
  p.config.embedding_dim = c["embedding_dim"];
  p.config.hidden = c["hidden"];
  p.config.horizon = c["horizon"];
  p.config.dt = c["dt"];
  p.config.limits.v_min = c["v_min"];
  p.config.limits.v_max = c["v_max"];
  p.config.limits.omega_max = c["omega_max"];
  p.config.validate();
  p.step = j["step"];
  p.weights = detail::tensors_from_json(j["weights"], p.config);
  p.adam_m = detail::tensors_from_json(j["adam_m"], p.config);
  p.adam_v = detail::tensors_from_json(j["adam_v"], p.config);
  return p;
}

inline void write_checkpoint(const std::string& path, const PolicyParams& p) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << checkpoint_to_json(p).dump() << '\n';
}

inline PolicyParams read_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  json j;
  in >> j;
  return checkpoint_from_json(j);
}

}  // namespace lmnav
