#pragma once

// Velocity-command policy: a small MLP whose hidden activations are
// feature-wise modulated by the instruction embedding, emitting a bounded
// command sequence. Backward pass and Adam are written out by hand so the
// whole chain stays analytically differentiable and dependency-free.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "lmnav/core.hpp"
#include "lmnav/embedding.hpp"

namespace lmnav {

// One candidate-object slot as the policy sees it. Invalid slots are zeroed.
struct SlotFeature {
  double rel_x = 0.0;
  double rel_y = 0.0;
  double sim = 0.0;
  bool valid = false;
};

// Current slots plus one previous-frame block (zeroed at episode start).
struct ObservationFeature {
  std::vector<SlotFeature> current;
  std::vector<SlotFeature> previous;
};

struct PolicyConfig {
  int slots = 8;            // K candidate slots per block
  int history = 1;          // L previous-frame blocks
  int embedding_dim = 64;   // instruction embedding size D
  int hidden = 128;         // width of both hidden layers
  int horizon = 24;         // commands emitted per inference (N)
  double dt = 0.333;        // command interval, shared with the planner lattice
  TwistLimits limits;

  int input_dim() const { return slots * 3 * (history + 1); }
  void validate() const {
    if (slots < 1 || history < 0 || embedding_dim < 1 || hidden < 1 || horizon < 2)
      throw std::invalid_argument("bad policy dimensions");
    if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
    if (!(limits.v_max > limits.v_min) || !(limits.omega_max > 0.0))
      throw std::invalid_argument("bad twist limits");
  }
};

// Weight container; also reused for gradients and Adam moments since they
// share shapes.
struct PolicyTensors {
  Eigen::MatrixXd w1, wf, w2, w3;
  Eigen::VectorXd b1, bf, b2, b3;

  static PolicyTensors zeros(const PolicyConfig& cfg) {
    PolicyTensors t;
    t.w1 = Eigen::MatrixXd::Zero(cfg.hidden, cfg.input_dim());
    t.b1 = Eigen::VectorXd::Zero(cfg.hidden);
    t.wf = Eigen::MatrixXd::Zero(2 * cfg.hidden, cfg.embedding_dim);
    t.bf = Eigen::VectorXd::Zero(2 * cfg.hidden);
    t.w2 = Eigen::MatrixXd::Zero(cfg.hidden, cfg.hidden);
    t.b2 = Eigen::VectorXd::Zero(cfg.hidden);
    t.w3 = Eigen::MatrixXd::Zero(2 * cfg.horizon, cfg.hidden);
    t.b3 = Eigen::VectorXd::Zero(2 * cfg.horizon);
    return t;
  }

  bool all_finite() const {
    return w1.allFinite() && b1.allFinite() && wf.allFinite() && bf.allFinite() &&
           w2.allFinite() && b2.allFinite() && w3.allFinite() && b3.allFinite();
  }

  PolicyTensors& operator+=(const PolicyTensors& o) {
    w1 += o.w1; b1 += o.b1; wf += o.wf; bf += o.bf;
    w2 += o.w2; b2 += o.b2; w3 += o.w3; b3 += o.b3;
    return *this;
  }
  PolicyTensors& operator*=(double s) {
    w1 *= s; b1 *= s; wf *= s; bf *= s; w2 *= s; b2 *= s; w3 *= s; b3 *= s;
    return *this;
  }
};

struct PolicyParams {
  PolicyConfig config;
  PolicyTensors weights;
  PolicyTensors adam_m;
  PolicyTensors adam_v;
  long step = 0;
};

namespace detail {
inline void xavier_fill(Eigen::MatrixXd& m, DeterministicRng& rng, double scale = 1.0) {
  const double limit = scale * std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = rng.uniform(-limit, limit);
}
}  // namespace detail

inline PolicyParams init_policy(const PolicyConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  PolicyParams p;
  p.config = cfg;
  p.weights = PolicyTensors::zeros(cfg);
  p.adam_m = PolicyTensors::zeros(cfg);
  p.adam_v = PolicyTensors::zeros(cfg);
  DeterministicRng rng(seed);
  detail::xavier_fill(p.weights.w1, rng);
  detail::xavier_fill(p.weights.wf, rng);
  detail::xavier_fill(p.weights.w2, rng);
  detail::xavier_fill(p.weights.w3, rng, 0.5);  // start near mid-range commands
  return p;
}

// Flatten the slot blocks to the network input; invalid slots contribute zeros
// regardless of stored values. Slot offsets enter as rel/(1 + dist/2): the map
// keeps the bearing, is near-linear inside a metre, and stays below 2.0 at any
// range, so the first tanh layer keeps its resolution where fine steering
// happens instead of saturating on far candidates.
inline Eigen::VectorXd vectorize_observation(const ObservationFeature& obs,
                                             const PolicyConfig& cfg) {
  if (static_cast<int>(obs.current.size()) != cfg.slots ||
      static_cast<int>(obs.previous.size()) != cfg.slots * cfg.history)
    throw std::invalid_argument("observation slot count mismatch");
  Eigen::VectorXd x = Eigen::VectorXd::Zero(cfg.input_dim());
  int i = 0;
  auto put = [&](const SlotFeature& s) {
    double rx = 0.0, ry = 0.0, sim = 0.0;
    if (s.valid) {
      const double compress = 1.0 / (1.0 + 0.5 * std::hypot(s.rel_x, s.rel_y));
      rx = s.rel_x * compress;
      ry = s.rel_y * compress;
      sim = s.sim;
    }
    x(i++) = rx;
    x(i++) = ry;
    x(i++) = sim;
  };
  for (const SlotFeature& s : obs.current) put(s);
  for (const SlotFeature& s : obs.previous) put(s);
  return x;
}

namespace detail {
// Forward intermediates reused by the backward pass.
struct ForwardTrace {
  Eigen::VectorXd x, h1, mod, h2, raw;
  Eigen::VectorXd gamma, beta;
};

inline ForwardTrace forward_trace(const PolicyParams& p, const ObservationFeature& obs,
                                  const InstructionEmbedding& instr) {
  const PolicyConfig& cfg = p.config;
  if (instr.vec.size() != cfg.embedding_dim)
    throw std::invalid_argument("instruction embedding dim mismatch");
  ForwardTrace t;
  t.x = vectorize_observation(obs, cfg);
  t.h1 = (p.weights.w1 * t.x + p.weights.b1).array().tanh().matrix();
  const Eigen::VectorXd film = p.weights.wf * instr.vec + p.weights.bf;
  t.gamma = film.head(cfg.hidden);
  t.beta = film.tail(cfg.hidden);
  t.mod = t.gamma.cwiseProduct(t.h1) + t.beta;
  t.h2 = (p.weights.w2 * t.mod + p.weights.b2).array().tanh().matrix();
  t.raw = p.weights.w3 * t.h2 + p.weights.b3;
  return t;
}
}  // namespace detail

// Saturating output map: raw 0 lands mid-range, outputs always inside limits.
inline CommandSequence policy_forward(const PolicyParams& p, const ObservationFeature& obs,
                                      const InstructionEmbedding& instr) {
  const PolicyConfig& cfg = p.config;
  const detail::ForwardTrace t = detail::forward_trace(p, obs, instr);
  const double v_mid = 0.5 * (cfg.limits.v_min + cfg.limits.v_max);
  const double v_half = 0.5 * (cfg.limits.v_max - cfg.limits.v_min);
  CommandSequence seq;
  seq.dt = cfg.dt;
  seq.commands.resize(cfg.horizon);
  for (int k = 0; k < cfg.horizon; ++k) {
    seq.commands[k].v = v_mid + v_half * std::tanh(t.raw(k));
    seq.commands[k].omega = cfg.limits.omega_max * std::tanh(t.raw(cfg.horizon + k));
  }
  return seq;
}

// Exact reverse pass: upstream holds dL/d(command_k); returns dL/d(weights).
// The instruction encoder is frozen, so no gradient flows into the embedding.
inline PolicyTensors policy_backward(const PolicyParams& p, const ObservationFeature& obs,
                                     const InstructionEmbedding& instr,
                                     const std::vector<TwistGrad>& upstream) {
  const PolicyConfig& cfg = p.config;
  if (static_cast<int>(upstream.size()) != cfg.horizon)
    throw std::invalid_argument("upstream gradient count mismatch");
  const detail::ForwardTrace t = detail::forward_trace(p, obs, instr);
  const double v_half = 0.5 * (cfg.limits.v_max - cfg.limits.v_min);

  Eigen::VectorXd d_raw(2 * cfg.horizon);
  for (int k = 0; k < cfg.horizon; ++k) {
    const double tv = std::tanh(t.raw(k));
    const double tw = std::tanh(t.raw(cfg.horizon + k));
    d_raw(k) = upstream[k].v * v_half * (1.0 - tv * tv);
    d_raw(cfg.horizon + k) = upstream[k].omega * cfg.limits.omega_max * (1.0 - tw * tw);
  }

  PolicyTensors g = PolicyTensors::zeros(cfg);
  g.w3 = d_raw * t.h2.transpose();
  g.b3 = d_raw;
  const Eigen::VectorXd d_h2 = p.weights.w3.transpose() * d_raw;
  const Eigen::VectorXd d_pre2 =
      d_h2.cwiseProduct((1.0 - t.h2.array().square()).matrix());
  g.w2 = d_pre2 * t.mod.transpose();
  g.b2 = d_pre2;
  const Eigen::VectorXd d_mod = p.weights.w2.transpose() * d_pre2;
  const Eigen::VectorXd d_gamma = d_mod.cwiseProduct(t.h1);
  const Eigen::VectorXd& d_beta = d_mod;
  Eigen::VectorXd d_film(2 * cfg.hidden);
  d_film << d_gamma, d_beta;
  g.wf = d_film * instr.vec.transpose();
  g.bf = d_film;
  const Eigen::VectorXd d_h1 = d_mod.cwiseProduct(t.gamma);
  const Eigen::VectorXd d_pre1 =
      d_h1.cwiseProduct((1.0 - t.h1.array().square()).matrix());
  g.w1 = d_pre1 * t.x.transpose();
  g.b1 = d_pre1;
  return g;
}

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

// Single-tensor Adam update with bias correction; t is the 1-based step.
template <typename TensorT>
inline void adam_update(TensorT& w, TensorT& m, TensorT& v, const TensorT& grad, double lr,
                        long t) {
  m = kAdamBeta1 * m + (1.0 - kAdamBeta1) * grad;
  v.array() = kAdamBeta2 * v.array() + (1.0 - kAdamBeta2) * grad.array().square();
  const double mc = 1.0 - std::pow(kAdamBeta1, static_cast<double>(t));
  const double vc = 1.0 - std::pow(kAdamBeta2, static_cast<double>(t));
  w.array() -= lr * (m.array() / mc) / ((v.array() / vc).sqrt() + kAdamEps);
}

inline void adam_step(PolicyParams& p, const PolicyTensors& grads, double lr) {
  if (!grads.all_finite()) throw std::invalid_argument("diverged");
  const long t = ++p.step;
  adam_update(p.weights.w1, p.adam_m.w1, p.adam_v.w1, grads.w1, lr, t);
  adam_update(p.weights.b1, p.adam_m.b1, p.adam_v.b1, grads.b1, lr, t);
  adam_update(p.weights.wf, p.adam_m.wf, p.adam_v.wf, grads.wf, lr, t);
  adam_update(p.weights.bf, p.adam_m.bf, p.adam_v.bf, grads.bf, lr, t);
  adam_update(p.weights.w2, p.adam_m.w2, p.adam_v.w2, grads.w2, lr, t);
  adam_update(p.weights.b2, p.adam_m.b2, p.adam_v.b2, grads.b2, lr, t);
  adam_update(p.weights.w3, p.adam_m.w3, p.adam_v.w3, grads.w3, lr, t);
  adam_update(p.weights.b3, p.adam_m.b3, p.adam_v.b3, grads.b3, lr, t);
}

// Shared slot-filling contract: order by similarity descending, break ties by
// distance ascending, truncate or pad with invalid slots to exactly k.
struct SlotCandidate {
  Vec2 rel;
  double sim = 0.0;
};

inline std::vector<SlotFeature> fill_slots(std::vector<SlotCandidate> candidates, int k) {
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const SlotCandidate& a, const SlotCandidate& b) {
                     if (a.sim != b.sim) return a.sim > b.sim;
                     return squared_norm(a.rel) < squared_norm(b.rel);
                   });
  std::vector<SlotFeature> slots(static_cast<std::size_t>(k));
  for (int i = 0; i < k && i < static_cast<int>(candidates.size()); ++i)
    slots[i] = {candidates[i].rel.x, candidates[i].rel.y, candidates[i].sim, true};
  return slots;
}

}  // namespace lmnav
