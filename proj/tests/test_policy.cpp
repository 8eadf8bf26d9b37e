#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <vector>

#include "lmnav/core.hpp"
#include "lmnav/embedding.hpp"
#include "lmnav/policy.hpp"

using namespace lmnav;

namespace {

PolicyConfig small_config() {
  PolicyConfig cfg;
  cfg.slots = 2;
  cfg.history = 1;
  cfg.embedding_dim = 5;
  cfg.hidden = 6;
  cfg.horizon = 3;
  return cfg;
}

ObservationFeature random_observation(const PolicyConfig& cfg, unsigned seed) {
  DeterministicRng rng(seed);
  ObservationFeature obs;
  auto slot = [&] {
    SlotFeature s;
    s.rel_x = rng.uniform(-2, 2);
    s.rel_y = rng.uniform(-2, 2);
    s.sim = rng.uniform(0, 1);
    s.valid = true;
    return s;
  };
  for (int i = 0; i < cfg.slots; ++i) obs.current.push_back(slot());
  for (int i = 0; i < cfg.slots * cfg.history; ++i) obs.previous.push_back(slot());
  return obs;
}

InstructionEmbedding random_embedding(int dim, unsigned seed) {
  DeterministicRng rng(seed);
  Eigen::VectorXd v(dim);
  for (int i = 0; i < dim; ++i) v(i) = rng.uniform(-1, 1);
  v.normalize();
  return {v};
}

double linear_loss(const CommandSequence& seq, const std::vector<TwistGrad>& coeff) {
  double sum = 0.0;
  for (std::size_t k = 0; k < seq.commands.size(); ++k)
    sum += coeff[k].v * seq.commands[k].v + coeff[k].omega * seq.commands[k].omega;
  return sum;
}

}  // namespace

TEST_CASE("policy tensor shapes follow the configuration") {
  const PolicyConfig cfg = small_config();
  CHECK(cfg.input_dim() == 2 * 3 * 2);
  const PolicyTensors t = PolicyTensors::zeros(cfg);
  CHECK(t.w1.rows() == cfg.hidden);
  CHECK(t.w1.cols() == cfg.input_dim());
  CHECK(t.wf.rows() == 2 * cfg.hidden);
  CHECK(t.wf.cols() == cfg.embedding_dim);
  CHECK(t.w2.rows() == cfg.hidden);
  CHECK(t.w2.cols() == cfg.hidden);
  CHECK(t.w3.rows() == 2 * cfg.horizon);
  CHECK(t.w3.cols() == cfg.hidden);
  CHECK(t.b1.size() == cfg.hidden);
  CHECK(t.bf.size() == 2 * cfg.hidden);
  CHECK(t.b3.size() == 2 * cfg.horizon);
  CHECK(t.all_finite());

  PolicyConfig bad = cfg;
  bad.slots = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("zeroed policy emits mid-range speed and no turn") {
  const PolicyConfig cfg = small_config();
  PolicyParams p;
  p.config = cfg;
  p.weights = PolicyTensors::zeros(cfg);
  p.adam_m = PolicyTensors::zeros(cfg);
  p.adam_v = PolicyTensors::zeros(cfg);
  const CommandSequence seq =
      policy_forward(p, random_observation(cfg, 1), random_embedding(cfg.embedding_dim, 2));
  REQUIRE(static_cast<int>(seq.commands.size()) == cfg.horizon);
  CHECK(seq.dt == cfg.dt);
  for (const Twist& u : seq.commands) {
    CHECK(u.v == Catch::Approx(0.5 * (cfg.limits.v_min + cfg.limits.v_max)));
    CHECK(u.omega == 0.0);
  }
}

TEST_CASE("initialized policy always respects the command limits") {
  const PolicyConfig cfg = small_config();
  for (unsigned seed = 0; seed < 20; ++seed) {
    PolicyParams p = init_policy(cfg, seed);
    CHECK(p.weights.all_finite());
    const CommandSequence seq = policy_forward(p, random_observation(cfg, seed + 100),
                                               random_embedding(cfg.embedding_dim, seed + 200));
    for (const Twist& u : seq.commands) {
      CHECK(u.v >= cfg.limits.v_min);
      CHECK(u.v <= cfg.limits.v_max);
      CHECK(std::abs(u.omega) <= cfg.limits.omega_max);
    }
    REQUIRE_NOTHROW(validate_commands(seq, cfg.limits));
  }
  // Same seed, same weights.
  const PolicyParams a = init_policy(cfg, 7), b = init_policy(cfg, 7);
  CHECK(a.weights.w1 == b.weights.w1);
  CHECK(a.weights.wf == b.weights.wf);
  const PolicyParams c = init_policy(cfg, 8);
  CHECK(a.weights.w1 != c.weights.w1);
}

TEST_CASE("observation vectorization layout and validation") {
  const PolicyConfig cfg = small_config();
  ObservationFeature obs = random_observation(cfg, 3);
  obs.current[1].valid = false;  // invalid slots contribute zeros
  const Eigen::VectorXd x = vectorize_observation(obs, cfg);
  REQUIRE(x.size() == cfg.input_dim());
  CHECK(x(0) == obs.current[0].rel_x);
  CHECK(x(1) == obs.current[0].rel_y);
  CHECK(x(2) == obs.current[0].sim);
  CHECK(x(3) == 0.0);
  CHECK(x(4) == 0.0);
  CHECK(x(5) == 0.0);
  CHECK(x(6) == obs.previous[0].rel_x);  // history block follows current block

  ObservationFeature wrong = obs;
  wrong.current.pop_back();
  CHECK_THROWS_AS(vectorize_observation(wrong, cfg), std::invalid_argument);
  wrong = obs;
  wrong.previous.push_back(SlotFeature{});
  CHECK_THROWS_AS(vectorize_observation(wrong, cfg), std::invalid_argument);
}

TEST_CASE("backward pass matches finite differences over every parameter") {
  const PolicyConfig cfg = small_config();
  PolicyParams p = init_policy(cfg, 42);
  const ObservationFeature obs = random_observation(cfg, 5);
  const InstructionEmbedding instr = random_embedding(cfg.embedding_dim, 6);

  DeterministicRng rng(9);
  std::vector<TwistGrad> coeff(cfg.horizon);
  for (TwistGrad& g : coeff) g = {rng.uniform(-1, 1), rng.uniform(-1, 1)};

  const PolicyTensors grads = policy_backward(p, obs, instr, coeff);
  const double h = 1e-5;

  auto fd_entry = [&](auto&& get) {
    double& w = get(p.weights);
    const double saved = w;
    w = saved + h;
    const double plus = linear_loss(policy_forward(p, obs, instr), coeff);
    w = saved - h;
    const double minus = linear_loss(policy_forward(p, obs, instr), coeff);
    w = saved;
    return (plus - minus) / (2.0 * h);
  };

  auto check_matrix = [&](const char* name, Eigen::MatrixXd PolicyTensors::* member) {
    const Eigen::MatrixXd& g = grads.*member;
    for (int r = 0; r < g.rows(); ++r) {
      for (int c = 0; c < g.cols(); ++c) {
        const double fd =
            fd_entry([&](PolicyTensors& t) -> double& { return (t.*member)(r, c); });
        INFO(name << "(" << r << "," << c << ")");
        CHECK(g(r, c) == Catch::Approx(fd).epsilon(1e-4).margin(1e-8));
      }
    }
  };
  auto check_vector = [&](const char* name, Eigen::VectorXd PolicyTensors::* member) {
    const Eigen::VectorXd& g = grads.*member;
    for (int r = 0; r < g.size(); ++r) {
      const double fd = fd_entry([&](PolicyTensors& t) -> double& { return (t.*member)(r); });
      INFO(name << "(" << r << ")");
      CHECK(g(r) == Catch::Approx(fd).epsilon(1e-4).margin(1e-8));
    }
  };

  check_matrix("w1", &PolicyTensors::w1);
  check_matrix("wf", &PolicyTensors::wf);
  check_matrix("w2", &PolicyTensors::w2);
  check_matrix("w3", &PolicyTensors::w3);
  check_vector("b1", &PolicyTensors::b1);
  check_vector("bf", &PolicyTensors::bf);
  check_vector("b2", &PolicyTensors::b2);
  check_vector("b3", &PolicyTensors::b3);

  std::vector<TwistGrad> short_coeff(cfg.horizon - 1);
  CHECK_THROWS_AS(policy_backward(p, obs, instr, short_coeff), std::invalid_argument);
}

TEST_CASE("one optimizer step follows the bias-corrected update") {
  const PolicyConfig cfg = small_config();
  PolicyParams p = init_policy(cfg, 11);
  const double before = p.weights.w1(0, 0);
  const double b2_before = p.weights.b2(3);

  PolicyTensors grads = PolicyTensors::zeros(cfg);
  grads.w1.setConstant(2.0);
  grads.wf.setConstant(2.0);
  grads.w2.setConstant(2.0);
  grads.w3.setConstant(2.0);
  grads.b1.setConstant(2.0);
  grads.bf.setConstant(2.0);
  grads.b2.setConstant(2.0);
  grads.b3.setConstant(2.0);

  const double lr = 1e-3;
  adam_step(p, grads, lr);
  CHECK(p.step == 1);
  // First step with constant gradient g: both moment estimates debias back
  // to g and g*g, so the move is lr * g / (|g| + eps), essentially lr.
  const double expect = lr * 2.0 / (2.0 + kAdamEps);
  CHECK(before - p.weights.w1(0, 0) == Catch::Approx(expect).epsilon(1e-12));
  CHECK(b2_before - p.weights.b2(3) == Catch::Approx(expect).epsilon(1e-12));

  adam_step(p, grads, lr);
  CHECK(p.step == 2);

  grads.w2(1, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(adam_step(p, grads, lr), std::invalid_argument);
}

TEST_CASE("slot assignment ranks by similarity then proximity") {
  std::vector<SlotCandidate> cands = {
      {{3.0, 0.0}, 0.9},  // same sim as the next, farther away
      {{1.0, 0.0}, 0.9},
      {{0.1, 0.0}, 0.5},
      {{2.0, 2.0}, 0.95},
  };
  const std::vector<SlotFeature> slots = fill_slots(cands, 6);
  REQUIRE(slots.size() == 6);
  CHECK(slots[0].sim == 0.95);
  CHECK(slots[1].rel_x == 1.0);  // tie broken toward the nearer candidate
  CHECK(slots[2].rel_x == 3.0);
  CHECK(slots[3].sim == 0.5);
  CHECK(slots[0].valid);
  CHECK(slots[3].valid);
  CHECK_FALSE(slots[4].valid);  // padding carries the invalid flag
  CHECK_FALSE(slots[5].valid);
  CHECK(slots[4].rel_x == 0.0);

  const std::vector<SlotFeature> truncated = fill_slots(cands, 2);
  REQUIRE(truncated.size() == 2);
  CHECK(truncated[0].sim == 0.95);
  CHECK(truncated[1].sim == 0.9);
}
