#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "lmnav/core.hpp"
#include "lmnav/geometry.hpp"
#include "lmnav/objective.hpp"

using namespace lmnav;

namespace {

CommandSequence make_sequence(int n, unsigned seed) {
  DeterministicRng rng(seed);
  CommandSequence seq;
  seq.dt = 0.333;
  seq.commands.reserve(n);
  for (int k = 0; k < n; ++k)
    seq.commands.push_back({rng.uniform(0.05, 0.5), rng.uniform(-0.9, 0.9)});
  return seq;
}

std::vector<Pose2> make_teacher(const Pose2& p0, int m, unsigned seed) {
  CommandSequence seq = make_sequence(m, seed);
  return rollout(p0, seq);
}

}  // namespace

TEST_CASE("objective terms match hand-worked values") {
  SECTION("endpoint term") {
    std::vector<Pose2> poses = {{0, 0, 0}, {1.0, 2.0, 0.4}};
    CHECK(j_pose(poses, {4.0, -2.0}) == Catch::Approx(9.0 + 16.0));
    CHECK_THROWS_AS(j_pose({}, {0, 0}), std::invalid_argument);
  }
  SECTION("teacher deviation term") {
    std::vector<Pose2> poses = {{1, 0, 0}, {2, 0, 0}, {3, 0, 0}};
    std::vector<Pose2> teacher = {{1, 1, 0}, {2, -2, 0}};
    // First two poses only; headings never enter.
    CHECK(j_col(poses, teacher) == Catch::Approx(1.0 + 4.0));
    CHECK(j_col(poses, {}) == 0.0);
    std::vector<Pose2> too_long(4);
    CHECK_THROWS_AS(j_col(poses, too_long), std::invalid_argument);
  }
  SECTION("smoothness term") {
    CommandSequence seq;
    seq.commands = {{0.1, 0.0}, {0.3, 0.4}, {0.3, -0.2}};
    const double expect = (0.2 * 0.2 + 0.4 * 0.4) + (0.0 + 0.6 * 0.6);
    CHECK(j_smooth(seq) == Catch::Approx(expect));
    seq.commands.resize(1);
    CHECK(j_smooth(seq) == 0.0);
  }
}

TEST_CASE("close-goal mask uses a strict inequality") {
  ObjectiveConfig cfg;
  cfg.mask_radius = 1.0;
  CHECK(close_goal_epsilon({0, 0, 0}, {1.0, 0.0}, cfg) == 1);  // exactly on the rim
  CHECK(close_goal_epsilon({0, 0, 0}, {1.0 - 1e-12, 0.0}, cfg) == 0);
  CHECK(close_goal_epsilon({0, 0, 0}, {5.0, 0.0}, cfg) == 1);
  CHECK(close_goal_epsilon({0.3, 0.4, 2.0}, {0.3, 0.4}, cfg) == 0);
}

TEST_CASE("breakdown recomposes bitwise and the mask gates the teacher term") {
  ObjectiveConfig cfg;
  cfg.horizon = 12;
  cfg.teacher_horizon = 5;
  cfg.lambda_col = 2.5;
  const CommandSequence seq = make_sequence(cfg.horizon, 3);
  const Pose2 far_start{0, 0, 0};
  const Vec2 goal{3.0, 1.0};
  const std::vector<Pose2> teacher = make_teacher(far_start, cfg.teacher_horizon, 7);

  const ObjectiveBreakdown far = total_objective(seq, far_start, goal, teacher, cfg);
  CHECK(far.epsilon == 1);
  CHECK(far.total == far.j_pose + cfg.lambda_col * far.epsilon * far.j_col + far.j_smooth);
  CHECK(far.total - (far.j_pose + far.j_smooth) == Catch::Approx(cfg.lambda_col * far.j_col));

  // Same command sequence from a start inside the mask radius: the teacher
  // term is reported but carries zero weight in the total.
  const Pose2 near_start{2.5, 1.0, 0.0};
  const std::vector<Pose2> near_teacher = make_teacher(near_start, cfg.teacher_horizon, 7);
  const ObjectiveBreakdown near = total_objective(seq, near_start, goal, near_teacher, cfg);
  CHECK(near.epsilon == 0);
  CHECK(near.j_col > 0.0);
  CHECK(near.total == near.j_pose + near.j_smooth);

  // Zero weight drops the same term even when the mask is open.
  ObjectiveConfig unweighted = cfg;
  unweighted.lambda_col = 0.0;
  const ObjectiveBreakdown off = total_objective(seq, far_start, goal, teacher, unweighted);
  CHECK(off.epsilon == 1);
  CHECK(off.total == off.j_pose + off.j_smooth);
  CHECK(off.j_pose == far.j_pose);
  CHECK(off.j_col == far.j_col);
  CHECK(off.j_smooth == far.j_smooth);
}

TEST_CASE("objective validates argument shapes") {
  ObjectiveConfig cfg;
  cfg.horizon = 6;
  cfg.teacher_horizon = 3;
  const Pose2 p0{0, 0, 0};
  const Vec2 goal{2, 2};
  const std::vector<Pose2> teacher = make_teacher(p0, 3, 1);
  CHECK_THROWS_AS(total_objective(make_sequence(5, 2), p0, goal, teacher, cfg),
                  std::invalid_argument);
  CHECK_THROWS_AS(total_objective(make_sequence(6, 2), p0, goal, make_teacher(p0, 2, 1), cfg),
                  std::invalid_argument);
  ObjectiveConfig bad = cfg;
  bad.teacher_horizon = 7;  // exceeds the horizon
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.lambda_col = -0.1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("analytic gradient matches finite differences") {
  ObjectiveConfig cfg;
  cfg.horizon = 10;
  cfg.teacher_horizon = 4;

  struct Scenario {
    const char* name;
    Pose2 start;
    double lambda;
  };
  const Scenario scenarios[] = {
      {"masked-open far start", {0, 0, 0.3}, 1.0},
      {"masked-open heavy weight", {0, 0, 0.3}, 2.5},
      {"masked-closed near start", {2.6, 0.9, 0.3}, 1.0},
      {"weight disabled", {0, 0, 0.3}, 0.0},
  };
  const Vec2 goal{2.8, 1.2};
  const double h = 1e-6;

  for (const Scenario& sc : scenarios) {
    INFO(sc.name);
    cfg.lambda_col = sc.lambda;
    const CommandSequence seq = make_sequence(cfg.horizon, 11);
    const std::vector<Pose2> teacher = make_teacher(sc.start, cfg.teacher_horizon, 13);

    ObjectiveBreakdown reported;
    const std::vector<TwistGrad> grads =
        objective_gradient(seq, sc.start, goal, teacher, cfg, &reported);
    REQUIRE(grads.size() == seq.commands.size());

    const ObjectiveBreakdown direct = total_objective(seq, sc.start, goal, teacher, cfg);
    CHECK(reported.total == direct.total);

    for (std::size_t k = 0; k < seq.commands.size(); ++k) {
      CommandSequence plus = seq, minus = seq;
      plus.commands[k].v += h;
      minus.commands[k].v -= h;
      const double fd_v = (total_objective(plus, sc.start, goal, teacher, cfg).total -
                           total_objective(minus, sc.start, goal, teacher, cfg).total) /
                          (2.0 * h);
      plus = seq, minus = seq;
      plus.commands[k].omega += h;
      minus.commands[k].omega -= h;
      const double fd_w = (total_objective(plus, sc.start, goal, teacher, cfg).total -
                           total_objective(minus, sc.start, goal, teacher, cfg).total) /
                          (2.0 * h);
      INFO("command " << k);
      CHECK(grads[k].v == Catch::Approx(fd_v).epsilon(1e-4).margin(1e-7));
      CHECK(grads[k].omega == Catch::Approx(fd_w).epsilon(1e-4).margin(1e-7));
    }
  }
}
