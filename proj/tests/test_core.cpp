#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "lmnav/core.hpp"

using namespace lmnav;

TEST_CASE("normalize_angle wraps into (-pi, pi]") {
  CHECK(normalize_angle(0.0) == 0.0);
  CHECK(normalize_angle(kPi) == Catch::Approx(kPi));
  CHECK(normalize_angle(-kPi) == Catch::Approx(kPi));  // -pi maps to the closed end
  CHECK(normalize_angle(3.0 * kPi) == Catch::Approx(kPi));
  CHECK(normalize_angle(2.0 * kPi) == Catch::Approx(0.0).margin(1e-12));
  CHECK(normalize_angle(-0.5) == Catch::Approx(-0.5));
  for (double a = -20.0; a <= 20.0; a += 0.137) {
    const double r = normalize_angle(a);
    CHECK(r > -kPi - 1e-12);
    CHECK(r <= kPi + 1e-12);
    // Same direction: sin/cos agree with the original angle.
    CHECK(std::sin(r) == Catch::Approx(std::sin(a)).margin(1e-9));
    CHECK(std::cos(r) == Catch::Approx(std::cos(a)).margin(1e-9));
  }
}

TEST_CASE("Vec2 arithmetic") {
  const Vec2 a{3.0, 4.0}, b{-1.0, 2.0};
  CHECK((a + b).x == 2.0);
  CHECK((a - b).y == 2.0);
  CHECK((2.0 * a).x == 6.0);
  CHECK(dot(a, b) == 5.0);
  CHECK(norm(a) == 5.0);
  CHECK(squared_norm(a) == 25.0);
  CHECK(distance(a, b) == Catch::Approx(std::sqrt(16.0 + 4.0)));
}

TEST_CASE("twist limits") {
  const TwistLimits lim;
  CHECK(lim.contains({0.0, 0.0}));
  CHECK(lim.contains({0.5, 0.9}));
  CHECK(lim.contains({0.5, -0.9}));
  CHECK_FALSE(lim.contains({0.51, 0.0}));
  CHECK_FALSE(lim.contains({-0.01, 0.0}));
  CHECK_FALSE(lim.contains({0.2, 0.91}));

  CommandSequence seq;
  seq.commands = {{0.2, 0.3}, {0.5, -0.9}};
  CHECK_NOTHROW(validate_commands(seq, lim));
  seq.commands.push_back({0.6, 0.0});
  CHECK_THROWS_AS(validate_commands(seq, lim), std::invalid_argument);
  seq.commands.back() = {std::nan(""), 0.0};
  CHECK_THROWS_AS(validate_commands(seq, lim), std::domain_error);
  seq.commands.pop_back();
  seq.dt = 0.0;
  CHECK_THROWS_AS(validate_commands(seq, lim), std::invalid_argument);
}

TEST_CASE("camera intrinsics defaults") {
  const CameraIntrinsics intr;
  CHECK(intr.width == 96);
  CHECK(intr.height == 72);
  CHECK(intr.fx == 48.0);
  CHECK(intr.cx == 48.0);
  CHECK(intr.cy == 36.0);
  CHECK(intr.half_fov_x() == Catch::Approx(std::atan2(48.0, 48.0)));
}

TEST_CASE("rng reproducibility and stream independence") {
  DeterministicRng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());

  // Forked streams diverge from the parent and from each other.
  const DeterministicRng parent(7);
  DeterministicRng f0 = parent.fork(0);
  DeterministicRng f1 = parent.fork(1);
  DeterministicRng f0_again = parent.fork(0);
  CHECK(f0.next() == f0_again.next());
  DeterministicRng f0b = parent.fork(0);
  f0b.next();
  CHECK(f0b.next() != f1.next());
}

TEST_CASE("rng uniform ranges") {
  DeterministicRng rng(3);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  for (int i = 0; i < 1000; ++i) {
    const double u = rng.uniform(-2.0, 5.0);
    CHECK(u >= -2.0);
    CHECK(u < 5.0);
  }
}

TEST_CASE("uniform_index covers the range uniformly enough") {
  DeterministicRng rng(11);
  std::array<int, 7> counts{};
  const int draws = 70000;
  for (int i = 0; i < draws; ++i) counts[rng.uniform_index(7)]++;
  for (int c : counts) {
    // Expected 10000 per bucket; 5 sigma is about 480.
    CHECK(c > 9000);
    CHECK(c < 11000);
  }
  CHECK_THROWS_AS(rng.uniform_index(0), std::invalid_argument);
}

TEST_CASE("bernoulli frequencies") {
  DeterministicRng rng(19);
  int hits = 0;
  for (int i = 0; i < 10000; ++i) hits += rng.bernoulli(0.3) ? 1 : 0;
  CHECK(hits > 2700);
  CHECK(hits < 3300);
}

TEST_CASE("fnv1a reference values") {
  // Published FNV-1a 64-bit test vectors.
  CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a("foobar") == 0x85944171f73967e8ULL);
  CHECK(fnv1a("chair") != fnv1a("chairs"));
}
