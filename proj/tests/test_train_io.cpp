#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "lmnav/annotate.hpp"
#include "lmnav/io.hpp"
#include "lmnav/runconfig.hpp"
#include "lmnav/train.hpp"

using namespace lmnav;

namespace {

PolicyConfig tiny_policy_config() {
  PolicyConfig cfg;
  cfg.slots = 4;
  cfg.history = 1;
  cfg.embedding_dim = 16;
  cfg.hidden = 16;
  cfg.horizon = 8;
  return cfg;
}

TrainConfig tiny_train_config() {
  TrainConfig cfg;
  cfg.policy = tiny_policy_config();
  cfg.objective.horizon = cfg.policy.horizon;
  cfg.objective.teacher_horizon = 4;
  cfg.lr = 3e-3;
  cfg.batch_size = 12;
  cfg.epochs = 20;
  cfg.seed = 5;
  return cfg;
}

// Small real dataset from the annotation pipeline: two objects watched from
// a fixed viewpoint for six seconds.
Dataset annotated_fixture() {
  World w;
  ObjectSpec ball;
  ball.id = 1;
  ball.noun = "ball";
  ball.attributes = {"red"};
  ball.position = {1.8, 0.2, 0.35};
  w.objects.push_back(ball);
  ObjectSpec mug;
  mug.id = 2;
  mug.noun = "mug";
  mug.attributes = {"blue"};
  mug.position = {1.4, 1.0, 0.35};
  w.objects.push_back(mug);

  MockBackend backend(w);
  AnnotationConfig cfg;
  cfg.teacher_horizon = 4;
  cfg.seed = 3;
  Traversal tour;
  tour.waypoints = {{0.0, {0, 0, 0.2}}, {6.0, {0, 0, 0.2}}};
  return annotate_dataset(w, tour, backend, cfg);
}

// Hand-built dataset with labels at controlled offsets from where the
// zero-weight policy's straight rollout ends.
Dataset offset_dataset(const std::vector<Vec2>& offsets, const PolicyConfig& pcfg) {
  // Repeats the straight-branch arithmetic step by step, association and all.
  double x_end = 0.0;
  for (int k = 0; k < pcfg.horizon; ++k) x_end += 0.25 * pcfg.dt;

  Dataset ds;
  for (std::size_t i = 0; i < offsets.size(); ++i) {
    AnnotatedFrame f;
    f.frame_id = static_cast<int>(i);
    AnnotatedObject o;
    o.object_id = 1;
    o.noun = "ball";
    o.rel = {x_end + offsets[i].x, offsets[i].y};
    o.prompts = {{"go to the ball", PromptCategory::simple}};
    f.objects.push_back(o);
    ds.frames.push_back(f);
  }
  return ds;
}

PolicyParams zero_policy(const PolicyConfig& cfg) {
  PolicyParams p;
  p.config = cfg;
  p.weights = PolicyTensors::zeros(cfg);
  p.adam_m = PolicyTensors::zeros(cfg);
  p.adam_v = PolicyTensors::zeros(cfg);
  return p;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("training configuration validation") {
  TrainConfig cfg = tiny_train_config();
  REQUIRE_NOTHROW(cfg.validate());
  cfg.objective.horizon = cfg.policy.horizon + 1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = tiny_train_config();
  cfg.data_fraction = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = tiny_train_config();
  cfg.data_fraction = 1.5;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = tiny_train_config();
  cfg.lr = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("frame subsampling is deterministic and order-preserving") {
  Dataset ds;
  for (int i = 0; i < 10; ++i) {
    AnnotatedFrame f;
    f.frame_id = i;
    ds.frames.push_back(f);
  }
  const Dataset third = subsample_dataset(ds, 0.3, 7);
  REQUIRE(third.frames.size() == 3);  // ceil(0.3 * 10)
  for (std::size_t i = 1; i < third.frames.size(); ++i)
    CHECK(third.frames[i].frame_id > third.frames[i - 1].frame_id);

  const Dataset again = subsample_dataset(ds, 0.3, 7);
  for (std::size_t i = 0; i < third.frames.size(); ++i)
    CHECK(third.frames[i].frame_id == again.frames[i].frame_id);

  CHECK(subsample_dataset(ds, 1.0, 7).frames.size() == 10);
  CHECK(subsample_dataset(ds, 0.01, 7).frames.size() == 1);  // never empty
}

TEST_CASE("training lowers the objective and is reproducible") {
  const Dataset ds = annotated_fixture();
  REQUIRE_FALSE(ds.frames.empty());
  const TrainConfig cfg = tiny_train_config();

  const TrainResult result = train(ds, cfg);
  REQUIRE(result.curve.size() == static_cast<std::size_t>(cfg.epochs));
  CHECK(result.params.weights.all_finite());
  for (const EpochStats& e : result.curve) {
    CHECK(std::isfinite(e.total));
    CHECK(e.epsilon_active >= 0.0);
    CHECK(e.epsilon_active <= 1.0);
    CHECK(e.total >= 0.0);
  }
  // Every sample here starts more than a meter from its goal, so the
  // distillation mask stays open throughout.
  CHECK(result.curve.front().epsilon_active == 1.0);
  CHECK(result.curve.back().total < 0.7 * result.curve.front().total);

  const TrainResult replay = train(ds, cfg);
  CHECK(result.params.weights.w1 == replay.params.weights.w1);
  CHECK(result.params.weights.b3 == replay.params.weights.b3);
  CHECK(result.params.step == replay.params.step);

  TrainConfig mismatched = cfg;
  mismatched.objective.teacher_horizon = 5;
  mismatched.objective.horizon = cfg.policy.horizon;
  CHECK_THROWS_AS(train(ds, mismatched), std::invalid_argument);

  Dataset empty;
  empty.header.teacher_horizon = cfg.objective.teacher_horizon;
  empty.frames.push_back(AnnotatedFrame{});
  CHECK_THROWS_AS(train(empty, cfg), std::invalid_argument);
}

TEST_CASE("warm starting keeps weights but restarts the optimizer clock") {
  const Dataset ds = annotated_fixture();
  TrainConfig pre = tiny_train_config();
  pre.epochs = 4;
  pre.objective.lambda_col = 0.0;
  const TrainResult stage1 = train(ds, pre);
  CHECK(stage1.params.step == 4);  // one batch per epoch at this size

  TrainConfig fine = tiny_train_config();
  fine.epochs = 3;
  fine.objective.lambda_col = 1.0;
  const TrainResult stage2 = train(ds, fine, &stage1.params);
  CHECK(stage2.params.step == 3);  // fresh clock, not 4 + 3

  // The finetune run really started from the pretrained weights: its first
  // epoch should sit well below a cold start's first epoch.
  const TrainResult cold = train(ds, fine);
  CHECK(stage2.curve.front().total < cold.curve.front().total);

  PolicyParams wrong_shape = stage1.params;
  wrong_shape.config.hidden = 8;
  CHECK_THROWS_AS(train(ds, fine, &wrong_shape), std::invalid_argument);
}

TEST_CASE("open-loop evaluation computes exact medians") {
  const PolicyConfig pcfg = tiny_policy_config();
  const PolicyParams p = zero_policy(pcfg);

  const Dataset odd = offset_dataset({{0.5, 0.0}, {-0.2, 0.0}, {0.0, 0.1}}, pcfg);
  const OpenLoopStats st = evaluate_open_loop(odd, p);
  CHECK(st.samples == 3);
  CHECK(st.median_error == Catch::Approx(0.2).epsilon(1e-12));
  CHECK(st.mean_sq_error == Catch::Approx((0.25 + 0.04 + 0.01) / 3.0).epsilon(1e-12));

  const Dataset even =
      offset_dataset({{0.1, 0.0}, {0.7, 0.0}, {-0.2, 0.0}, {0.0, 0.5}}, pcfg);
  const OpenLoopStats st2 = evaluate_open_loop(even, p);
  CHECK(st2.samples == 4);
  CHECK(st2.median_error == Catch::Approx(0.35).epsilon(1e-12));  // mean of the middle two

  CHECK(evaluate_open_loop(Dataset{}, p).samples == 0);
}

TEST_CASE("ablation sweep trains one model per fraction") {
  const Dataset ds = annotated_fixture();
  TrainConfig base = tiny_train_config();
  base.epochs = 3;
  const std::vector<AblationPoint> points = run_ablation(ds, ds, base, {0.25, 1.0});
  REQUIRE(points.size() == 2);
  CHECK(points[0].fraction == 0.25);
  CHECK(points[0].frames_used < points[1].frames_used);
  CHECK(points[1].frames_used == static_cast<int>(ds.frames.size()));
  for (const AblationPoint& pt : points) {
    CHECK(std::isfinite(pt.median_error));
    CHECK(pt.median_error >= 0.0);
    CHECK(pt.mean_sq_error >= 0.0);
  }
}

TEST_CASE("checkpoints restore the optimizer state bit for bit") {
  const Dataset ds = annotated_fixture();
  TrainConfig cfg = tiny_train_config();
  cfg.epochs = 3;
  const PolicyParams trained = train(ds, cfg).params;
  REQUIRE(trained.step > 0);

  const std::string path = "test_checkpoint.json";
  write_checkpoint(path, trained);
  const PolicyParams back = read_checkpoint(path);

  CHECK(back.config.slots == trained.config.slots);
  CHECK(back.config.horizon == trained.config.horizon);
  CHECK(back.config.dt == trained.config.dt);
  CHECK(back.config.limits.v_max == trained.config.limits.v_max);
  CHECK(back.step == trained.step);
  CHECK(back.weights.w1 == trained.weights.w1);
  CHECK(back.weights.wf == trained.weights.wf);
  CHECK(back.weights.w2 == trained.weights.w2);
  CHECK(back.weights.w3 == trained.weights.w3);
  CHECK(back.weights.b1 == trained.weights.b1);
  CHECK(back.weights.bf == trained.weights.bf);
  CHECK(back.weights.b2 == trained.weights.b2);
  CHECK(back.weights.b3 == trained.weights.b3);
  CHECK(back.adam_m.w1 == trained.adam_m.w1);
  CHECK(back.adam_v.w1 == trained.adam_v.w1);
  CHECK(back.adam_m.b3 == trained.adam_m.b3);
  CHECK(back.adam_v.b3 == trained.adam_v.b3);
  std::remove(path.c_str());

  json j = checkpoint_to_json(trained);
  j["schema"] = "mystery";
  CHECK_THROWS_AS(checkpoint_from_json(j), std::runtime_error);
  j = checkpoint_to_json(trained);
  j["version"] = 42;
  CHECK_THROWS_AS(checkpoint_from_json(j), std::runtime_error);
  j = checkpoint_to_json(trained);
  j["weights"]["w1"].erase(0);  // drop a row
  CHECK_THROWS_AS(checkpoint_from_json(j), std::runtime_error);
}

TEST_CASE("depth maps round-trip through the binary format") {
  DepthMap d = DepthMap::invalid_filled(5, 4);
  d.at(0, 0) = 1.25;
  d.at(4, 3) = 0.3333333333333333;
  d.at(2, 1) = 7.5e-3;

  const std::string path = "test_depth.bin";
  write_depth_binary(path, d);
  const DepthMap back = read_depth_binary(path);
  CHECK(back.width == 5);
  CHECK(back.height == 4);
  CHECK(back.at(0, 0) == 1.25);
  CHECK(back.at(4, 3) == 0.3333333333333333);
  CHECK(back.at(2, 1) == 7.5e-3);
  CHECK(std::isnan(back.at(1, 1)));

  // Truncation and a wrong magic both fail loudly.
  std::ofstream trunc(path, std::ios::binary | std::ios::trunc);
  trunc.write("LMDEPTH1\x05", 9);
  trunc.close();
  CHECK_THROWS_AS(read_depth_binary(path), std::runtime_error);
  std::ofstream bogus(path, std::ios::binary | std::ios::trunc);
  bogus.write("NOTDEPTH________________", 24);
  bogus.close();
  CHECK_THROWS_AS(read_depth_binary(path), std::runtime_error);
  std::remove(path.c_str());

  const std::string csv = "test_depth.csv";
  write_depth_csv(csv, d);
  std::istringstream rows(slurp(csv));
  std::string line;
  int count = 0;
  while (std::getline(rows, line)) {
    ++count;
    CHECK(std::count(line.begin(), line.end(), ',') == 4);  // five columns
  }
  CHECK(count == 4);
  std::remove(csv.c_str());
}

TEST_CASE("trajectory files preserve doubles exactly") {
  std::vector<TimedState> trace(3);
  trace[0] = {0.0, {0, 0, 0}, {0, 0}};
  trace[1] = {0.333, {0.123456789012345, -2.0 / 3.0, 0.1}, {0.5, -0.9}};
  trace[2] = {0.666, {1.0e-17, 5.0, -kPi + 1e-9}, {0.2, 0.3}};

  const std::string path = "test_traj.csv";
  write_trajectory_csv(path, trace);
  const std::vector<TimedState> back = read_trajectory_csv(path);
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back[i].t == trace[i].t);
    CHECK(back[i].pose.x == trace[i].pose.x);
    CHECK(back[i].pose.y == trace[i].pose.y);
    CHECK(back[i].pose.theta == trace[i].pose.theta);
    CHECK(back[i].command.v == trace[i].command.v);
    CHECK(back[i].command.omega == trace[i].command.omega);
  }

  write_text_file(path, "wrong,header\n1,2\n");
  CHECK_THROWS_AS(read_trajectory_csv(path), std::runtime_error);
  write_text_file(path, "t,x,y,theta,v,omega\n1,2,garbage\n");
  CHECK_THROWS_AS(read_trajectory_csv(path), std::runtime_error);
  std::remove(path.c_str());
}

TEST_CASE("planner traces serialize every candidate cost") {
  PlannerConfig cfg;
  const ControlRun run = receding_horizon_control({0, 0, 0}, {1.2, 0.3}, {}, cfg, 60);
  REQUIRE(run.outcome == RunOutcome::success);

  const std::string path = "test_trace.jsonl";
  write_planner_trace_jsonl(path, run);
  std::istringstream in(slurp(path));
  std::remove(path.c_str());

  std::string line;
  REQUIRE(std::getline(in, line));
  const json header = json::parse(line);
  CHECK(header["schema"] == "lmnav.plantrace");
  CHECK(header["version"] == 1);
  CHECK(header["outcome"] == "success");

  int rows = 0;
  while (std::getline(in, line)) {
    const json j = json::parse(line);
    REQUIRE(j["costs"].size() == kPrimitiveCount);
    const int chosen = j["chosen"].get<int>();
    CHECK(chosen >= 0);
    CHECK(chosen < kPrimitiveCount);
    CHECK(j["command"].size() == 2);
    CHECK(j["pose"].size() == 3);
    ++rows;
  }
  CHECK(rows == static_cast<int>(run.steps.size()));
}

TEST_CASE("ablation and loss tables have stable headers") {
  std::vector<AblationPoint> pts(2);
  pts[0] = {0.1, 5, 0.4, 0.2};
  pts[1] = {1.0, 50, 0.1, 0.02};
  const std::string path = "test_ablation.csv";
  write_ablation_csv(path, pts);
  std::istringstream in(slurp(path));
  std::string line;
  std::getline(in, line);
  CHECK(line == "fraction,frames,median_error,mean_sq_error");
  int rows = 0;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 2);
  std::remove(path.c_str());

  std::vector<EpochStats> curve(3);
  for (int i = 0; i < 3; ++i) curve[i].epoch = i;
  write_loss_csv(path, curve);
  std::istringstream in2(slurp(path));
  std::getline(in2, line);
  CHECK(line == "epoch,total,pose,col,smooth,epsilon_active");
  rows = 0;
  while (std::getline(in2, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 3);
  std::remove(path.c_str());
}

TEST_CASE("scene and chart rendering emit self-contained svg") {
  World w;
  ObjectSpec o;
  o.id = 1;
  o.noun = "ball";
  o.position = {1.0, 2.0, 0.3};
  w.objects.push_back(o);
  w.obstacles.push_back({{0.5, 0.5}});

  SvgPath path;
  path.points = {{0, 0}, {1, 1}, {1.5, 2.0}};
  path.color = "#204080";
  SvgMarker marker;
  marker.at = {1.0, 2.0};
  marker.label = "goal";

  const std::string scene = svg_scene(w, {path}, {marker});
  CHECK(scene.find("<svg") != std::string::npos);
  CHECK(scene.rfind("</svg>") != std::string::npos);
  CHECK(scene.find("ball") != std::string::npos);
  CHECK(scene.find("polyline") != std::string::npos);
  CHECK(scene.find("goal") != std::string::npos);

  ChartSeries series;
  series.name = "loss";
  series.color = "#803020";
  series.points = {{0, 1.0}, {1, 0.5}, {2, 0.25}};
  const std::string chart = svg_line_chart("training", "epoch", "objective", {series});
  CHECK(chart.find("<svg") != std::string::npos);
  CHECK(chart.find("training") != std::string::npos);
  CHECK(chart.find("epoch") != std::string::npos);
  CHECK(chart.find("loss") != std::string::npos);
  CHECK(chart.find("polyline") != std::string::npos);
}

TEST_CASE("run configuration parses strictly") {
  KeyValueConfig cfg = KeyValueConfig::from_tokens({"a=1", "b=2.5", "a=3", "name=x y"});
  CHECK(cfg.get_int("a", 0) == 3);  // later duplicate wins
  CHECK(cfg.get_double("b", 0.0) == 2.5);
  CHECK(cfg.get_string("name", "") == "x y");
  CHECK(cfg.get_int("absent", 42) == 42);
  CHECK(cfg.has("a"));
  CHECK_FALSE(cfg.has("absent2"));
  REQUIRE_NOTHROW(cfg.require_all_used());

  KeyValueConfig bad = KeyValueConfig::from_tokens({"n=1x"});
  CHECK_THROWS_AS(bad.get_int("n", 0), ConfigError);
  KeyValueConfig bad2 = KeyValueConfig::from_tokens({"f=0.5junk"});
  CHECK_THROWS_AS(bad2.get_double("f", 0.0), ConfigError);
  KeyValueConfig bad3 = KeyValueConfig::from_tokens({"flag=maybe"});
  CHECK_THROWS_AS(bad3.get_bool("flag", false), ConfigError);
  CHECK_THROWS_AS(KeyValueConfig::from_tokens({"novalue"}), ConfigError);
  CHECK_THROWS_AS(KeyValueConfig::from_tokens({"=orphan"}), ConfigError);

  KeyValueConfig flags = KeyValueConfig::from_tokens({"y=true", "n=0"});
  CHECK(flags.get_bool("y", false));
  CHECK_FALSE(flags.get_bool("n", true));
  CHECK(flags.get_bool("missing", true));

  KeyValueConfig strict = KeyValueConfig::from_tokens({"used=1", "stray=2"});
  strict.get_int("used", 0);
  CHECK(strict.unused() == std::vector<std::string>{"stray"});
  CHECK_THROWS_AS(strict.require_all_used(), ConfigError);

  KeyValueConfig missing;
  CHECK_THROWS_AS(missing.require_string("out"), ConfigError);

  const std::string path = "test_config.cfg";
  write_text_file(path, "# comment line\nlr=0.5\n  lr=1e-3  \n\nseed=7 # inline\n");
  KeyValueConfig file = KeyValueConfig::from_file(path);
  std::remove(path.c_str());
  CHECK(file.get_double("lr", 0.0) == 1e-3);
  CHECK(file.get_seed("seed", 0) == 7);

  KeyValueConfig overrides = KeyValueConfig::from_tokens({"lr=5"});
  file.merge(overrides);
  CHECK(file.get_double("lr", 0.0) == 5.0);
  CHECK(file.entries().size() == 2);
  CHECK_THROWS_AS(KeyValueConfig::from_file("no_such_file.cfg"), ConfigError);
}
