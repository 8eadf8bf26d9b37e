// Command-line front end: world and episode generation, dataset annotation,
// policy training, closed-loop evaluation, planner runs, dataset-size
// ablations, and SVG plots of the resulting artifacts.
//
// Every subcommand takes key=value settings (plus config=FILE to load them
// from a file, command line winning on conflicts). Unknown keys are errors.
// Exit codes: 0 success, 1 bad usage, 2 failure while running.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "lmnav/io.hpp"
#include "lmnav/runconfig.hpp"
#include "lmnav/scenario.hpp"

namespace {

using namespace lmnav;

// Sidecar with the fully-resolved settings next to each primary artifact, so
// every file on disk names the run that produced it.
void write_run_sidecar(const std::string& primary_out, const std::string& command,
                       const KeyValueConfig& cfg) {
  json j;
  j["command"] = command;
  j["settings"] = json::object();
  for (const auto& [k, v] : cfg.entries()) j["settings"][k] = v;
  write_text_file(primary_out + ".run.json", j.dump(2) + "\n");
}

std::vector<double> parse_fraction_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t pos = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &pos);
    } catch (const std::exception&) {
      throw ConfigError("fractions: not a number: " + item);
    }
    if (pos != item.size() || !(v > 0.0) || v > 1.0)
      throw ConfigError("fractions must be numbers in (0, 1]: " + item);
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError("fractions list is empty");
  return out;
}

ControllerKind parse_controller(const std::string& s) {
  if (s == "policy") return ControllerKind::policy;
  if (s == "planner") return ControllerKind::planner;
  throw ConfigError("controller must be policy or planner, got: " + s);
}

EpisodeCategory parse_category(const std::string& s) {
  try {
    return episode_category_from_string(s);
  } catch (const std::exception&) {
    throw ConfigError("category must be simple|noisy|multi_object|dynamic, got: " + s);
  }
}

void require_valid_world(const World& w) {
  const std::vector<std::string> problems = validate_world(w);
  if (problems.empty()) return;
  std::string msg = "invalid world:";
  for (const std::string& p : problems) msg += "\n  " + p;
  throw std::runtime_error(msg);
}

int cmd_gen(KeyValueConfig& cfg) {
  const std::string kind = cfg.require_string("kind");
  if (kind == "world") {
    WorldGenConfig wc;
    wc.seed = cfg.get_seed("seed", 0);
    wc.objects = static_cast<int>(cfg.get_int("objects", 12));
    wc.obstacle_clusters = static_cast<int>(cfg.get_int("clusters", 0));
    wc.points_per_cluster = static_cast<int>(cfg.get_int("points_per_cluster", 12));
    wc.arena_half = cfg.get_double("arena_half", 6.0);
    wc.min_separation = cfg.get_double("min_separation", 1.2);
    const std::string out = cfg.require_string("out");
    const std::string svg = cfg.get_string("svg", "");
    cfg.require_all_used();

    const World w = make_world(wc);
    require_valid_world(w);
    write_world_file(out, w);
    if (!svg.empty()) write_text_file(svg, svg_scene(w, {}));
    write_run_sidecar(out, "gen", cfg);
    std::cout << "world: " << w.objects.size() << " objects, "
              << w.obstacles.size() << " obstacle clusters -> " << out << "\n";
    return 0;
  }
  if (kind == "suite") {
    SuiteGenConfig sc;
    sc.seed = cfg.get_seed("seed", 0);
    sc.episodes = static_cast<int>(cfg.get_int("episodes", 100));
    sc.category = parse_category(cfg.get_string("category", "simple"));
    sc.controller = parse_controller(cfg.get_string("controller", "policy"));
    sc.with_blockers = cfg.get_bool("blockers", false);
    sc.max_steps = static_cast<int>(cfg.get_int("max_steps", 120));
    sc.success_radius = cfg.get_double("success_radius", 0.2);
    sc.start_distance_lo = cfg.get_double("dist_lo", 1.5);
    sc.start_distance_hi = cfg.get_double("dist_hi", 3.0);
    const std::string out = cfg.require_string("out");
    cfg.require_all_used();

    const std::vector<Episode> suite = make_episode_suite(sc);
    for (const Episode& ep : suite) require_valid_world(ep.world);
    write_suite_jsonl(out, suite);
    write_run_sidecar(out, "gen", cfg);
    std::cout << "suite: " << suite.size() << " episodes ("
              << to_string(sc.category) << (sc.with_blockers ? ", blockers" : "")
              << ") -> " << out << "\n";
    return 0;
  }
  if (kind == "longnav") {
    const std::uint64_t seed = cfg.get_seed("seed", 0);
    const int nodes = static_cast<int>(cfg.get_int("nodes", 12));
    const std::string out = cfg.require_string("out");
    const std::string svg = cfg.get_string("svg", "");
    cfg.require_all_used();

    const LongDistanceSetup setup = make_long_distance_setup(seed, nodes);
    require_valid_world(setup.world);
    json j;
    j["schema"] = "lmnav.longnav";
    j["version"] = 1;
    j["world"] = to_json(setup.world);
    j["nodes"] = json::array();
    for (const Pose2& p : setup.node_poses) j["nodes"].push_back({p.x, p.y, p.theta});
    j["target"] = setup.target_id;
    j["instruction"] = setup.instruction;
    j["start"] = {setup.start.x, setup.start.y, setup.start.theta};
    write_text_file(out, j.dump() + "\n");
    if (!svg.empty()) {
      std::vector<SvgMarker> markers;
      for (std::size_t i = 0; i < setup.node_poses.size(); ++i)
        markers.push_back({setup.node_poses[i].position(), "#1f77b4",
                           "n" + std::to_string(i)});
      write_text_file(svg, svg_scene(setup.world, {}, markers));
    }
    write_run_sidecar(out, "gen", cfg);
    std::cout << "longnav: " << setup.node_poses.size() << " nodes, target "
              << setup.target_id << " -> " << out << "\n";
    return 0;
  }
  throw ConfigError("kind must be world, suite, or longnav, got: " + kind);
}

int cmd_annotate(KeyValueConfig& cfg) {
  const std::string world_path = cfg.require_string("world");
  const std::string out = cfg.require_string("out");
  AnnotationConfig ac;
  ac.seed = cfg.get_seed("seed", 0);
  ac.fps = cfg.get_double("fps", 2.0);
  ac.visibility_threshold = cfg.get_double("visibility", 0.5);
  ac.max_label_range = cfg.get_double("label_range", 8.0);
  ac.teacher_horizon = static_cast<int>(cfg.get_int("teacher_horizon", 8));
  TourConfig tc;
  tc.seed = ac.seed;
  tc.speed = cfg.get_double("speed", 0.35);
  tc.view_distance = cfg.get_double("view_distance", 1.6);
  tc.rounds = static_cast<int>(cfg.get_int("rounds", 2));
  const std::string debug_dir = cfg.get_string("debug_dir", "");
  cfg.require_all_used();

  const World world = read_world_file(world_path);
  require_valid_world(world);
  const Traversal tour = make_tour_traversal(world, tc);
  MockBackend backend(world);
  const Dataset ds = annotate_dataset(world, tour, backend, ac);

  const std::vector<std::string> problems = validate_dataset(ds);
  if (!problems.empty()) {
    std::string msg = "annotation produced invalid dataset:";
    for (const std::string& p : problems) msg += "\n  " + p;
    throw std::runtime_error(msg);
  }
  write_dataset_jsonl(out, ds);
  write_run_sidecar(out, "annotate", cfg);

  std::size_t objects = 0, prompts = 0;
  for (const AnnotatedFrame& f : ds.frames) {
    objects += f.objects.size();
    for (const AnnotatedObject& o : f.objects) prompts += o.prompts.size();
  }
  std::cout << "dataset: " << ds.frames.size() << " frames, " << objects
            << " annotated objects, " << prompts << " prompts -> " << out << "\n";

  if (!debug_dir.empty() && !ds.frames.empty()) {
    std::filesystem::create_directories(debug_dir);
    const Pose2 robot = ds.frames.front().robot;
    const RenderResult render = render_frame(world, robot, ac.rig, ds.frames.front().t);
    write_depth_binary(debug_dir + "/frame0_depth.bin", render.depth);
    write_depth_csv(debug_dir + "/frame0_depth.csv", render.depth);
    SvgPath path;
    path.color = "#1f77b4";
    for (const AnnotatedFrame& f : ds.frames) path.points.push_back(f.robot.position());
    write_text_file(debug_dir + "/tour.svg", svg_scene(world, {path}));
  }
  return 0;
}

int cmd_train(KeyValueConfig& cfg) {
  const std::string data = cfg.require_string("data");
  const std::string out = cfg.require_string("out");
  const std::string loss_csv = cfg.get_string("loss_csv", "");
  const std::string init = cfg.get_string("init", "");

  TrainConfig tc;
  tc.lr = cfg.get_double("lr", 1e-4);
  tc.batch_size = static_cast<int>(cfg.get_int("batch", 256));
  tc.epochs = static_cast<int>(cfg.get_int("epochs", 30));
  tc.seed = cfg.get_seed("seed", 1);
  tc.data_fraction = cfg.get_double("fraction", 1.0);
  tc.policy.slots = static_cast<int>(cfg.get_int("slots", 8));
  tc.policy.history = static_cast<int>(cfg.get_int("history", 1));
  tc.policy.embedding_dim = static_cast<int>(cfg.get_int("embedding_dim", 64));
  tc.policy.hidden = static_cast<int>(cfg.get_int("hidden", 128));
  tc.policy.horizon = static_cast<int>(cfg.get_int("horizon", 24));
  tc.policy.dt = cfg.get_double("dt", 0.333);
  tc.objective.horizon = tc.policy.horizon;
  tc.objective.lambda_col = cfg.get_double("lambda_col", 0.0);
  tc.objective.mask_radius = cfg.get_double("mask_radius", 1.0);
  cfg.require_all_used();

  const Dataset ds = read_dataset_jsonl(data);
  tc.objective.teacher_horizon = ds.header.teacher_horizon;

  TrainResult result;
  if (init.empty()) {
    result = train(ds, tc);
  } else {
    const PolicyParams warm = read_checkpoint(init);
    result = train(ds, tc, &warm);
  }
  write_checkpoint(out, result.params);
  if (!loss_csv.empty()) write_loss_csv(loss_csv, result.curve);
  write_run_sidecar(out, "train", cfg);

  const EpochStats& last = result.curve.back();
  std::cout << "trained " << tc.epochs << " epochs on " << ds.frames.size()
            << " frames; final loss " << last.total << " (pose " << last.pose
            << ", col " << last.col << ", smooth " << last.smooth << ") -> " << out
            << "\n";
  return 0;
}

int cmd_eval(KeyValueConfig& cfg) {
  const std::string suite_path = cfg.require_string("suite");
  const std::string report_path = cfg.require_string("report");
  const std::string checkpoint = cfg.get_string("checkpoint", "");
  const std::string traces_dir = cfg.get_string("traces_dir", "");
  const int n_traces = static_cast<int>(cfg.get_int("traces", 0));
  cfg.require_all_used();

  const std::vector<Episode> suite = read_suite_jsonl(suite_path);
  bool needs_policy = false;
  for (const Episode& ep : suite)
    if (ep.controller == ControllerKind::policy) needs_policy = true;
  if (needs_policy && checkpoint.empty())
    throw ConfigError("suite contains policy episodes; checkpoint= is required");

  PolicyParams params;
  if (!checkpoint.empty()) params = read_checkpoint(checkpoint);
  const SimConfig sim;

  const EvalReport report =
      evaluate(suite, sim, checkpoint.empty() ? nullptr : &params);
  json j = report_to_json(report);
  write_text_file(report_path, j.dump(2) + "\n");
  write_run_sidecar(report_path, "eval", cfg);

  if (!traces_dir.empty() && n_traces > 0) {
    std::filesystem::create_directories(traces_dir);
    for (int i = 0; i < n_traces && i < static_cast<int>(suite.size()); ++i) {
      const EpisodeResult res =
          run_episode(suite[i], sim, checkpoint.empty() ? nullptr : &params);
      const std::string stem = traces_dir + "/episode" + std::to_string(i);
      write_trajectory_csv(stem + ".csv", res.trace);
      SvgPath path;
      for (const TimedState& s : res.trace) path.points.push_back(s.pose.position());
      const ObjectSpec* target = find_object(suite[i].world, suite[i].target_id);
      std::vector<SvgMarker> markers;
      if (target)
        markers.push_back({{target->position.x, target->position.y}, "#d62728", "goal"});
      write_text_file(stem + ".svg", svg_scene(suite[i].world, {path}, markers));
    }
  }

  std::cout << "evaluated " << report.episodes << " episodes: success "
            << report.success_rate() << ", collisions " << report.collision_rate()
            << " -> " << report_path << "\n";
  return 0;
}

int cmd_plan(KeyValueConfig& cfg) {
  const std::string world_path = cfg.require_string("world");
  const int target = static_cast<int>(cfg.get_int("target", 0));
  const Pose2 start = {cfg.get_double("sx", 0.0), cfg.get_double("sy", 0.0),
                       cfg.get_double("sth", 0.0)};
  const int max_steps = static_cast<int>(cfg.get_int("max_steps", 120));
  const double success_radius = cfg.get_double("success_radius", 0.2);
  const std::string out_trace = cfg.get_string("trace", "");
  const std::string out_traj = cfg.get_string("trajectory", "");
  const std::string out_svg = cfg.get_string("svg", "");
  cfg.require_all_used();

  const World world = read_world_file(world_path);
  require_valid_world(world);
  const ObjectSpec* goal_obj = find_object(world, target);
  if (!goal_obj) throw std::runtime_error("no object with id " + std::to_string(target));
  const Vec2 goal = object_position_at(world, *goal_obj, 0.0);
  const std::vector<Vec2> obstacles = obstacle_points(world, 0.0, target);

  const PlannerConfig pc;
  const ControlRun run =
      receding_horizon_control(start, goal, obstacles, pc, max_steps, success_radius);

  if (!out_trace.empty()) {
    write_planner_trace_jsonl(out_trace, run);
    write_run_sidecar(out_trace, "plan", cfg);
  }
  if (!out_traj.empty()) {
    std::vector<TimedState> trace;
    trace.push_back({0.0, run.start, Twist{}});
    double t = 0.0;
    for (const ControlStep& s : run.steps) {
      t += pc.primitives.dt;
      trace.push_back({t, s.pose, s.command});
    }
    write_trajectory_csv(out_traj, trace);
  }
  if (!out_svg.empty()) {
    SvgPath path;
    path.points.push_back(run.start.position());
    for (const ControlStep& s : run.steps) path.points.push_back(s.pose.position());
    write_text_file(out_svg,
                    svg_scene(world, {path}, {{goal, "#d62728", "goal"}}));
  }

  std::cout << "plan: " << to_string(run.outcome) << " after " << run.steps.size()
            << " steps, final distance " << run.final_distance << "\n";
  return 0;
}

int cmd_ablate(KeyValueConfig& cfg) {
  const std::string data = cfg.require_string("data");
  const std::string out = cfg.require_string("out");
  const std::string svg = cfg.get_string("svg", "");
  const std::vector<double> fractions =
      parse_fraction_list(cfg.get_string("fractions", "0.1,0.25,0.5,1.0"));

  TrainConfig tc;
  tc.lr = cfg.get_double("lr", 1e-4);
  tc.batch_size = static_cast<int>(cfg.get_int("batch", 256));
  tc.epochs = static_cast<int>(cfg.get_int("epochs", 30));
  tc.seed = cfg.get_seed("seed", 1);
  tc.objective.lambda_col = cfg.get_double("lambda_col", 0.0);
  tc.objective.mask_radius = cfg.get_double("mask_radius", 1.0);
  cfg.require_all_used();

  const Dataset full = read_dataset_jsonl(data);
  tc.objective.teacher_horizon = full.header.teacher_horizon;
  tc.objective.horizon = tc.policy.horizon;

  // Alternating frames form the train and held-out halves.
  Dataset train_set, eval_set;
  train_set.header = full.header;
  eval_set.header = full.header;
  for (std::size_t i = 0; i < full.frames.size(); ++i)
    (i % 2 == 0 ? train_set : eval_set).frames.push_back(full.frames[i]);

  const std::vector<AblationPoint> points =
      run_ablation(train_set, eval_set, tc, fractions);
  write_ablation_csv(out, points);
  write_run_sidecar(out, "ablate", cfg);
  if (!svg.empty()) {
    ChartSeries series;
    series.name = "median endpoint error";
    for (const AblationPoint& p : points) series.points.push_back({p.fraction, p.median_error});
    write_text_file(svg, svg_line_chart("dataset size ablation", "training fraction",
                                        "median endpoint error (m)", {series}));
  }

  for (const AblationPoint& p : points)
    std::cout << "fraction " << p.fraction << " (" << p.frames_used
              << " frames): median endpoint error " << p.median_error << "\n";
  return 0;
}

int cmd_plot(KeyValueConfig& cfg) {
  const std::string kind = cfg.require_string("kind");
  if (kind == "loss") {
    const std::string in = cfg.require_string("in");
    const std::string out = cfg.require_string("out");
    cfg.require_all_used();
    std::ifstream file(in);
    if (!file) throw std::runtime_error("cannot read " + in);
    std::string line;
    if (!std::getline(file, line) || line != "epoch,total,pose,col,smooth,epsilon_active")
      throw std::runtime_error("not a loss file: " + in);
    ChartSeries total{"total", "#1f77b4", {}}, pose{"pose", "#2ca02c", {}},
        col{"col", "#d62728", {}}, smooth{"smooth", "#9467bd", {}};
    while (std::getline(file, line)) {
      if (line.empty()) continue;
      std::istringstream row(line);
      double e, t, p, c, s, eps;
      char comma;
      if (!(row >> e >> comma >> t >> comma >> p >> comma >> c >> comma >> s >> comma >> eps))
        throw std::runtime_error("bad loss row: " + line);
      total.points.push_back({e, t});
      pose.points.push_back({e, p});
      col.points.push_back({e, c});
      smooth.points.push_back({e, s});
    }
    write_text_file(out, svg_line_chart("training loss", "epoch", "objective",
                                        {total, pose, col, smooth}));
    std::cout << "plotted " << total.points.size() << " epochs -> " << out << "\n";
    return 0;
  }
  if (kind == "ablation") {
    const std::string in = cfg.require_string("in");
    const std::string out = cfg.require_string("out");
    cfg.require_all_used();
    std::ifstream file(in);
    if (!file) throw std::runtime_error("cannot read " + in);
    std::string line;
    if (!std::getline(file, line) || line != "fraction,frames,median_error,mean_sq_error")
      throw std::runtime_error("not an ablation file: " + in);
    ChartSeries series{"median endpoint error", "#1f77b4", {}};
    while (std::getline(file, line)) {
      if (line.empty()) continue;
      std::istringstream row(line);
      double f, frames, med, mse;
      char comma;
      if (!(row >> f >> comma >> frames >> comma >> med >> comma >> mse))
        throw std::runtime_error("bad ablation row: " + line);
      series.points.push_back({f, med});
    }
    write_text_file(out, svg_line_chart("dataset size ablation", "training fraction",
                                        "median endpoint error (m)", {series}));
    std::cout << "plotted " << series.points.size() << " points -> " << out << "\n";
    return 0;
  }
  if (kind == "trajectory") {
    const std::string in = cfg.require_string("in");
    const std::string world_path = cfg.require_string("world");
    const std::string out = cfg.require_string("out");
    cfg.require_all_used();
    const World world = read_world_file(world_path);
    const std::vector<TimedState> trace = read_trajectory_csv(in);
    SvgPath path;
    for (const TimedState& s : trace) path.points.push_back(s.pose.position());
    std::vector<SvgMarker> markers;
    if (!trace.empty()) {
      markers.push_back({trace.front().pose.position(), "#2ca02c", "start"});
      markers.push_back({trace.back().pose.position(), "#d62728", "end"});
    }
    write_text_file(out, svg_scene(world, {path}, markers));
    std::cout << "plotted " << trace.size() << " poses -> " << out << "\n";
    return 0;
  }
  if (kind == "world") {
    const std::string world_path = cfg.require_string("world");
    const std::string out = cfg.require_string("out");
    cfg.require_all_used();
    const World world = read_world_file(world_path);
    write_text_file(out, svg_scene(world, {}));
    std::cout << "plotted world -> " << out << "\n";
    return 0;
  }
  throw ConfigError("kind must be loss, ablation, trajectory, or world, got: " + kind);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"language-conditioned last-mile navigation lab"};
  app.require_subcommand(1);

  std::vector<std::string> tokens;
  const char* settings_help = "key=value settings (config=FILE loads more)";
  CLI::App* gen = app.add_subcommand("gen", "generate worlds, episode suites, layouts");
  gen->add_option("settings", tokens, settings_help);
  CLI::App* annotate = app.add_subcommand("annotate", "build a labeled dataset from a world");
  annotate->add_option("settings", tokens, settings_help);
  CLI::App* train = app.add_subcommand("train", "optimize the policy on a dataset");
  train->add_option("settings", tokens, settings_help);
  CLI::App* eval = app.add_subcommand("eval", "run a policy or planner over a suite");
  eval->add_option("settings", tokens, settings_help);
  CLI::App* plan = app.add_subcommand("plan", "single receding-horizon planner run");
  plan->add_option("settings", tokens, settings_help);
  CLI::App* ablate = app.add_subcommand("ablate", "dataset-size sweep");
  ablate->add_option("settings", tokens, settings_help);
  CLI::App* plot = app.add_subcommand("plot", "render CSV artifacts to SVG");
  plot->add_option("settings", tokens, settings_help);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    KeyValueConfig cli = KeyValueConfig::from_tokens(tokens);
    KeyValueConfig cfg;
    const std::string file = cli.get_string("config", "");
    if (!file.empty()) cfg = KeyValueConfig::from_file(file);
    cfg.merge(cli);
    cfg.get_string("config", "");  // carried over by the merge; already consumed

    int rc = 0;
    if (gen->parsed()) rc = cmd_gen(cfg);
    else if (annotate->parsed()) rc = cmd_annotate(cfg);
    else if (train->parsed()) rc = cmd_train(cfg);
    else if (eval->parsed()) rc = cmd_eval(cfg);
    else if (plan->parsed()) rc = cmd_plan(cfg);
    else if (ablate->parsed()) rc = cmd_ablate(cfg);
    else if (plot->parsed()) rc = cmd_plot(cfg);
    return rc;
  } catch (const lmnav::ConfigError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
