#pragma once

// File artifacts: depth snapshots, trajectory and metric CSVs, planner step
// traces, and self-contained SVG renders for quick visual inspection. Numeric
// text output always uses max precision so files round-trip bit-exactly.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "lmnav/annotate.hpp"
#include "lmnav/planner.hpp"
#include "lmnav/sim.hpp"
#include "lmnav/train.hpp"
#include "lmnav/world.hpp"

namespace lmnav {

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
}

// Depth snapshots. Binary layout: 8-byte magic, two int32 dimensions, then
// row-major float64 samples in host byte order.

inline constexpr char kDepthMagic[8] = {'L', 'M', 'D', 'E', 'P', 'T', 'H', '1'};

inline void write_depth_binary(const std::string& path, const DepthMap& d) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(kDepthMagic, sizeof(kDepthMagic));
  const std::int32_t w = d.width, h = d.height;
  out.write(reinterpret_cast<const char*>(&w), sizeof(w));
  out.write(reinterpret_cast<const char*>(&h), sizeof(h));
  out.write(reinterpret_cast<const char*>(d.values.data()),
            static_cast<std::streamsize>(d.values.size() * sizeof(double)));
}

inline DepthMap read_depth_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (std::memcmp(magic, kDepthMagic, sizeof(magic)) != 0)
    throw std::runtime_error("not a depth file: " + path);
  std::int32_t w = 0, h = 0;
  in.read(reinterpret_cast<char*>(&w), sizeof(w));
  in.read(reinterpret_cast<char*>(&h), sizeof(h));
  if (w < 1 || h < 1 || w > 1 << 16 || h > 1 << 16)
    throw std::runtime_error("corrupt depth header");
  DepthMap d = DepthMap::invalid_filled(w, h);
  in.read(reinterpret_cast<char*>(d.values.data()),
          static_cast<std::streamsize>(d.values.size() * sizeof(double)));
  if (!in) throw std::runtime_error("truncated depth file: " + path);
  return d;
}

inline void write_depth_csv(const std::string& path, const DepthMap& d) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.precision(17);
  for (int v = 0; v < d.height; ++v) {
    for (int u = 0; u < d.width; ++u) {
      if (u) out << ',';
      const double z = d.at(u, v);
      if (std::isfinite(z)) out << z;
      else out << "nan";
    }
    out << '\n';
  }
}

// Executed trajectories: one row per control tick.

inline void write_trajectory_csv(const std::string& path,
                                 const std::vector<TimedState>& trace) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "t,x,y,theta,v,omega\n";
  out.precision(17);
  for (const TimedState& s : trace)
    out << s.t << ',' << s.pose.x << ',' << s.pose.y << ',' << s.pose.theta << ','
        << s.command.v << ',' << s.command.omega << '\n';
}

inline std::vector<TimedState> read_trajectory_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::string line;
  if (!std::getline(in, line) || line != "t,x,y,theta,v,omega")
    throw std::runtime_error("not a trajectory file: " + path);
  std::vector<TimedState> trace;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    TimedState s;
    std::istringstream row(line);
    char comma;
    if (!(row >> s.t >> comma >> s.pose.x >> comma >> s.pose.y >> comma >> s.pose.theta >>
          comma >> s.command.v >> comma >> s.command.omega))
      throw std::runtime_error("bad trajectory row: " + line);
    trace.push_back(s);
  }
  return trace;
}

// Planner step trace: one JSON line per control tick with all candidate costs,
// for auditing which primitive won and why.

inline void write_planner_trace_jsonl(const std::string& path, const ControlRun& run) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  json header;
  header["schema"] = "lmnav.plantrace";
  header["version"] = 1;
  header["start"] = {run.start.x, run.start.y, run.start.theta};
  header["outcome"] = to_string(run.outcome);
  header["final_distance"] = run.final_distance;
  out << header.dump() << '\n';
  for (const ControlStep& s : run.steps) {
    json j;
    j["costs"] = s.evaluation.costs;
    j["chosen"] = s.evaluation.chosen;
    j["command"] = {s.command.v, s.command.omega};
    j["pose"] = {s.pose.x, s.pose.y, s.pose.theta};
    out << j.dump() << '\n';
  }
}

inline void write_ablation_csv(const std::string& path,
                               const std::vector<AblationPoint>& points) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "fraction,frames,median_error,mean_sq_error\n";
  out.precision(17);
  for (const AblationPoint& p : points)
    out << p.fraction << ',' << p.frames_used << ',' << p.median_error << ','
        << p.mean_sq_error << '\n';
}

// SVG rendering. World coordinates map to the image with y flipped so +y is
// up on screen.

struct SvgPath {
  std::vector<Vec2> points;
  std::string color = "#1f77b4";
  double width = 2.0;
};

struct SvgMarker {
  Vec2 at;
  std::string color = "#d62728";
  std::string label;
};

namespace detail {
inline std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}
}  // namespace detail

inline std::string svg_scene(const World& world, const std::vector<SvgPath>& paths,
                             const std::vector<SvgMarker>& markers = {},
                             int image_width = 640) {
  const double wx = world.bounds.x_max - world.bounds.x_min;
  const double wy = world.bounds.y_max - world.bounds.y_min;
  const double pad = 20.0;
  const double scale = (image_width - 2.0 * pad) / wx;
  const int image_height = static_cast<int>(wy * scale + 2.0 * pad);
  auto sx = [&](double x) { return pad + (x - world.bounds.x_min) * scale; };
  auto sy = [&](double y) { return pad + (world.bounds.y_max - y) * scale; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << image_width
      << "\" height=\"" << image_height << "\" viewBox=\"0 0 " << image_width << ' '
      << image_height << "\">\n";
  svg << "<rect x=\"0\" y=\"0\" width=\"" << image_width << "\" height=\"" << image_height
      << "\" fill=\"#fafafa\"/>\n";
  svg << "<rect x=\"" << detail::fmt(sx(world.bounds.x_min)) << "\" y=\""
      << detail::fmt(sy(world.bounds.y_max)) << "\" width=\"" << detail::fmt(wx * scale)
      << "\" height=\"" << detail::fmt(wy * scale)
      << "\" fill=\"none\" stroke=\"#888\" stroke-width=\"1\"/>\n";

  for (const auto& set : world.obstacles)
    for (const Vec2& p : set)
      svg << "<circle cx=\"" << detail::fmt(sx(p.x)) << "\" cy=\"" << detail::fmt(sy(p.y))
          << "\" r=\"2\" fill=\"#555\"/>\n";

  static const char* palette[] = {"#2ca02c", "#9467bd", "#8c564b", "#e377c2",
                                  "#7f7f7f", "#bcbd22", "#17becf", "#ff7f0e"};
  for (std::size_t i = 0; i < world.objects.size(); ++i) {
    const ObjectSpec& o = world.objects[i];
    const char* color = palette[i % (sizeof(palette) / sizeof(palette[0]))];
    svg << "<circle cx=\"" << detail::fmt(sx(o.position.x)) << "\" cy=\""
        << detail::fmt(sy(o.position.y)) << "\" r=\""
        << detail::fmt(o.footprint_radius * scale) << "\" fill=\"" << color
        << "\" fill-opacity=\"0.5\" stroke=\"" << color << "\"/>\n";
    svg << "<text x=\"" << detail::fmt(sx(o.position.x) + 4.0) << "\" y=\""
        << detail::fmt(sy(o.position.y) - 4.0) << "\" font-size=\"10\" fill=\"#333\">"
        << o.noun << ' ' << o.id << "</text>\n";
  }

  for (const SvgPath& path : paths) {
    if (path.points.empty()) continue;
    svg << "<polyline fill=\"none\" stroke=\"" << path.color << "\" stroke-width=\""
        << detail::fmt(path.width) << "\" points=\"";
    for (const Vec2& p : path.points)
      svg << detail::fmt(sx(p.x)) << ',' << detail::fmt(sy(p.y)) << ' ';
    svg << "\"/>\n";
  }

  for (const SvgMarker& m : markers) {
    svg << "<circle cx=\"" << detail::fmt(sx(m.at.x)) << "\" cy=\"" << detail::fmt(sy(m.at.y))
        << "\" r=\"4\" fill=\"" << m.color << "\"/>\n";
    if (!m.label.empty())
      svg << "<text x=\"" << detail::fmt(sx(m.at.x) + 6.0) << "\" y=\""
          << detail::fmt(sy(m.at.y) + 3.0) << "\" font-size=\"10\" fill=\"" << m.color
          << "\">" << m.label << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

// Minimal line chart for loss curves and ablation sweeps.

struct ChartSeries {
  std::string name;
  std::string color = "#1f77b4";
  std::vector<Vec2> points;  // x ascending
};

inline std::string svg_line_chart(const std::string& title, const std::string& x_label,
                                  const std::string& y_label,
                                  const std::vector<ChartSeries>& series, int width = 640,
                                  int height = 400) {
  double min_x = 0.0, max_x = 1.0, min_y = 0.0, max_y = 1.0;
  bool first = true;
  for (const ChartSeries& s : series)
    for (const Vec2& p : s.points) {
      if (first) {
        min_x = max_x = p.x;
        min_y = max_y = p.y;
        first = false;
      }
      min_x = std::min(min_x, p.x);
      max_x = std::max(max_x, p.x);
      min_y = std::min(min_y, p.y);
      max_y = std::max(max_y, p.y);
    }
  if (max_x - min_x < 1e-12) max_x = min_x + 1.0;
  if (max_y - min_y < 1e-12) max_y = min_y + 1.0;
  const double left = 60.0, right = 20.0, top = 40.0, bottom = 50.0;
  auto sx = [&](double x) {
    return left + (x - min_x) / (max_x - min_x) * (width - left - right);
  };
  auto sy = [&](double y) {
    return height - bottom - (y - min_y) / (max_y - min_y) * (height - top - bottom);
  };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
  svg << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"#fff\"/>\n";
  svg << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">"
      << title << "</text>\n";
  svg << "<line x1=\"" << left << "\" y1=\"" << height - bottom << "\" x2=\""
      << width - right << "\" y2=\"" << height - bottom
      << "\" stroke=\"#333\" stroke-width=\"1\"/>\n";
  svg << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\""
      << height - bottom << "\" stroke=\"#333\" stroke-width=\"1\"/>\n";
  svg << "<text x=\"" << (left + width - right) / 2 << "\" y=\"" << height - 12
      << "\" text-anchor=\"middle\" font-size=\"11\">" << x_label << "</text>\n";
  svg << "<text x=\"16\" y=\"" << (top + height - bottom) / 2
      << "\" text-anchor=\"middle\" font-size=\"11\" transform=\"rotate(-90 16 "
      << (top + height - bottom) / 2 << ")\">" << y_label << "</text>\n";
  svg << "<text x=\"" << left << "\" y=\"" << height - bottom + 16
      << "\" text-anchor=\"middle\" font-size=\"10\">" << detail::fmt(min_x) << "</text>\n";
  svg << "<text x=\"" << width - right << "\" y=\"" << height - bottom + 16
      << "\" text-anchor=\"middle\" font-size=\"10\">" << detail::fmt(max_x) << "</text>\n";
  svg << "<text x=\"" << left - 6 << "\" y=\"" << height - bottom + 4
      << "\" text-anchor=\"end\" font-size=\"10\">" << detail::fmt(min_y) << "</text>\n";
  svg << "<text x=\"" << left - 6 << "\" y=\"" << top + 4
      << "\" text-anchor=\"end\" font-size=\"10\">" << detail::fmt(max_y) << "</text>\n";

  double legend_y = top + 4.0;
  for (const ChartSeries& s : series) {
    if (s.points.empty()) continue;
    svg << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"2\" points=\"";
    for (const Vec2& p : s.points) svg << detail::fmt(sx(p.x)) << ',' << detail::fmt(sy(p.y)) << ' ';
    svg << "\"/>\n";
    if (!s.name.empty()) {
      svg << "<text x=\"" << width - right - 4 << "\" y=\"" << legend_y
          << "\" text-anchor=\"end\" font-size=\"11\" fill=\"" << s.color << "\">" << s.name
          << "</text>\n";
      legend_y += 14.0;
    }
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace lmnav
