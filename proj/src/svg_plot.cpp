#include "mapfuse/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace mapfuse {

namespace {

const char* class_color(ElementClass cls) {
  switch (cls) {
    case ElementClass::PedestrianCrossing: return "#e4572e";
    case ElementClass::Divider: return "#2e86ab";
    case ElementClass::Boundary: return "#444444";
  }
  return "#000000";
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

struct Bounds {
  double min_x = std::numeric_limits<double>::infinity();
  double max_x = -std::numeric_limits<double>::infinity();
  double min_y = std::numeric_limits<double>::infinity();
  double max_y = -std::numeric_limits<double>::infinity();

  void include(double x, double y) {
    min_x = std::min(min_x, x);
    max_x = std::max(max_x, x);
    min_y = std::min(min_y, y);
    max_y = std::max(max_y, y);
  }
  void pad(double p) {
    min_x -= p;
    max_x += p;
    min_y -= p;
    max_y += p;
  }
};

void write_file(const std::filesystem::path& path, const std::string& body) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write svg: " + path.string());
  out << body;
}

std::string polyline_svg(const MapElement& e, double sx, double sy, const Bounds& b,
                         double height, bool dashed) {
  std::ostringstream out;
  out << "<polyline fill=\"none\" stroke=\"" << class_color(e.cls) << "\" stroke-width=\"1.2\"";
  if (dashed) out << " stroke-dasharray=\"4 3\" opacity=\"0.7\"";
  out << " points=\"";
  for (const auto& v : e.vertices) {
    out << fmt((v.position.x() - b.min_x) * sx) << ","
        << fmt(height - (v.position.y() - b.min_y) * sy) << " ";
  }
  out << "\"/>\n";
  return out.str();
}

}  // namespace

void write_map_overlay_svg(const std::filesystem::path& path, const VectorMap& gt,
                           const VectorMap& fused) {
  Bounds b;
  for (const auto* map : {&gt, &fused}) {
    for (const auto& e : map->elements) {
      for (const auto& v : e.vertices) b.include(v.position.x(), v.position.y());
    }
  }
  if (!std::isfinite(b.min_x)) b = Bounds{0, 1, 0, 1};
  b.pad(5.0);
  const double width = 900.0;
  const double height = std::max(200.0, width * (b.max_y - b.min_y) / (b.max_x - b.min_x));
  const double sx = width / (b.max_x - b.min_x);
  const double sy = height / (b.max_y - b.min_y);

  std::ostringstream out;
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(width) << "\" height=\""
      << fmt(height + 30.0) << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (const auto& e : gt.elements) out << polyline_svg(e, sx, sy, b, height, true);
  for (const auto& e : fused.elements) out << polyline_svg(e, sx, sy, b, height, false);
  out << "<text x=\"10\" y=\"" << fmt(height + 20.0)
      << "\" font-size=\"12\" font-family=\"sans-serif\">dashed = ground truth, solid = fused; "
         "ped #e4572e, div #2e86ab, bou #444444</text>\n"
      << "</svg>\n";
  write_file(path, out.str());
}

void write_trajectory_deviation_svg(const std::filesystem::path& path,
                                    std::span<const Pose2> est, std::span<const Pose2> gt) {
  if (est.size() != gt.size() || est.empty()) {
    throw std::invalid_argument("trajectory deviation: empty or mismatched inputs");
  }
  const double width = 900.0, band = 120.0, gap = 30.0;
  std::vector<std::vector<double>> series(3);
  for (std::size_t i = 0; i < est.size(); ++i) {
    const Pose2 err = between(gt[i], est[i]);
    series[0].push_back(err.y);                       // lateral
    series[1].push_back(err.x);                       // longitudinal
    series[2].push_back(err.yaw * 180.0 / M_PI);      // yaw, degrees
  }
  const char* names[3] = {"lateral [m]", "longitudinal [m]", "yaw [deg]"};
  const char* colors[3] = {"#2e86ab", "#e4572e", "#59a14f"};

  std::ostringstream out;
  const double height = 3 * band + 4 * gap;
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(width) << "\" height=\""
      << fmt(height) << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (int s = 0; s < 3; ++s) {
    const double top = gap + s * (band + gap);
    double lim = 1e-9;
    for (const double v : series[static_cast<std::size_t>(s)]) lim = std::max(lim, std::abs(v));
    const double mid = top + band / 2.0;
    out << "<line x1=\"0\" y1=\"" << fmt(mid) << "\" x2=\"" << fmt(width) << "\" y2=\""
        << fmt(mid) << "\" stroke=\"#cccccc\"/>\n";
    out << "<polyline fill=\"none\" stroke=\"" << colors[s] << "\" stroke-width=\"1\" points=\"";
    for (std::size_t i = 0; i < series[static_cast<std::size_t>(s)].size(); ++i) {
      const double x = width * static_cast<double>(i) /
                       static_cast<double>(std::max<std::size_t>(series[0].size() - 1, 1));
      const double y = mid - (series[static_cast<std::size_t>(s)][i] / lim) * (band / 2.0 - 4.0);
      out << fmt(x) << "," << fmt(y) << " ";
    }
    out << "\"/>\n<text x=\"8\" y=\"" << fmt(top + 14.0)
        << "\" font-size=\"12\" font-family=\"sans-serif\">" << names[s] << " (max "
        << fmt(lim) << ")</text>\n";
  }
  out << "</svg>\n";
  write_file(path, out.str());
}

void write_map_curve_svg(const std::filesystem::path& path,
                         std::span<const CycleMetrics> cycles) {
  if (cycles.empty()) throw std::invalid_argument("map curve: no cycles");
  const double width = 480.0, height = 320.0, margin = 40.0;
  std::ostringstream out;
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(width) << "\" height=\""
      << fmt(height) << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<line x1=\"" << fmt(margin) << "\" y1=\"" << fmt(height - margin) << "\" x2=\""
      << fmt(width - margin) << "\" y2=\"" << fmt(height - margin)
      << "\" stroke=\"#333333\"/>\n"
      << "<line x1=\"" << fmt(margin) << "\" y1=\"" << fmt(margin) << "\" x2=\"" << fmt(margin)
      << "\" y2=\"" << fmt(height - margin) << "\" stroke=\"#333333\"/>\n";
  const double n = static_cast<double>(cycles.size());
  out << "<polyline fill=\"none\" stroke=\"#2e86ab\" stroke-width=\"2\" points=\"";
  for (std::size_t i = 0; i < cycles.size(); ++i) {
    const double x = margin + (width - 2 * margin) * (n > 1 ? static_cast<double>(i) / (n - 1) : 0.5);
    const double y = height - margin - (height - 2 * margin) * std::clamp(cycles[i].score.map_mean, 0.0, 1.0);
    out << fmt(x) << "," << fmt(y) << " ";
  }
  out << "\"/>\n";
  for (std::size_t i = 0; i < cycles.size(); ++i) {
    const double x = margin + (width - 2 * margin) * (n > 1 ? static_cast<double>(i) / (n - 1) : 0.5);
    const double y = height - margin - (height - 2 * margin) * std::clamp(cycles[i].score.map_mean, 0.0, 1.0);
    out << "<circle cx=\"" << fmt(x) << "\" cy=\"" << fmt(y) << "\" r=\"3\" fill=\"#2e86ab\"/>\n"
        << "<text x=\"" << fmt(x - 8.0) << "\" y=\"" << fmt(height - margin + 16.0)
        << "\" font-size=\"11\" font-family=\"sans-serif\">" << cycles[i].cycle << "</text>\n";
  }
  out << "<text x=\"" << fmt(margin) << "\" y=\"20\" font-size=\"12\" "
         "font-family=\"sans-serif\">mAP per cycle</text>\n</svg>\n";
  write_file(path, out.str());
}

}  // namespace mapfuse
