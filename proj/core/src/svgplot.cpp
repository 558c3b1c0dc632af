#include "nstlab/svgplot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <vector>

#include "nstlab/harness.hpp"

namespace nst {

namespace {

constexpr double kWidth = 800.0, kHeight = 500.0;
constexpr double kLeft = 70.0, kRight = 170.0, kTop = 30.0, kBottom = 60.0;

const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                          "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

}  // namespace

void plot_curves(const std::filesystem::path& aggregate_csv, const std::filesystem::path& out_svg) {
  std::vector<AggregateRow> rows = read_aggregate_csv(aggregate_csv);
  if (rows.empty()) {
    throw Error(ErrorKind::Parse, "plot_curves: no aggregate rows in " + aggregate_csv.string());
  }

  std::set<std::size_t> budgets_set;
  std::map<std::string, std::map<std::size_t, AggregateRow>> by_method;
  for (const AggregateRow& r : rows) {
    budgets_set.insert(r.n_labeled);
    by_method[r.method][r.n_labeled] = r;
  }
  std::vector<std::size_t> budgets(budgets_set.begin(), budgets_set.end());

  double x_min = static_cast<double>(budgets.front());
  double x_max = static_cast<double>(budgets.back());
  if (x_max == x_min) x_max = x_min + 1.0;
  double y_max = 0.0;
  for (const AggregateRow& r : rows) y_max = std::max(y_max, (r.mean_error + r.std_error) * 100.0);
  if (y_max <= 0.0) y_max = 1.0;
  y_max *= 1.05;

  double plot_w = kWidth - kLeft - kRight;
  double plot_h = kHeight - kTop - kBottom;
  auto sx = [&](double v) { return kLeft + (v - x_min) / (x_max - x_min) * plot_w; };
  auto sy = [&](double pct) { return kTop + plot_h - pct / y_max * plot_h; };

  std::ofstream os(out_svg);
  if (!os) throw Error(ErrorKind::Io, "plot_curves: cannot open " + out_svg.string());
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << kWidth
     << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n";
  os << "  <rect x=\"0\" y=\"0\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" fill=\"white\"/>\n";

  // axes
  os << "  <line x1=\"" << num(kLeft) << "\" y1=\"" << num(kTop + plot_h) << "\" x2=\""
     << num(kLeft + plot_w) << "\" y2=\"" << num(kTop + plot_h)
     << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
  os << "  <line x1=\"" << num(kLeft) << "\" y1=\"" << num(kTop) << "\" x2=\"" << num(kLeft)
     << "\" y2=\"" << num(kTop + plot_h) << "\" stroke=\"black\" stroke-width=\"1\"/>\n";

  for (std::size_t b : budgets) {
    double x = sx(static_cast<double>(b));
    os << "  <line x1=\"" << num(x) << "\" y1=\"" << num(kTop + plot_h) << "\" x2=\"" << num(x)
       << "\" y2=\"" << num(kTop + plot_h + 5) << "\" stroke=\"black\"/>\n";
    os << "  <text x=\"" << num(x) << "\" y=\"" << num(kTop + plot_h + 20)
       << "\" font-size=\"12\" text-anchor=\"middle\">" << b << "</text>\n";
  }
  const int y_ticks = 5;
  for (int t = 0; t <= y_ticks; ++t) {
    double pct = y_max * t / y_ticks;
    double y = sy(pct);
    os << "  <line x1=\"" << num(kLeft - 5) << "\" y1=\"" << num(y) << "\" x2=\"" << num(kLeft)
       << "\" y2=\"" << num(y) << "\" stroke=\"black\"/>\n";
    os << "  <text x=\"" << num(kLeft - 8) << "\" y=\"" << num(y + 4)
       << "\" font-size=\"12\" text-anchor=\"end\">" << num(pct) << "</text>\n";
  }
  os << "  <text x=\"" << num(kLeft + plot_w / 2) << "\" y=\"" << num(kHeight - 15)
     << "\" font-size=\"14\" text-anchor=\"middle\">labeled examples</text>\n";
  os << "  <text x=\"18\" y=\"" << num(kTop + plot_h / 2)
     << "\" font-size=\"14\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
     << num(kTop + plot_h / 2) << ")\">test error (%)</text>\n";

  // one band + polyline per method
  std::size_t color_index = 0;
  for (const auto& [method, points] : by_method) {
    const char* color = kPalette[color_index % (sizeof kPalette / sizeof kPalette[0])];

    std::vector<std::pair<std::size_t, AggregateRow>> ordered(points.begin(), points.end());
    if (ordered.size() > 1) {
      os << "  <polygon fill=\"" << color << "\" fill-opacity=\"0.15\" stroke=\"none\" points=\"";
      for (const auto& [b, r] : ordered) {
        os << num(sx(static_cast<double>(b))) << ","
           << num(sy((r.mean_error + r.std_error) * 100.0)) << " ";
      }
      for (auto it = ordered.rbegin(); it != ordered.rend(); ++it) {
        os << num(sx(static_cast<double>(it->first))) << ","
           << num(sy(std::max(it->second.mean_error - it->second.std_error, 0.0) * 100.0)) << " ";
      }
      os << "\"/>\n";
    }

    os << "  <polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (const auto& [b, r] : ordered) {
      os << num(sx(static_cast<double>(b))) << "," << num(sy(r.mean_error * 100.0)) << " ";
    }
    os << "\"/>\n";

    for (const auto& [b, r] : ordered) {
      os << "  <circle cx=\"" << num(sx(static_cast<double>(b))) << "\" cy=\""
         << num(sy(r.mean_error * 100.0)) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    }

    double ly = kTop + 10 + 20.0 * static_cast<double>(color_index);
    os << "  <rect x=\"" << num(kLeft + plot_w + 20) << "\" y=\"" << num(ly - 9)
       << "\" width=\"12\" height=\"12\" fill=\"" << color << "\"/>\n";
    os << "  <text x=\"" << num(kLeft + plot_w + 38) << "\" y=\"" << num(ly + 2)
       << "\" font-size=\"12\">" << method << "</text>\n";
    ++color_index;
  }

  os << "</svg>\n";
  if (!os) throw Error(ErrorKind::Io, "plot_curves: write failed for " + out_svg.string());
}

}  // namespace nst
