#include "cellpp/svg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <iomanip>
#include <limits>
#include <sstream>

namespace cellpp::svg {
namespace {

constexpr std::array<const char*, 8> kPalette = {"#1b9e77", "#d95f02", "#7570b3", "#e7298a",
                                                 "#66a61e", "#e6ab02", "#a6761d", "#666666"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) {
  std::ostringstream s;
  s << std::setprecision(6) << v;
  return s.str();
}

std::string rgb(double r, double g, double b) {
  std::ostringstream s;
  s << '#' << std::hex << std::setfill('0');
  for (double c : {r, g, b}) s << std::setw(2) << static_cast<int>(std::lround(std::clamp(c, 0.0, 1.0) * 255));
  return s.str();
}

/// t in [0, 1]; dark blue through green to yellow.
std::string sequential(double t) {
  static const double anchors[5][3] = {
      {0.267, 0.005, 0.329}, {0.230, 0.322, 0.546}, {0.128, 0.567, 0.551}, {0.369, 0.789, 0.383}, {0.993, 0.906, 0.144}};
  t = std::clamp(t, 0.0, 1.0) * 4.0;
  const int k = std::min(3, static_cast<int>(t));
  const double f = t - k;
  return rgb(anchors[k][0] + f * (anchors[k + 1][0] - anchors[k][0]), anchors[k][1] + f * (anchors[k + 1][1] - anchors[k][1]),
             anchors[k][2] + f * (anchors[k + 1][2] - anchors[k][2]));
}

/// t in [-1, 1]; blue, white, red.
std::string diverging_colour(double t) {
  t = std::clamp(t, -1.0, 1.0);
  if (t < 0) return rgb(1 + t * 0.8, 1 + t * 0.6, 1.0 + t * 0.2);
  return rgb(1.0 - t * 0.2, 1 - t * 0.8, 1 - t * 0.8);
}

/// Ticks at 1, 2 or 5 times a power of ten.
std::vector<double> ticks(double lo, double hi, int target = 5) {
  std::vector<double> out;
  if (!(hi > lo)) return {lo};
  const double raw = (hi - lo) / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    step = m * mag;
    if (step >= raw) break;
  }
  for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * step; t += step) out.push_back(std::abs(t) < 1e-12 * step ? 0.0 : t);
  return out;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();

  void add(double v) {
    if (std::isfinite(v)) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  template <class Vec>
  void add_all(const Vec& v) {
    for (Eigen::Index k = 0; k < v.size(); ++k) add(v(k));
  }
  Range padded() const {
    if (!std::isfinite(lo)) return {0.0, 1.0};
    if (hi - lo < 1e-12) return {lo - 0.5, hi + 0.5};
    const double pad = 0.05 * (hi - lo);
    return {lo - pad, hi + pad};
  }
};

/// Axes box in pixel space with a data-to-pixel map.
struct Frame {
  double left, top, width, height;
  Range x, y;

  double px(double v) const { return left + (v - x.lo) / (x.hi - x.lo) * width; }
  double py(double v) const { return top + height - (v - y.lo) / (y.hi - y.lo) * height; }

  void axes(std::ostringstream& out, const std::string& xlabel, const std::string& ylabel) const {
    out << "<rect x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\"" << num(width) << "\" height=\""
        << num(height) << "\" fill=\"none\" stroke=\"#000\"/>\n";
    for (double t : ticks(x.lo, x.hi)) {
      out << "<line x1=\"" << num(px(t)) << "\" y1=\"" << num(top + height) << "\" x2=\"" << num(px(t)) << "\" y2=\""
          << num(top + height + 4) << "\" stroke=\"#000\"/>"
          << "<text x=\"" << num(px(t)) << "\" y=\"" << num(top + height + 16)
          << "\" font-size=\"10\" text-anchor=\"middle\">" << num(t) << "</text>\n";
    }
    for (double t : ticks(y.lo, y.hi)) {
      out << "<line x1=\"" << num(left - 4) << "\" y1=\"" << num(py(t)) << "\" x2=\"" << num(left) << "\" y2=\""
          << num(py(t)) << "\" stroke=\"#000\"/>"
          << "<text x=\"" << num(left - 6) << "\" y=\"" << num(py(t) + 3)
          << "\" font-size=\"10\" text-anchor=\"end\">" << num(t) << "</text>\n";
    }
    out << "<text x=\"" << num(left + width / 2) << "\" y=\"" << num(top + height + 32)
        << "\" font-size=\"12\" text-anchor=\"middle\">" << escape(xlabel) << "</text>\n";
    out << "<text transform=\"translate(" << num(left - 44) << ',' << num(top + height / 2)
        << ") rotate(-90)\" font-size=\"12\" text-anchor=\"middle\">" << escape(ylabel) << "</text>\n";
  }

  /// Polyline broken at non-finite values.
  void curve(std::ostringstream& out, const Eigen::VectorXd& xs, const Eigen::VectorXd& ys, const std::string& colour,
             double stroke, const std::string& extra = "") const {
    std::string pts;
    auto flush = [&] {
      if (!pts.empty()) {
        out << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"" << num(stroke) << "\" " << extra
            << " points=\"" << pts << "\"/>\n";
      }
      pts.clear();
    };
    for (Eigen::Index k = 0; k < xs.size(); ++k) {
      if (!std::isfinite(ys(k))) {
        flush();
        continue;
      }
      pts += num(px(xs(k))) + ',' + num(py(ys(k))) + ' ';
    }
    flush();
  }

  /// Region between two curves, one polygon per finite run.
  void band(std::ostringstream& out, const Eigen::VectorXd& xs, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
            const std::string& colour) const {
    Eigen::Index k = 0;
    while (k < xs.size()) {
      while (k < xs.size() && !(std::isfinite(lo(k)) && std::isfinite(hi(k)))) ++k;
      const Eigen::Index start = k;
      while (k < xs.size() && std::isfinite(lo(k)) && std::isfinite(hi(k))) ++k;
      if (k - start < 1) continue;
      out << "<polygon fill=\"" << colour << "\" stroke=\"none\" points=\"";
      for (Eigen::Index m = start; m < k; ++m) out << num(px(xs(m))) << ',' << num(py(hi(m))) << ' ';
      for (Eigen::Index m = k; m-- > start;) out << num(px(xs(m))) << ',' << num(py(lo(m))) << ' ';
      out << "\"/>\n";
    }
  }
};

std::string open(double w, double h, const std::string& title) {
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(w) << "\" height=\"" << num(h)
      << "\" viewBox=\"0 0 " << num(w) << ' ' << num(h) << "\" font-family=\"sans-serif\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"#fff\"/>\n"
      << "<text x=\"" << num(w / 2) << "\" y=\"20\" font-size=\"14\" text-anchor=\"middle\">" << escape(title)
      << "</text>\n";
  return out.str();
}

void legend(std::ostringstream& out, double x, double y, const std::vector<std::pair<std::string, std::string>>& items,
            bool swatch = false) {
  for (std::size_t k = 0; k < items.size(); ++k) {
    const double yy = y + 16.0 * static_cast<double>(k);
    if (swatch) {
      out << "<rect x=\"" << num(x) << "\" y=\"" << num(yy - 8) << "\" width=\"12\" height=\"10\" fill=\""
          << items[k].second << "\"/>";
    } else {
      out << "<line x1=\"" << num(x) << "\" y1=\"" << num(yy - 3) << "\" x2=\"" << num(x + 18) << "\" y2=\"" << num(yy - 3)
          << "\" stroke=\"" << items[k].second << "\" stroke-width=\"2\"/>";
    }
    out << "<text x=\"" << num(x + 22) << "\" y=\"" << num(yy) << "\" font-size=\"11\">" << escape(items[k].first)
        << "</text>\n";
  }
}

/// Frame with equal scales on both axes fitted into the given box.
Frame spatial_frame(const Box2& box, double left, double top, double width, double height) {
  const double sx = width / box.sizes().x();
  const double sy = height / box.sizes().y();
  const double s = std::min(sx, sy);
  return Frame{left, top, box.sizes().x() * s, box.sizes().y() * s, {box.min().x(), box.max().x()},
               {box.min().y(), box.max().y()}};
}

void window_outline(std::ostringstream& out, const Frame& f, const Window& w) {
  out << "<polygon fill=\"none\" stroke=\"#000\" stroke-width=\"1\" points=\"";
  for (Eigen::Index k = 0; k < w.vertices().cols(); ++k) {
    out << num(f.px(w.vertices()(0, k))) << ',' << num(f.py(w.vertices()(1, k))) << ' ';
  }
  out << "\"/>\n";
}

/// Marching squares over the cell centres.
void contour(std::ostringstream& out, const Frame& f, const ScalarField& field, double level) {
  const auto& g = field.grid();
  const auto& v = field.values();
  out << "<path fill=\"none\" stroke=\"#000\" stroke-width=\"1.2\" d=\"";
  for (int i = 0; i + 1 < g.nx; ++i) {
    for (int j = 0; j + 1 < g.ny; ++j) {
      const std::array<Point2, 4> c = {g.centre(i, j), g.centre(i + 1, j), g.centre(i + 1, j + 1), g.centre(i, j + 1)};
      const std::array<double, 4> z = {v(i, j), v(i + 1, j), v(i + 1, j + 1), v(i, j + 1)};
      if (!std::all_of(z.begin(), z.end(), [](double x) { return std::isfinite(x); })) continue;
      std::vector<Point2> cuts;
      for (int e = 0; e < 4; ++e) {
        const double a = z[static_cast<std::size_t>(e)] - level;
        const double b = z[static_cast<std::size_t>((e + 1) % 4)] - level;
        if ((a < 0) != (b < 0)) {
          const double t = a / (a - b);
          cuts.push_back(c[static_cast<std::size_t>(e)] + t * (c[static_cast<std::size_t>((e + 1) % 4)] - c[static_cast<std::size_t>(e)]));
        }
      }
      for (std::size_t k = 0; k + 1 < cuts.size(); k += 2) {
        out << 'M' << num(f.px(cuts[k].x())) << ',' << num(f.py(cuts[k].y())) << 'L' << num(f.px(cuts[k + 1].x())) << ','
            << num(f.py(cuts[k + 1].y())) << ' ';
      }
    }
  }
  out << "\"/>\n";
}

void raster(std::ostringstream& out, const Frame& f, const GridSpec& g, const std::function<std::string(int, int)>& colour) {
  const double w = f.width / g.nx;
  const double h = f.height / g.ny;
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      const std::string c = colour(i, j);
      if (c.empty()) continue;
      out << "<rect x=\"" << num(f.left + i * w) << "\" y=\"" << num(f.top + f.height - (j + 1) * h) << "\" width=\""
          << num(w + 0.05) << "\" height=\"" << num(h + 0.05) << "\" fill=\"" << c << "\"/>\n";
    }
  }
}

}  // namespace

std::string heatmap(const ScalarField& field, const std::string& title, const ScalarField* contour_of, double level,
                    bool diverging) {
  const double W = 620;
  const double H = 540;
  std::ostringstream out;
  out << open(W, H, title);
  const Frame f = spatial_frame(field.grid().box, 60, 40, 440, 440);
  Range range;
  range.add_all(field.values().reshaped());
  double lo = std::isfinite(range.lo) ? range.lo : 0.0;
  double hi = std::isfinite(range.hi) ? range.hi : 1.0;
  if (diverging) {
    const double m = std::max({std::abs(lo), std::abs(hi), 1e-12});
    lo = -m;
    hi = m;
  }
  if (hi - lo < 1e-300) hi = lo + 1.0;
  auto colour_of = [&](double v) {
    return diverging ? diverging_colour(v / hi) : sequential((v - lo) / (hi - lo));
  };
  raster(out, f, field.grid(), [&](int i, int j) {
    const double v = field(i, j);
    return std::isfinite(v) ? colour_of(v) : std::string();
  });
  if (contour_of) contour(out, f, *contour_of, level);
  window_outline(out, f, field.window());
  f.axes(out, "x", "y");
  // colour bar
  const double bx = f.left + f.width + 30;
  for (int k = 0; k < 100; ++k) {
    const double v = hi - (hi - lo) * (k + 0.5) / 100.0;
    out << "<rect x=\"" << num(bx) << "\" y=\"" << num(f.top + k * f.height / 100) << "\" width=\"16\" height=\""
        << num(f.height / 100 + 0.2) << "\" fill=\"" << colour_of(v) << "\"/>\n";
  }
  Frame bar{bx, f.top, 16, f.height, {0, 1}, {lo, hi}};
  for (double t : ticks(lo, hi)) {
    out << "<text x=\"" << num(bx + 20) << "\" y=\"" << num(bar.py(t) + 3) << "\" font-size=\"10\">" << num(t)
        << "</text>\n";
  }
  if (contour_of) {
    legend(out, f.left, H - 12, {{"p = " + num(level) + " contour", "#000"}});
  }
  out << "</svg>\n";
  return out.str();
}

std::string argmax_map(const TypeProbabilities& probs, const std::string& title) {
  const double W = 640;
  const double H = 540;
  std::ostringstream out;
  out << open(W, H, title);
  if (probs.probabilities.empty()) {
    out << "</svg>\n";
    return out.str();
  }
  const ScalarField& ref = probs.probabilities.front();
  const Frame f = spatial_frame(ref.grid().box, 60, 40, 440, 440);
  raster(out, f, ref.grid(), [&](int i, int j) {
    const int k = probs.argmax(i, j);
    return k < 0 ? std::string() : std::string(kPalette[static_cast<std::size_t>(k) % kPalette.size()]);
  });
  window_outline(out, f, ref.window());
  f.axes(out, "x", "y");
  std::vector<std::pair<std::string, std::string>> items;
  for (std::size_t k = 0; k < probs.levels.size(); ++k) items.emplace_back(probs.levels[k], kPalette[k % kPalette.size()]);
  legend(out, f.left + f.width + 16, f.top + 10, items, true);
  out << "</svg>\n";
  return out.str();
}

std::string pattern_map(const MultitypePattern& pattern, const std::string& title) {
  const double W = 640;
  const double H = 540;
  std::ostringstream out;
  out << open(W, H, title);
  const Frame f = spatial_frame(pattern.window.bbox(), 60, 40, 440, 440);
  window_outline(out, f, pattern.window);
  for (Eigen::Index k = 0; k < pattern.size(); ++k) {
    const auto t = static_cast<std::size_t>(pattern.types[static_cast<std::size_t>(k)]);
    out << "<circle cx=\"" << num(f.px(pattern.points(0, k))) << "\" cy=\"" << num(f.py(pattern.points(1, k)))
        << "\" r=\"1.6\" fill=\"" << kPalette[t % kPalette.size()] << "\"/>\n";
  }
  f.axes(out, "x", "y");
  std::vector<std::pair<std::string, std::string>> items;
  for (std::size_t k = 0; k < pattern.type_levels.size(); ++k) {
    items.emplace_back(pattern.type_levels[k], kPalette[k % kPalette.size()]);
  }
  legend(out, f.left + f.width + 16, f.top + 10, items, true);
  out << "</svg>\n";
  return out.str();
}

std::string line_plot(const std::vector<SummaryFunction>& functions, const std::string& title) {
  const double W = 640;
  const double H = 440;
  std::ostringstream out;
  out << open(W, H, title);
  Range xr;
  Range yr;
  for (const auto& fn : functions) {
    xr.add_all(fn.r);
    yr.add_all(fn.values);
    yr.add_all(fn.theoretical);
  }
  const Frame f{70, 40, 400, 340, xr.padded(), yr.padded()};
  std::vector<std::pair<std::string, std::string>> items;
  for (std::size_t k = 0; k < functions.size(); ++k) {
    const auto& fn = functions[k];
    const std::string colour = kPalette[k % kPalette.size()];
    f.curve(out, fn.r, fn.theoretical, colour, 1.0, "stroke-dasharray=\"5,4\"");
    f.curve(out, fn.r, fn.values, colour, 1.8);
    std::string label = fn.name;
    if (!fn.type_i.empty()) label += " " + fn.type_i + (fn.type_j.empty() ? "" : ", " + fn.type_j);
    items.emplace_back(label, colour);
  }
  items.emplace_back("theoretical (dashed)", "#999999");
  f.axes(out, "r", functions.empty() ? "" : functions.front().name);
  legend(out, f.left + f.width + 12, f.top + 10, items);
  out << "</svg>\n";
  return out.str();
}

std::string envelope_plot(const EnvelopeResult& result, const std::string& title) {
  const double W = 640;
  const double H = 460;
  std::ostringstream out;
  out << open(W, H, title);
  Range xr;
  Range yr;
  xr.add_all(result.r);
  yr.add_all(result.observed);
  yr.add_all(result.lower);
  yr.add_all(result.upper);
  const Frame f{70, 40, 400, 340, xr.padded(), yr.padded()};
  f.band(out, result.r, result.lower, result.upper, "#c6dbef");
  f.curve(out, result.r, result.centre, "#555555", 1.0, "stroke-dasharray=\"5,4\"");
  f.curve(out, result.r, result.observed, "#000000", 1.8);
  for (double x : result.exits) {
    out << "<line x1=\"" << num(f.px(x)) << "\" y1=\"" << num(f.top + f.height) << "\" x2=\"" << num(f.px(x))
        << "\" y2=\"" << num(f.top + f.height - 6) << "\" stroke=\"#d62728\" stroke-width=\"1.5\"/>\n";
  }
  f.axes(out, "r", result.statistic);
  legend(out, f.left + f.width + 12, f.top + 10,
         {{"observed", "#000000"}, {"simulation mean", "#555555"}, {"central region", "#c6dbef"}});
  std::ostringstream note;
  note << std::setprecision(4) << "p = " << result.p_value << ", " << 100 * (1 - result.alpha) << "% "
       << to_string(result.side) << ", s = " << result.nsim;
  out << "<text x=\"" << num(f.left) << "\" y=\"" << num(H - 14) << "\" font-size=\"11\">" << escape(note.str())
      << "</text>\n";
  out << "</svg>\n";
  return out.str();
}

std::string group_panels(const GroupedCurves& grouped, const EnvelopeResult& result, const std::string& title) {
  const std::vector<std::string> levels = grouped.levels();
  const auto nr = grouped.r.size();
  const double panel = 300;
  const double W = 80 + panel * static_cast<double>(levels.size()) + 20;
  const double H = 430;
  std::ostringstream out;
  out << open(W, H, title);
  Range xr;
  Range yr;
  xr.add_all(grouped.r);
  yr.add_all(grouped.curves.reshaped());
  yr.add_all(result.lower);
  yr.add_all(result.upper);
  const Range xp = xr.padded();
  const Range yp = yr.padded();
  for (std::size_t g = 0; g < levels.size(); ++g) {
    const Frame f{70 + panel * static_cast<double>(g), 50, panel - 50, 320, xp, yp};
    const auto off = static_cast<Eigen::Index>(g) * nr;
    const bool has_segment = result.r.size() >= off + nr;
    if (has_segment) {
      f.band(out, grouped.r, result.lower.segment(off, nr), result.upper.segment(off, nr), "#c6dbef");
    }
    for (Eigen::Index i = 0; i < grouped.curves.rows(); ++i) {
      if (grouped.labels[static_cast<std::size_t>(i)] != levels[g]) continue;
      f.curve(out, grouped.r, grouped.curves.row(i).transpose(), "#bbbbbb", 0.6);
    }
    if (has_segment) {
      f.curve(out, grouped.r, result.centre.segment(off, nr), "#555555", 1.0, "stroke-dasharray=\"5,4\"");
      f.curve(out, grouped.r, result.observed.segment(off, nr), "#000000", 1.8);
    }
    f.axes(out, "r", g == 0 ? grouped.statistic : "");
    out << "<text x=\"" << num(f.left + f.width / 2) << "\" y=\"" << num(f.top - 6)
        << "\" font-size=\"12\" text-anchor=\"middle\">" << escape(levels[g]) << "</text>\n";
  }
  std::ostringstream note;
  note << std::setprecision(4) << "p = " << result.p_value << " (" << result.nsim << " permutations)";
  out << "<text x=\"70\" y=\"" << num(H - 14) << "\" font-size=\"11\">" << escape(note.str()) << "</text>\n";
  legend(out, W - 250, H - 30, {{"group statistic", "#000000"}, {"patient curves", "#bbbbbb"}});
  legend(out, W - 120, H - 30, {{"central region", "#c6dbef"}}, true);
  out << "</svg>\n";
  return out.str();
}

}  // namespace cellpp::svg
