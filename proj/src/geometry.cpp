#include "cellpp/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <vector>

#include "cellpp/error.hpp"

namespace cellpp {

namespace {

double cross(const Point2& a, const Point2& b) { return a.x() * b.y() - a.y() * b.x(); }

double segment_distance(const Point2& p, const Point2& a, const Point2& b) {
  const Point2 ab = b - a;
  const double len2 = ab.squaredNorm();
  double t = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return (a + t * ab - p).norm();
}

// Strict crossing of two segments (shared endpoints and touching do not count).
bool segments_cross(const Point2& a, const Point2& b, const Point2& c, const Point2& d) {
  const double d1 = cross(b - a, c - a);
  const double d2 = cross(b - a, d - a);
  const double d3 = cross(d - c, a - c);
  const double d4 = cross(d - c, b - c);
  return ((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0));
}

Points clean_vertices(const Points& in) {
  std::vector<Point2> out;
  out.reserve(static_cast<std::size_t>(in.cols()));
  for (Eigen::Index k = 0; k < in.cols(); ++k) {
    const Point2 p = in.col(k);
    require(p.allFinite(), ErrorCode::InvalidWindow, "non-finite window vertex");
    if (out.empty() || p != out.back()) out.push_back(p);
  }
  while (out.size() > 1 && out.front() == out.back()) out.pop_back();
  Points v(2, static_cast<Eigen::Index>(out.size()));
  for (std::size_t k = 0; k < out.size(); ++k) v.col(static_cast<Eigen::Index>(k)) = out[k];
  return v;
}

Points remove_collinear(const Points& v, double tol) {
  const Eigen::Index n = v.cols();
  if (n < 4) return v;
  std::vector<Point2> out;
  for (Eigen::Index k = 0; k < n; ++k) {
    const Point2 prev = v.col((k + n - 1) % n);
    const Point2 cur = v.col(k);
    const Point2 next = v.col((k + 1) % n);
    if (std::abs(cross(cur - prev, next - cur)) > tol) out.push_back(cur);
  }
  Points r(2, static_cast<Eigen::Index>(out.size()));
  for (std::size_t k = 0; k < out.size(); ++k) r.col(static_cast<Eigen::Index>(k)) = out[k];
  return r;
}

// Keeps the part of a polygon on the side normal.(p - origin) >= offset.
Points clip_halfplane(const Points& poly, const Point2& origin, const Point2& normal, double offset) {
  std::vector<Point2> out;
  const Eigen::Index n = poly.cols();
  for (Eigen::Index k = 0; k < n; ++k) {
    const Point2 p = poly.col(k);
    const Point2 q = poly.col((k + 1) % n);
    const double fp = normal.dot(p - origin) - offset;
    const double fq = normal.dot(q - origin) - offset;
    if (fp >= 0) out.push_back(p);
    if ((fp >= 0) != (fq >= 0)) {
      const double t = fp / (fp - fq);
      out.push_back(p + t * (q - p));
    }
  }
  Points r(2, static_cast<Eigen::Index>(out.size()));
  for (std::size_t k = 0; k < out.size(); ++k) r.col(static_cast<Eigen::Index>(k)) = out[k];
  return r;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

Window erode_convex(const Window& w, double radius) {
  Points poly = w.vertices();
  const Points& v = w.vertices();
  const Eigen::Index n = v.cols();
  for (Eigen::Index k = 0; k < n && poly.cols() >= 3; ++k) {
    const Point2 a = v.col(k);
    const Point2 b = v.col((k + 1) % n);
    const Point2 e = (b - a).normalized();
    const Point2 inward(-e.y(), e.x());
    poly = clip_halfplane(poly, a, inward, radius);
  }
  poly = clean_vertices(poly);
  require(poly.cols() >= 3 && std::abs(signed_area(poly)) > 1e-12 * w.area(), ErrorCode::EmptyErosion,
          "erosion by " + std::to_string(radius) + " leaves nothing of the window");
  return Window(remove_collinear(poly, 1e-14 * w.area()));
}

// Raster erosion: cells whose centre is at least `radius` from the boundary,
// outer boundary of the largest 4-connected component traced as a polygon.
Window erode_raster(const Window& w, double radius) {
  const Box2& box = w.bbox();
  const Point2 size = box.sizes();
  const double h = std::max(radius / 50.0, size.maxCoeff() / 1024.0);
  const int nx = static_cast<int>(std::ceil(size.x() / h));
  const int ny = static_cast<int>(std::ceil(size.y() / h));
  auto at = [nx](int ix, int iy) { return static_cast<std::size_t>(iy) * nx + ix; };
  std::vector<char> filled(static_cast<std::size_t>(nx) * ny, 0);
  for (int iy = 0; iy < ny; ++iy) {
    for (int ix = 0; ix < nx; ++ix) {
      const Point2 c = box.min() + Point2((ix + 0.5) * h, (iy + 0.5) * h);
      if (w.contains(c) && w.boundary_distance(c) >= radius) filled[at(ix, iy)] = 1;
    }
  }
  // connected components, keep the largest
  std::vector<int> label(filled.size(), -1);
  int best = -1;
  std::size_t best_size = 0;
  int next_label = 0;
  std::vector<std::pair<int, int>> stack;
  for (int iy = 0; iy < ny; ++iy) {
    for (int ix = 0; ix < nx; ++ix) {
      if (!filled[at(ix, iy)] || label[at(ix, iy)] >= 0) continue;
      std::size_t count = 0;
      stack.assign(1, {ix, iy});
      label[at(ix, iy)] = next_label;
      while (!stack.empty()) {
        auto [cx, cy] = stack.back();
        stack.pop_back();
        ++count;
        const int nbr[4][2] = {{cx + 1, cy}, {cx - 1, cy}, {cx, cy + 1}, {cx, cy - 1}};
        for (const auto& q : nbr) {
          if (q[0] < 0 || q[1] < 0 || q[0] >= nx || q[1] >= ny) continue;
          if (filled[at(q[0], q[1])] && label[at(q[0], q[1])] < 0) {
            label[at(q[0], q[1])] = next_label;
            stack.emplace_back(q[0], q[1]);
          }
        }
      }
      if (count > best_size) {
        best_size = count;
        best = next_label;
      }
      ++next_label;
    }
  }
  require(best >= 0, ErrorCode::EmptyErosion, "erosion by " + std::to_string(radius) + " leaves nothing of the window");

  auto inside = [&](int ix, int iy) {
    return ix >= 0 && iy >= 0 && ix < nx && iy < ny && label[at(ix, iy)] == best;
  };
  // directed boundary edges with the component on the left
  using Vertex = std::pair<int, int>;
  std::multimap<Vertex, Vertex> edges;
  for (int iy = 0; iy < ny; ++iy) {
    for (int ix = 0; ix < nx; ++ix) {
      if (!inside(ix, iy)) continue;
      if (!inside(ix, iy - 1)) edges.emplace(Vertex{ix, iy}, Vertex{ix + 1, iy});
      if (!inside(ix + 1, iy)) edges.emplace(Vertex{ix + 1, iy}, Vertex{ix + 1, iy + 1});
      if (!inside(ix, iy + 1)) edges.emplace(Vertex{ix + 1, iy + 1}, Vertex{ix, iy + 1});
      if (!inside(ix - 1, iy)) edges.emplace(Vertex{ix, iy + 1}, Vertex{ix, iy});
    }
  }
  Points best_loop;
  double best_area = 0.0;
  while (!edges.empty()) {
    auto it = edges.begin();
    const Vertex start = it->first;
    Vertex prev = it->first;
    Vertex cur = it->second;
    edges.erase(it);
    std::vector<Vertex> loop{start};
    while (cur != start) {
      loop.push_back(cur);
      auto [lo, hi] = edges.equal_range(cur);
      if (lo == hi) break;
      // at pinch vertices take the leftmost turn so loops stay separate
      auto chosen = lo;
      if (std::next(lo) != hi) {
        const int dx = cur.first - prev.first;
        const int dy = cur.second - prev.second;
        for (auto e = lo; e != hi; ++e) {
          const int ex = e->second.first - cur.first;
          const int ey = e->second.second - cur.second;
          if (dx * ey - dy * ex > 0) chosen = e;
        }
      }
      prev = cur;
      cur = chosen->second;
      edges.erase(chosen);
    }
    Points poly(2, static_cast<Eigen::Index>(loop.size()));
    for (std::size_t k = 0; k < loop.size(); ++k) {
      poly.col(static_cast<Eigen::Index>(k)) = box.min() + Point2(loop[k].first * h, loop[k].second * h);
    }
    const double a = signed_area(poly);
    if (a > best_area) {
      best_area = a;
      best_loop = poly;
    }
  }
  require(best_loop.cols() >= 3, ErrorCode::EmptyErosion, "erosion produced no boundary");
  return Window(remove_collinear(best_loop, 1e-9 * h * h));
}

// Sum of cross products along the parts of a's boundary lying in b.
double clipped_boundary_integral(const Window& a, const Window& b, bool keep_shared) {
  const Points& va = a.vertices();
  const Points& vb = b.vertices();
  const Eigen::Index na = va.cols();
  const Eigen::Index nb = vb.cols();
  const double scale = std::max(a.bbox().diagonal().norm(), b.bbox().diagonal().norm());
  const double eps = 1e-12 * scale;
  double total = 0.0;
  std::vector<double> ts;
  for (Eigen::Index i = 0; i < na; ++i) {
    const Point2 p = va.col(i);
    const Point2 q = va.col((i + 1) % na);
    const Point2 d = q - p;
    const double len2 = d.squaredNorm();
    ts.assign({0.0, 1.0});
    for (Eigen::Index k = 0; k < nb; ++k) {
      const Point2 c = vb.col(k);
      const Point2 e = vb.col((k + 1) % nb) - c;
      const double denom = cross(d, e);
      if (std::abs(denom) > 1e-14 * std::sqrt(len2 * e.squaredNorm())) {
        const double t = cross(c - p, e) / denom;
        const double s = cross(c - p, d) / denom;
        if (t > 0.0 && t < 1.0 && s >= -1e-12 && s <= 1.0 + 1e-12) ts.push_back(t);
      } else if (std::abs(cross(c - p, d)) <= eps * std::sqrt(len2)) {
        // collinear: split at the other segment's endpoints
        for (const Point2& x : {c, Point2(c + e)}) {
          const double t = (x - p).dot(d) / len2;
          if (t > 0.0 && t < 1.0) ts.push_back(t);
        }
      }
    }
    std::sort(ts.begin(), ts.end());
    for (std::size_t k = 0; k + 1 < ts.size(); ++k) {
      if (ts[k + 1] - ts[k] <= 1e-15) continue;
      const Point2 s0 = p + ts[k] * d;
      const Point2 s1 = p + ts[k + 1] * d;
      const Point2 mid = 0.5 * (s0 + s1);
      bool on_boundary = false;
      bool same_direction = false;
      for (Eigen::Index m = 0; m < nb; ++m) {
        const Point2 c = vb.col(m);
        const Point2 e = vb.col((m + 1) % nb);
        if (segment_distance(mid, c, e) <= eps) {
          on_boundary = true;
          same_direction = same_direction || (e - c).dot(d) > 0.0;
        }
      }
      bool take;
      if (on_boundary) {
        take = keep_shared && same_direction;
      } else {
        take = b.contains(mid);
      }
      if (take) total += cross(s0, s1);
    }
  }
  return total;
}

}  // namespace

double signed_area(const Points& v) {
  const Eigen::Index n = v.cols();
  double s = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index next = (k + 1) % n;
    s += v(0, k) * v(1, next) - v(0, next) * v(1, k);
  }
  return 0.5 * s;
}

Window::Window(const Points& raw) {
  vertices_ = clean_vertices(raw);
  require(vertices_.cols() >= 3, ErrorCode::InvalidWindow, "a window needs at least three distinct vertices");
  double a = signed_area(vertices_);
  if (a < 0) {
    vertices_ = vertices_.rowwise().reverse().eval();
    a = -a;
  }
  bbox_ = Box2(vertices_.rowwise().minCoeff(), vertices_.rowwise().maxCoeff());
  require(a > 1e-14 * std::max(1.0, bbox_.sizes().prod()), ErrorCode::InvalidWindow, "window has zero area");
  area_ = a;
  const Eigen::Index n = vertices_.cols();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = i + 2; k < n; ++k) {
      if (i == 0 && k == n - 1) continue;
      require(!segments_cross(vertices_.col(i), vertices_.col((i + 1) % n), vertices_.col(k), vertices_.col((k + 1) % n)),
              ErrorCode::InvalidWindow, "window boundary intersects itself");
    }
  }
  convex_ = true;
  for (Eigen::Index k = 0; k < n; ++k) {
    const Point2 e0 = vertices_.col((k + 1) % n) - vertices_.col(k);
    const Point2 e1 = vertices_.col((k + 2) % n) - vertices_.col((k + 1) % n);
    if (cross(e0, e1) < -1e-12 * e0.norm() * e1.norm()) {
      convex_ = false;
      break;
    }
  }
  rectangle_ = n == 4;
  for (Eigen::Index k = 0; k < n && rectangle_; ++k) {
    const Point2 e = vertices_.col((k + 1) % n) - vertices_.col(k);
    rectangle_ = e.x() == 0.0 || e.y() == 0.0;
  }
}

Window Window::rectangle(double xmin, double ymin, double xmax, double ymax) {
  require(xmax > xmin && ymax > ymin, ErrorCode::InvalidWindow, "rectangle with non-positive side");
  Points v(2, 4);
  v << xmin, xmax, xmax, xmin, ymin, ymin, ymax, ymax;
  return Window(v);
}

bool Window::contains(const Point2& u) const {
  if (rectangle_) {
    return u.x() >= bbox_.min().x() && u.x() <= bbox_.max().x() && u.y() >= bbox_.min().y() && u.y() <= bbox_.max().y();
  }
  if (!bbox_.contains(u)) return false;
  const double eps = 1e-12 * bbox_.diagonal().norm();
  const Eigen::Index n = vertices_.cols();
  bool inside = false;
  for (Eigen::Index i = 0, j = n - 1; i < n; j = i++) {
    const Point2 a = vertices_.col(j);
    const Point2 b = vertices_.col(i);
    if (segment_distance(u, a, b) <= eps) return true;
    if ((b.y() > u.y()) != (a.y() > u.y())) {
      const double xint = a.x() + (u.y() - a.y()) * (b.x() - a.x()) / (b.y() - a.y());
      if (u.x() < xint) inside = !inside;
    }
  }
  return inside;
}

double Window::boundary_distance(const Point2& u) const {
  if (rectangle_) {
    const Point2 lo = u - bbox_.min();
    const Point2 hi = bbox_.max() - u;
    if (lo.minCoeff() >= 0 && hi.minCoeff() >= 0) return std::min(lo.minCoeff(), hi.minCoeff());
  }
  const Eigen::Index n = vertices_.cols();
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < n; ++k) {
    best = std::min(best, segment_distance(u, vertices_.col(k), vertices_.col((k + 1) % n)));
  }
  return best;
}

Point2 Window::centroid() const {
  const Eigen::Index n = vertices_.cols();
  // shift to the first vertex for conditioning
  const Point2 o = vertices_.col(0);
  Point2 c = Point2::Zero();
  double a2 = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    const Point2 p = vertices_.col(k) - o;
    const Point2 q = vertices_.col((k + 1) % n) - o;
    const double w = cross(p, q);
    a2 += w;
    c += w * (p + q);
  }
  return o + c / (3.0 * a2);
}

Window Window::translated(const Point2& shift) const {
  Window w = *this;
  w.vertices_.colwise() += shift;
  w.bbox_.translate(shift);
  return w;
}

Points convex_hull(const Points& points) {
  std::vector<Point2> p;
  p.reserve(static_cast<std::size_t>(points.cols()));
  for (Eigen::Index k = 0; k < points.cols(); ++k) p.emplace_back(points.col(k));
  std::sort(p.begin(), p.end(), [](const Point2& a, const Point2& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  p.erase(std::unique(p.begin(), p.end()), p.end());
  if (p.size() < 3) {
    Points r(2, static_cast<Eigen::Index>(p.size()));
    for (std::size_t k = 0; k < p.size(); ++k) r.col(static_cast<Eigen::Index>(k)) = p[k];
    return r;
  }
  std::vector<Point2> hull(2 * p.size());
  std::size_t k = 0;
  for (const auto& pt : p) {
    while (k >= 2 && cross(hull[k - 1] - hull[k - 2], pt - hull[k - 2]) <= 0) --k;
    hull[k++] = pt;
  }
  for (std::size_t i = p.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(hull[k - 1] - hull[k - 2], p[i] - hull[k - 2]) <= 0) --k;
    hull[k++] = p[i];
  }
  hull.resize(k - 1);
  Points r(2, static_cast<Eigen::Index>(hull.size()));
  for (std::size_t i = 0; i < hull.size(); ++i) r.col(static_cast<Eigen::Index>(i)) = hull[i];
  return r;
}

Window ripley_rasson_window(const Points& points) {
  const Eigen::Index n = points.cols();
  require(points.allFinite(), ErrorCode::InvalidArgument, "non-finite point coordinates");
  const Points hull = convex_hull(points);
  require(hull.cols() >= 3 && std::abs(signed_area(hull)) > 0.0, ErrorCode::CollinearInput,
          "points do not span a two-dimensional hull");
  const auto omega = static_cast<double>(hull.cols());
  require(static_cast<double>(n) > omega, ErrorCode::DegenerateDilation,
          "dilation factor undefined: " + std::to_string(n) + " points, " + std::to_string(hull.cols()) +
              " hull vertices");
  const double factor = 1.0 / std::sqrt(1.0 - omega / static_cast<double>(n));
  const Window hull_window(hull);
  const Point2 c = hull_window.centroid();
  Points dilated = hull_window.vertices();
  dilated = ((dilated.colwise() - c) * factor).colwise() + c;
  return Window(dilated);
}

Window erode(const Window& window, double radius) {
  require(radius >= 0.0 && std::isfinite(radius), ErrorCode::InvalidArgument, "erosion radius must be non-negative");
  if (radius == 0.0) return window;
  if (window.is_rectangle()) {
    const Box2& b = window.bbox();
    const Point2 lo = b.min().array() + radius;
    const Point2 hi = b.max().array() - radius;
    require((hi - lo).minCoeff() > 0.0, ErrorCode::EmptyErosion,
            "erosion by " + std::to_string(radius) + " leaves nothing of the window");
    return Window::rectangle(lo.x(), lo.y(), hi.x(), hi.y());
  }
  if (window.is_convex()) return erode_convex(window, radius);
  return erode_raster(window, radius);
}

WindowQuery window_queries(const Window& window, const Point2& u) { return {window.contains(u), window.area()}; }

double intersection_area(const Window& a, const Window& b) {
  if (!a.bbox().intersects(b.bbox())) return 0.0;
  if (a.is_rectangle() && b.is_rectangle()) {
    const Box2 i = a.bbox().intersection(b.bbox());
    return i.isEmpty() ? 0.0 : i.volume();
  }
  const double twice = clipped_boundary_integral(a, b, true) + clipped_boundary_integral(b, a, false);
  return std::max(0.0, 0.5 * twice);
}

double translated_overlap(const Window& window, const Point2& shift) {
  if (window.is_rectangle()) {
    const Point2 s = window.bbox().sizes();
    return std::max(0.0, s.x() - std::abs(shift.x())) * std::max(0.0, s.y() - std::abs(shift.y()));
  }
  return intersection_area(window, window.translated(shift));
}

double gaussian_mass(const Window& window, const Point2& u, double sigma) {
  require(sigma > 0.0, ErrorCode::InvalidArgument, "Gaussian bandwidth must be positive");
  if (window.is_rectangle()) {
    const Box2& b = window.bbox();
    const double mx = normal_cdf((b.max().x() - u.x()) / sigma) - normal_cdf((b.min().x() - u.x()) / sigma);
    const double my = normal_cdf((b.max().y() - u.y()) / sigma) - normal_cdf((b.min().y() - u.y()) / sigma);
    return mx * my;
  }
  // radial integration: along each ray the Gaussian mass between distances
  // a < b is (exp(-a^2/2s^2) - exp(-b^2/2s^2)) / (2 pi) per unit angle
  constexpr int kRays = 256;
  const Points& v = window.vertices();
  const Eigen::Index n = v.cols();
  const double inv2s2 = 0.5 / (sigma * sigma);
  const bool start_inside = window.contains(u);
  std::vector<double> hits;
  double total = 0.0;
  for (int k = 0; k < kRays; ++k) {
    const double theta = (k + 0.5) * 2.0 * std::numbers::pi / kRays;
    const Point2 dir(std::cos(theta), std::sin(theta));
    hits.clear();
    for (Eigen::Index i = 0; i < n; ++i) {
      const Point2 a = v.col(i);
      const Point2 e = v.col((i + 1) % n) - a;
      const double denom = cross(dir, e);
      if (denom == 0.0) continue;
      const double t = cross(a - u, e) / denom;
      const double s = cross(a - u, dir) / denom;
      if (t > 0.0 && s >= 0.0 && s < 1.0) hits.push_back(t);
    }
    std::sort(hits.begin(), hits.end());
    bool inside = start_inside;
    double last = 0.0;
    double ray = 0.0;
    for (double t : hits) {
      if (inside) ray += std::exp(-last * last * inv2s2) - std::exp(-t * t * inv2s2);
      inside = !inside;
      last = t;
    }
    if (inside) ray += std::exp(-last * last * inv2s2);
    total += ray;
  }
  return total / kRays;
}

void to_json(nlohmann::json& j, const Window& w) {
  nlohmann::json verts = nlohmann::json::array();
  for (Eigen::Index k = 0; k < w.vertex_count(); ++k) verts.push_back({w.vertices()(0, k), w.vertices()(1, k)});
  j = nlohmann::json{{"vertices", verts}};
}

Window window_from_json(const nlohmann::json& j) {
  require(j.is_object() && j.contains("vertices") && j["vertices"].is_array(), ErrorCode::InvalidWindow,
          "window JSON needs a \"vertices\" array");
  const auto& verts = j["vertices"];
  Points v(2, static_cast<Eigen::Index>(verts.size()));
  for (std::size_t k = 0; k < verts.size(); ++k) {
    require(verts[k].is_array() && verts[k].size() == 2, ErrorCode::InvalidWindow, "vertex must be [x, y]");
    v(0, static_cast<Eigen::Index>(k)) = verts[k][0].get<double>();
    v(1, static_cast<Eigen::Index>(k)) = verts[k][1].get<double>();
  }
  return Window(v);
}

}  // namespace cellpp
