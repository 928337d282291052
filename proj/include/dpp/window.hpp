#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dpp/error.hpp"
#include "dpp/model.hpp"

namespace dpp {

// Axis-aligned rectangle [lo, hi] (an interval when dim = 1).
struct Window {
  int dim = 2;
  Vec lo{0.0, 0.0};
  Vec hi{1.0, 1.0};

  static Window unit(int dim = 2) { return {dim, {0.0, 0.0}, {1.0, dim == 2 ? 1.0 : 0.0}}; }
  static Window rect(double x0, double x1, double y0, double y1) { return {2, {x0, y0}, {x1, y1}}; }
  static Window interval(double x0, double x1) { return {1, {x0, 0.0}, {x1, 0.0}}; }
  // centred cube of side s, e.g. S = centred(1) and S/2 = centred(0.5)
  static Window centred(double s, int dim = 2) {
    return {dim, {-0.5 * s, dim == 2 ? -0.5 * s : 0.0}, {0.5 * s, dim == 2 ? 0.5 * s : 0.0}};
  }

  double side(int i) const { return hi[i] - lo[i]; }
  double volume() const { return dim == 1 ? side(0) : side(0) * side(1); }
  double min_side() const { return dim == 1 ? side(0) : std::min(side(0), side(1)); }
  Vec center() const { return {0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])}; }
  bool contains(const Vec& p, double tol = 0.0) const {
    for (int i = 0; i < dim; ++i)
      if (p[i] < lo[i] - tol || p[i] > hi[i] + tol) return false;
    return true;
  }
  // distance from an interior point to the boundary
  double boundary_distance(const Vec& p) const {
    double b = std::min(p[0] - lo[0], hi[0] - p[0]);
    if (dim == 2) b = std::min({b, p[1] - lo[1], hi[1] - p[1]});
    return b;
  }
  // |W ominus r|, the window eroded by r
  double eroded_volume(double r) const {
    double v = std::max(side(0) - 2.0 * r, 0.0);
    if (dim == 2) v *= std::max(side(1) - 2.0 * r, 0.0);
    return v;
  }
  // |W cap (W + h)|
  double overlap_volume(const Vec& h) const {
    double v = std::max(side(0) - std::abs(h[0]), 0.0);
    if (dim == 2) v *= std::max(side(1) - std::abs(h[1]), 0.0);
    return v;
  }
  void check() const {
    if (dim != 1 && dim != 2) fail(ErrorKind::Domain, "window dimension must be 1 or 2");
    for (int i = 0; i < dim; ++i)
      if (!(hi[i] > lo[i]) || !std::isfinite(lo[i]) || !std::isfinite(hi[i]))
        fail(ErrorKind::Domain, "window must have positive side lengths");
  }
};

// Diagonal affine map T(x) = scale * x + shift.
struct AffineMap {
  int dim = 2;
  Vec scale{1.0, 1.0};
  Vec shift{0.0, 0.0};

  Vec apply(const Vec& x) const {
    Vec y{scale[0] * x[0] + shift[0], 0.0};
    if (dim == 2) y[1] = scale[1] * x[1] + shift[1];
    return y;
  }
  Vec inverse(const Vec& y) const {
    Vec x{(y[0] - shift[0]) / scale[0], 0.0};
    if (dim == 2) x[1] = (y[1] - shift[1]) / scale[1];
    return x;
  }
  double jacobian() const { return dim == 1 ? scale[0] : scale[0] * scale[1]; }
  Window apply(const Window& w) const {
    Window out = w;
    for (int i = 0; i < dim; ++i) {
      const double a = scale[i] * w.lo[i] + shift[i];
      const double b = scale[i] * w.hi[i] + shift[i];
      out.lo[i] = std::min(a, b);
      out.hi[i] = std::max(a, b);
    }
    return out;
  }
};

// Map taking R onto the centred cube of side s (s = 1 for S, 1/2 for S/2).
inline AffineMap map_to_centred(const Window& R, double s) {
  AffineMap T;
  T.dim = R.dim;
  const Vec c = R.center();
  for (int i = 0; i < R.dim; ++i) {
    T.scale[i] = s / R.side(i);
    T.shift[i] = -c[i] * T.scale[i];
  }
  return T;
}

struct PointPattern {
  Window window;
  std::vector<Vec> points;
  std::vector<int> marks;  // empty when unmarked

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  int dim() const { return window.dim; }
  bool marked() const { return !marks.empty(); }
  double intensity() const { return static_cast<double>(points.size()) / window.volume(); }

  // subpattern of the points carrying the given mark
  PointPattern with_mark(int mark) const {
    PointPattern out{window, {}, {}};
    for (std::size_t i = 0; i < points.size(); ++i)
      if (marks.at(i) == mark) out.points.push_back(points[i]);
    return out;
  }
};

// First pair of points closer than tol, if any (sweep over x-sorted order).
inline std::optional<std::pair<std::size_t, std::size_t>> find_duplicate(const PointPattern& p,
                                                                         double tol = 1e-12) {
  std::vector<std::size_t> idx(p.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return p.points[a][0] < p.points[b][0]; });
  for (std::size_t i = 0; i < idx.size(); ++i)
    for (std::size_t j = i + 1; j < idx.size(); ++j) {
      const Vec& a = p.points[idx[i]];
      const Vec& b = p.points[idx[j]];
      if (b[0] - a[0] > tol) break;
      const Vec d{a[0] - b[0], a[1] - b[1]};
      if (norm(d, p.dim()) <= tol) return std::make_pair(std::min(idx[i], idx[j]), std::max(idx[i], idx[j]));
    }
  return std::nullopt;
}

// Ingestion check: points inside the window and pairwise distinct.
inline void check_pattern(const PointPattern& p) {
  p.window.check();
  if (p.marked() && p.marks.size() != p.points.size())
    fail(ErrorKind::Domain, "marks must have one entry per point");
  for (std::size_t i = 0; i < p.size(); ++i)
    if (!p.window.contains(p.points[i], 1e-12))
      fail(ErrorKind::Domain, "point " + std::to_string(i) + " lies outside the window");
  if (auto dup = find_duplicate(p))
    fail(ErrorKind::NonPositiveDefinite, "points " + std::to_string(dup->first) + " and " +
                                             std::to_string(dup->second) +
                                             " coincide; the density vanishes at duplicate points");
}

}  // namespace dpp
