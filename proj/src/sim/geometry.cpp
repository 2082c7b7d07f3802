#include "scenerep/sim/geometry.hpp"

#include <algorithm>
#include <array>
#include <limits>

#include "scenerep/errors.hpp"

namespace scenerep::sim {

Polyline::Polyline(std::vector<Vec2> points) : points_(std::move(points)) {
  if (points_.size() < 2) throw ConfigError("polyline needs at least two points");
  cumulative_.reserve(points_.size());
  cumulative_.push_back(0.0);
  for (std::size_t i = 1; i < points_.size(); ++i) {
    const double seg = (points_[i] - points_[i - 1]).norm();
    if (!(seg > 1e-9)) throw ConfigError("polyline arc length must be strictly increasing");
    cumulative_.push_back(cumulative_.back() + seg);
  }
}

std::size_t Polyline::segment_index(double s) const {
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), s);
  std::size_t idx = it == cumulative_.begin() ? 0 : static_cast<std::size_t>(it - cumulative_.begin()) - 1;
  return std::min(idx, points_.size() - 2);
}

Vec2 Polyline::point_at(double s) const {
  s = std::clamp(s, 0.0, length());
  const std::size_t i = segment_index(s);
  const double seg = cumulative_[i + 1] - cumulative_[i];
  const double t = (s - cumulative_[i]) / seg;
  return points_[i] + (points_[i + 1] - points_[i]) * t;
}

double Polyline::heading_at(double s) const {
  const std::size_t i = segment_index(std::clamp(s, 0.0, length()));
  const Vec2 d = points_[i + 1] - points_[i];
  return std::atan2(d.y, d.x);
}

Vec2 Polyline::left_normal_at(double s) const {
  const double h = heading_at(s);
  return {-std::sin(h), std::cos(h)};
}

Projection Polyline::project(Vec2 p) const {
  Projection best;
  best.distance = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < points_.size(); ++i) {
    const Vec2 a = points_[i];
    const Vec2 d = points_[i + 1] - a;
    const double len2 = d.dot(d);
    const double t = std::clamp((p - a).dot(d) / len2, 0.0, 1.0);
    const Vec2 foot = a + d * t;
    const double dist = (p - foot).norm();
    if (dist < best.distance) {
      best.distance = dist;
      best.s = cumulative_[i] + t * std::sqrt(len2);
      best.lateral = d.cross(p - a) / std::sqrt(len2);
    }
  }
  return best;
}

namespace {

std::array<Vec2, 4> corners(const OrientedBox& b) {
  const Vec2 f = unit_from_heading(b.heading) * (0.5 * b.length);
  const Vec2 l = Vec2{-std::sin(b.heading), std::cos(b.heading)} * (0.5 * b.width);
  return {b.center + f + l, b.center + f - l, b.center - f - l, b.center - f + l};
}

bool separated_on(Vec2 axis, const std::array<Vec2, 4>& a, const std::array<Vec2, 4>& b) {
  double amin = std::numeric_limits<double>::infinity(), amax = -amin;
  double bmin = amin, bmax = -amin;
  for (const auto& p : a) {
    const double v = p.dot(axis);
    amin = std::min(amin, v);
    amax = std::max(amax, v);
  }
  for (const auto& p : b) {
    const double v = p.dot(axis);
    bmin = std::min(bmin, v);
    bmax = std::max(bmax, v);
  }
  return amax < bmin || bmax < amin;
}

}  // namespace

bool boxes_overlap(const OrientedBox& a, const OrientedBox& b) {
  const auto ca = corners(a);
  const auto cb = corners(b);
  // Axes are collected from both boxes in a fixed order so the test is symmetric.
  const std::array<Vec2, 4> axes = {unit_from_heading(a.heading),
                                    unit_from_heading(a.heading + std::numbers::pi / 2),
                                    unit_from_heading(b.heading),
                                    unit_from_heading(b.heading + std::numbers::pi / 2)};
  for (const auto& axis : axes) {
    if (separated_on(axis, ca, cb)) return false;
  }
  return true;
}

std::vector<Vec2> arc_points(Vec2 center, double radius, double start_angle, double sweep,
                             double step) {
  const int n = std::max(2, static_cast<int>(std::ceil(std::abs(sweep) * radius / step)) + 1);
  std::vector<Vec2> pts;
  pts.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double a = start_angle + sweep * i / (n - 1);
    pts.push_back(center + unit_from_heading(a) * radius);
  }
  return pts;
}

std::vector<Vec2> line_points(Vec2 a, Vec2 b, double step) {
  const double len = (b - a).norm();
  const int n = std::max(2, static_cast<int>(std::ceil(len / step)) + 1);
  std::vector<Vec2> pts;
  pts.reserve(n);
  for (int i = 0; i < n; ++i) pts.push_back(a + (b - a) * (static_cast<double>(i) / (n - 1)));
  return pts;
}

std::vector<Vec2> offset_polyline(std::span<const Vec2> points, double lateral) {
  std::vector<Vec2> out;
  out.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Vec2 d = i + 1 < points.size() ? points[i + 1] - points[i] : points[i] - points[i - 1];
    const Vec2 prev = i > 0 ? points[i] - points[i - 1] : d;
    Vec2 t = (d * (1.0 / d.norm())) + (prev * (1.0 / prev.norm()));
    t = t * (1.0 / t.norm());
    out.push_back(points[i] + Vec2{-t.y, t.x} * lateral);
  }
  return out;
}

}  // namespace scenerep::sim
