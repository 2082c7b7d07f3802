#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

namespace scenerep::sim {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double k) const { return {x * k, y * k}; }
  double dot(Vec2 o) const { return x * o.x + y * o.y; }
  double cross(Vec2 o) const { return x * o.y - y * o.x; }
  double norm() const { return std::hypot(x, y); }
  bool operator==(const Vec2&) const = default;
};

inline Vec2 unit_from_heading(double heading) { return {std::cos(heading), std::sin(heading)}; }

/// Wraps an angle to (-pi, pi].
inline double wrap_angle(double a) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  a = std::fmod(a + std::numbers::pi, kTwoPi);
  if (a <= 0.0) a += kTwoPi;
  return a - std::numbers::pi;
}

/// Result of projecting a point onto a polyline.
struct Projection {
  double s = 0.0;        // arc length of the foot point
  double lateral = 0.0;  // signed offset, positive to the left of travel direction
  double distance = 0.0; // unsigned distance to the foot point
};

/// Piecewise-linear curve parameterized by arc length.
class Polyline {
 public:
  Polyline() = default;
  explicit Polyline(std::vector<Vec2> points);

  const std::vector<Vec2>& points() const { return points_; }
  double length() const { return cumulative_.empty() ? 0.0 : cumulative_.back(); }

  Vec2 point_at(double s) const;
  double heading_at(double s) const;
  /// Unit normal pointing to the left of the travel direction.
  Vec2 left_normal_at(double s) const;
  Projection project(Vec2 p) const;

  /// Position shifted laterally by `lateral` meters (positive = left).
  Vec2 offset_point(double s, double lateral) const {
    return point_at(s) + left_normal_at(s) * lateral;
  }

 private:
  std::size_t segment_index(double s) const;

  std::vector<Vec2> points_;
  std::vector<double> cumulative_;
};

/// Vehicle footprint used for collision checks.
struct OrientedBox {
  Vec2 center;
  double heading = 0.0;
  double length = 4.5;
  double width = 1.8;
};

/// Separating-axis overlap test; symmetric in its arguments.
bool boxes_overlap(const OrientedBox& a, const OrientedBox& b);

/// Builds a circular arc polyline with roughly one point per `step` meters.
std::vector<Vec2> arc_points(Vec2 center, double radius, double start_angle, double sweep,
                             double step = 0.5);

/// Straight line from a to b sampled every `step` meters.
std::vector<Vec2> line_points(Vec2 a, Vec2 b, double step = 1.0);

/// Offsets a polyline laterally by a constant distance (positive = left).
std::vector<Vec2> offset_polyline(std::span<const Vec2> points, double lateral);

}  // namespace scenerep::sim
