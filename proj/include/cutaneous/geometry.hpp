#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>

namespace cutaneous {

inline constexpr double kPi = std::numbers::pi;

constexpr double deg_to_rad(double deg) { return deg * kPi / 180.0; }
constexpr double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
  a = std::remainder(a, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  return a;
}

/// Planar point or vector in a station base frame, millimetres.
struct Point2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Point2 operator+(Point2 o) const { return {x + o.x, y + o.y}; }
  constexpr Point2 operator-(Point2 o) const { return {x - o.x, y - o.y}; }
  constexpr Point2 operator*(double s) const { return {x * s, y * s}; }
  constexpr Point2 operator-() const { return {-x, -y}; }
  constexpr bool operator==(const Point2&) const = default;

  double norm() const { return std::hypot(x, y); }
  bool finite() const { return std::isfinite(x) && std::isfinite(y); }
};

constexpr Point2 operator*(double s, Point2 p) { return p * s; }

constexpr double dot(Point2 a, Point2 b) { return a.x * b.x + a.y * b.y; }
constexpr double cross(Point2 a, Point2 b) { return a.x * b.y - a.y * b.x; }

inline double distance(Point2 a, Point2 b) { return (b - a).norm(); }

inline Point2 rotate(Point2 v, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

inline Point2 unit_vector(double angle) { return {std::cos(angle), std::sin(angle)}; }

struct Segment {
  Point2 a;
  Point2 b;
};

inline double point_segment_distance(Point2 p, const Segment& s) {
  const Point2 d = s.b - s.a;
  const double len2 = dot(d, d);
  if (len2 == 0.0) return distance(p, s.a);
  const double t = std::clamp(dot(p - s.a, d) / len2, 0.0, 1.0);
  return distance(p, s.a + d * t);
}

/// Minimum Euclidean distance between two closed segments (0 when they cross).
inline double segment_distance(const Segment& s1, const Segment& s2) {
  const Point2 d1 = s1.b - s1.a;
  const Point2 d2 = s2.b - s2.a;
  const double denom = cross(d1, d2);
  if (denom != 0.0) {
    const Point2 r = s2.a - s1.a;
    const double t = cross(r, d2) / denom;
    const double u = cross(r, d1) / denom;
    if (t >= 0.0 && t <= 1.0 && u >= 0.0 && u <= 1.0) return 0.0;
  }
  return std::min({point_segment_distance(s1.a, s2), point_segment_distance(s1.b, s2),
                   point_segment_distance(s2.a, s1), point_segment_distance(s2.b, s1)});
}

/// Axis-aligned ellipse, semi-axes in mm.
struct Ellipse {
  Point2 center;
  double semi_x = 0.0;
  double semi_y = 0.0;

  /// Normalized radius: <= 1 inside or on the boundary.
  double level(Point2 p) const {
    const double u = (p.x - center.x) / semi_x;
    const double v = (p.y - center.y) / semi_y;
    return std::sqrt(u * u + v * v);
  }
  bool contains(Point2 p, double tol = 1e-12) const { return level(p) <= 1.0 + tol; }

  /// Radial projection onto the ellipse when outside; identity otherwise.
  Point2 clamp(Point2 p) const {
    const double l = level(p);
    if (l <= 1.0) return p;
    return center + (p - center) * (1.0 / l);
  }
};

}  // namespace cutaneous
