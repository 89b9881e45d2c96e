#pragma once

// Positional kinematics of a planar five-bar linkage: two driven proximal
// links hinged at o1/o2 and two distal links meeting at the tactor point.

#include <array>
#include <cmath>
#include <string>

#include "cutaneous/error.hpp"
#include "cutaneous/geometry.hpp"

namespace cutaneous {

/// Assembly branch: sign of the rotation that takes (A2 - A1) onto (P - A1).
enum class Elbow { kPositive, kNegative };

constexpr double elbow_sign(Elbow e) { return e == Elbow::kPositive ? 1.0 : -1.0; }

inline constexpr double kSingularTolerance = 1e-9;  // mm

struct LinkageGeometry {
  Point2 o1;
  Point2 o2;
  double l1 = 0.0;  // proximal, driven by theta1
  double l2 = 0.0;  // proximal, driven by theta2
  double l3 = 0.0;  // distal, hinged at A1
  double l4 = 0.0;  // distal, hinged at A2
  Elbow elbow = Elbow::kPositive;

  void validate() const {
    if (!(l1 > 0.0 && l2 > 0.0 && l3 > 0.0 && l4 > 0.0))
      throw Error(ErrorCode::kInvalidArgument, "link lengths must be positive");
    if (!o1.finite() || !o2.finite() || o1 == o2)
      throw Error(ErrorCode::kInvalidArgument, "base joints must be distinct finite points");
    if (!(l1 + l3 + l2 + l4 > distance(o1, o2)))
      throw Error(ErrorCode::kInvalidArgument, "chains cannot meet: base separation too large");
  }

  Point2 base_midpoint() const { return (o1 + o2) * 0.5; }
};

/// Driven joint angles, radians, CCW from the station +x axis.
struct JointAngles {
  double theta1 = 0.0;
  double theta2 = 0.0;

  JointAngles normalized() const { return {wrap_angle(theta1), wrap_angle(theta2)}; }
};

struct IntermediateJoints {
  Point2 a1;
  Point2 a2;
};

inline IntermediateJoints intermediate_joints(const LinkageGeometry& g, const JointAngles& q) {
  return {g.o1 + g.l1 * unit_vector(q.theta1), g.o2 + g.l2 * unit_vector(q.theta2)};
}

/// Tactor position from the driven angles. Throws Singular when A1 and A2
/// coincide or the distal chains are at full stretch/fold, NoAssembly when
/// the distal links cannot close.
inline Point2 forward_kinematics(const LinkageGeometry& g, const JointAngles& q) {
  const auto [a1, a2] = intermediate_joints(g, q);
  const Point2 d = a2 - a1;
  const double len = d.norm();
  if (len < kSingularTolerance) throw Error(ErrorCode::kSingular, "intermediate joints coincide");

  const double outer = g.l3 + g.l4;
  const double inner = std::abs(g.l3 - g.l4);
  if (len > outer + kSingularTolerance || len < inner - kSingularTolerance)
    throw Error(ErrorCode::kNoAssembly, "distal links cannot close for these angles");
  if (std::abs(len - outer) <= kSingularTolerance || std::abs(len - inner) <= kSingularTolerance)
    throw Error(ErrorCode::kSingular, "distal links at full stretch or fold");

  const double c = (g.l3 * g.l3 - g.l4 * g.l4 + len * len) / (2.0 * g.l3 * len);
  const double alpha = std::acos(std::clamp(c, -1.0, 1.0));
  return a1 + rotate(d, elbow_sign(g.elbow) * alpha) * (g.l3 / len);
}

namespace detail {

struct ChainSpec {
  Point2 base;
  double proximal;
  double distal;
};

inline ChainSpec chain(const LinkageGeometry& g, int i) {
  return i == 0 ? ChainSpec{g.o1, g.l1, g.l3} : ChainSpec{g.o2, g.l2, g.l4};
}

inline bool chain_reaches(const ChainSpec& c, Point2 p) {
  const double r = distance(p, c.base);
  return r >= std::abs(c.proximal - c.distal) && r <= c.proximal + c.distal;
}

/// Intermediate joint of one chain for tactor p; `side` picks the knee side.
inline Point2 chain_knee(const ChainSpec& c, Point2 p, double side) {
  const Point2 v = p - c.base;
  const double r = v.norm();
  const double cos_a = (c.proximal * c.proximal - c.distal * c.distal + r * r) / (2.0 * c.proximal * r);
  const double alpha = std::acos(std::clamp(cos_a, -1.0, 1.0));
  return c.base + rotate(v, side * alpha) * (c.proximal / r);
}

}  // namespace detail

inline bool is_reachable(const LinkageGeometry& g, Point2 p) {
  return detail::chain_reaches(detail::chain(g, 0), p) && detail::chain_reaches(detail::chain(g, 1), p);
}

/// True when p lies strictly on the elbow side of the base line o1->o2.
/// Reachable points behind the base line only assemble on the other branch.
inline bool on_working_side(const LinkageGeometry& g, Point2 p) {
  return elbow_sign(g.elbow) * cross(g.o2 - g.o1, p - g.o1) > 0.0;
}

/// Driven angles placing the tactor at p. The knees-out working mode is
/// preferred; other knee combinations are tried only when knees-out would
/// assemble on the opposite elbow branch.
inline JointAngles inverse_kinematics(const LinkageGeometry& g, Point2 p) {
  if (!p.finite()) throw Error(ErrorCode::kInvalidArgument, "non-finite target");
  for (int i = 0; i < 2; ++i) {
    const auto c = detail::chain(g, i);
    if (distance(p, c.base) < kSingularTolerance)
      throw Error(ErrorCode::kSingular, "target coincides with a base joint");
    if (!detail::chain_reaches(c, p))
      throw Error(ErrorCode::kUnreachable, "target violates the triangle inequality of chain " +
                                               std::to_string(i + 1));
  }

  const double s = elbow_sign(g.elbow);
  const std::array<std::array<double, 2>, 4> modes{{{s, -s}, {s, s}, {-s, -s}, {-s, s}}};
  const auto c1 = detail::chain(g, 0);
  const auto c2 = detail::chain(g, 1);
  for (const auto& m : modes) {
    const Point2 a1 = detail::chain_knee(c1, p, m[0]);
    const Point2 a2 = detail::chain_knee(c2, p, m[1]);
    const Point2 d = a2 - a1;
    // FK resolves P on the elbow side of A1->A2; the knees must agree with it.
    if (d.norm() < kSingularTolerance || s * cross(d, p - a1) <= 0.0) continue;
    return JointAngles{std::atan2(a1.y - g.o1.y, a1.x - g.o1.x),
                       std::atan2(a2.y - g.o2.y, a2.x - g.o2.x)};
  }
  throw Error(ErrorCode::kNoAssembly, "no knee configuration assembles on the requested elbow branch");
}

/// Centre-line segments of the four links for a configuration.
inline std::array<Segment, 4> link_segments(const LinkageGeometry& g, const JointAngles& q) {
  const auto [a1, a2] = intermediate_joints(g, q);
  const Point2 p = forward_kinematics(g, q);
  return {Segment{g.o1, a1}, Segment{a1, p}, Segment{g.o2, a2}, Segment{a2, p}};
}

}  // namespace cutaneous
