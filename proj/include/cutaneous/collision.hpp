#pragma once

// Link-clearance checks between the two five-bars of a station and the
// upper-priority target arbitration.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>

#include "cutaneous/linkage.hpp"

namespace cutaneous {

struct ArbitrationParams {
  double clearance_min = 1.5;  // mm between link centre-lines (3 mm wide bars)
  int directions = 36;
  double step = 0.25;          // mm
  double max_radius = 40.0;    // mm
};

/// Minimum centre-line distance between any upper link and any lower link.
inline double link_clearance(const LinkageGeometry& upper, const JointAngles& q_upper,
                             const LinkageGeometry& lower, const JointAngles& q_lower) {
  const auto su = link_segments(upper, q_upper);
  const auto sl = link_segments(lower, q_lower);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& a : su)
    for (const auto& b : sl) best = std::min(best, segment_distance(a, b));
  return best;
}

/// Clearance for two tactor targets, or nullopt when either target has no IK.
inline std::optional<double> target_clearance(const LinkageGeometry& upper, Point2 upper_target,
                                              const LinkageGeometry& lower, Point2 lower_target) {
  try {
    return link_clearance(upper, inverse_kinematics(upper, upper_target), lower,
                          inverse_kinematics(lower, lower_target));
  } catch (const Error&) {
    return std::nullopt;
  }
}

/// Retracted lower pose: on the base-line normal, just outside the inner annulus.
inline Point2 retracted_home(const LinkageGeometry& g) {
  const Point2 base = g.o2 - g.o1;
  Point2 normal = rotate(base * (1.0 / base.norm()), kPi / 2) * elbow_sign(g.elbow);
  const double h = std::max(std::abs(g.l3 - g.l1), std::abs(g.l4 - g.l2)) + 1.0;
  return g.base_midpoint() + normal * h;
}

struct ArbitrationResult {
  Point2 upper;
  Point2 lower;
  bool active = false;
  double clearance = 0.0;  // at the returned targets
};

/// Upper target always wins. When the link clearance at the requested targets
/// is below clearance_min, the lower target moves to the nearest radial
/// candidate (directions x step grid, scanned ring by ring, direction index
/// ascending) that is assemblable and restores the clearance. Throws
/// NoFeasibleLowerTarget when no candidate within max_radius works.
inline ArbitrationResult arbitrate_collision(Point2 upper_target, Point2 lower_target,
                                             const LinkageGeometry& upper,
                                             const LinkageGeometry& lower,
                                             const ArbitrationParams& params = {}) {
  const JointAngles q_up = inverse_kinematics(upper, upper_target);
  const auto su = link_segments(upper, q_up);
  auto clearance_for = [&](Point2 candidate) -> std::optional<double> {
    if (!is_reachable(lower, candidate)) return std::nullopt;
    try {
      const auto sl = link_segments(lower, inverse_kinematics(lower, candidate));
      double best = std::numeric_limits<double>::infinity();
      for (const auto& a : su)
        for (const auto& b : sl) best = std::min(best, segment_distance(a, b));
      return best;
    } catch (const Error&) {
      return std::nullopt;
    }
  };

  if (const auto c = clearance_for(lower_target); c && *c >= params.clearance_min)
    return {upper_target, lower_target, false, *c};

  const int rings = static_cast<int>(std::ceil(params.max_radius / params.step));
  for (int k = 1; k <= rings; ++k) {
    const double r = k * params.step;
    for (int j = 0; j < params.directions; ++j) {
      const Point2 cand = lower_target + unit_vector(2.0 * kPi * j / params.directions) * r;
      if (const auto c = clearance_for(cand); c && *c >= params.clearance_min)
        return {upper_target, cand, true, *c};
    }
  }
  throw Error(ErrorCode::kNoFeasibleLowerTarget, "no lower target restores link clearance");
}

}  // namespace cutaneous
