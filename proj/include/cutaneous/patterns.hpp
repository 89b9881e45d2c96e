#pragma once

// Skin-deformation trajectories for the two tactors of one fingertip station,
// object-synchronized tracking targets and a feature-based pattern classifier.

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cutaneous/error.hpp"
#include "cutaneous/geometry.hpp"

namespace cutaneous {

enum class PatternKind { kStretching, kSlipping, kTwisting };

constexpr std::string_view to_string(PatternKind k) {
  switch (k) {
    case PatternKind::kStretching: return "stretching";
    case PatternKind::kSlipping: return "slipping";
    case PatternKind::kTwisting: return "twisting";
  }
  return "?";
}

/// Accepts the long names and the CLI short forms (stretch, slip, twist).
inline PatternKind parse_pattern_kind(std::string_view s) {
  if (s == "stretch" || s == "stretching") return PatternKind::kStretching;
  if (s == "slip" || s == "slipping") return PatternKind::kSlipping;
  if (s == "twist" || s == "twisting") return PatternKind::kTwisting;
  throw Error(ErrorCode::kInvalidArgument, "unknown pattern '" + std::string(s) + "'");
}

struct PatternSpec {
  PatternKind kind = PatternKind::kStretching;
  Point2 center;            // fingertip centre, station frame, mm
  double amplitude = 4.0;   // stretch half-travel, slip half-height, twist radius (mm)
  double duration = 1.5;    // s
  double twist_sweep = kPi / 2;
  double slip_spacing = 6.0;  // horizontal tactor separation while slipping, mm

  /// Defaults per kind: 4 mm stretch/slip, 3 mm twist radius, 1.5 s, 90 deg.
  static PatternSpec defaults(PatternKind kind, Point2 center) {
    PatternSpec s;
    s.kind = kind;
    s.center = center;
    s.amplitude = kind == PatternKind::kTwisting ? 3.0 : 4.0;
    return s;
  }
};

struct TactorPair {
  Point2 upper;
  Point2 lower;
  double t = 0.0;
};

/// Pattern sample at time t. Throws OutOfRange outside [0, duration] and
/// WorkspaceExceeded when a tactor leaves `bounds`.
inline TactorPair generate_pattern(const PatternSpec& spec, double t, const Ellipse& bounds) {
  if (!(spec.amplitude > 0.0) || !(spec.duration > 0.0))
    throw Error(ErrorCode::kInvalidArgument, "amplitude and duration must be positive");
  if (!(t >= 0.0 && t <= spec.duration))
    throw Error(ErrorCode::kOutOfRange, "t outside [0, duration]");
  const double s = t / spec.duration;
  const Point2 c = spec.center;
  TactorPair out;
  out.t = t;
  switch (spec.kind) {
    case PatternKind::kStretching: {
      const Point2 d{spec.amplitude * s, 0.0};
      out.upper = c + d;
      out.lower = c - d;
      break;
    }
    case PatternKind::kSlipping: {
      const Point2 m = c + Point2{0.0, spec.amplitude * (1.0 - 2.0 * s)};
      out.upper = m + Point2{spec.slip_spacing / 2.0, 0.0};
      out.lower = m - Point2{spec.slip_spacing / 2.0, 0.0};
      break;
    }
    case PatternKind::kTwisting: {
      const double phi = spec.twist_sweep * s;
      out.upper = c + unit_vector(phi) * spec.amplitude;
      out.lower = c + unit_vector(phi + kPi) * spec.amplitude;
      break;
    }
  }
  if (!bounds.contains(out.upper, 1e-9) || !bounds.contains(out.lower, 1e-9))
    throw Error(ErrorCode::kWorkspaceExceeded, "pattern leaves the target ellipse");
  return out;
}

/// Samples a full pattern at `rate` Hz including both endpoints.
inline std::vector<TactorPair> sample_pattern(const PatternSpec& spec, double rate,
                                              const Ellipse& bounds) {
  if (!(rate > 0.0)) throw Error(ErrorCode::kInvalidArgument, "rate must be positive");
  const int n = static_cast<int>(std::floor(spec.duration * rate + 1e-9));
  std::vector<TactorPair> out;
  out.reserve(static_cast<std::size_t>(n) + 2);
  for (int k = 0; k <= n; ++k) out.push_back(generate_pattern(spec, k / rate, bounds));
  if (out.back().t < spec.duration) out.push_back(generate_pattern(spec, spec.duration, bounds));
  return out;
}

struct SyncMapping {
  double radius = 3.0;  // mm
  double gain = 1.0;
  double phase_offset = kPi;
};

struct SyncTargets {
  TactorPair pair;
  bool clamped = false;
};

/// Tactor targets that rotate with the grasped object: upper tactor at
/// pi/2 + gain*theta, lower tactor phase_offset further along the circle.
/// Targets outside `bounds` are projected onto its boundary.
inline SyncTargets object_sync_targets(double theta_obj, const SyncMapping& map, Point2 center,
                                       const Ellipse& bounds) {
  const double phi = kPi / 2 + map.gain * theta_obj;
  SyncTargets out;
  const Point2 up = center + unit_vector(phi) * map.radius;
  const Point2 lo = center + unit_vector(phi + map.phase_offset) * map.radius;
  out.pair.upper = bounds.clamp(up);
  out.pair.lower = bounds.clamp(lo);
  out.clamped = !(out.pair.upper == up) || !(out.pair.lower == lo);
  return out;
}

/// Object angle recovered from tactor positions (inverse of the sync mapping).
inline double decode_sync_angle(const TactorPair& p, const SyncMapping& map) {
  const Point2 r = p.upper - p.lower;
  return wrap_angle(std::atan2(r.y, r.x) - kPi / 2) / map.gain;
}

struct PatternFeatures {
  double separation_change = 0.0;  // mm, change of inter-tactor distance
  double common_vertical = 0.0;    // mm, vertical travel of the tactor midpoint
  double rotation_arc = 0.0;       // mm, mean separation x rotation of the separation vector
};

namespace detail {

struct WindowMean {
  Point2 rel;
  Point2 mid;
};

inline WindowMean window_mean(std::span<const TactorPair> w) {
  Point2 rel, mid;
  for (const auto& s : w) {
    rel = rel + (s.upper - s.lower);
    mid = mid + (s.upper + s.lower) * 0.5;
  }
  const double n = static_cast<double>(w.size());
  return {rel * (1.0 / n), mid * (1.0 / n)};
}

}  // namespace detail

/// Features compare the mean of the first and last fifth of the trajectory,
/// which averages out per-sample positional noise.
inline PatternFeatures pattern_features(std::span<const TactorPair> traj) {
  if (traj.size() < 10)
    throw Error(ErrorCode::kInvalidArgument, "classification needs at least 10 samples");
  const std::size_t w = std::max<std::size_t>(2, traj.size() / 5);
  const auto a = detail::window_mean(traj.first(w));
  const auto b = detail::window_mean(traj.last(w));
  PatternFeatures f;
  f.separation_change = std::abs(b.rel.norm() - a.rel.norm());
  f.common_vertical = std::abs(b.mid.y - a.mid.y);
  const double turn = std::abs(std::atan2(cross(a.rel, b.rel), dot(a.rel, b.rel)));
  f.rotation_arc = turn * 0.5 * (a.rel.norm() + b.rel.norm());
  return f;
}

struct ClassifierParams {
  double margin = 2.0;        // winner must exceed margin x runner-up
  double min_feature = 0.25;  // mm; below this nothing moved
};

/// Throws Ambiguous when no feature clears the floor or the margin.
inline PatternKind classify_pattern(std::span<const TactorPair> traj,
                                    const ClassifierParams& params = {}) {
  const auto f = pattern_features(traj);
  const std::array<std::pair<double, PatternKind>, 3> scores{{
      {f.separation_change, PatternKind::kStretching},
      {f.common_vertical, PatternKind::kSlipping},
      {f.rotation_arc, PatternKind::kTwisting},
  }};
  auto sorted = scores;
  std::sort(sorted.begin(), sorted.end(), [](const auto& x, const auto& y) { return x.first > y.first; });
  if (sorted[0].first < params.min_feature || sorted[0].first <= params.margin * sorted[1].first)
    throw Error(ErrorCode::kAmbiguous, "no deformation feature dominates");
  return sorted[0].second;
}

}  // namespace cutaneous
