#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

#include "cutaneous/error.hpp"
#include "cutaneous/linkage.hpp"

namespace cutaneous {

enum class Finger { kIndex, kThumb };

constexpr std::string_view to_string(Finger f) { return f == Finger::kIndex ? "index" : "thumb"; }

inline Finger parse_finger(std::string_view s) {
  if (s == "index") return Finger::kIndex;
  if (s == "thumb") return Finger::kThumb;
  throw Error(ErrorCode::kInvalidArgument, "unknown finger '" + std::string(s) + "'");
}

/// One fingertip station: a lower and an upper five-bar sharing the
/// fingertip region, plus the fingertip target area.
struct Station {
  Finger finger = Finger::kIndex;
  LinkageGeometry lower;
  LinkageGeometry upper;
  Ellipse target;
};

/// Builds a station from the base-row layout (O1..O4) and link lengths. The
/// target ellipse is centred between the base rows, horizontally between O1/O2.
inline Station make_station(Finger finger, Point2 o1, Point2 o2, Point2 o3, Point2 o4, double l1,
                            double l2, double l3, double l4, double ellipse_width,
                            double ellipse_height) {
  Station s;
  s.finger = finger;
  s.lower = {o1, o2, l1, l2, l3, l4, Elbow::kPositive};
  s.upper = {o3, o4, l1, l2, l3, l4, Elbow::kNegative};
  s.lower.validate();
  s.upper.validate();
  const Point2 center = (o1 + o2 + o3 + o4) * 0.25;
  s.target = {center, ellipse_width / 2.0, ellipse_height / 2.0};
  return s;
}

// Mechanism dimensions in mm.
inline Station index_station() {
  return make_station(Finger::kIndex, {0, 0}, {12.5, 0}, {0, 31}, {12.5, 31}, 9, 9, 15, 15, 15, 12);
}

inline Station thumb_station() {
  return make_station(Finger::kThumb, {0, 0}, {12.5, 0}, {0, 35}, {12.5, 35}, 9, 9, 17.5, 17.5, 15,
                      14);
}

inline Station default_station(Finger f) {
  return f == Finger::kIndex ? index_station() : thumb_station();
}

}  // namespace cutaneous
