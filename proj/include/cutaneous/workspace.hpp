#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <vector>

#include "cutaneous/linkage.hpp"
#include "cutaneous/station.hpp"

namespace cutaneous {

/// Reachability raster over a station. Cell (i, j) is sampled at its centre.
class WorkspaceGrid {
 public:
  static constexpr std::uint8_t kLower = 1;
  static constexpr std::uint8_t kUpper = 2;

  WorkspaceGrid(double resolution, Point2 origin, int nx, int ny, Ellipse target)
      : resolution_(resolution), origin_(origin), nx_(nx), ny_(ny), target_(target),
        cells_(static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny), 0) {}

  double resolution() const { return resolution_; }
  int nx() const { return nx_; }
  int ny() const { return ny_; }
  const Ellipse& target_ellipse() const { return target_; }

  Point2 cell_center(int i, int j) const {
    return {origin_.x + (i + 0.5) * resolution_, origin_.y + (j + 0.5) * resolution_};
  }

  std::uint8_t flags(int i, int j) const { return cells_[index(i, j)]; }
  void set_flags(int i, int j, std::uint8_t f) { cells_[index(i, j)] = f; }

  bool lower(int i, int j) const { return flags(i, j) & kLower; }
  bool upper(int i, int j) const { return flags(i, j) & kUpper; }
  bool both(int i, int j) const { return flags(i, j) == (kLower | kUpper); }

  double intersection_area() const {
    const auto n = std::count(cells_.begin(), cells_.end(), kLower | kUpper);
    return static_cast<double>(n) * resolution_ * resolution_;
  }

  /// Number of cells whose centre lies in the target ellipse but outside the
  /// lower/upper intersection. Zero means the target area is fully covered.
  std::size_t uncovered_target_cells() const {
    std::size_t missing = 0;
    for (int j = 0; j < ny_; ++j)
      for (int i = 0; i < nx_; ++i)
        if (target_.contains(cell_center(i, j), 0.0) && !both(i, j)) ++missing;
    return missing;
  }

  std::size_t target_cells() const {
    std::size_t n = 0;
    for (int j = 0; j < ny_; ++j)
      for (int i = 0; i < nx_; ++i)
        if (target_.contains(cell_center(i, j), 0.0)) ++n;
    return n;
  }

  void write_csv(std::ostream& os) const {
    os << "x_mm,y_mm,lower,upper,both\n";
    for (int j = 0; j < ny_; ++j) {
      for (int i = 0; i < nx_; ++i) {
        const Point2 c = cell_center(i, j);
        os << c.x << ',' << c.y << ',' << int(lower(i, j)) << ',' << int(upper(i, j)) << ','
           << int(both(i, j)) << '\n';
      }
    }
  }

 private:
  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(j) * static_cast<std::size_t>(nx_) + static_cast<std::size_t>(i);
  }

  double resolution_;
  Point2 origin_;
  int nx_;
  int ny_;
  Ellipse target_;
  std::vector<std::uint8_t> cells_;
};

inline WorkspaceGrid compute_workspace(const LinkageGeometry& lower, const LinkageGeometry& upper,
                                       double resolution, const Ellipse& target) {
  if (!(resolution > 0.0) || !std::isfinite(resolution))
    throw Error(ErrorCode::kInvalidArgument, "resolution must be positive");
  if (!(target.semi_x > 0.0 && target.semi_y > 0.0))
    throw Error(ErrorCode::kInvalidArgument, "target ellipse semi-axes must be positive");
  const double minor = 2.0 * std::min(target.semi_x, target.semi_y);
  if (minor / resolution < 10.0)
    throw Error(ErrorCode::kResolutionTooCoarse,
                "fewer than 10 cells span the target ellipse minor axis");

  double x0 = 1e300, y0 = 1e300, x1 = -1e300, y1 = -1e300;
  auto grow = [&](Point2 base, double reach) {
    x0 = std::min(x0, base.x - reach);
    y0 = std::min(y0, base.y - reach);
    x1 = std::max(x1, base.x + reach);
    y1 = std::max(y1, base.y + reach);
  };
  for (const auto* g : {&lower, &upper}) {
    g->validate();
    grow(g->o1, g->l1 + g->l3);
    grow(g->o2, g->l2 + g->l4);
  }

  const int nx = static_cast<int>(std::ceil((x1 - x0) / resolution));
  const int ny = static_cast<int>(std::ceil((y1 - y0) / resolution));
  WorkspaceGrid grid(resolution, {x0, y0}, nx, ny, target);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const Point2 c = grid.cell_center(i, j);
      std::uint8_t f = 0;
      if (is_reachable(lower, c)) f |= WorkspaceGrid::kLower;
      if (is_reachable(upper, c)) f |= WorkspaceGrid::kUpper;
      grid.set_flags(i, j, f);
    }
  }
  return grid;
}

inline WorkspaceGrid compute_workspace(const Station& s, double resolution) {
  return compute_workspace(s.lower, s.upper, resolution, s.target);
}

}  // namespace cutaneous
