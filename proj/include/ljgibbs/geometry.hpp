#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace ljgibbs {

// Two points closer than this are considered the same location.
inline constexpr double kDuplicateTol = 1e-12;

struct Point {
  double x = 0.0;
  double y = 0.0;
};

// Axis-aligned bounded rectangle, closed on all edges: points on the
// max edges belong to the window.
struct Window {
  double x_min = 0.0, x_max = 0.0, y_min = 0.0, y_max = 0.0;

  Window() = default;
  Window(double x0, double x1, double y0, double y1);

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return width() * height(); }

  bool contains(Point p) const {
    return p.x >= x_min && p.x <= x_max && p.y >= y_min && p.y <= y_max;
  }
};

// Grow the window by r on every side. r must be finite and >= 0.
Window dilate(const Window& w, double r);

// Shrink the window by r on every side; raises geometry_error if the
// result would be empty.
Window erode(const Window& w, double r);

// Largest sub-window anchored at the min corner whose sides are integer
// multiples of `side`. Raises geometry_error if not even one cell fits.
Window largest_aligned_subwindow(const Window& w, double side);

// Eroded-and-aligned estimation window for minus-sampling: erode the
// observed window by the interaction range, then round down to multiples
// of the cell side.
Window default_estimation_window(const Window& observed, double range,
                                 double cell_side);

// Raises geometry_error unless the observed window contains the
// estimation window dilated by the interaction range (within a small
// slack for roundoff in windows derived via erode).
void require_minus_sampling(const Window& observed, const Window& est,
                            double range);

// Ordered point pattern in a window. Validates containment and pairwise
// distinctness (tolerance kDuplicateTol) at construction.
class Configuration {
public:
  Configuration(std::vector<Point> points, const Window& window);

  const std::vector<Point>& points() const { return points_; }
  const Window& window() const { return window_; }
  std::size_t size() const { return points_.size(); }
  Point operator[](std::size_t i) const { return points_[i]; }

private:
  std::vector<Point> points_;
  Window window_;
};

// Uniform bucket grid over a configuration for range queries. Immutable
// after construction; queries return exact closed-ball matches
// (superset from the bucket stencil, then an exact Euclidean filter).
class SpatialGrid {
public:
  SpatialGrid(const Configuration& cfg, double cell_size);

  std::size_t size() const { return points_.size(); }
  double cell_size() const { return cell_size_; }

  // Calls f(index, r_squared) for every stored point within Euclidean
  // distance r of c (boundary inclusive), skipping exclude_index.
  template <class F>
  void visit_neighbors(Point c, double r, int exclude_index, F&& f) const {
    const double r2 = r * r;
    const int ix_lo = clamp_ix(c.x - r), ix_hi = clamp_ix(c.x + r);
    const int iy_lo = clamp_iy(c.y - r), iy_hi = clamp_iy(c.y + r);
    for (int iy = iy_lo; iy <= iy_hi; ++iy) {
      for (int ix = ix_lo; ix <= ix_hi; ++ix) {
        for (int idx : buckets_[static_cast<std::size_t>(iy) * nx_ + ix]) {
          if (idx == exclude_index) continue;
          const double dx = points_[idx].x - c.x;
          const double dy = points_[idx].y - c.y;
          const double d2 = dx * dx + dy * dy;
          if (d2 <= r2) f(idx, d2);
        }
      }
    }
  }

private:
  int clamp_ix(double x) const {
    const int i = static_cast<int>(std::floor((x - window_.x_min) * inv_bw_x_));
    return i < 0 ? 0 : (i >= nx_ ? nx_ - 1 : i);
  }
  int clamp_iy(double y) const {
    const int i = static_cast<int>(std::floor((y - window_.y_min) * inv_bw_y_));
    return i < 0 ? 0 : (i >= ny_ ? ny_ - 1 : i);
  }

  Window window_;
  double cell_size_ = 0.0;
  int nx_ = 1, ny_ = 1;
  double inv_bw_x_ = 0.0, inv_bw_y_ = 0.0;
  std::vector<Point> points_;
  std::vector<std::vector<int>> buckets_;
};

// Indices of points of cfg within distance r of center (closed ball).
// exclude_index >= 0 removes that point (used when center is itself a
// configuration point).
std::vector<int> neighbors_within(const SpatialGrid& grid,
                                  const Configuration& cfg, Point center,
                                  double r, int exclude_index = -1);

struct CellIndex {
  int i = 0;
  int j = 0;
  bool operator==(const CellIndex&) const = default;
};

// Partition of a window into congruent square cells of side `cell_side`.
// Cell (i,j) covers [x_min + i*s, x_min + (i+1)*s) x [y_min + j*s, ...),
// half-open except that the global max edges are clamped into the last
// cell, so the cells tile the window exactly.
class CellPartition {
public:
  CellPartition() = default;

  const Window& window() const { return window_; }
  double cell_side() const { return cell_side_; }
  int kx() const { return kx_; }
  int ky() const { return ky_; }
  int cell_count() const { return kx_ * ky_; }

  // Center of cell (0,0); cell (i,j) is centered at origin + side*(i,j).
  Point origin() const;

  std::vector<CellIndex> index_set() const;
  Window cell_window(CellIndex c) const;
  CellIndex cell_of(Point p) const;
  int flat_index(CellIndex c) const { return c.j * kx_ + c.i; }

  // Closed uniform-distance-1 neighborhood within the index set,
  // including c itself.
  std::vector<CellIndex> neighbors(CellIndex c) const;

  friend CellPartition build_partition(const Window& w, double cell_side);

private:
  Window window_;
  double cell_side_ = 0.0;
  int kx_ = 0, ky_ = 0;
};

// Raises invalid_argument (reporting the largest admissible sub-window)
// if the window sides are not integer multiples of cell_side.
CellPartition build_partition(const Window& w, double cell_side);

}  // namespace ljgibbs
