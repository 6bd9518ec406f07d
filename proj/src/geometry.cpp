#include "ljgibbs/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "ljgibbs/errors.hpp"

namespace ljgibbs {

namespace {

void require_finite_radius(double r, const char* op) {
  if (!std::isfinite(r) || r < 0.0) {
    std::ostringstream msg;
    msg << op << ": radius must be finite and >= 0, got " << r;
    throw std::invalid_argument(msg.str());
  }
}

std::string format_window(const Window& w) {
  std::ostringstream s;
  s << "[" << w.x_min << ", " << w.x_max << "] x [" << w.y_min << ", "
    << w.y_max << "]";
  return s.str();
}

}  // namespace

Window::Window(double x0, double x1, double y0, double y1)
    : x_min(x0), x_max(x1), y_min(y0), y_max(y1) {
  if (!std::isfinite(x0) || !std::isfinite(x1) || !std::isfinite(y0) ||
      !std::isfinite(y1)) {
    throw std::invalid_argument("window bounds must be finite");
  }
  if (!(x0 < x1) || !(y0 < y1)) {
    std::ostringstream msg;
    msg << "window must be nonempty: " << format_window(*this);
    throw std::invalid_argument(msg.str());
  }
}

Window dilate(const Window& w, double r) {
  require_finite_radius(r, "dilate");
  return Window(w.x_min - r, w.x_max + r, w.y_min - r, w.y_max + r);
}

Window erode(const Window& w, double r) {
  require_finite_radius(r, "erode");
  if (2.0 * r >= w.width() || 2.0 * r >= w.height()) {
    std::ostringstream msg;
    msg << "erode: window " << format_window(w) << " collapses under radius "
        << r;
    throw geometry_error(msg.str());
  }
  return Window(w.x_min + r, w.x_max - r, w.y_min + r, w.y_max - r);
}

Window largest_aligned_subwindow(const Window& w, double side) {
  if (!std::isfinite(side) || side <= 0.0) {
    throw std::invalid_argument("cell side must be finite and > 0");
  }
  const int kx = static_cast<int>(std::floor(w.width() / side + 1e-9));
  const int ky = static_cast<int>(std::floor(w.height() / side + 1e-9));
  if (kx < 1 || ky < 1) {
    std::ostringstream msg;
    msg << "window " << format_window(w) << " does not admit a cell of side "
        << side;
    throw geometry_error(msg.str());
  }
  return Window(w.x_min, w.x_min + kx * side, w.y_min, w.y_min + ky * side);
}

Window default_estimation_window(const Window& observed, double range,
                                 double cell_side) {
  const Window inner = range > 0.0 ? erode(observed, range) : observed;
  return largest_aligned_subwindow(inner, cell_side);
}

void require_minus_sampling(const Window& observed, const Window& est,
                            double range) {
  require_finite_radius(range, "require_minus_sampling");
  const Window required = dilate(est, range);
  const double slack = 1e-9 * std::max(1.0, range);
  if (observed.x_min > required.x_min + slack ||
      observed.x_max < required.x_max - slack ||
      observed.y_min > required.y_min + slack ||
      observed.y_max < required.y_max - slack) {
    std::ostringstream msg;
    msg << "minus-sampling border correction failed: the observed window "
        << format_window(observed)
        << " must contain the estimation window dilated by the interaction "
        << "range " << range << ", i.e. " << format_window(required);
    throw geometry_error(msg.str());
  }
}

Configuration::Configuration(std::vector<Point> points, const Window& window)
    : points_(std::move(points)), window_(window) {
  for (std::size_t k = 0; k < points_.size(); ++k) {
    const Point p = points_[k];
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
      std::ostringstream msg;
      msg << "point " << k << " has non-finite coordinates";
      throw std::invalid_argument(msg.str());
    }
    if (!window_.contains(p)) {
      std::ostringstream msg;
      msg << "point " << k << " = (" << p.x << ", " << p.y
          << ") lies outside window " << format_window(window_);
      throw std::invalid_argument(msg.str());
    }
  }

  // Duplicate scan: sort by x, compare against followers while the x gap
  // is within tolerance. Near-linear for patterns without duplicates.
  std::vector<std::size_t> order(points_.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const Point pa = points_[a], pb = points_[b];
    return pa.x != pb.x ? pa.x < pb.x : pa.y < pb.y;
  });
  const double tol2 = kDuplicateTol * kDuplicateTol;
  for (std::size_t a = 0; a < order.size(); ++a) {
    for (std::size_t b = a + 1; b < order.size(); ++b) {
      const Point pa = points_[order[a]], pb = points_[order[b]];
      if (pb.x - pa.x > kDuplicateTol) break;
      const double dx = pb.x - pa.x, dy = pb.y - pa.y;
      if (dx * dx + dy * dy <= tol2) {
        std::ostringstream msg;
        msg << "duplicate points " << order[a] << " and " << order[b]
            << " at (" << pa.x << ", " << pa.y << ")";
        throw std::invalid_argument(msg.str());
      }
    }
  }
}

SpatialGrid::SpatialGrid(const Configuration& cfg, double cell_size)
    : window_(cfg.window()), cell_size_(cell_size), points_(cfg.points()) {
  if (!std::isfinite(cell_size) || cell_size <= 0.0) {
    throw std::invalid_argument("grid cell size must be finite and > 0");
  }
  nx_ = std::max(1, static_cast<int>(std::floor(window_.width() / cell_size)));
  ny_ = std::max(1, static_cast<int>(std::floor(window_.height() / cell_size)));
  inv_bw_x_ = nx_ / window_.width();
  inv_bw_y_ = ny_ / window_.height();
  buckets_.resize(static_cast<std::size_t>(nx_) * ny_);
  for (std::size_t k = 0; k < points_.size(); ++k) {
    const int ix = clamp_ix(points_[k].x);
    const int iy = clamp_iy(points_[k].y);
    buckets_[static_cast<std::size_t>(iy) * nx_ + ix].push_back(
        static_cast<int>(k));
  }
}

std::vector<int> neighbors_within(const SpatialGrid& grid,
                                  const Configuration& cfg, Point center,
                                  double r, int exclude_index) {
  if (grid.size() != cfg.size()) {
    throw std::invalid_argument(
        "spatial grid was not built over this configuration");
  }
  require_finite_radius(r, "neighbors_within");
  std::vector<int> out;
  grid.visit_neighbors(center, r, exclude_index,
                       [&](int idx, double) { out.push_back(idx); });
  return out;
}

Point CellPartition::origin() const {
  return {window_.x_min + 0.5 * cell_side_, window_.y_min + 0.5 * cell_side_};
}

std::vector<CellIndex> CellPartition::index_set() const {
  std::vector<CellIndex> out;
  out.reserve(static_cast<std::size_t>(kx_) * ky_);
  for (int j = 0; j < ky_; ++j)
    for (int i = 0; i < kx_; ++i) out.push_back({i, j});
  return out;
}

Window CellPartition::cell_window(CellIndex c) const {
  if (c.i < 0 || c.i >= kx_ || c.j < 0 || c.j >= ky_) {
    throw std::invalid_argument("cell index out of range");
  }
  return Window(window_.x_min + c.i * cell_side_,
                window_.x_min + (c.i + 1) * cell_side_,
                window_.y_min + c.j * cell_side_,
                window_.y_min + (c.j + 1) * cell_side_);
}

CellIndex CellPartition::cell_of(Point p) const {
  if (!window_.contains(p)) {
    std::ostringstream msg;
    msg << "point (" << p.x << ", " << p.y << ") lies outside partition window "
        << format_window(window_);
    throw std::invalid_argument(msg.str());
  }
  int i = static_cast<int>(std::floor((p.x - window_.x_min) / cell_side_));
  int j = static_cast<int>(std::floor((p.y - window_.y_min) / cell_side_));
  i = std::min(std::max(i, 0), kx_ - 1);
  j = std::min(std::max(j, 0), ky_ - 1);
  return {i, j};
}

std::vector<CellIndex> CellPartition::neighbors(CellIndex c) const {
  std::vector<CellIndex> out;
  for (int dj = -1; dj <= 1; ++dj) {
    for (int di = -1; di <= 1; ++di) {
      const int i = c.i + di, j = c.j + dj;
      if (i >= 0 && i < kx_ && j >= 0 && j < ky_) out.push_back({i, j});
    }
  }
  return out;
}

CellPartition build_partition(const Window& w, double cell_side) {
  if (!std::isfinite(cell_side) || cell_side <= 0.0) {
    throw std::invalid_argument("cell side must be finite and > 0");
  }
  const double rx = w.width() / cell_side;
  const double ry = w.height() / cell_side;
  const double kx_real = std::round(rx);
  const double ky_real = std::round(ry);
  const bool x_ok = std::fabs(rx - kx_real) <= 1e-9 * std::max(1.0, rx);
  const bool y_ok = std::fabs(ry - ky_real) <= 1e-9 * std::max(1.0, ry);
  if (!x_ok || !y_ok || kx_real < 1.0 || ky_real < 1.0) {
    std::ostringstream msg;
    msg << "window sides (" << w.width() << ", " << w.height()
        << ") are not integer multiples of cell side " << cell_side;
    const int kx = static_cast<int>(std::floor(rx + 1e-9));
    const int ky = static_cast<int>(std::floor(ry + 1e-9));
    if (kx >= 1 && ky >= 1) {
      msg << "; largest admissible sub-window is "
          << format_window(Window(w.x_min, w.x_min + kx * cell_side, w.y_min,
                                  w.y_min + ky * cell_side));
    } else {
      msg << "; no admissible sub-window exists";
    }
    throw std::invalid_argument(msg.str());
  }

  CellPartition part;
  part.window_ = w;
  part.cell_side_ = cell_side;
  part.kx_ = static_cast<int>(kx_real);
  part.ky_ = static_cast<int>(ky_real);
  return part;
}

}  // namespace ljgibbs
