#include "ljgibbs/diagnostics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "ljgibbs/detail/pair_scan.hpp"
#include "ljgibbs/errors.hpp"

namespace ljgibbs {

namespace {

struct PointEval {
  double v = 0.0;
  double count = 0.0;
};

template <class GridT>
PointEval eval_point(const ModelSpec& spec, const Theta& theta,
                     const GridT& grid, Point x, double range, double t3sq,
                     int exclude) {
  PointEval out;
  switch (spec.family) {
    case Family::poisson:
      out.v = theta.theta1;
      return out;
    case Family::strauss: {
      const detail::PairScan s = detail::scan_count(grid, x, range, exclude);
      out.count = static_cast<double>(s.count);
      out.v = theta.theta1 + theta.theta2 * out.count;
      return out;
    }
    case Family::lennard_jones: {
      const detail::PairScan s = detail::scan_lj(grid, x, range, t3sq, exclude);
      out.count = static_cast<double>(s.count);
      if (s.hit_index >= 0 && s.hit_index != exclude) {
        out.v = theta.theta2 > 0.0
                    ? std::numeric_limits<double>::infinity()
                    : (theta.theta2 < 0.0
                           ? -std::numeric_limits<double>::infinity()
                           : theta.theta1);
        return out;
      }
      out.v = theta.theta1 + 4.0 * theta.theta2 * (s.s12 - s.s6);
      return out;
    }
  }
  throw std::invalid_argument("unknown family");
}

}  // namespace

std::array<double, 3> gnz_residuals(const Configuration& cfg,
                                    const ModelSpec& spec, const Theta& theta,
                                    const Window& est,
                                    const QuadratureScheme& quad) {
  spec.validate();
  spec.validate_theta(theta);
  const double range = spec.interaction_range();
  if (!std::isfinite(range)) {
    throw geometry_error(
        "infinite interaction range: set a truncation radius before "
        "evaluating the residual");
  }
  if (quad.window.x_min != est.x_min || quad.window.x_max != est.x_max ||
      quad.window.y_min != est.y_min || quad.window.y_max != est.y_max) {
    throw std::invalid_argument(
        "quadrature scheme must be built on the estimation window");
  }
  require_minus_sampling(cfg.window(), est, range);

  const double cell = range > 0.0
                          ? range
                          : std::max(cfg.window().width(), cfg.window().height());
  const SpatialGrid grid(cfg, cell);
  const double t3sq = theta.theta3 * theta.theta3;

  long double i_const = 0.0L, i_energy = 0.0L, i_count = 0.0L;
  for (std::size_t k = 0; k < quad.nodes.size(); ++k) {
    const PointEval e =
        eval_point(spec, theta, grid, quad.nodes[k], range, t3sq, -1);
    double ew;
    if (e.v > 700.0) {
      ew = 0.0;
    } else {
      ew = quad.weights[k] * std::exp(-e.v);
    }
    if (ew == 0.0) continue;
    i_const += ew;
    i_energy += ew * e.v;
    i_count += ew * e.count;
  }

  long double s_const = 0.0L, s_energy = 0.0L, s_count = 0.0L;
  for (std::size_t k = 0; k < cfg.size(); ++k) {
    if (!est.contains(cfg[k])) continue;
    const PointEval e = eval_point(spec, theta, grid, cfg[k], range, t3sq,
                                   static_cast<int>(k));
    s_const += 1.0L;
    s_energy += e.v;
    s_count += e.count;
  }

  const double area = est.area();
  return {static_cast<double>(s_const - i_const) / area,
          static_cast<double>(s_energy - i_energy) / area,
          static_cast<double>(s_count - i_count) / area};
}

double gnz_residual(const Configuration& cfg, const ModelSpec& spec,
                    const Theta& theta, TestFunction h, const Window& est,
                    const QuadratureScheme& quad) {
  const std::array<double, 3> r = gnz_residuals(cfg, spec, theta, est, quad);
  switch (h) {
    case TestFunction::constant: return r[0];
    case TestFunction::local_energy: return r[1];
    case TestFunction::neighbor_count: return r[2];
  }
  throw std::invalid_argument("unknown test function");
}

}  // namespace ljgibbs
