#include "ljgibbs/model.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "ljgibbs/detail/pair_scan.hpp"
#include "ljgibbs/errors.hpp"

namespace ljgibbs {

namespace {

constexpr double kPi = 3.14159265358979323846;

double enclosing_radius(const Window& w, Point x) {
  // Radius from x covering the whole window: far corner distance.
  const double dx = std::max(std::fabs(x.x - w.x_min), std::fabs(x.x - w.x_max));
  const double dy = std::max(std::fabs(x.y - w.y_min), std::fabs(x.y - w.y_max));
  return std::hypot(dx, dy);
}

// Envelope of |g^LJ(r)| for r >= r0 > 0: both power terms decrease in r.
double lj_envelope(double theta2_abs, double theta3, double r0) {
  const double u = (theta3 / r0) * (theta3 / r0);
  const double u3 = u * u * u;
  return 4.0 * theta2_abs * (u3 * u3 + u3);
}

}  // namespace

std::string family_name(Family f) {
  switch (f) {
    case Family::poisson: return "poisson";
    case Family::strauss: return "strauss";
    case Family::lennard_jones: return "lennard_jones";
  }
  throw std::invalid_argument("unknown family");
}

Family family_from_name(const std::string& name) {
  if (name == "poisson") return Family::poisson;
  if (name == "strauss") return Family::strauss;
  if (name == "lennard_jones") return Family::lennard_jones;
  throw std::invalid_argument("unknown model family \"" + name +
                              "\" (expected poisson, strauss or lennard_jones)");
}

void ParameterBox::validate(int p) const {
  for (int i = 0; i < p; ++i) {
    if (!std::isfinite(lower[i]) || !std::isfinite(upper[i]) ||
        !(lower[i] < upper[i])) {
      std::ostringstream msg;
      msg << "parameter box component " << i + 1 << " is empty or non-finite: ["
          << lower[i] << ", " << upper[i] << "]";
      throw std::invalid_argument(msg.str());
    }
  }
}

Vec3 ParameterBox::project(const Vec3& v, int p) const {
  Vec3 out = v;
  for (int i = 0; i < p; ++i)
    out[i] = std::min(std::max(v[i], lower[i]), upper[i]);
  return out;
}

int ModelSpec::param_dim() const {
  switch (family) {
    case Family::poisson: return 1;
    case Family::strauss: return 2;
    case Family::lennard_jones: return 3;
  }
  throw std::invalid_argument("unknown family");
}

bool ModelSpec::finite_range() const {
  return family != Family::lennard_jones || std::isfinite(lj_range);
}

double ModelSpec::interaction_range() const {
  switch (family) {
    case Family::poisson:
      return 0.0;
    case Family::strauss:
      return strauss_radius;
    case Family::lennard_jones:
      if (std::isfinite(lj_range)) return lj_range;
      return truncation_radius > 0.0
                 ? truncation_radius
                 : std::numeric_limits<double>::infinity();
  }
  throw std::invalid_argument("unknown family");
}

void ModelSpec::validate() const {
  switch (family) {
    case Family::poisson:
      break;
    case Family::strauss:
      if (!std::isfinite(strauss_radius) || strauss_radius <= 0.0) {
        throw std::invalid_argument("Strauss radius R must be finite and > 0");
      }
      break;
    case Family::lennard_jones:
      if (std::isnan(lj_range) || lj_range <= 0.0) {
        throw std::invalid_argument("LJ range D must be > 0 (or infinite)");
      }
      if (truncation_radius != 0.0 &&
          (!std::isfinite(truncation_radius) || truncation_radius <= 0.0)) {
        throw std::invalid_argument("truncation radius must be finite and > 0");
      }
      if (std::isfinite(lj_range) && truncation_radius != 0.0) {
        throw std::invalid_argument(
            "truncation radius only applies to the infinite-range LJ model");
      }
      break;
  }
}

void ModelSpec::validate_theta(const Theta& t) const {
  const int p = param_dim();
  const Vec3 v = t.as_vec();
  for (int i = 0; i < p; ++i) {
    if (!std::isfinite(v[i])) {
      std::ostringstream msg;
      msg << "theta" << i + 1 << " must be finite, got " << v[i];
      throw std::invalid_argument(msg.str());
    }
  }
  if (family == Family::lennard_jones && t.theta3 <= 0.0) {
    throw std::invalid_argument("LJ scale theta3 must be > 0");
  }
}

double pair_potential(const ModelSpec& spec, const Theta& theta, double r) {
  spec.validate();
  spec.validate_theta(theta);
  if (!std::isfinite(r) || r <= 0.0) {
    std::ostringstream msg;
    msg << "pair distance must be finite and > 0, got " << r;
    throw std::invalid_argument(msg.str());
  }
  switch (spec.family) {
    case Family::poisson:
      return 0.0;
    case Family::strauss:
      return r <= spec.strauss_radius ? theta.theta2 : 0.0;
    case Family::lennard_jones: {
      if (r > spec.interaction_range()) return 0.0;
      const double u = (theta.theta3 / r) * (theta.theta3 / r);
      const double u3 = u * u * u;
      return 4.0 * theta.theta2 * (u3 * u3 - u3);
    }
  }
  throw std::invalid_argument("unknown family");
}

LocalEnergyTerms local_energy_terms(const ModelSpec& spec, const Theta& theta,
                                    Point x, const Configuration& cfg,
                                    const SpatialGrid& grid, int exclude_index,
                                    bool want_grad, bool want_hess) {
  spec.validate();
  spec.validate_theta(theta);
  if (grid.size() != cfg.size()) {
    throw std::invalid_argument(
        "spatial grid was not built over this configuration");
  }

  LocalEnergyTerms out;
  out.value = theta.theta1;
  out.grad[0] = 1.0;
  if (spec.family == Family::poisson) return out;

  double scan_r = spec.interaction_range();
  if (!std::isfinite(scan_r)) scan_r = enclosing_radius(cfg.window(), x);

  const auto report_hit = [&](int idx) {
    std::ostringstream msg;
    msg << "evaluation point (" << x.x << ", " << x.y
        << ") coincides with configuration point " << idx;
    throw std::invalid_argument(msg.str());
  };

  if (spec.family == Family::strauss) {
    const detail::PairScan s =
        detail::scan_count(grid, x, scan_r, exclude_index);
    if (s.hit_index >= 0) report_hit(s.hit_index);
    out.value += theta.theta2 * static_cast<double>(s.count);
    out.grad[1] = static_cast<double>(s.count);
    return out;
  }

  // Lennard-Jones: the value and every parameter derivative are
  // combinations of the two accumulated power sums.
  const double t2 = theta.theta2, t3 = theta.theta3;
  const detail::PairScan s =
      detail::scan_lj(grid, x, scan_r, t3 * t3, exclude_index);
  if (s.hit_index >= 0) report_hit(s.hit_index);
  const double su6 = s.s6, su12 = s.s12;
  out.value += 4.0 * t2 * (su12 - su6);
  if (want_grad || want_hess) {
    out.grad[1] = 4.0 * (su12 - su6);
    out.grad[2] = (4.0 * t2 / t3) * (12.0 * su12 - 6.0 * su6);
  }
  if (want_hess) {
    const double h23 = (4.0 / t3) * (12.0 * su12 - 6.0 * su6);
    out.hess[1][2] = h23;
    out.hess[2][1] = h23;
    out.hess[2][2] = (4.0 * t2 / (t3 * t3)) * (132.0 * su12 - 30.0 * su6);
  }
  return out;
}

double local_energy(const ModelSpec& spec, const Theta& theta, Point x,
                    const Configuration& cfg, const SpatialGrid& grid,
                    int exclude_index) {
  return local_energy_terms(spec, theta, x, cfg, grid, exclude_index).value;
}

Vec3 grad_local_energy(const ModelSpec& spec, const Theta& theta, Point x,
                       const Configuration& cfg, const SpatialGrid& grid,
                       int exclude_index) {
  return local_energy_terms(spec, theta, x, cfg, grid, exclude_index, true)
      .grad;
}

Mat3 hess_local_energy(const ModelSpec& spec, const Theta& theta, Point x,
                       const Configuration& cfg, const SpatialGrid& grid,
                       int exclude_index) {
  return local_energy_terms(spec, theta, x, cfg, grid, exclude_index, true,
                            true)
      .hess;
}

double tail_bound(const ModelSpec& spec, const Theta& theta, double R,
                  double density) {
  if (spec.family != Family::lennard_jones) {
    throw std::invalid_argument("tail_bound applies to the LJ family only");
  }
  spec.validate_theta(theta);
  if (!std::isfinite(R) || R < 1.0) {
    throw std::invalid_argument("truncation radius must be finite and >= 1");
  }
  if (!std::isfinite(density) || density < 0.0) {
    throw std::invalid_argument("density must be finite and >= 0");
  }

  const double a2 = std::fabs(theta.theta2);
  const double t3 = theta.theta3;

  // Points beyond radius R grouped into unit annuli {n-1 <= r <= n},
  // n >= floor(R)+1, each holding at most density * pi * (2n-1) points,
  // each contributing at most the envelope at its inner radius.
  const long n0 = static_cast<long>(std::floor(R)) + 1;
  double sum = 0.0;
  long n = n0;
  for (;; ++n) {
    const double r0 = std::max(R, static_cast<double>(n - 1));
    const double term = kPi * (2.0 * n - 1.0) * lj_envelope(a2, t3, r0);
    sum += term;
    const bool settled = static_cast<double>(n - 1) >= std::max(R, t3) &&
                         n - n0 >= 4 && term < 1e-18 * std::max(sum, 1e-300);
    if (settled || n - n0 > 100000) break;
  }

  // Closed-form bound on the dropped terms n > last: with m = n-1 >= M,
  // pi(2m+1) <= 3 pi m and sum_{m>=M} m^-k <= M^-k + M^{1-k}/(k-1).
  const double M = static_cast<double>(n);
  const double p6 = std::pow(t3, 6.0);
  const double p12 = p6 * p6;
  const double rem =
      12.0 * kPi * a2 *
      (p12 * (std::pow(M, -11.0) + std::pow(M, -10.0) / 10.0) +
       p6 * (std::pow(M, -5.0) + std::pow(M, -4.0) / 4.0));

  return density * (sum + rem);
}

double default_truncation_radius(const ModelSpec& spec, const ParameterBox& box,
                                 double density) {
  if (spec.family != Family::lennard_jones || spec.finite_range()) {
    throw std::invalid_argument(
        "default truncation applies to the infinite-range LJ model only");
  }
  box.validate(3);
  const double scale = std::max(
      1.0, std::max(std::fabs(box.lower[0]), std::fabs(box.upper[0])));
  const double threshold = 1e-6 * scale;
  Theta envelope{0.0, std::max(std::fabs(box.lower[1]), std::fabs(box.upper[1])),
                 box.upper[2]};
  for (double R = 1.0; R <= 256.0; R += 0.5) {
    if (tail_bound(spec, envelope, R, density) < threshold) return R;
  }
  throw numerical_error(
      "no truncation radius up to 256 brings the tail bound below tolerance");
}

}  // namespace ljgibbs
