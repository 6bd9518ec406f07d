#include "ljgibbs/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "ljgibbs/errors.hpp"
#include "ljgibbs/rng.hpp"

namespace ljgibbs {

namespace {

constexpr double kBoundaryTol = 1e-8;

double dot_p(const Vec3& a, const Vec3& b, int p) {
  double s = 0.0;
  for (int i = 0; i < p; ++i) s += a[i] * b[i];
  return s;
}

double norm2_p(const Vec3& a, int p) { return std::sqrt(dot_p(a, a, p)); }

Vec3 projected_gradient(const Vec3& g, const Vec3& x, const ParameterBox& box,
                        int p) {
  Vec3 pg = zero_vec();
  for (int i = 0; i < p; ++i) {
    if (x[i] <= box.lower[i]) {
      pg[i] = std::min(g[i], 0.0);
    } else if (x[i] >= box.upper[i]) {
      pg[i] = std::max(g[i], 0.0);
    } else {
      pg[i] = g[i];
    }
  }
  return pg;
}

struct Objective {
  const PseudoLikEvaluator& ev;
  double area;
  int p;

  std::pair<double, Vec3> value_grad(const Vec3& x) const {
    const auto [lpl, g] = ev.value_and_grad(Theta::from_vec(x));
    Vec3 gu = zero_vec();
    for (int i = 0; i < p; ++i) gu[i] = -g[i] / area;
    return {-lpl / area, gu};
  }

  double value(const Vec3& x) const {
    return -ev.value(Theta::from_vec(x)) / area;
  }
};

struct StartOutcome {
  Vec3 x = zero_vec();
  double f = std::numeric_limits<double>::infinity();
  Vec3 g = zero_vec();
  bool converged = false;
  int iterations = 0;
  int nm_used = 0;
  bool evaluable = false;  // found at least one finite value
};

// Nelder-Mead on the box (evaluations clamped to the box) used as a
// rescue when the quasi-Newton line search stalls.
Vec3 nelder_mead(const Objective& obj, const ParameterBox& box, Vec3 start,
                 int max_iter) {
  const int p = obj.p;
  const int m = p + 1;
  std::vector<Vec3> xs(m, start);
  std::vector<double> fs(m);
  for (int i = 0; i < p; ++i) {
    Vec3 v = start;
    const double step = 0.05 * (box.upper[i] - box.lower[i]);
    v[i] = std::min(v[i] + step, box.upper[i]);
    if (v[i] == start[i]) v[i] = std::max(start[i] - step, box.lower[i]);
    xs[i + 1] = v;
  }
  for (int i = 0; i < m; ++i) fs[i] = obj.value(box.project(xs[i], p));

  const auto order = [&]() {
    for (int a = 0; a < m; ++a)
      for (int b = a + 1; b < m; ++b)
        if (fs[b] < fs[a]) {
          std::swap(fs[a], fs[b]);
          std::swap(xs[a], xs[b]);
        }
  };
  const auto centroid = [&]() {
    Vec3 c = zero_vec();
    for (int i = 0; i < m - 1; ++i)
      for (int d = 0; d < p; ++d) c[d] += xs[i][d] / (m - 1);
    return c;
  };
  const auto blend = [&](const Vec3& a, const Vec3& b, double t) {
    Vec3 r = zero_vec();
    for (int d = 0; d < p; ++d) r[d] = a[d] + t * (b[d] - a[d]);
    return r;
  };

  order();
  for (int it = 0; it < max_iter; ++it) {
    const Vec3 c = centroid();
    const Vec3 xr = box.project(blend(c, xs[m - 1], -1.0), p);
    const double fr = obj.value(xr);
    if (fr < fs[0]) {
      const Vec3 xe = box.project(blend(c, xs[m - 1], -2.0), p);
      const double fe = obj.value(xe);
      if (fe < fr) {
        xs[m - 1] = xe;
        fs[m - 1] = fe;
      } else {
        xs[m - 1] = xr;
        fs[m - 1] = fr;
      }
    } else if (fr < fs[m - 2]) {
      xs[m - 1] = xr;
      fs[m - 1] = fr;
    } else {
      const Vec3 xc = box.project(blend(c, xs[m - 1], 0.5), p);
      const double fc = obj.value(xc);
      if (fc < fs[m - 1]) {
        xs[m - 1] = xc;
        fs[m - 1] = fc;
      } else {
        for (int i = 1; i < m; ++i) {
          xs[i] = blend(xs[0], xs[i], 0.5);
          fs[i] = obj.value(box.project(xs[i], p));
        }
      }
    }
    order();
  }
  return box.project(xs[0], p);
}

StartOutcome minimize_from(const Objective& obj, const ParameterBox& box,
                           Vec3 start, const FitOptions& opts) {
  const int p = obj.p;
  StartOutcome out;
  Vec3 x = box.project(start, p);
  auto [f, g] = obj.value_grad(x);
  if (!std::isfinite(f)) {
    // Start in a diverging region: let Nelder-Mead look for footing.
    x = nelder_mead(obj, box, x, 50 * p);
    std::tie(f, g) = obj.value_grad(x);
    ++out.nm_used;
    if (!std::isfinite(f)) return out;
  }
  out.evaluable = true;

  Mat3 h = zero_mat();
  for (int i = 0; i < p; ++i) h[i][i] = 1.0;
  bool h_scaled = false;
  bool nm_spent = out.nm_used > 0;

  int it = 0;
  for (; it < opts.max_iter; ++it) {
    const Vec3 pg = projected_gradient(g, x, box, p);
    if (inf_norm(pg, p) <= opts.grad_tol) {
      out.converged = true;
      break;
    }

    Vec3 d = zero_vec();
    for (int i = 0; i < p; ++i) {
      double s = 0.0;
      for (int j = 0; j < p; ++j) s -= h[i][j] * g[j];
      d[i] = s;
    }
    if (dot_p(d, g, p) >= 0.0) {
      h = zero_mat();
      for (int j = 0; j < p; ++j) h[j][j] = 1.0;
      h_scaled = false;
      for (int i = 0; i < p; ++i) d[i] = -g[i];
    }

    // Backtracking Armijo search along the projected arc.
    bool accepted = false;
    Vec3 xn = x, gn = g;
    double fn = f;
    for (int pass = 0; pass < 2 && !accepted; ++pass) {
      if (pass == 1) {
        for (int i = 0; i < p; ++i) d[i] = -pg[i];
      }
      double alpha = 1.0;
      for (int ls = 0; ls < 60; ++ls) {
        Vec3 cand = zero_vec();
        for (int i = 0; i < p; ++i) cand[i] = x[i] + alpha * d[i];
        cand = box.project(cand, p);
        Vec3 s = zero_vec();
        for (int i = 0; i < p; ++i) s[i] = cand[i] - x[i];
        if (norm2_p(s, p) == 0.0) break;
        const auto [fc, gc] = obj.value_grad(cand);
        if (std::isfinite(fc) && fc <= f + 1e-4 * dot_p(g, s, p)) {
          xn = cand;
          fn = fc;
          gn = gc;
          accepted = true;
          break;
        }
        alpha *= 0.5;
      }
    }

    if (!accepted) {
      if (!nm_spent) {
        nm_spent = true;
        ++out.nm_used;
        const Vec3 xr = nelder_mead(obj, box, x, 100 * p);
        const auto [fr, gr] = obj.value_grad(xr);
        if (std::isfinite(fr) && fr < f) {
          x = xr;
          f = fr;
          g = gr;
          h = zero_mat();
          for (int i = 0; i < p; ++i) h[i][i] = 1.0;
          h_scaled = false;
          continue;
        }
      }
      break;  // stalled
    }

    Vec3 s = zero_vec(), yv = zero_vec();
    for (int i = 0; i < p; ++i) {
      s[i] = xn[i] - x[i];
      yv[i] = gn[i] - g[i];
    }
    const double sy = dot_p(s, yv, p);
    if (sy > 1e-12 * norm2_p(s, p) * norm2_p(yv, p)) {
      if (!h_scaled) {
        const double yy = dot_p(yv, yv, p);
        if (yy > 0.0) {
          h = zero_mat();
          for (int i = 0; i < p; ++i) h[i][i] = sy / yy;
        }
        h_scaled = true;
      }
      // Inverse BFGS update.
      const double rho = 1.0 / sy;
      Vec3 hy = zero_vec();
      for (int i = 0; i < p; ++i) {
        double acc = 0.0;
        for (int j = 0; j < p; ++j) acc += h[i][j] * yv[j];
        hy[i] = acc;
      }
      const double yhy = dot_p(yv, hy, p);
      for (int i = 0; i < p; ++i) {
        for (int j = 0; j < p; ++j) {
          h[i][j] += (1.0 + rho * yhy) * rho * s[i] * s[j] -
                     rho * (s[i] * hy[j] + hy[i] * s[j]);
        }
      }
    }

    x = xn;
    f = fn;
    g = gn;
  }

  out.x = x;
  out.f = f;
  out.g = g;
  out.iterations = it;
  if (!out.converged) {
    const Vec3 pg = projected_gradient(g, x, box, p);
    out.converged = inf_norm(pg, p) <= opts.grad_tol;
  }
  return out;
}

std::vector<Vec3> make_starts(const ParameterBox& box, int p, int n_starts,
                              std::uint64_t seed) {
  std::vector<Vec3> starts;
  Vec3 center = zero_vec();
  for (int i = 0; i < p; ++i)
    center[i] = 0.5 * (box.lower[i] + box.upper[i]);
  starts.push_back(center);

  const int extra = n_starts - 1;
  if (extra <= 0) return starts;

  // Latin hypercube over the box: one draw per stratum per dimension.
  Rng rng(seed ^ 0x5851F42D4C957F2DULL);
  std::vector<std::vector<int>> perms(p);
  for (int d = 0; d < p; ++d) {
    perms[d].resize(extra);
    for (int k = 0; k < extra; ++k) perms[d][k] = k;
    for (int k = extra - 1; k > 0; --k) {
      const int j = static_cast<int>(rng.below(k + 1));
      std::swap(perms[d][k], perms[d][j]);
    }
  }
  for (int k = 0; k < extra; ++k) {
    Vec3 v = zero_vec();
    for (int d = 0; d < p; ++d) {
      const double width = (box.upper[d] - box.lower[d]) / extra;
      v[d] = box.lower[d] + (perms[d][k] + rng.unif()) * width;
    }
    starts.push_back(v);
  }
  return starts;
}

}  // namespace

double normal_quantile(double prob) {
  if (!(prob > 0.0) || !(prob < 1.0)) {
    throw std::invalid_argument("quantile probability must be in (0, 1)");
  }
  // Reflect the upper half onto the lower half: 1 - prob is exact here
  // (both operands share a binade), and the lower-tail erfc below keeps
  // full relative precision where 1 - Phi(x) would round to ulp(1).
  if (prob > 0.5) return -normal_quantile(1.0 - prob);
  // Acklam's rational approximation, then one Halley step against the
  // erfc-based CDF.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (prob < plow) {
    const double q = std::sqrt(-2.0 * std::log(prob));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else {
    const double q = prob - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) *
        q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  }
  static const double sqrt2 = std::sqrt(2.0);
  static const double sqrt_2pi = std::sqrt(2.0 * 3.14159265358979323846);
  const double err = 0.5 * std::erfc(-x / sqrt2) - prob;
  const double u = err * sqrt_2pi * std::exp(0.5 * x * x);
  x -= u / (1.0 + 0.5 * x * u);
  return x;
}

Mat3 sigma_hat(const ScoreBreakdown& breakdown, int p, double* psd_clip,
               bool* small_sample) {
  const CellPartition& part = breakdown.partition;
  if (part.cell_count() <= 0 ||
      breakdown.cell_grads.size() !=
          static_cast<std::size_t>(part.cell_count())) {
    throw std::invalid_argument("score breakdown has no cell decomposition");
  }
  if (small_sample) *small_sample = part.kx() < 3 || part.ky() < 3;

  Mat3 acc = zero_mat();
  for (int j = 0; j < part.ky(); ++j) {
    for (int i = 0; i < part.kx(); ++i) {
      const Vec3& ci = breakdown.cell_grads[part.flat_index({i, j})];
      for (const CellIndex nb : part.neighbors({i, j})) {
        const Vec3& cj = breakdown.cell_grads[part.flat_index(nb)];
        for (int r = 0; r < p; ++r)
          for (int s = 0; s < p; ++s) acc[r][s] += ci[r] * cj[s];
      }
    }
  }
  const double area = part.window().area();
  Mat3 sym = zero_mat();
  for (int r = 0; r < p; ++r)
    for (int s = 0; s < p; ++s)
      sym[r][s] = 0.5 * (acc[r][s] + acc[s][r]) / area;

  return psd_project(sym, p, psd_clip);
}

Mat3 sandwich_covariance(const Mat3& u2, const Mat3& sigma, int p, double area,
                         double* condition) {
  if (!(area > 0.0) || !std::isfinite(area)) {
    throw std::invalid_argument("window area must be finite and > 0");
  }
  const Mat3 inv = sym_inverse(u2, p, 1e-10, condition);
  Mat3 cov = mat_mul(mat_mul(inv, sigma, p), inv, p);
  for (int r = 0; r < p; ++r)
    for (int s = r; s < p; ++s) {
      const double v = 0.5 * (cov[r][s] + cov[s][r]) / area;
      cov[r][s] = v;
      cov[s][r] = v;
    }
  return cov;
}

std::array<std::array<double, 2>, 3> confidence_intervals(
    const Theta& theta_hat, const Mat3& cov, int p, double level,
    bool* degenerate) {
  if (!(level > 0.0) || !(level < 1.0)) {
    throw std::invalid_argument("confidence level must be in (0, 1)");
  }
  const double z = normal_quantile(0.5 * (1.0 + level));
  const Vec3 th = theta_hat.as_vec();
  std::array<std::array<double, 2>, 3> out{};
  bool any_zero = false;
  for (int k = 0; k < p; ++k) {
    const double var = std::max(cov[k][k], 0.0);
    const double hw = z * std::sqrt(var);
    out[k] = {th[k] - hw, th[k] + hw};
    if (hw == 0.0) any_zero = true;
  }
  for (int k = p; k < 3; ++k) out[k] = {0.0, 0.0};
  if (degenerate) *degenerate = any_zero;
  return out;
}

FitResult fit_mple(const Configuration& cfg, const ModelSpec& spec,
                   const ParameterBox& box, const Window& estimation_window,
                   const QuadratureScheme& quad, const FitOptions& opts) {
  spec.validate();
  const int p = spec.param_dim();
  box.validate(p);
  if (spec.family == Family::lennard_jones && box.lower[2] <= 0.0) {
    throw std::invalid_argument("LJ scale theta3 lower bound must be > 0");
  }
  if (opts.n_starts < 1) {
    throw std::invalid_argument("at least one optimizer start is required");
  }
  if (opts.want_variance && !spec.finite_range()) {
    throw std::invalid_argument(
        "confidence intervals require a finite interaction range: asymptotic "
        "normality of the maximum pseudo-likelihood estimator is available "
        "for finite-range models only; refit with a finite D or disable the "
        "variance stage");
  }

  PseudoLikEvaluator ev(cfg, spec, estimation_window, quad, opts.threads);
  const double area = ev.area();
  const Objective obj{ev, area, p};

  const std::vector<Vec3> starts =
      make_starts(box, p, opts.n_starts, opts.seed);
  std::vector<StartOutcome> outcomes;
  outcomes.reserve(starts.size());
  for (const Vec3& s : starts) {
    outcomes.push_back(minimize_from(obj, box, s, opts));
  }

  int best = -1;
  bool any_evaluable = false, any_converged = false;
  for (std::size_t k = 0; k < outcomes.size(); ++k) {
    const StartOutcome& o = outcomes[k];
    any_evaluable = any_evaluable || o.evaluable;
    any_converged = any_converged || o.converged;
    if (!o.evaluable) continue;
    if (best < 0 || o.f < outcomes[best].f) best = static_cast<int>(k);
  }
  if (!any_evaluable) {
    throw numerical_error(
        "pseudo-likelihood is non-finite at every optimizer start; the "
        "parameter box may be degenerate for this pattern");
  }
  const StartOutcome& kept = outcomes[best];
  if (!any_converged) {
    std::ostringstream msg;
    msg << "optimizer failed to converge from " << starts.size()
        << " starts; best iterate theta = (";
    for (int i = 0; i < p; ++i) msg << (i ? ", " : "") << kept.x[i];
    msg << ") with objective " << kept.f << " and projected gradient norm "
        << inf_norm(projected_gradient(kept.g, kept.x, box, p), p);
    throw numerical_error(msg.str());
  }

  FitResult res;
  res.theta_hat = Theta::from_vec(kept.x);
  res.p = p;
  res.estimation_window = estimation_window;
  res.n_points = ev.data_in_window();
  res.resolution = opts.resolution;
  res.level = opts.level;

  res.opt.converged = kept.converged;
  res.opt.iterations = kept.iterations;
  res.opt.grad_pnorm =
      inf_norm(projected_gradient(kept.g, kept.x, box, p), p);
  for (const StartOutcome& o : outcomes) {
    res.opt.start_values.push_back(o.f);
    res.opt.nm_fallbacks += o.nm_used;
  }

  const auto [lpl, lpl_grad] = ev.value_and_grad(res.theta_hat);
  res.log_pl_value = lpl;
  res.grad_norm = inf_norm(lpl_grad, p);

  for (int i = 0; i < p; ++i) {
    const double span = box.upper[i] - box.lower[i];
    if (kept.x[i] - box.lower[i] <= kBoundaryTol * span ||
        box.upper[i] - kept.x[i] <= kBoundaryTol * span) {
      res.boundary_warning = true;
    }
  }

  if (opts.want_variance) {
    double cell = opts.cell_side;
    if (!(cell > 0.0)) {
      const double range = spec.interaction_range();
      cell = range > 0.0 ? range
                         : std::min(estimation_window.width(),
                                    estimation_window.height()) /
                               8.0;
    }
    res.cell_side = cell;
    const CellPartition part = build_partition(estimation_window, cell);
    const ScoreBreakdown bd = ev.breakdown(res.theta_hat, part);
    res.sigma =
        sigma_hat(bd, p, &res.sigma_psd_clip, &res.small_sample_warning);

    Mat3 hess = ev.hess(res.theta_hat);
    for (int i = 0; i < p; ++i)
      for (int j = 0; j < p; ++j) res.u2[i][j] = -hess[i][j] / area;

    res.cov =
        sandwich_covariance(res.u2, res.sigma, p, area, &res.u2_condition);
    res.ci = confidence_intervals(res.theta_hat, res.cov, p, opts.level,
                                  &res.degenerate_ci);
    res.has_ci = true;
  }
  return res;
}

FitResult fit_mple_auto(const Configuration& cfg, const ModelSpec& spec,
                        const ParameterBox& box, const FitOptions& opts) {
  spec.validate();
  const int p = spec.param_dim();
  box.validate(p);
  if (opts.want_variance && !spec.finite_range()) {
    throw std::invalid_argument(
        "confidence intervals require a finite interaction range: asymptotic "
        "normality of the maximum pseudo-likelihood estimator is available "
        "for finite-range models only; refit with a finite D or disable the "
        "variance stage");
  }

  ModelSpec used = spec;
  if (spec.family == Family::lennard_jones && !spec.finite_range() &&
      spec.truncation_radius == 0.0) {
    const double density =
        static_cast<double>(cfg.size()) / cfg.window().area();
    double radius = default_truncation_radius(spec, box, density);
    // Minus sampling must leave a usable estimation window, so the
    // tolerance-driven radius is capped by the window size; the radius
    // actually used is reported in the result.
    double cap = std::max(
        1.0, std::min(cfg.window().width(), cfg.window().height()) / 4.0);
    used.truncation_radius = std::min(radius, cap);
  }

  const double range = used.interaction_range();
  double cell = opts.cell_side;
  if (!(cell > 0.0)) {
    cell = range > 0.0
               ? range
               : std::min(cfg.window().width(), cfg.window().height()) / 8.0;
  }
  const Window est = default_estimation_window(cfg.window(), range, cell);

  double res_per_unit = opts.resolution;
  if (!(res_per_unit > 0.0)) {
    res_per_unit = range > 0.0 ? opts.quad_per_range / range : 2.0;
  }
  const QuadratureScheme quad = make_stratified(est, res_per_unit);

  FitOptions wired = opts;
  wired.cell_side = cell;
  wired.resolution = res_per_unit;
  FitResult result = fit_mple(cfg, used, box, est, quad, wired);
  if (spec.family == Family::lennard_jones && !spec.finite_range()) {
    result.truncation_radius = used.truncation_radius;
  }
  return result;
}

}  // namespace ljgibbs
