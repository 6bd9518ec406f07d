#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <doctest.h>

#include "ljgibbs/errors.hpp"
#include "ljgibbs/geometry.hpp"
#include "ljgibbs/inference.hpp"
#include "ljgibbs/model.hpp"
#include "ljgibbs/pseudolik.hpp"
#include "ljgibbs/quadrature.hpp"
#include "ljgibbs/rng.hpp"
#include "ljgibbs/sampler.hpp"

using namespace ljgibbs;

namespace {

Configuration poisson_pattern(const Window& w, int n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Point> pts;
  for (int k = 0; k < n; ++k)
    pts.push_back({rng.unif(w.x_min, w.x_max), rng.unif(w.y_min, w.y_max)});
  return Configuration(std::move(pts), w);
}

}  // namespace

TEST_CASE("normal quantile oracles") {
  // Reference values carried to 18 digits from an independent
  // high-precision evaluation of the inverse error function.
  CHECK(normal_quantile(0.975) ==
        doctest::Approx(1.95996398454005424).epsilon(1e-13));
  CHECK(normal_quantile(0.995) ==
        doctest::Approx(2.57582930354890076).epsilon(1e-13));
  CHECK(normal_quantile(0.95) ==
        doctest::Approx(1.64485362695147271).epsilon(1e-13));
  CHECK(normal_quantile(0.9) ==
        doctest::Approx(1.28155156554460047).epsilon(1e-13));
  CHECK(normal_quantile(0.75) ==
        doctest::Approx(0.674489750196081743).epsilon(1e-13));
  CHECK(normal_quantile(0.6) ==
        doctest::Approx(0.253347103135799799).epsilon(1e-13));
  CHECK(normal_quantile(0.5) == 0.0);

  // Symmetry and round trip through the normal CDF.
  for (double p : {0.52, 0.6, 0.8, 0.95, 0.999, 0.9999999}) {
    double z = normal_quantile(p);
    CHECK(normal_quantile(1.0 - p) == doctest::Approx(-z).epsilon(1e-12));
    double phi = 0.5 * std::erfc(-z / std::sqrt(2.0));
    CHECK(phi == doctest::Approx(p).epsilon(1e-12));
  }

  CHECK_THROWS_AS(normal_quantile(0.0), std::invalid_argument);
  CHECK_THROWS_AS(normal_quantile(1.0), std::invalid_argument);
  CHECK_THROWS_AS(normal_quantile(-0.2), std::invalid_argument);
}

TEST_CASE("poisson fit recovers the closed form") {
  // theta1_hat = -log(N/|W|) exactly maximizes the pseudo-likelihood;
  // u2[0][0] at the optimum equals N/|W| because the quadrature is exact
  // for constants.
  Window w(0.0, 10.0, 0.0, 10.0);
  Configuration cfg = poisson_pattern(w, 83, 5);
  ModelSpec poisson;
  ParameterBox box;
  box.lower = {-5.0, 0.0, 0.0};
  box.upper = {5.0, 0.0, 0.0};

  FitOptions opts;
  opts.n_starts = 3;
  FitResult fit = fit_mple_auto(cfg, poisson, box, opts);

  const double expected = -std::log(83.0 / 100.0);
  CHECK(fit.p == 1);
  CHECK(fit.opt.converged);
  CHECK(!fit.boundary_warning);
  CHECK(std::fabs(fit.theta_hat.theta1 - expected) < 1e-8);
  CHECK(fit.u2[0][0] == doctest::Approx(83.0 / 100.0).epsilon(1e-8));

  // Sandwich variance should sit near the poisson information bound
  // Var(theta1_hat) ~ 1/E[N].
  REQUIRE(fit.has_ci);
  CHECK(fit.cov[0][0] * 83.0 > 0.5);
  CHECK(fit.cov[0][0] * 83.0 < 2.0);
  CHECK(fit.ci[0][0] < expected);
  CHECK(fit.ci[0][1] > expected);

  // No erosion for a zero-range model.
  CHECK(fit.estimation_window.x_min == 0.0);
  CHECK(fit.estimation_window.x_max == 10.0);
  CHECK(fit.n_points == 83);
}

TEST_CASE("confidence intervals refuse infinite-range models") {
  Window w(0.0, 10.0, 0.0, 10.0);
  Configuration cfg = poisson_pattern(w, 120, 9);
  ModelSpec lj_inf;
  lj_inf.family = Family::lennard_jones;  // no truncation radius set
  ParameterBox box;
  box.lower = {-4.0, 0.05, 0.02};
  box.upper = {2.0, 5.0, 0.35};

  FitOptions opts;
  opts.want_variance = true;
  try {
    fit_mple_auto(cfg, lj_inf, box, opts);
    CHECK(false);
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("finite interaction range") !=
          std::string::npos);
  }
}

TEST_CASE("block variance estimate degenerates to rank one on a single cell") {
  Window w(0.0, 3.0, 0.0, 3.0);
  Configuration cfg = poisson_pattern(w, 40, 17);
  ModelSpec strauss;
  strauss.family = Family::strauss;
  strauss.strauss_radius = 0.5;
  Theta theta{-0.5, 0.4, 0.0};

  Window est = erode(w, 0.5);  // [0.5, 2.5]^2
  QuadratureScheme quad = make_stratified(est, 20.0);
  CellPartition part = build_partition(est, 2.0);  // one 2x2 cell
  REQUIRE(part.cell_count() == 1);

  ScoreBreakdown bd;
  grad_log_pl(cfg, strauss, theta, est, quad, &part, &bd);

  double clip = 0.0;
  bool small = false;
  Mat3 sigma = sigma_hat(bd, 2, &clip, &small);
  CHECK(small);

  // Exactly symmetric by construction.
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) CHECK(sigma[a][b] == sigma[b][a]);

  // One outer product c c^T has rank <= 1: the smaller eigenvalue of the
  // 2x2 block vanishes.
  Mat3 vecs;
  Vec3 vals;
  sym_eigen(sigma, 2, vecs, vals);
  double vmax = std::max(std::fabs(vals[0]), std::fabs(vals[1]));
  double vmin = std::min(std::fabs(vals[0]), std::fabs(vals[1]));
  REQUIRE(vmax > 0.0);
  CHECK(vmin / vmax < 1e-12);
}

TEST_CASE("singular information matrix raises instead of fabricating") {
  // An empty pattern gives a flat pseudo-likelihood in theta2: the
  // information matrix is singular and the variance stage must say so.
  Window w(0.0, 6.0, 0.0, 6.0);
  Configuration empty({}, w);
  ModelSpec strauss;
  strauss.family = Family::strauss;
  strauss.strauss_radius = 0.5;
  ParameterBox box;
  box.lower = {-2.0, 0.0, 0.0};
  box.upper = {4.0, 2.0, 0.0};

  FitOptions opts;
  opts.n_starts = 2;
  CHECK_THROWS_AS(fit_mple_auto(empty, strauss, box, opts), numerical_error);

  // Without the variance stage the fit itself goes through and slams the
  // intensity parameter into the box edge.
  opts.want_variance = false;
  FitResult fit = fit_mple_auto(empty, strauss, box, opts);
  CHECK(fit.boundary_warning);
  CHECK(fit.theta_hat.theta1 == 4.0);
}

TEST_CASE("optimizer agrees with a dense grid search") {
  ModelSpec strauss;
  strauss.family = Family::strauss;
  strauss.strauss_radius = 0.5;
  Window w(0.0, 6.0, 0.0, 6.0);

  SamplerConfig sim;
  sim.n_steps = 40000;
  sim.seed = 314;
  sim.trace_every = 0;
  auto [cfg, stats] = simulate(strauss, Theta{-0.9, 0.8, 0.0}, w, sim);
  REQUIRE(cfg.size() > 30);

  Window est = default_estimation_window(w, 0.5, 0.5);
  QuadratureScheme quad = make_stratified(est, 16.0);
  PseudoLikEvaluator ev(cfg, strauss, est, quad);
  const double area = est.area();

  ParameterBox box;
  box.lower = {-3.0, 0.0, 0.0};
  box.upper = {1.0, 3.0, 0.0};

  // Dense evaluation of the scaled objective u_n over the box.
  const int n_grid = 80;
  double best = std::numeric_limits<double>::infinity();
  double best_t1 = 0.0, best_t2 = 0.0;
  for (int i = 0; i <= n_grid; ++i)
    for (int j = 0; j <= n_grid; ++j) {
      double t1 = box.lower[0] + (box.upper[0] - box.lower[0]) * i / n_grid;
      double t2 = box.lower[1] + (box.upper[1] - box.lower[1]) * j / n_grid;
      double v = -ev.value(Theta{t1, t2, 0.0}) / area;
      if (v < best) {
        best = v;
        best_t1 = t1;
        best_t2 = t2;
      }
    }

  FitOptions opts;
  opts.n_starts = 3;
  opts.want_variance = false;
  FitResult fit = fit_mple(cfg, strauss, box, est, quad, opts);
  CHECK(fit.opt.converged);

  // The continuous optimum can only improve on the grid minimum, and the
  // minimizer sits within one grid spacing of the grid argmin.
  double fit_value = -fit.log_pl_value / area;
  CHECK(fit_value <= best + 1e-12);
  CHECK(std::fabs(fit.theta_hat.theta1 - best_t1) <=
        (box.upper[0] - box.lower[0]) / n_grid + 1e-9);
  CHECK(std::fabs(fit.theta_hat.theta2 - best_t2) <=
        (box.upper[1] - box.lower[1]) / n_grid + 1e-9);

  // Every start is tracked; the kept value is the best of them.
  REQUIRE(fit.opt.start_values.size() == 3);
  double min_start = fit.opt.start_values[0];
  for (double v : fit.opt.start_values) min_start = std::min(min_start, v);
  CHECK(fit_value == doctest::Approx(min_start).epsilon(1e-12));
}

TEST_CASE("full variance pipeline on a simulated strauss pattern") {
  ModelSpec strauss;
  strauss.family = Family::strauss;
  strauss.strauss_radius = 0.4;
  Theta truth{-1.2, 0.7, 0.0};
  Window w(0.0, 10.0, 0.0, 10.0);

  SamplerConfig sim;
  sim.n_steps = 80000;
  sim.seed = 2718;
  sim.trace_every = 0;
  auto [cfg, stats] = simulate(strauss, truth, w, sim);
  REQUIRE(cfg.size() > 100);

  ParameterBox box;
  box.lower = {-3.0, 0.0, 0.0};
  box.upper = {1.0, 3.0, 0.0};
  FitOptions opts;
  opts.n_starts = 3;
  opts.level = 0.9;

  FitResult fit = fit_mple_auto(cfg, strauss, box, opts);
  REQUIRE(fit.has_ci);
  CHECK(fit.opt.converged);
  CHECK(fit.level == 0.9);
  CHECK(!fit.small_sample_warning);
  CHECK(!fit.degenerate_ci);
  CHECK(fit.u2_condition >= 1.0);

  for (int a = 0; a < 2; ++a) {
    CHECK(fit.cov[a][a] > 0.0);
    CHECK(fit.ci[a][0] < fit.theta_hat.as_vec()[a]);
    CHECK(fit.ci[a][1] > fit.theta_hat.as_vec()[a]);
    // Interval width matches the covariance diagonal and level.
    double half = normal_quantile(0.95) * std::sqrt(fit.cov[a][a]);
    CHECK(fit.ci[a][1] - fit.ci[a][0] ==
          doctest::Approx(2.0 * half).epsilon(1e-10));
    for (int b = 0; b < 2; ++b) CHECK(fit.cov[a][b] == fit.cov[b][a]);
  }

  // The estimate lands in a loose neighborhood of the truth (tight
  // statistical checks live in the acceptance battery).
  CHECK(std::fabs(fit.theta_hat.theta1 - truth.theta1) < 1.0);
  CHECK(std::fabs(fit.theta_hat.theta2 - truth.theta2) < 1.0);

  // Fewer than 3x3 cells triggers the small-sample flag.
  FitOptions coarse = opts;
  coarse.cell_side = 4.0;
  FitResult narrow = fit_mple_auto(cfg, strauss, box, coarse);
  CHECK(narrow.small_sample_warning);
}

TEST_CASE("box edges are reported as boundary warnings") {
  Window w(0.0, 10.0, 0.0, 10.0);
  Configuration cfg = poisson_pattern(w, 100, 23);
  ModelSpec poisson;

  // True optimum -log(1.0) = 0 lies below the box.
  ParameterBox box;
  box.lower = {0.5, 0.0, 0.0};
  box.upper = {2.0, 0.0, 0.0};
  FitOptions opts;
  opts.want_variance = false;
  FitResult fit = fit_mple_auto(cfg, poisson, box, opts);
  CHECK(fit.boundary_warning);
  CHECK(fit.theta_hat.theta1 == 0.5);
}
