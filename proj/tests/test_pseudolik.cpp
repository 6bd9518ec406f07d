#include <cmath>
#include <limits>
#include <vector>

#include <doctest.h>

#include "ljgibbs/errors.hpp"
#include "ljgibbs/geometry.hpp"
#include "ljgibbs/model.hpp"
#include "ljgibbs/pseudolik.hpp"
#include "ljgibbs/quadrature.hpp"
#include "ljgibbs/rng.hpp"

using namespace ljgibbs;

namespace {

Configuration poisson_pattern(const Window& w, int n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Point> pts;
  for (int k = 0; k < n; ++k)
    pts.push_back({rng.unif(w.x_min, w.x_max), rng.unif(w.y_min, w.y_max)});
  return Configuration(std::move(pts), w);
}

// Uniform proposals thinned to a minimum separation. A pair much closer
// than the scale parameter sends |log_pl| past 1e7, where finite
// differences drown in rounding; such configurations have density
// ~e^{-1e7} under the models tested here, so a separated pattern is the
// representative case.
Configuration separated_pattern(const Window& w, int n, std::uint64_t seed,
                                double dmin) {
  Rng rng(seed);
  std::vector<Point> pts;
  int tries = 0;
  while (static_cast<int>(pts.size()) < n && tries < 100 * n) {
    ++tries;
    Point c{rng.unif(w.x_min, w.x_max), rng.unif(w.y_min, w.y_max)};
    bool ok = true;
    for (const Point& q : pts) {
      double dx = c.x - q.x, dy = c.y - q.y;
      if (dx * dx + dy * dy < dmin * dmin) {
        ok = false;
        break;
      }
    }
    if (ok) pts.push_back(c);
  }
  return Configuration(std::move(pts), w);
}

}  // namespace

TEST_CASE("poisson closed forms") {
  // With a constant integrand the quadrature is exact:
  // log_pl = -|W| e^{-t1} - N t1, gradient |W| e^{-t1} - N,
  // second derivative -|W| e^{-t1}.
  Window w(0.0, 10.0, 0.0, 10.0);
  Configuration cfg = poisson_pattern(w, 37, 11);
  ModelSpec spec;  // poisson
  QuadratureScheme quad = make_stratified(w, 2.0);

  const double t1 = 0.3;
  const double ew = 100.0 * std::exp(-t1);
  Theta theta{t1, 0.0, 0.0};
  CHECK(log_pl(cfg, spec, theta, w, quad) ==
        doctest::Approx(-ew - 37 * t1).epsilon(1e-13));
  CHECK(grad_log_pl(cfg, spec, theta, w, quad)[0] ==
        doctest::Approx(ew - 37).epsilon(1e-13));
  CHECK(hess_log_pl(cfg, spec, theta, w, quad)[0][0] ==
        doctest::Approx(-ew).epsilon(1e-13));

  CHECK(u_n(cfg, spec, theta, w, quad) ==
        doctest::Approx(-log_pl(cfg, spec, theta, w, quad) / 100.0)
            .epsilon(1e-15));
  CHECK(u_n1(cfg, spec, theta, w, quad)[0] ==
        doctest::Approx(-(ew - 37) / 100.0).epsilon(1e-13));
  CHECK(u_n2(cfg, spec, theta, w, quad)[0][0] ==
        doctest::Approx(ew / 100.0).epsilon(1e-13));
}

TEST_CASE("two-point lennard-jones oracle") {
  // Independent references for
  //   log_pl = -I - (2 t1 + 2 g(0.6)),  I = int_{[1,3]^2} e^{-V(u|phi)} du:
  // the same midpoint rule on a 640^2 grid evaluated in an independent
  // implementation gives I = 3.5293054883155763 (frozen), and adaptive
  // integration gives I = 3.529304043505505 +/- 7e-6.
  Window w(0.0, 4.0, 0.0, 4.0);
  Configuration cfg({{2.0, 2.0}, {2.6, 2.0}}, w);
  ModelSpec spec;
  spec.family = Family::lennard_jones;
  spec.lj_range = 1.0;
  Theta theta{0.2, 1.0, 0.3};

  Window est(1.0, 3.0, 1.0, 3.0);
  QuadratureScheme quad = make_stratified(est, 320.0);
  REQUIRE(quad.nx == 640);

  const double sum_term = 2 * 0.2 + 2 * (-0.0615234375);  // g(0.6) is dyadic
  const double value = log_pl(cfg, spec, theta, est, quad);
  CHECK(value == doctest::Approx(-3.5293054883155763 - sum_term)
                     .epsilon(1e-11));
  CHECK(std::fabs(value - (-3.529304043505505 - sum_term)) < 2e-5);
}

TEST_CASE("derivatives are consistent with the value") {
  Window w(0.0, 6.0, 0.0, 6.0);
  Configuration cfg = separated_pattern(w, 90, 21, 0.1);
  REQUIRE(cfg.size() == 90);

  auto fd_suite = [&](const ModelSpec& spec, const Theta& base, int p) {
    Window est = default_estimation_window(w, spec.interaction_range(),
                                           spec.interaction_range());
    QuadratureScheme quad = make_stratified(est, 24.0);
    PseudoLikEvaluator ev(cfg, spec, est, quad);

    Vec3 tv = base.as_vec();
    Vec3 g = ev.grad(base);
    Mat3 h = ev.hess(base);
    auto [v0, g0] = ev.value_and_grad(base);
    CHECK(v0 == ev.value(base));
    for (int a = 0; a < p; ++a) CHECK(g0[a] == g[a]);

    for (int a = 0; a < p; ++a) {
      // Step proportional to the parameter magnitude: the scale parameter
      // enters through 12th powers, so an absolute step loses to truncation.
      double step = 1e-5 * (tv[a] != 0.0 ? std::fabs(tv[a]) : 1.0);
      Vec3 up = tv, dn = tv;
      up[a] += step;
      dn[a] -= step;
      double fd =
          (ev.value(Theta::from_vec(up)) - ev.value(Theta::from_vec(dn))) /
          (2 * step);
      CHECK(std::fabs(g[a] - fd) /
                std::max({1.0, std::fabs(g[a]), std::fabs(fd)}) <
            1e-6);
      Vec3 gu = ev.grad(Theta::from_vec(up));
      Vec3 gd = ev.grad(Theta::from_vec(dn));
      for (int b = 0; b < p; ++b) {
        double fdh = (gu[b] - gd[b]) / (2 * step);
        CHECK(std::fabs(h[a][b] - fdh) /
                  std::max({1.0, std::fabs(h[a][b]), std::fabs(fdh)}) <
              1e-5);
        CHECK(h[a][b] == h[b][a]);
      }
    }
  };

  ModelSpec strauss;
  strauss.family = Family::strauss;
  strauss.strauss_radius = 0.5;
  fd_suite(strauss, Theta{-0.6, 0.8, 0.0}, 2);

  ModelSpec lj;
  lj.family = Family::lennard_jones;
  lj.lj_range = 0.5;
  fd_suite(lj, Theta{-0.3, 1.1, 0.14}, 3);
}

TEST_CASE("per-cell breakdown sums to the whole-window score") {
  Window w(0.0, 8.0, 0.0, 8.0);
  Configuration cfg = poisson_pattern(w, 160, 33);
  ModelSpec lj;
  lj.family = Family::lennard_jones;
  lj.lj_range = 0.5;
  Theta theta{-0.4, 0.9, 0.16};

  Window est = default_estimation_window(w, 0.5, 0.5);
  QuadratureScheme quad = make_stratified(est, 30.0);
  CellPartition part = build_partition(est, 0.5);

  ScoreBreakdown bd;
  Vec3 g = grad_log_pl(cfg, lj, theta, est, quad, &part, &bd);

  CHECK(bd.cell_grads.size() ==
        static_cast<std::size_t>(part.cell_count()));
  for (int k = 0; k < 3; ++k) {
    CHECK(bd.total[k] ==
          doctest::Approx(bd.integral_term[k] - bd.sum_term[k])
              .epsilon(1e-12));
    CHECK(bd.total[k] == doctest::Approx(g[k]).epsilon(1e-12));
    long double cell_sum = 0.0L;
    for (const Vec3& c : bd.cell_grads) cell_sum += c[k];
    double rel = std::fabs(static_cast<double>(cell_sum) - g[k]) /
                 std::max(1.0, std::fabs(g[k]));
    CHECK(rel < 1e-10);
  }
}

TEST_CASE("evaluation is bit-stable across thread counts") {
  Window w(0.0, 8.0, 0.0, 8.0);
  Configuration cfg = poisson_pattern(w, 200, 55);
  ModelSpec lj;
  lj.family = Family::lennard_jones;
  lj.lj_range = 0.5;
  Theta theta{-0.2, 1.0, 0.15};
  Window est = default_estimation_window(w, 0.5, 0.5);
  QuadratureScheme quad = make_stratified(est, 40.0);

  PseudoLikEvaluator one(cfg, lj, est, quad, 1);
  PseudoLikEvaluator four(cfg, lj, est, quad, 4);
  CHECK(one.value(theta) == four.value(theta));
  Vec3 g1 = one.grad(theta), g4 = four.grad(theta);
  Mat3 h1 = one.hess(theta), h4 = four.hess(theta);
  for (int a = 0; a < 3; ++a) {
    CHECK(g1[a] == g4[a]);
    for (int b = 0; b < 3; ++b) CHECK(h1[a][b] == h4[a][b]);
  }
}

TEST_CASE("border and precondition errors") {
  Window w(0.0, 4.0, 0.0, 4.0);
  Configuration cfg = poisson_pattern(w, 20, 7);
  ModelSpec strauss;
  strauss.family = Family::strauss;
  strauss.strauss_radius = 0.5;

  // Estimation window flush with the observed window: interactions
  // reaching outside are unobserved.
  QuadratureScheme quad_full = make_stratified(w, 10.0);
  CHECK_THROWS_AS(PseudoLikEvaluator(cfg, strauss, w, quad_full),
                  geometry_error);

  Window est = erode(w, 0.5);
  QuadratureScheme quad = make_stratified(est, 10.0);
  CHECK_NOTHROW(PseudoLikEvaluator(cfg, strauss, est, quad));

  // Quadrature built over a different window is rejected.
  CHECK_THROWS_AS(PseudoLikEvaluator(cfg, strauss, est, quad_full),
                  std::invalid_argument);

  // Infinite-range model needs a truncation radius here.
  ModelSpec lj_inf;
  lj_inf.family = Family::lennard_jones;
  try {
    PseudoLikEvaluator ev(cfg, lj_inf, est, quad);
    CHECK(false);
  } catch (const geometry_error& e) {
    CHECK(std::string(e.what()).find("truncation") != std::string::npos);
  }
}

TEST_CASE("data point on a quadrature node saturates cleanly") {
  Window w(0.0, 4.0, 0.0, 4.0);
  Window est(1.0, 3.0, 1.0, 3.0);
  QuadratureScheme quad = make_stratified(est, 10.0);
  REQUIRE(quad.nx == 20);
  // Place a data point exactly on one of the nodes.
  const double h = 2.0 / 20;
  Point on_node{1.0 + 5.5 * h, 1.0 + 10.5 * h};
  Configuration cfg({on_node, {2.4, 2.4}}, w);

  ModelSpec lj;
  lj.family = Family::lennard_jones;
  lj.lj_range = 1.0;
  Theta repulsive{0.0, 1.0, 0.2};
  PseudoLikEvaluator ev(cfg, lj, est, quad);
  double v = ev.value(repulsive);
  CHECK(std::isfinite(v));
  Vec3 g = ev.grad(repulsive);
  for (int k = 0; k < 3; ++k) CHECK(std::isfinite(g[k]));
}
