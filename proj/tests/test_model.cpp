#include <cmath>
#include <limits>
#include <vector>

#include <doctest.h>

#include "ljgibbs/errors.hpp"
#include "ljgibbs/geometry.hpp"
#include "ljgibbs/model.hpp"
#include "ljgibbs/rng.hpp"

using namespace ljgibbs;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

ModelSpec lj_spec(double range) {
  ModelSpec s;
  s.family = Family::lennard_jones;
  s.lj_range = range;
  return s;
}

ModelSpec strauss_spec(double R) {
  ModelSpec s;
  s.family = Family::strauss;
  s.strauss_radius = R;
  return s;
}

}  // namespace

TEST_CASE("model spec validation") {
  ModelSpec p;
  CHECK(p.param_dim() == 1);
  CHECK(p.finite_range());
  CHECK(p.interaction_range() == 0.0);

  ModelSpec s = strauss_spec(0.4);
  CHECK(s.param_dim() == 2);
  CHECK(s.interaction_range() == 0.4);
  s.strauss_radius = -1.0;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);

  ModelSpec lj = lj_spec(kInf);
  CHECK(lj.param_dim() == 3);
  CHECK_FALSE(lj.finite_range());
  CHECK(lj.interaction_range() == kInf);
  lj.truncation_radius = 2.0;
  CHECK(lj.interaction_range() == 2.0);
  CHECK_FALSE(lj.finite_range());  // truncation is an approximation knob

  ModelSpec ljf = lj_spec(0.5);
  CHECK(ljf.finite_range());
  ljf.truncation_radius = 2.0;  // only meaningful for the infinite model
  CHECK_THROWS_AS(ljf.validate(), std::invalid_argument);

  Theta bad{0.0, 1.0, 0.0};
  CHECK_THROWS_AS(lj_spec(0.5).validate_theta(bad), std::invalid_argument);

  CHECK(family_from_name("poisson") == Family::poisson);
  CHECK(family_name(Family::lennard_jones) == "lennard_jones");
  CHECK_THROWS_AS(family_from_name("gauss"), std::invalid_argument);
}

TEST_CASE("pair potential values") {
  // 4 theta2 ((theta3/r)^12 - (theta3/r)^6), evaluated independently at
  // 40-digit precision and frozen.
  ModelSpec lj = lj_spec(kInf);
  Theta unit{0.0, 1.0, 1.0};
  CHECK(pair_potential(lj, unit, 0.9) ==
        doctest::Approx(6.6361189532529161).epsilon(1e-14));
  CHECK(pair_potential(lj, unit, 1.0) == 0.0);  // zero crossing at theta3

  // Well depth -theta2 at r = 2^(1/6) theta3.
  Theta t{0.0, 1.3, 0.25};
  double rmin = std::pow(2.0, 1.0 / 6.0) * 0.25;
  CHECK(pair_potential(lj, t, rmin) == doctest::Approx(-1.3).epsilon(1e-12));

  // Finite range cuts off beyond D, closed at the boundary.
  ModelSpec ljf = lj_spec(2.0);
  CHECK(pair_potential(ljf, unit, 2.0) ==
        doctest::Approx(4.0 * (std::pow(0.5, 12) - std::pow(0.5, 6))));
  CHECK(pair_potential(ljf, unit, 2.0 + 1e-12) == 0.0);

  ModelSpec st = strauss_spec(0.7);
  Theta ts{0.0, 1.7, 0.0};
  CHECK(pair_potential(st, ts, 0.3) == 1.7);
  CHECK(pair_potential(st, ts, 0.7) == 1.7);  // closed at R
  CHECK(pair_potential(st, ts, 0.7 + 1e-12) == 0.0);

  CHECK(pair_potential(ModelSpec{}, Theta{0.5, 0, 0}, 0.3) == 0.0);

  CHECK_THROWS_AS(pair_potential(lj, unit, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(pair_potential(lj, unit, -1.0), std::invalid_argument);
}

TEST_CASE("pair potential parameter derivatives, frozen oracles") {
  // dg/dtheta3 = (4 theta2 / theta3)(12 s12 - 6 s6) at theta=(0,1,1):
  // r=0.9 -> 124.79366159484909; second derivative in theta3 at r=1.1
  // is (4 theta2/theta3^2)(132 s12 - 30 s6) -> 100.50020014461511.
  ModelSpec lj = lj_spec(kInf);
  Theta unit{0.0, 1.0, 1.0};
  Window w(0.0, 4.0, 0.0, 4.0);

  Configuration cfg({{2.0, 2.0}}, w);
  SpatialGrid grid(cfg, 1.0);
  Point x{2.9, 2.0};  // r = 0.9 from the single configuration point
  Vec3 g = grad_local_energy(lj, unit, x, cfg, grid);
  CHECK(g[0] == 1.0);
  CHECK(g[2] == doctest::Approx(124.79366159484909).epsilon(1e-13));

  Point x2{2.0, 3.1};  // r = 1.1
  Mat3 h = hess_local_energy(lj, unit, x2, cfg, grid);
  CHECK(h[2][2] == doctest::Approx(100.50020014461511).epsilon(1e-13));
  CHECK(h[0][0] == 0.0);
  CHECK(h[0][1] == 0.0);
}

TEST_CASE("local energy over a configuration") {
  ModelSpec lj = lj_spec(1.0);
  Theta t{0.2, 1.0, 0.3};
  Window w(0.0, 4.0, 0.0, 4.0);
  Configuration cfg({{2.0, 2.0}, {2.6, 2.0}, {0.5, 0.5}}, w);
  SpatialGrid grid(cfg, 1.0);

  // Insertion at (2.3, 2.0): distances 0.3 and 0.3 to the pair, the far
  // point is outside the range.
  double v = local_energy(lj, t, {2.3, 2.0}, cfg, grid);
  double g03 = 4.0 * (std::pow(1.0, 12) - std::pow(1.0, 6));  // theta3/r = 1
  CHECK(v == doctest::Approx(0.2 + 2.0 * g03).epsilon(1e-14));

  // V(x | phi \ x) via exclude_index: point 0 sees only point 1.
  double v0 = local_energy(lj, t, cfg[0], cfg, grid, 0);
  CHECK(v0 == doctest::Approx(0.2 + pair_potential(lj, t, 0.6)).epsilon(1e-14));

  // Coinciding insertion without exclusion is an error.
  CHECK_THROWS_AS(local_energy(lj, t, cfg[1], cfg, grid),
                  std::invalid_argument);
}

TEST_CASE("derivatives match finite differences") {
  Window w(0.0, 6.0, 0.0, 6.0);
  Rng rng(404);
  std::vector<Point> pts;
  for (int k = 0; k < 120; ++k)
    pts.push_back({rng.unif(0, 6), rng.unif(0, 6)});
  Configuration cfg(std::move(pts), w);

  auto fd_check = [&](const ModelSpec& spec, const Theta& base, int p) {
    SpatialGrid grid(cfg, std::isfinite(spec.interaction_range())
                              ? std::max(spec.interaction_range(), 0.3)
                              : 1.0);
    for (int trial = 0; trial < 20; ++trial) {
      Point x{rng.unif(0.5, 5.5), rng.unif(0.5, 5.5)};
      // A trial point almost on top of a data point drives |V| so high
      // that central differences cancel to noise; the analytic
      // derivatives are fine there, the probe is not.
      if (std::fabs(local_energy(spec, base, x, cfg, grid)) > 1e6) continue;
      Vec3 g = grad_local_energy(spec, base, x, cfg, grid);
      Mat3 h = hess_local_energy(spec, base, x, cfg, grid);
      Vec3 tv = base.as_vec();
      for (int a = 0; a < p; ++a) {
        double step = 1e-6 * std::max(1.0, std::fabs(tv[a]));
        Vec3 up = tv, dn = tv;
        up[a] += step;
        dn[a] -= step;
        double f_up =
            local_energy(spec, Theta::from_vec(up), x, cfg, grid);
        double f_dn =
            local_energy(spec, Theta::from_vec(dn), x, cfg, grid);
        double fd = (f_up - f_dn) / (2.0 * step);
        double scale = std::max({1.0, std::fabs(fd), std::fabs(g[a])});
        CHECK(std::fabs(g[a] - fd) / scale < 1e-5);

        Vec3 g_up = grad_local_energy(spec, Theta::from_vec(up), x, cfg, grid);
        Vec3 g_dn = grad_local_energy(spec, Theta::from_vec(dn), x, cfg, grid);
        for (int b = 0; b < p; ++b) {
          double fdh = (g_up[b] - g_dn[b]) / (2.0 * step);
          double hscale = std::max({1.0, std::fabs(fdh), std::fabs(h[a][b])});
          CHECK(std::fabs(h[a][b] - fdh) / hscale < 1e-4);
          CHECK(h[a][b] == h[b][a]);
        }
      }
    }
  };

  fd_check(lj_spec(0.8), Theta{-0.5, 1.2, 0.15}, 3);
  fd_check(lj_spec(kInf), Theta{0.3, 0.7, 0.2}, 3);
  fd_check(strauss_spec(0.5), Theta{-1.0, 0.9, 0.0}, 2);
}

TEST_CASE("translation invariance on a dyadic lattice") {
  // Coordinates and shifts on the 2^-20 lattice keep every pair
  // difference exact; single-bucket grids pin the accumulation order,
  // so the energies agree bit for bit.
  const double ulp = 1.0 / (1 << 20);
  Window w(0.0, 4.0, 0.0, 4.0);
  Rng rng(88);
  std::vector<Point> pts;
  for (int k = 0; k < 60; ++k)
    pts.push_back({static_cast<double>(rng.below(1 << 22)) * ulp,
                   static_cast<double>(rng.below(1 << 22)) * ulp});
  Configuration cfg(pts, w);
  SpatialGrid grid(cfg, 100.0);

  double sx = static_cast<double>(rng.below(1 << 21)) * ulp;
  double sy = static_cast<double>(rng.below(1 << 21)) * ulp;
  Window w2(0.0, 4.0 + sx + 1.0, 0.0, 4.0 + sy + 1.0);
  std::vector<Point> shifted;
  for (Point p : pts) shifted.push_back({p.x + sx, p.y + sy});
  Configuration cfg2(shifted, w2);
  SpatialGrid grid2(cfg2, 100.0);

  ModelSpec lj = lj_spec(0.7);
  Theta t{0.1, 1.5, 0.12};
  for (int k = 0; k < 10; ++k) {
    Point x{static_cast<double>(rng.below(1 << 22)) * ulp,
            static_cast<double>(rng.below(1 << 22)) * ulp};
    Point xs{x.x + sx, x.y + sy};
    CHECK(local_energy(lj, t, x, cfg, grid) ==
          local_energy(lj, t, xs, cfg2, grid2));
    Vec3 a = grad_local_energy(lj, t, x, cfg, grid);
    Vec3 b = grad_local_energy(lj, t, xs, cfg2, grid2);
    CHECK(a[1] == b[1]);
    CHECK(a[2] == b[2]);
  }
}

TEST_CASE("locality: far points cannot matter") {
  ModelSpec lj = lj_spec(0.9);
  Theta t{0.0, 2.0, 0.2};
  Window w(0.0, 10.0, 0.0, 10.0);
  Configuration near({{5.0, 5.0}, {5.4, 5.2}}, w);
  std::vector<Point> plus = near.points();
  plus.push_back({5.0, 5.0 + 0.9 + 1e-9});  // just outside the range
  plus.push_back({9.5, 9.5});
  Configuration far(plus, w);
  SpatialGrid gn(near, 0.9), gf(far, 0.9);
  Point x{5.2, 5.0};
  CHECK(local_energy(lj, t, x, near, gn) == local_energy(lj, t, x, far, gf));
}

TEST_CASE("truncation tail bound") {
  ModelSpec lj = lj_spec(kInf);
  Theta t{0.0, 1.5, 0.3};
  const double density = 2.0;

  SUBCASE("monotone in R, fourth-order decay") {
    double prev = tail_bound(lj, t, 1.0, density);
    CHECK(prev > 0.0);
    for (double R = 1.5; R <= 12.0; R += 0.5) {
      double b = tail_bound(lj, t, R, density);
      CHECK(b < prev);
      prev = b;
    }
    double r16 = tail_bound(lj, t, 16.0, density);
    double r32 = tail_bound(lj, t, 32.0, density);
    // Dominated by the r^-6 tail: halving rate ~ 2^-4, slack for the
    // finite-sum part.
    CHECK(r32 / r16 < 0.08);
    CHECK(r32 / r16 > 0.04);
  }

  SUBCASE("scales linearly with density and |theta2|") {
    double b1 = tail_bound(lj, t, 3.0, 1.0);
    double b2 = tail_bound(lj, t, 3.0, 2.0);
    CHECK(b2 == doctest::Approx(2.0 * b1).epsilon(1e-12));
    Theta td = t;
    td.theta2 = 3.0;
    CHECK(tail_bound(lj, td, 3.0, 1.0) ==
          doctest::Approx(2.0 * b1).epsilon(1e-12));
  }

  SUBCASE("bounds the actual truncation gap") {
    // Dense ring configurations; the per-annulus density bound is read
    // off the generated pattern itself.
    Rng rng(2718);
    Window w(0.0, 40.0, 0.0, 40.0);
    Point center{20.0, 20.0};
    for (int trial = 0; trial < 5; ++trial) {
      std::vector<Point> pts;
      for (int k = 0; k < 2500; ++k)
        pts.push_back({rng.unif(0.0, 40.0), rng.unif(0.0, 40.0)});
      Configuration cfg(pts, w);
      SpatialGrid grid(cfg, 1.0);

      double R = 2.0 + trial;
      ModelSpec truncated = lj;
      truncated.truncation_radius = R;

      double full = local_energy(lj, t, center, cfg, grid);
      double cut = local_energy(truncated, t, center, cfg, grid);

      // Smallest density m with every annulus count <= m * annulus area.
      double m = 0.0;
      std::vector<int> counts(40, 0);
      for (Point p : pts) {
        double r = std::hypot(p.x - center.x, p.y - center.y);
        if (r > 0.0) ++counts[static_cast<int>(std::floor(r))];
      }
      for (int n = 1; n <= 40; ++n) {
        double area = M_PI * (2.0 * n - 1.0);
        m = std::max(m, counts[n - 1] / area);
      }
      CHECK(std::fabs(full - cut) <= tail_bound(lj, t, R, m));
    }
  }

  SUBCASE("argument validation") {
    CHECK_THROWS_AS(tail_bound(lj, t, 0.5, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(tail_bound(strauss_spec(0.5), t, 2.0, 1.0),
                    std::invalid_argument);
  }
}

TEST_CASE("default truncation radius meets its tolerance") {
  ModelSpec lj = lj_spec(kInf);
  ParameterBox box;
  box.lower = {-4.0, 0.05, 0.02};
  box.upper = {2.0, 5.0, 0.2};
  double density = 1.5;
  double R = default_truncation_radius(lj, box, density);
  CHECK(R >= 1.0);
  CHECK(std::isfinite(R));
  Theta envelope{0.0, 5.0, 0.2};
  CHECK(tail_bound(lj, envelope, R, density) <= 1e-6 * 4.0);
  // Tighter boxes truncate earlier.
  ParameterBox small = box;
  small.upper = {2.0, 0.5, 0.1};
  CHECK(default_truncation_radius(lj, small, density) <= R);
}
