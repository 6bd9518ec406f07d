#include "ljgibbs/pseudolik.hpp"

#include <atomic>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "ljgibbs/detail/pair_scan.hpp"
#include "ljgibbs/errors.hpp"

namespace ljgibbs {

namespace {

// Integrand factor e^{-V}; values beyond the overflow guard are treated
// as exact zeros.
inline double exp_neg(double v) {
  if (v > 700.0) return 0.0;
  return std::exp(-v);
}

// Fixed-size work chunks combined in index order: results are identical
// for every thread count.
constexpr std::size_t kChunk = 16384;

template <class Partial, class Fn>
std::vector<Partial> run_chunks(std::size_t n, int threads, Fn&& fn) {
  const std::size_t n_chunks = n == 0 ? 0 : (n + kChunk - 1) / kChunk;
  std::vector<Partial> partials(n_chunks);
  const int nt = static_cast<int>(
      std::min<std::size_t>(std::max(threads, 1), std::max<std::size_t>(n_chunks, 1)));
  if (nt <= 1) {
    for (std::size_t c = 0; c < n_chunks; ++c) {
      fn(c * kChunk, std::min(n, (c + 1) * kChunk), partials[c]);
    }
    return partials;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(nt);
  for (int t = 0; t < nt; ++t) {
    pool.emplace_back([&]() {
      for (;;) {
        const std::size_t c = next.fetch_add(1);
        if (c >= n_chunks) return;
        fn(c * kChunk, std::min(n, (c + 1) * kChunk), partials[c]);
      }
    });
  }
  for (auto& th : pool) th.join();
  return partials;
}

// Per-point energy terms used by the quadrature and data loops.
struct NodeTerms {
  double v = 0.0;    // V(x | phi)
  double d1 = 0.0;   // dV/dtheta2
  double d2 = 0.0;   // dV/dtheta3
  double h12 = 0.0;  // d2V/dtheta2 dtheta3
  double h22 = 0.0;  // d2V/dtheta3^2
};

struct ThetaConsts {
  double t1 = 0.0, t2 = 0.0, t3 = 0.0;
  double t3sq = 0.0;
  double k2 = 0.0;   // 4 t2 / t3
  double k12 = 0.0;  // 4 / t3
  double k22 = 0.0;  // 4 t2 / t3^2
};

ThetaConsts make_consts(const Theta& th, Family fam) {
  ThetaConsts c;
  c.t1 = th.theta1;
  c.t2 = th.theta2;
  c.t3 = th.theta3;
  if (fam == Family::lennard_jones) {
    c.t3sq = th.theta3 * th.theta3;
    c.k2 = 4.0 * th.theta2 / th.theta3;
    c.k12 = 4.0 / th.theta3;
    c.k22 = 4.0 * th.theta2 / (th.theta3 * th.theta3);
  }
  return c;
}

}  // namespace

struct PseudoLikEvaluator::Impl {
  Configuration cfg;
  ModelSpec spec;
  Window est;
  QuadratureScheme quad;
  int threads = 1;
  double range = 0.0;
  SpatialGrid grid;
  std::vector<int> data_idx;  // configuration points inside est
  double window_area = 0.0;

  Impl(const Configuration& cfg_in, const ModelSpec& spec_in,
       const Window& est_in, const QuadratureScheme& quad_in, int threads_in)
      : cfg(cfg_in),
        spec(spec_in),
        est(est_in),
        quad(quad_in),
        threads(threads_in),
        range(spec_in.interaction_range()),
        grid(cfg_in, grid_cell(spec_in, cfg_in.window())) {
    spec.validate();
    if (!std::isfinite(range)) {
      throw geometry_error(
          "infinite interaction range: set a truncation radius before "
          "evaluating the pseudo-likelihood");
    }
    if (quad.window.x_min != est.x_min || quad.window.x_max != est.x_max ||
        quad.window.y_min != est.y_min || quad.window.y_max != est.y_max) {
      throw std::invalid_argument(
          "quadrature scheme must be built on the estimation window");
    }
    if (quad.nodes.empty()) {
      throw std::invalid_argument("quadrature scheme has no nodes");
    }

    require_minus_sampling(cfg.window(), est, range);

    window_area = est.area();
    data_idx.reserve(cfg.size());
    for (std::size_t k = 0; k < cfg.size(); ++k) {
      if (est.contains(cfg[k])) data_idx.push_back(static_cast<int>(k));
    }
  }

  static double grid_cell(const ModelSpec& spec, const Window& w) {
    const double r = spec.interaction_range();
    if (std::isfinite(r) && r > 0.0) return r;
    return std::max(w.width(), w.height());
  }

  // Mode 0: value terms only; mode 1: + first derivatives; mode 2: +
  // second derivatives.
  template <int Mode>
  NodeTerms terms_at(Point x, const ThetaConsts& c, int exclude) const {
    NodeTerms out;
    switch (spec.family) {
      case Family::poisson:
        out.v = c.t1;
        return out;
      case Family::strauss: {
        const detail::PairScan s = detail::scan_count(grid, x, range, exclude);
        out.v = c.t1 + c.t2 * static_cast<double>(s.count);
        if constexpr (Mode >= 1) out.d1 = static_cast<double>(s.count);
        return out;
      }
      case Family::lennard_jones: {
        const detail::PairScan s =
            detail::scan_lj(grid, x, range, c.t3sq, exclude);
        if (s.hit_index >= 0 && exclude != s.hit_index) {
          // A neighbor at (numerically) zero distance: the repulsive term
          // saturates the energy.
          out.v = c.t2 > 0.0 ? std::numeric_limits<double>::infinity()
                             : (c.t2 < 0.0
                                    ? -std::numeric_limits<double>::infinity()
                                    : c.t1);
          return out;
        }
        const double diff12 = s.s12 - s.s6;
        out.v = c.t1 + 4.0 * c.t2 * diff12;
        if constexpr (Mode >= 1) {
          out.d1 = 4.0 * diff12;
          out.d2 = c.k2 * (12.0 * s.s12 - 6.0 * s.s6);
        }
        if constexpr (Mode >= 2) {
          out.h12 = c.k12 * (12.0 * s.s12 - 6.0 * s.s6);
          out.h22 = c.k22 * (132.0 * s.s12 - 30.0 * s.s6);
        }
        return out;
      }
    }
    throw std::invalid_argument("unknown family");
  }
};

PseudoLikEvaluator::PseudoLikEvaluator(const Configuration& cfg,
                                       const ModelSpec& spec,
                                       const Window& estimation_window,
                                       const QuadratureScheme& quad,
                                       int threads)
    : impl_(std::make_unique<Impl>(cfg, spec, estimation_window, quad,
                                   threads)) {}

PseudoLikEvaluator::~PseudoLikEvaluator() = default;
PseudoLikEvaluator::PseudoLikEvaluator(PseudoLikEvaluator&&) noexcept = default;
PseudoLikEvaluator& PseudoLikEvaluator::operator=(
    PseudoLikEvaluator&&) noexcept = default;

const Window& PseudoLikEvaluator::estimation_window() const {
  return impl_->est;
}
double PseudoLikEvaluator::area() const { return impl_->window_area; }
std::size_t PseudoLikEvaluator::data_in_window() const {
  return impl_->data_idx.size();
}

double PseudoLikEvaluator::value(const Theta& theta) const {
  const Impl& im = *impl_;
  im.spec.validate_theta(theta);
  const ThetaConsts c = make_consts(theta, im.spec.family);

  const auto partials = run_chunks<long double>(
      im.quad.nodes.size(), im.threads,
      [&](std::size_t beg, std::size_t end, long double& acc) {
        long double s = 0.0L;
        for (std::size_t k = beg; k < end; ++k) {
          const NodeTerms t = im.terms_at<0>(im.quad.nodes[k], c, -1);
          s += im.quad.weights[k] * exp_neg(t.v);
        }
        acc = s;
      });
  long double integral = 0.0L;
  for (const long double p : partials) integral += p;

  long double data_sum = 0.0L;
  for (const int k : im.data_idx) {
    data_sum += im.terms_at<0>(im.cfg[k], c, k).v;
  }
  return static_cast<double>(-integral - data_sum);
}

std::pair<double, Vec3> PseudoLikEvaluator::value_and_grad(
    const Theta& theta) const {
  const Impl& im = *impl_;
  im.spec.validate_theta(theta);
  const ThetaConsts c = make_consts(theta, im.spec.family);

  struct P {
    long double s0 = 0.0L, s1 = 0.0L, s2 = 0.0L;
  };
  const auto partials = run_chunks<P>(
      im.quad.nodes.size(), im.threads,
      [&](std::size_t beg, std::size_t end, P& acc) {
        P s;
        for (std::size_t k = beg; k < end; ++k) {
          const NodeTerms t = im.terms_at<1>(im.quad.nodes[k], c, -1);
          const double we = im.quad.weights[k] * exp_neg(t.v);
          if (we == 0.0) continue;
          s.s0 += we;
          s.s1 += we * t.d1;
          s.s2 += we * t.d2;
        }
        acc = s;
      });
  P tot;
  for (const P& p : partials) {
    tot.s0 += p.s0;
    tot.s1 += p.s1;
    tot.s2 += p.s2;
  }

  long double dv = 0.0L, d0 = 0.0L, d1 = 0.0L, d2 = 0.0L;
  for (const int k : im.data_idx) {
    const NodeTerms t = im.terms_at<1>(im.cfg[k], c, k);
    dv += t.v;
    d0 += 1.0L;
    d1 += t.d1;
    d2 += t.d2;
  }

  const double value = static_cast<double>(-tot.s0 - dv);
  Vec3 grad{static_cast<double>(tot.s0 - d0), static_cast<double>(tot.s1 - d1),
            static_cast<double>(tot.s2 - d2)};
  const int p = im.spec.param_dim();
  for (int i = p; i < 3; ++i) grad[i] = 0.0;
  return {value, grad};
}

Vec3 PseudoLikEvaluator::grad(const Theta& theta) const {
  return value_and_grad(theta).second;
}

Mat3 PseudoLikEvaluator::hess(const Theta& theta) const {
  const Impl& im = *impl_;
  im.spec.validate_theta(theta);
  const ThetaConsts c = make_consts(theta, im.spec.family);

  struct P {
    long double s0 = 0, s1 = 0, s2 = 0;        // dV * e^{-V}
    long double s11 = 0, s12 = 0, s22 = 0;     // dV dV * e^{-V}
    long double sh12 = 0, sh22 = 0;            // d2V * e^{-V}
  };
  const auto partials = run_chunks<P>(
      im.quad.nodes.size(), im.threads,
      [&](std::size_t beg, std::size_t end, P& acc) {
        P s;
        for (std::size_t k = beg; k < end; ++k) {
          const NodeTerms t = im.terms_at<2>(im.quad.nodes[k], c, -1);
          const double we = im.quad.weights[k] * exp_neg(t.v);
          if (we == 0.0) continue;
          s.s0 += we;
          s.s1 += we * t.d1;
          s.s2 += we * t.d2;
          s.s11 += we * t.d1 * t.d1;
          s.s12 += we * t.d1 * t.d2;
          s.s22 += we * t.d2 * t.d2;
          s.sh12 += we * t.h12;
          s.sh22 += we * t.h22;
        }
        acc = s;
      });
  P tot;
  for (const P& p : partials) {
    tot.s0 += p.s0;
    tot.s1 += p.s1;
    tot.s2 += p.s2;
    tot.s11 += p.s11;
    tot.s12 += p.s12;
    tot.s22 += p.s22;
    tot.sh12 += p.sh12;
    tot.sh22 += p.sh22;
  }

  long double dh12 = 0.0L, dh22 = 0.0L;
  for (const int k : im.data_idx) {
    const NodeTerms t = im.terms_at<2>(im.cfg[k], c, k);
    dh12 += t.h12;
    dh22 += t.h22;
  }

  // (LPL'')_{jk} = integral of (d_jk V - d_j V d_k V) e^{-V} minus the
  // data sum of d_jk V; d_theta1 V = 1 and its second derivatives vanish.
  Mat3 h = zero_mat();
  h[0][0] = static_cast<double>(-tot.s0);
  h[0][1] = h[1][0] = static_cast<double>(-tot.s1);
  h[0][2] = h[2][0] = static_cast<double>(-tot.s2);
  h[1][1] = static_cast<double>(-tot.s11);
  h[1][2] = h[2][1] = static_cast<double>(tot.sh12 - tot.s12 - dh12);
  h[2][2] = static_cast<double>(tot.sh22 - tot.s22 - dh22);

  const int p = im.spec.param_dim();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      if (i >= p || j >= p) h[i][j] = 0.0;
  return h;
}

ScoreBreakdown PseudoLikEvaluator::breakdown(
    const Theta& theta, const CellPartition& partition) const {
  const Impl& im = *impl_;
  im.spec.validate_theta(theta);
  const Window& pw = partition.window();
  if (pw.x_min != im.est.x_min || pw.x_max != im.est.x_max ||
      pw.y_min != im.est.y_min || pw.y_max != im.est.y_max) {
    throw std::invalid_argument(
        "cell partition must tile the estimation window");
  }
  const ThetaConsts c = make_consts(theta, im.spec.family);
  const int n_cells = partition.cell_count();
  const int p = im.spec.param_dim();

  struct P {
    long double s0 = 0, s1 = 0, s2 = 0;
    std::vector<std::array<long double, 3>> cells;
  };
  const auto partials = run_chunks<P>(
      im.quad.nodes.size(), im.threads,
      [&](std::size_t beg, std::size_t end, P& acc) {
        acc.cells.assign(n_cells, {0.0L, 0.0L, 0.0L});
        for (std::size_t k = beg; k < end; ++k) {
          const Point u = im.quad.nodes[k];
          const NodeTerms t = im.terms_at<1>(u, c, -1);
          const double we = im.quad.weights[k] * exp_neg(t.v);
          if (we == 0.0) continue;
          acc.s0 += we;
          acc.s1 += we * t.d1;
          acc.s2 += we * t.d2;
          auto& cell = acc.cells[partition.flat_index(partition.cell_of(u))];
          cell[0] += we;
          cell[1] += we * t.d1;
          cell[2] += we * t.d2;
        }
      });

  ScoreBreakdown out;
  out.partition = partition;
  std::vector<std::array<long double, 3>> cells(
      n_cells, std::array<long double, 3>{0.0L, 0.0L, 0.0L});
  long double s0 = 0.0L, s1 = 0.0L, s2 = 0.0L;
  for (const P& part : partials) {
    s0 += part.s0;
    s1 += part.s1;
    s2 += part.s2;
    if (part.cells.empty()) continue;
    for (int cidx = 0; cidx < n_cells; ++cidx) {
      cells[cidx][0] += part.cells[cidx][0];
      cells[cidx][1] += part.cells[cidx][1];
      cells[cidx][2] += part.cells[cidx][2];
    }
  }

  long double d0 = 0.0L, d1 = 0.0L, d2 = 0.0L;
  for (const int k : im.data_idx) {
    const Point x = im.cfg[k];
    const NodeTerms t = im.terms_at<1>(x, c, k);
    d0 += 1.0L;
    d1 += t.d1;
    d2 += t.d2;
    auto& cell = cells[partition.flat_index(partition.cell_of(x))];
    cell[0] -= 1.0L;
    cell[1] -= t.d1;
    cell[2] -= t.d2;
  }

  out.integral_term = {static_cast<double>(s0), static_cast<double>(s1),
                       static_cast<double>(s2)};
  out.sum_term = {static_cast<double>(d0), static_cast<double>(d1),
                  static_cast<double>(d2)};
  out.total = {static_cast<double>(s0 - d0), static_cast<double>(s1 - d1),
               static_cast<double>(s2 - d2)};
  out.cell_grads.resize(n_cells);
  for (int cidx = 0; cidx < n_cells; ++cidx) {
    out.cell_grads[cidx] = {static_cast<double>(cells[cidx][0]),
                            static_cast<double>(cells[cidx][1]),
                            static_cast<double>(cells[cidx][2])};
  }
  for (int i = p; i < 3; ++i) {
    out.integral_term[i] = out.sum_term[i] = out.total[i] = 0.0;
    for (auto& g : out.cell_grads) g[i] = 0.0;
  }
  return out;
}

double log_pl(const Configuration& cfg, const ModelSpec& spec,
              const Theta& theta, const Window& estimation_window,
              const QuadratureScheme& quad) {
  return PseudoLikEvaluator(cfg, spec, estimation_window, quad).value(theta);
}

Vec3 grad_log_pl(const Configuration& cfg, const ModelSpec& spec,
                 const Theta& theta, const Window& estimation_window,
                 const QuadratureScheme& quad, const CellPartition* partition,
                 ScoreBreakdown* breakdown) {
  PseudoLikEvaluator ev(cfg, spec, estimation_window, quad);
  if (partition == nullptr) {
    if (breakdown != nullptr) {
      throw std::invalid_argument(
          "a cell partition is required for a score breakdown");
    }
    return ev.grad(theta);
  }
  ScoreBreakdown b = ev.breakdown(theta, *partition);
  const Vec3 total = b.total;
  if (breakdown != nullptr) *breakdown = std::move(b);
  return total;
}

Mat3 hess_log_pl(const Configuration& cfg, const ModelSpec& spec,
                 const Theta& theta, const Window& estimation_window,
                 const QuadratureScheme& quad) {
  return PseudoLikEvaluator(cfg, spec, estimation_window, quad).hess(theta);
}

double u_n(const Configuration& cfg, const ModelSpec& spec, const Theta& theta,
           const Window& estimation_window, const QuadratureScheme& quad) {
  return -log_pl(cfg, spec, theta, estimation_window, quad) /
         estimation_window.area();
}

Vec3 u_n1(const Configuration& cfg, const ModelSpec& spec, const Theta& theta,
          const Window& estimation_window, const QuadratureScheme& quad) {
  Vec3 g = grad_log_pl(cfg, spec, theta, estimation_window, quad);
  const double a = estimation_window.area();
  for (double& v : g) v = -v / a;
  return g;
}

Mat3 u_n2(const Configuration& cfg, const ModelSpec& spec, const Theta& theta,
          const Window& estimation_window, const QuadratureScheme& quad) {
  Mat3 h = hess_log_pl(cfg, spec, theta, estimation_window, quad);
  const double a = estimation_window.area();
  for (auto& row : h)
    for (double& v : row) v = -v / a;
  return h;
}

}  // namespace ljgibbs
