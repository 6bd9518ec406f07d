#include "ljgibbs/sampler.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "ljgibbs/detail/pair_scan.hpp"
#include "ljgibbs/errors.hpp"
#include "ljgibbs/rng.hpp"

namespace ljgibbs {

namespace {

// Mutable bucket grid for the chain state: supports insert, swap-remove
// and move while offering the same visit_neighbors interface as
// SpatialGrid.
class ChainState {
public:
  ChainState(const Window& w, double cell) : window_(w) {
    nx_ = std::max(1, static_cast<int>(std::floor(w.width() / cell)));
    ny_ = std::max(1, static_cast<int>(std::floor(w.height() / cell)));
    inv_bw_x_ = nx_ / w.width();
    inv_bw_y_ = ny_ / w.height();
    buckets_.resize(static_cast<std::size_t>(nx_) * ny_);
  }

  std::size_t size() const { return pts_.size(); }
  Point point(int idx) const { return pts_[idx]; }
  const std::vector<Point>& points() const { return pts_; }

  void insert(Point p) {
    const int idx = static_cast<int>(pts_.size());
    pts_.push_back(p);
    const int b = bucket_index(p);
    bucket_of_.push_back(b);
    buckets_[b].push_back(idx);
  }

  void remove(int idx) {
    drop_from_bucket(idx);
    const int last = static_cast<int>(pts_.size()) - 1;
    if (idx != last) {
      pts_[idx] = pts_[last];
      bucket_of_[idx] = bucket_of_[last];
      for (int& e : buckets_[bucket_of_[last]]) {
        if (e == last) {
          e = idx;
          break;
        }
      }
    }
    pts_.pop_back();
    bucket_of_.pop_back();
  }

  void move(int idx, Point p) {
    const int b = bucket_index(p);
    if (b != bucket_of_[idx]) {
      drop_from_bucket(idx);
      bucket_of_[idx] = b;
      buckets_[b].push_back(idx);
    }
    pts_[idx] = p;
  }

  template <class F>
  void visit_neighbors(Point c, double r, int exclude_index, F&& f) const {
    const double r2 = r * r;
    const int ix_lo = clamp_ix(c.x - r), ix_hi = clamp_ix(c.x + r);
    const int iy_lo = clamp_iy(c.y - r), iy_hi = clamp_iy(c.y + r);
    for (int iy = iy_lo; iy <= iy_hi; ++iy) {
      for (int ix = ix_lo; ix <= ix_hi; ++ix) {
        for (int idx : buckets_[static_cast<std::size_t>(iy) * nx_ + ix]) {
          if (idx == exclude_index) continue;
          const double dx = pts_[idx].x - c.x;
          const double dy = pts_[idx].y - c.y;
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
  int bucket_index(Point p) const {
    return clamp_iy(p.y) * nx_ + clamp_ix(p.x);
  }
  void drop_from_bucket(int idx) {
    auto& b = buckets_[bucket_of_[idx]];
    for (std::size_t k = 0; k < b.size(); ++k) {
      if (b[k] == idx) {
        b[k] = b.back();
        b.pop_back();
        return;
      }
    }
  }

  Window window_;
  int nx_ = 1, ny_ = 1;
  double inv_bw_x_ = 0.0, inv_bw_y_ = 0.0;
  std::vector<Point> pts_;
  std::vector<int> bucket_of_;
  std::vector<std::vector<int>> buckets_;
};

}  // namespace

std::pair<Configuration, ChainStats> simulate(const ModelSpec& spec,
                                              const Theta& theta,
                                              const Window& window,
                                              const SamplerConfig& cfg) {
  spec.validate();
  spec.validate_theta(theta);
  if (cfg.n_steps == 0) {
    throw std::invalid_argument("sampler needs n_steps > 0");
  }
  if (std::fabs(cfg.p_birth - cfg.p_death) > 1e-12) {
    throw std::invalid_argument(
        "birth and death proposal probabilities must be equal");
  }
  if (!(cfg.p_birth > 0.0) || !(cfg.p_birth < 1.0) || !(cfg.p_move >= 0.0) ||
      std::fabs(cfg.p_birth + cfg.p_death + cfg.p_move - 1.0) > 1e-12) {
    throw std::invalid_argument(
        "proposal probabilities must be positive and sum to 1");
  }

  const double area = window.area();
  const double log_area = std::log(area);
  const double range = spec.interaction_range();
  const bool infinite_range = !std::isfinite(range);

  std::uint64_t burn_in;
  if (cfg.burn_in >= 0) {
    burn_in = static_cast<std::uint64_t>(cfg.burn_in);
  } else {
    const double d = std::ceil(10.0 * area * std::exp(-theta.theta1));
    burn_in = static_cast<std::uint64_t>(std::min(d, 1e8));
  }

  double sigma = cfg.move_sigma;
  if (!(sigma > 0.0)) {
    sigma = (std::isfinite(range) && range > 0.0)
                ? range / 4.0
                : std::min(window.width(), window.height()) / 8.0;
  }

  const double scan_cell =
      (std::isfinite(range) && range > 0.0)
          ? range
          : std::max(window.width(), window.height());
  ChainState state(window, scan_cell);
  Rng rng(cfg.seed);

  const double t3sq = theta.theta3 * theta.theta3;
  const bool strauss = spec.family == Family::strauss;

  // Local energy of x against the current state; +inf when x collides
  // with an existing point (hereditary reject).
  const auto local_v = [&](Point x, int exclude) -> double {
    if (spec.family == Family::poisson) return theta.theta1;
    double r = range;
    if (infinite_range) {
      const double dx = std::max(std::fabs(x.x - window.x_min),
                                 std::fabs(x.x - window.x_max));
      const double dy = std::max(std::fabs(x.y - window.y_min),
                                 std::fabs(x.y - window.y_max));
      r = std::hypot(dx, dy);
    }
    if (strauss) {
      const detail::PairScan s = detail::scan_count(state, x, r, exclude);
      if (s.hit_index >= 0)
        return std::numeric_limits<double>::infinity();
      return theta.theta1 + theta.theta2 * static_cast<double>(s.count);
    }
    const detail::PairScan s = detail::scan_lj(state, x, r, t3sq, exclude);
    if (s.hit_index >= 0) return std::numeric_limits<double>::infinity();
    return theta.theta1 + 4.0 * theta.theta2 * (s.s12 - s.s6);
  };

  ChainStats stats;
  stats.seed = cfg.seed;
  stats.burn_in = burn_in;
  stats.steps = cfg.n_steps;

  long double energy = 0.0L;
  const std::uint64_t total = burn_in + cfg.n_steps;
  for (std::uint64_t step = 0; step < total; ++step) {
    const bool recording = step >= burn_in;
    const double u = rng.unif();
    if (u < cfg.p_birth) {
      if (recording) ++stats.birth_proposed;
      const Point x{rng.unif(window.x_min, window.x_max),
                    rng.unif(window.y_min, window.y_max)};
      const double dv = local_v(x, -1);
      const double n1 = static_cast<double>(state.size()) + 1.0;
      const double log_acc = log_area - std::log(n1) - dv;
      if (std::log(rng.unif()) < log_acc) {
        state.insert(x);
        energy += dv;
        if (recording) ++stats.birth_accepted;
      }
    } else if (u < cfg.p_birth + cfg.p_death) {
      if (recording) ++stats.death_proposed;
      const std::size_t n = state.size();
      if (n > 0) {
        const int k = static_cast<int>(rng.below(n));
        const double dv = local_v(state.point(k), k);
        const double log_acc =
            std::log(static_cast<double>(n)) - log_area + dv;
        if (std::log(rng.unif()) < log_acc) {
          state.remove(k);
          energy -= dv;
          if (recording) ++stats.death_accepted;
        }
      }
    } else {
      if (recording) ++stats.move_proposed;
      const std::size_t n = state.size();
      if (n > 0) {
        const int k = static_cast<int>(rng.below(n));
        const Point old = state.point(k);
        const Point prop{old.x + sigma * rng.normal(),
                         old.y + sigma * rng.normal()};
        if (window.contains(prop)) {
          const double v_new = local_v(prop, k);
          const double v_old = local_v(old, k);
          const double dv = v_new - v_old;
          if (std::log(rng.unif()) < -dv) {
            state.move(k, prop);
            energy += dv;
            if (recording) ++stats.move_accepted;
          }
        }
      }
    }
    if (recording && cfg.trace_every > 0 &&
        (step - burn_in) % cfg.trace_every == 0) {
      stats.energy_trace.push_back(static_cast<double>(energy));
    }
  }

  stats.final_count = state.size();
  stats.final_energy = static_cast<double>(energy);
  return {Configuration(state.points(), window), std::move(stats)};
}

}  // namespace ljgibbs
