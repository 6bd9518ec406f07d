#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "ljgibbs/geometry.hpp"
#include "ljgibbs/linalg.hpp"
#include "ljgibbs/model.hpp"
#include "ljgibbs/pseudolik.hpp"
#include "ljgibbs/quadrature.hpp"

namespace ljgibbs {

struct FitOptions {
  // Stop when the sup norm of the projected gradient of the area-scaled
  // objective u_n falls below this.
  double grad_tol = 1e-8;
  int max_iter = 200;
  int n_starts = 5;        // box center + Latin hypercube draws
  std::uint64_t seed = 0;  // start placement
  bool want_variance = true;
  double level = 0.95;
  double cell_side = 0.0;       // 0: interaction range (Poisson: min side / 8)
  double quad_per_range = 20.0; // dummy points per interaction range per axis
  double resolution = 0.0;      // per-unit-length override (0: derived)
  int threads = 1;
};

struct OptimizerReport {
  bool converged = false;
  int iterations = 0;    // quasi-Newton iterations of the kept start
  int nm_fallbacks = 0;  // Nelder-Mead rescues across all starts
  double grad_pnorm = 0.0;  // final projected-gradient sup norm (u_n scale)
  std::vector<double> start_values;  // final u_n value per start
};

struct FitResult {
  Theta theta_hat;
  int p = 1;
  double log_pl_value = 0.0;
  double grad_norm = 0.0;  // sup norm of the log_pl gradient at theta_hat

  Mat3 u2 = zero_mat();     // u_n second derivative at theta_hat
  Mat3 sigma = zero_mat();  // block variance estimate (PSD-projected)
  Mat3 cov = zero_mat();    // sandwich covariance of theta_hat
  bool has_ci = false;
  double level = 0.95;
  std::array<std::array<double, 2>, 3> ci{};

  OptimizerReport opt;
  bool boundary_warning = false;      // theta_hat on the parameter box edge
  bool small_sample_warning = false;  // fewer than 3x3 variance cells
  bool degenerate_ci = false;         // some interval has zero width
  double u2_condition = 0.0;
  double sigma_psd_clip = 0.0;  // magnitude of clipped negative eigenvalue

  Window estimation_window;
  double cell_side = 0.0;
  double resolution = 0.0;  // dummy points per unit length
  std::size_t n_points = 0; // data points inside the estimation window
  double truncation_radius = 0.0;  // used range for infinite-range LJ
};

// Quantile of the standard normal distribution, accurate to ~1e-12.
double normal_quantile(double prob);

// Block estimate of the score variance: cells of the breakdown are
// combined with their uniform-distance-1 neighbors,
//   (1/|W|) sum_i sum_{j ~ i} c_i c_j^T,
// assembled exactly symmetric and projected to positive semidefinite.
// psd_clip receives the magnitude of the most negative clipped
// eigenvalue; small_sample flags partitions thinner than 3x3 cells.
Mat3 sigma_hat(const ScoreBreakdown& breakdown, int p,
               double* psd_clip = nullptr, bool* small_sample = nullptr);

// Sandwich covariance (1/area) * u2^{-1} sigma u2^{-1}. Raises
// numerical_error when u2 is singular at the eigenvalue cutoff 1e-10.
Mat3 sandwich_covariance(const Mat3& u2, const Mat3& sigma, int p, double area,
                         double* condition = nullptr);

// Per-parameter normal intervals theta_k +/- z_{(1+level)/2} sqrt(cov_kk).
std::array<std::array<double, 2>, 3> confidence_intervals(
    const Theta& theta_hat, const Mat3& cov, int p, double level,
    bool* degenerate = nullptr);

// Maximum pseudo-likelihood fit on an explicit estimation window and
// quadrature scheme. The variance stage requires a finite-range model
// and an estimation window conforming to the cell partition.
FitResult fit_mple(const Configuration& cfg, const ModelSpec& spec,
                   const ParameterBox& box, const Window& estimation_window,
                   const QuadratureScheme& quad, const FitOptions& opts = {});

// Convenience driver: resolves the truncation radius (infinite-range
// LJ), derives the eroded-and-aligned estimation window and the
// quadrature scheme from the pattern, then fits.
FitResult fit_mple_auto(const Configuration& cfg, const ModelSpec& spec,
                        const ParameterBox& box, const FitOptions& opts = {});

}  // namespace ljgibbs
