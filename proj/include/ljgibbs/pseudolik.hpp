#pragma once

#include <memory>
#include <utility>
#include <vector>

#include "ljgibbs/geometry.hpp"
#include "ljgibbs/linalg.hpp"
#include "ljgibbs/model.hpp"
#include "ljgibbs/quadrature.hpp"

namespace ljgibbs {

// Per-cell decomposition of the pseudo-likelihood score. cell_grads[k]
// holds the score restricted to cell k (flat partition index): its
// quadrature nodes minus its data points. The cell contributions sum to
// `total` up to reordering roundoff.
struct ScoreBreakdown {
  Vec3 integral_term{0, 0, 0};  // integral of dV e^{-V} over the window
  Vec3 sum_term{0, 0, 0};       // sum of dV over data points in the window
  Vec3 total{0, 0, 0};          // integral_term - sum_term
  CellPartition partition;
  std::vector<Vec3> cell_grads;
};

// Cached state for repeated pseudo-likelihood evaluations of one pattern
// (neighbor grid, data-point membership, node/cell maps). Verifies the
// minus-sampling precondition at construction: the observed window must
// contain the estimation window dilated by the interaction range.
class PseudoLikEvaluator {
public:
  PseudoLikEvaluator(const Configuration& cfg, const ModelSpec& spec,
                     const Window& estimation_window,
                     const QuadratureScheme& quad, int threads = 1);
  ~PseudoLikEvaluator();
  PseudoLikEvaluator(PseudoLikEvaluator&&) noexcept;
  PseudoLikEvaluator& operator=(PseudoLikEvaluator&&) noexcept;

  double value(const Theta& theta) const;
  Vec3 grad(const Theta& theta) const;
  Mat3 hess(const Theta& theta) const;

  // Value and gradient from one shared pass (the optimizer's workhorse).
  std::pair<double, Vec3> value_and_grad(const Theta& theta) const;

  ScoreBreakdown breakdown(const Theta& theta,
                           const CellPartition& partition) const;

  const Window& estimation_window() const;
  double area() const;
  std::size_t data_in_window() const;

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Log pseudo-likelihood of the pattern on the estimation window:
// -integral of e^{-V(u|phi)} du - sum over data points of V(x|phi\x).
double log_pl(const Configuration& cfg, const ModelSpec& spec,
              const Theta& theta, const Window& estimation_window,
              const QuadratureScheme& quad);

// Parameter gradient of log_pl. With `breakdown` non-null, also fills
// the per-cell decomposition over `partition` (must tile the estimation
// window).
Vec3 grad_log_pl(const Configuration& cfg, const ModelSpec& spec,
                 const Theta& theta, const Window& estimation_window,
                 const QuadratureScheme& quad,
                 const CellPartition* partition = nullptr,
                 ScoreBreakdown* breakdown = nullptr);

// Parameter Hessian (second derivative in theta) of log_pl.
Mat3 hess_log_pl(const Configuration& cfg, const ModelSpec& spec,
                 const Theta& theta, const Window& estimation_window,
                 const QuadratureScheme& quad);

// Scaled objective family: u_n = -log_pl / area and its derivatives.
double u_n(const Configuration& cfg, const ModelSpec& spec, const Theta& theta,
           const Window& estimation_window, const QuadratureScheme& quad);
Vec3 u_n1(const Configuration& cfg, const ModelSpec& spec, const Theta& theta,
          const Window& estimation_window, const QuadratureScheme& quad);
Mat3 u_n2(const Configuration& cfg, const ModelSpec& spec, const Theta& theta,
          const Window& estimation_window, const QuadratureScheme& quad);

}  // namespace ljgibbs
