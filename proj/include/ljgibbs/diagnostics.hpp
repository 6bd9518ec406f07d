#pragma once

#include <array>

#include "ljgibbs/geometry.hpp"
#include "ljgibbs/model.hpp"
#include "ljgibbs/quadrature.hpp"

namespace ljgibbs {

// Test functions h(x, phi) for the innovation residual.
enum class TestFunction {
  constant,        // h = 1
  local_energy,    // h = V(x | phi; theta)
  neighbor_count,  // h = #neighbors of x within the interaction range
};

// Normalized residual of the integral characterization of the model:
//   ( sum_{x in pattern ∩ W} h(x, phi \ x)
//     - integral over W of h(u, phi) e^{-V(u|phi;theta)} du ) / |W|
// where W is the estimation window. Zero in expectation when theta is
// the true parameter; used for goodness of fit and as the sampler
// equilibrium check. Requires the minus-sampling border margin.
double gnz_residual(const Configuration& cfg, const ModelSpec& spec,
                    const Theta& theta, TestFunction h,
                    const Window& estimation_window,
                    const QuadratureScheme& quad);

// All three test functions from one pass (constant, local_energy,
// neighbor_count in that order).
std::array<double, 3> gnz_residuals(const Configuration& cfg,
                                    const ModelSpec& spec, const Theta& theta,
                                    const Window& estimation_window,
                                    const QuadratureScheme& quad);

}  // namespace ljgibbs
