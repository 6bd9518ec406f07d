#include "ljgibbs/quadrature.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace ljgibbs {

double QuadratureScheme::total_weight() const {
  long double s = 0.0L;
  for (double w : weights) s += w;
  return static_cast<double>(s);
}

QuadratureScheme make_stratified(const Window& w, double resolution) {
  if (!std::isfinite(resolution) || resolution <= 0.0) {
    throw std::invalid_argument("quadrature resolution must be finite and > 0");
  }
  const int nx = std::max(
      1, static_cast<int>(std::ceil(w.width() * resolution - 1e-9)));
  const int ny = std::max(
      1, static_cast<int>(std::ceil(w.height() * resolution - 1e-9)));
  const double total = static_cast<double>(nx) * static_cast<double>(ny);
  if (total > 5e7) {
    std::ostringstream msg;
    msg << "quadrature grid " << nx << " x " << ny
        << " exceeds the node budget; lower the resolution";
    throw std::invalid_argument(msg.str());
  }

  QuadratureScheme q;
  q.window = w;
  q.nx = nx;
  q.ny = ny;
  const double hx = w.width() / nx;
  const double hy = w.height() / ny;
  const double weight = hx * hy;
  q.nodes.reserve(static_cast<std::size_t>(nx) * ny);
  q.weights.assign(static_cast<std::size_t>(nx) * ny, weight);
  for (int j = 0; j < ny; ++j) {
    const double y = w.y_min + (j + 0.5) * hy;
    for (int i = 0; i < nx; ++i) {
      q.nodes.push_back({w.x_min + (i + 0.5) * hx, y});
    }
  }
  return q;
}

double default_resolution(const ModelSpec& spec) {
  const double range = spec.interaction_range();
  if (range > 0.0 && std::isfinite(range)) return 20.0 / range;
  return 2.0;
}

}  // namespace ljgibbs
