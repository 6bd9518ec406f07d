#pragma once

#include <vector>

#include "ljgibbs/geometry.hpp"
#include "ljgibbs/model.hpp"

namespace ljgibbs {

// Stratified midpoint rule: the window is split into nx * ny congruent
// subcells, one dummy point at each subcell center with the subcell area
// as weight, so the weights sum to the window area exactly (within
// accumulation roundoff).
struct QuadratureScheme {
  Window window;
  int nx = 0, ny = 0;
  std::vector<Point> nodes;     // row-major, y outer
  std::vector<double> weights;  // all equal for this rule

  std::size_t size() const { return nodes.size(); }
  double total_weight() const;
};

// resolution = dummy points per unit length per axis; the subcell count
// is rounded up so the realized spacing is never coarser than requested.
QuadratureScheme make_stratified(const Window& w, double resolution);

// Default per-unit-length resolution: 20 points per interaction range
// per axis for interacting models, 2 per unit length for Poisson.
double default_resolution(const ModelSpec& spec);

}  // namespace ljgibbs
