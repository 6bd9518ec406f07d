#pragma once

#include "ljgibbs/geometry.hpp"

namespace ljgibbs::detail {

// Accumulated pair statistics around an evaluation point. For LJ, s6 and
// s12 are the sums of (theta3/r)^6 and (theta3/r)^12 over neighbors; for
// Strauss only `count` matters. `hit_index` records a neighbor closer
// than the duplicate tolerance (-1 if none); such a neighbor contributes
// to `count` but not to s6/s12 (its 1/r powers are not representable).
struct PairScan {
  double s6 = 0.0;
  double s12 = 0.0;
  long count = 0;
  int hit_index = -1;
};

template <class GridT>
inline PairScan scan_lj(const GridT& grid, Point x, double r, double t3sq,
                        int exclude_index) {
  PairScan out;
  const double tol2 = kDuplicateTol * kDuplicateTol;
  grid.visit_neighbors(x, r, exclude_index, [&](int idx, double d2) {
    ++out.count;
    if (d2 <= tol2) {
      out.hit_index = idx;
      return;
    }
    const double u = t3sq / d2;
    const double u3 = u * u * u;
    out.s6 += u3;
    out.s12 += u3 * u3;
  });
  return out;
}

template <class GridT>
inline PairScan scan_count(const GridT& grid, Point x, double r,
                           int exclude_index) {
  PairScan out;
  const double tol2 = kDuplicateTol * kDuplicateTol;
  grid.visit_neighbors(x, r, exclude_index, [&](int idx, double d2) {
    ++out.count;
    if (d2 <= tol2) out.hit_index = idx;
  });
  return out;
}

}  // namespace ljgibbs::detail
