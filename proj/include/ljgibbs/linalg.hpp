#pragma once

#include <array>

namespace ljgibbs {

// Parameter-space vectors and matrices. The parameter dimension p is at
// most 3 (Poisson 1, Strauss 2, Lennard-Jones 3); entries at indices >= p
// are kept at zero.
using Vec3 = std::array<double, 3>;
using Mat3 = std::array<std::array<double, 3>, 3>;

inline Vec3 zero_vec() { return {0.0, 0.0, 0.0}; }
inline Mat3 zero_mat() { return {{{0, 0, 0}, {0, 0, 0}, {0, 0, 0}}}; }

double inf_norm(const Vec3& v, int p);

// Eigendecomposition of a symmetric p x p matrix by cyclic Jacobi sweeps.
// On return a = V diag(values) V^T with the eigenvectors in the columns
// of `vectors`.
void sym_eigen(const Mat3& a, int p, Mat3& vectors, Vec3& values);

// Inverse through the eigendecomposition. Eigenvalues below
// rel_cutoff * max|eigenvalue| raise numerical_error reporting the
// condition number. `condition` (optional) receives max|w| / min|w|.
Mat3 sym_inverse(const Mat3& a, int p, double rel_cutoff,
                 double* condition = nullptr);

// Nearest positive semidefinite matrix in the eigenvalue sense: negative
// eigenvalues are clipped to zero. `clipped` (optional) receives the
// magnitude of the most negative eigenvalue removed (0 if none).
Mat3 psd_project(const Mat3& a, int p, double* clipped = nullptr);

Mat3 mat_mul(const Mat3& a, const Mat3& b, int p);

}  // namespace ljgibbs
