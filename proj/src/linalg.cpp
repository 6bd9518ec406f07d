#include "ljgibbs/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "ljgibbs/errors.hpp"

namespace ljgibbs {

double inf_norm(const Vec3& v, int p) {
  double m = 0.0;
  for (int i = 0; i < p; ++i) m = std::max(m, std::fabs(v[i]));
  return m;
}

void sym_eigen(const Mat3& a, int p, Mat3& vectors, Vec3& values) {
  Mat3 m = a;
  vectors = zero_mat();
  for (int i = 0; i < 3; ++i) vectors[i][i] = 1.0;

  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = 0.0;
    for (int i = 0; i < p; ++i)
      for (int j = i + 1; j < p; ++j) off += m[i][j] * m[i][j];
    if (off < 1e-300) break;

    double scale = 0.0;
    for (int i = 0; i < p; ++i) scale = std::max(scale, std::fabs(m[i][i]));
    if (std::sqrt(off) <= 1e-15 * std::max(scale, 1e-300)) break;

    for (int i = 0; i < p; ++i) {
      for (int j = i + 1; j < p; ++j) {
        if (std::fabs(m[i][j]) == 0.0) continue;
        const double theta = (m[j][j] - m[i][i]) / (2.0 * m[i][j]);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;

        for (int k = 0; k < p; ++k) {
          const double mki = m[k][i];
          const double mkj = m[k][j];
          m[k][i] = c * mki - s * mkj;
          m[k][j] = s * mki + c * mkj;
        }
        for (int k = 0; k < p; ++k) {
          const double mik = m[i][k];
          const double mjk = m[j][k];
          m[i][k] = c * mik - s * mjk;
          m[j][k] = s * mik + c * mjk;
        }
        for (int k = 0; k < 3; ++k) {
          const double vki = vectors[k][i];
          const double vkj = vectors[k][j];
          vectors[k][i] = c * vki - s * vkj;
          vectors[k][j] = s * vki + c * vkj;
        }
      }
    }
  }

  values = zero_vec();
  for (int i = 0; i < p; ++i) values[i] = m[i][i];
}

Mat3 sym_inverse(const Mat3& a, int p, double rel_cutoff, double* condition) {
  Mat3 v;
  Vec3 w;
  sym_eigen(a, p, v, w);

  double wmax = 0.0, wmin = 0.0;
  for (int i = 0; i < p; ++i) {
    const double ab = std::fabs(w[i]);
    wmax = std::max(wmax, ab);
    wmin = (i == 0) ? ab : std::min(wmin, ab);
  }
  const double cond =
      (wmin > 0.0) ? wmax / wmin : std::numeric_limits<double>::infinity();
  if (condition) *condition = cond;
  if (wmax == 0.0 || wmin < rel_cutoff * wmax) {
    std::ostringstream msg;
    msg << "matrix is singular or ill-conditioned (condition number " << cond
        << ", eigenvalue cutoff " << rel_cutoff << ")";
    throw numerical_error(msg.str());
  }

  Mat3 inv = zero_mat();
  for (int i = 0; i < p; ++i)
    for (int j = i; j < p; ++j) {
      double s = 0.0;
      for (int k = 0; k < p; ++k) s += v[i][k] * v[j][k] / w[k];
      inv[i][j] = s;
      inv[j][i] = s;
    }
  return inv;
}

Mat3 psd_project(const Mat3& a, int p, double* clipped) {
  Mat3 v;
  Vec3 w;
  sym_eigen(a, p, v, w);

  double worst = 0.0;
  for (int i = 0; i < p; ++i) {
    if (w[i] < 0.0) {
      worst = std::max(worst, -w[i]);
      w[i] = 0.0;
    }
  }
  if (clipped) *clipped = worst;

  Mat3 out = zero_mat();
  for (int i = 0; i < p; ++i)
    for (int j = i; j < p; ++j) {
      double s = 0.0;
      for (int k = 0; k < p; ++k) s += v[i][k] * v[j][k] * w[k];
      out[i][j] = s;
      out[j][i] = s;
    }
  return out;
}

Mat3 mat_mul(const Mat3& a, const Mat3& b, int p) {
  Mat3 out = zero_mat();
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j) {
      double s = 0.0;
      for (int k = 0; k < p; ++k) s += a[i][k] * b[k][j];
      out[i][j] = s;
    }
  return out;
}

}  // namespace ljgibbs
