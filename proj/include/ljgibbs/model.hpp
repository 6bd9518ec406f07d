#pragma once

#include <limits>
#include <string>

#include "ljgibbs/geometry.hpp"
#include "ljgibbs/linalg.hpp"

namespace ljgibbs {

enum class Family { poisson, strauss, lennard_jones };

std::string family_name(Family f);
Family family_from_name(const std::string& name);

// Model parameters. Only the first param_dim() entries are meaningful:
// Poisson uses theta1, Strauss theta1/theta2, Lennard-Jones all three.
struct Theta {
  double theta1 = 0.0;  // chemical potential (log intensity offset)
  double theta2 = 0.0;  // interaction strength (Strauss cost / LJ well depth)
  double theta3 = 0.0;  // LJ length scale, must be > 0 for LJ

  Vec3 as_vec() const { return {theta1, theta2, theta3}; }
  static Theta from_vec(const Vec3& v) { return {v[0], v[1], v[2]}; }
};

// Componentwise box constraints for the first p parameters.
struct ParameterBox {
  Vec3 lower{0, 0, 0};
  Vec3 upper{0, 0, 0};

  void validate(int p) const;
  Vec3 project(const Vec3& v, int p) const;
};

// Structural model description: the family plus its fixed constants
// (Strauss radius R, Lennard-Jones range D, optionally a truncation
// radius for the infinite-range LJ model).
struct ModelSpec {
  Family family = Family::poisson;
  double strauss_radius = 0.0;
  double lj_range = std::numeric_limits<double>::infinity();
  double truncation_radius = 0.0;  // 0 means not set

  int param_dim() const;
  bool finite_range() const;

  // Range used for neighbor scans: 0 (Poisson), R (Strauss), D or the
  // truncation radius (LJ).
  double interaction_range() const;

  void validate() const;
  void validate_theta(const Theta& t) const;
};

// Pair interaction g(r; theta). r must be > 0.
double pair_potential(const ModelSpec& spec, const Theta& theta, double r);

struct LocalEnergyTerms {
  double value = 0.0;  // V(x | phi; theta)
  Vec3 grad{0, 0, 0};  // dV/dtheta
  Mat3 hess = zero_mat();
};

// Local energy V(x | phi; theta) of inserting x into cfg, with optional
// parameter derivatives. exclude_index >= 0 evaluates V(x | phi \ x) for
// the configuration point at that index; otherwise x must not coincide
// with any configuration point.
LocalEnergyTerms local_energy_terms(const ModelSpec& spec, const Theta& theta,
                                    Point x, const Configuration& cfg,
                                    const SpatialGrid& grid,
                                    int exclude_index = -1,
                                    bool want_grad = false,
                                    bool want_hess = false);

double local_energy(const ModelSpec& spec, const Theta& theta, Point x,
                    const Configuration& cfg, const SpatialGrid& grid,
                    int exclude_index = -1);

Vec3 grad_local_energy(const ModelSpec& spec, const Theta& theta, Point x,
                       const Configuration& cfg, const SpatialGrid& grid,
                       int exclude_index = -1);

Mat3 hess_local_energy(const ModelSpec& spec, const Theta& theta, Point x,
                       const Configuration& cfg, const SpatialGrid& grid,
                       int exclude_index = -1);

// Upper bound on the local-energy truncation error |V_untruncated -
// V_truncated at radius R| for any configuration whose point count in
// every annulus {n-1 <= |y-x| <= n} is at most density * annulus area.
// Lennard-Jones only; requires R >= 1.
double tail_bound(const ModelSpec& spec, const Theta& theta, double R,
                  double density);

// Smallest truncation radius (on a 0.5-spaced scan from 1) whose tail
// bound at the box's upper interaction parameters falls below
// 1e-6 * max(1, |theta1| scale). Used when fitting the infinite-range
// LJ model.
double default_truncation_radius(const ModelSpec& spec, const ParameterBox& box,
                                 double density);

}  // namespace ljgibbs
