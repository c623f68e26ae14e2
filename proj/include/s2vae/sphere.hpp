#pragma once

#include <Eigen/Dense>

#include "s2vae/rng.hpp"

namespace s2vae {

using Vec = Eigen::VectorXd;

/// Tolerance for "unit norm" used throughout the library.
inline constexpr double kUnitTol = 1e-6;

namespace sphere {

/// A point on S^(d-1), d >= 2. Construction checks the unit-norm invariant.
class SpherePoint {
 public:
  explicit SpherePoint(Vec coords);

  const Vec& coords() const { return coords_; }
  Eigen::Index dim() const { return coords_.size(); }
  double operator[](Eigen::Index i) const { return coords_[i]; }

 private:
  Vec coords_;
};

/// I - 2uu^T; acts as identity when flagged degenerate.
struct HouseholderReflector {
  Vec u;
  bool degenerate = false;

  Eigen::Index dim() const { return u.size(); }
};

SpherePoint project_to_sphere(const Vec& v);

/// log of the surface area of S^(d-1): log(2 pi^{d/2} / Gamma(d/2)).
double log_surface_area(int d);

HouseholderReflector make_householder(const SpherePoint& mu);
Vec apply_householder(const HouseholderReflector& r, const Vec& v);

/// Great-circle interpolation. Near-parallel inputs fall back to normalized
/// lerp; antipodal inputs throw AntipodalPoints.
SpherePoint slerp(const SpherePoint& x, const SpherePoint& y, double t);

/// Uniform draw on S^(d-1) by normalizing a standard normal vector. d = 1
/// returns +-1.
Vec sample_uniform_sphere(int d, Rng& rng);

}  // namespace sphere
}  // namespace s2vae
