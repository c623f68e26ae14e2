#include "s2vae/sphere.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "s2vae/error.hpp"
#include "s2vae/special.hpp"

namespace s2vae::sphere {

SpherePoint::SpherePoint(Vec coords) : coords_(std::move(coords)) {
  require(coords_.size() >= 2, ErrorKind::InvalidDimension,
          "sphere points need d >= 2, got d = " + std::to_string(coords_.size()));
  const double n = coords_.norm();
  require(std::abs(n - 1.0) <= kUnitTol, ErrorKind::DomainError,
          "coordinates are not unit norm (|v| = " + std::to_string(n) + ")");
}

SpherePoint project_to_sphere(const Vec& v) {
  const double n = v.norm();
  require(n > 1e-12, ErrorKind::ZeroVector, "cannot project a zero vector onto the sphere");
  // Exact pass-through keeps the map idempotent bit-for-bit on unit input.
  if (n == 1.0) return SpherePoint(v);
  return SpherePoint(v / n);
}

double log_surface_area(int d) {
  require(d >= 2, ErrorKind::InvalidDimension, "log_surface_area needs d >= 2");
  const double half = 0.5 * d;
  return std::log(2.0) + half * std::log(std::numbers::pi) - special::log_gamma(half);
}

HouseholderReflector make_householder(const SpherePoint& mu) {
  Vec w = -mu.coords();
  w[0] += 1.0;
  const double n = w.norm();
  HouseholderReflector r;
  if (n < 1e-7) {
    r.u = Vec::Zero(mu.dim());
    r.degenerate = true;
    return r;
  }
  r.u = w / n;
  return r;
}

Vec apply_householder(const HouseholderReflector& r, const Vec& v) {
  require(v.size() == r.dim(), ErrorKind::DimensionMismatch, "householder dimension mismatch");
  if (r.degenerate) return v;
  return v - 2.0 * r.u * r.u.dot(v);
}

SpherePoint slerp(const SpherePoint& x, const SpherePoint& y, double t) {
  require(x.dim() == y.dim(), ErrorKind::DimensionMismatch, "slerp endpoints differ in dimension");
  require(t >= 0.0 && t <= 1.0, ErrorKind::DomainError, "slerp parameter must lie in [0, 1]");
  if (t == 0.0) return x;
  if (t == 1.0) return y;
  if (x.coords() == y.coords()) return x;
  const double c = std::clamp(x.coords().dot(y.coords()), -1.0, 1.0);
  require(c >= -1.0 + 1e-7, ErrorKind::AntipodalPoints, "slerp between antipodal points is not unique");
  if (c > 1.0 - 1e-7) return project_to_sphere((1.0 - t) * x.coords() + t * y.coords());
  const double omega = std::acos(c);
  const double s = std::sin(omega);
  Vec out = (std::sin((1.0 - t) * omega) / s) * x.coords() + (std::sin(t * omega) / s) * y.coords();
  // Renormalize away O(eps) drift.
  return SpherePoint(out / out.norm());
}

Vec sample_uniform_sphere(int d, Rng& rng) {
  require(d >= 1, ErrorKind::InvalidDimension, "sample_uniform_sphere needs d >= 1");
  if (d == 1) {
    Vec v(1);
    v[0] = rng.uniform() < 0.5 ? -1.0 : 1.0;
    return v;
  }
  Vec v(d);
  double n = 0.0;
  do {
    for (int i = 0; i < d; ++i) v[i] = rng.normal();
    n = v.norm();
  } while (n < 1e-300);
  return v / n;
}

}  // namespace s2vae::sphere
