#pragma once

#include <vector>

#include "s2vae/power_spherical.hpp"

namespace s2vae::product {

using ps::PowerSphericalParams;
using sphere::SpherePoint;

/// N spheres of ambient dimension d' each; total dimension D = N d'.
struct ProductSphereSpec {
  int n_spheres = 16;
  int sphere_dim = 8;

  ProductSphereSpec() = default;
  ProductSphereSpec(int n, int d);
  int total_dim() const { return n_spheres * sphere_dim; }
};

/// Concatenation of N unit vectors. The flat vector has norm sqrt(N); it is
/// never renormalized as a whole.
class ProductLatent {
 public:
  explicit ProductLatent(std::vector<SpherePoint> parts);

  const std::vector<SpherePoint>& parts() const { return parts_; }
  const SpherePoint& part(int i) const { return parts_.at(i); }
  int n_spheres() const { return static_cast<int>(parts_.size()); }
  int sphere_dim() const { return static_cast<int>(parts_.front().dim()); }
  Vec flat() const;

 private:
  std::vector<SpherePoint> parts_;
};

struct ProductParams {
  std::vector<PowerSphericalParams> per_sphere;

  int n_spheres() const { return static_cast<int>(per_sphere.size()); }
};

/// Contiguous d'-chunks, each projected onto its sphere.
ProductLatent split(const Vec& flat, const ProductSphereSpec& spec);
double kl_total(const ProductParams& p);

struct ProductSample {
  ProductLatent latent;
  std::vector<ps::SampleTrace> traces;
};

/// Sphere i draws from rng.split(i), so parts are independent and can be
/// sampled in any order.
ProductSample rsample_product(const ProductParams& p, const Rng& rng);
ProductLatent slerp_product(const ProductLatent& a, const ProductLatent& b, double t);

}  // namespace s2vae::product
