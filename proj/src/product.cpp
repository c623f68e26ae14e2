#include "s2vae/product.hpp"

#include <cmath>
#include <string>

#include "s2vae/error.hpp"

namespace s2vae::product {

ProductSphereSpec::ProductSphereSpec(int n, int d) : n_spheres(n), sphere_dim(d) {
  require(n >= 1, ErrorKind::InvalidDimension, "product spec needs at least one sphere");
  require(d >= 2, ErrorKind::InvalidDimension, "sub-sphere dimension must be >= 2");
}

ProductLatent::ProductLatent(std::vector<SpherePoint> parts) : parts_(std::move(parts)) {
  require(!parts_.empty(), ErrorKind::InvalidDimension, "product latent needs at least one part");
  for (const auto& p : parts_) {
    require(p.dim() == parts_.front().dim(), ErrorKind::DimensionMismatch, "product parts differ in dimension");
  }
}

Vec ProductLatent::flat() const {
  const auto d = parts_.front().dim();
  Vec out(d * static_cast<Eigen::Index>(parts_.size()));
  for (std::size_t i = 0; i < parts_.size(); ++i) out.segment(static_cast<Eigen::Index>(i) * d, d) = parts_[i].coords();
  return out;
}

ProductLatent split(const Vec& flat, const ProductSphereSpec& spec) {
  require(flat.size() == spec.total_dim(), ErrorKind::DimensionMismatch,
          "flat latent has length " + std::to_string(flat.size()) + ", spec needs " +
              std::to_string(spec.total_dim()));
  std::vector<SpherePoint> parts;
  parts.reserve(spec.n_spheres);
  for (int i = 0; i < spec.n_spheres; ++i) {
    const Vec chunk = flat.segment(i * spec.sphere_dim, spec.sphere_dim);
    require(chunk.norm() > 1e-12, ErrorKind::ZeroChunk, "chunk " + std::to_string(i) + " is zero");
    parts.push_back(sphere::project_to_sphere(chunk));
  }
  return ProductLatent(std::move(parts));
}

double kl_total(const ProductParams& p) {
  double acc = 0.0;
  for (const auto& s : p.per_sphere) acc += ps::kl_to_uniform(s);
  return acc;
}

ProductSample rsample_product(const ProductParams& p, const Rng& rng) {
  require(p.n_spheres() >= 1, ErrorKind::InvalidDimension, "empty product params");
  std::vector<SpherePoint> parts;
  std::vector<ps::SampleTrace> traces;
  parts.reserve(p.per_sphere.size());
  traces.reserve(p.per_sphere.size());
  for (int i = 0; i < p.n_spheres(); ++i) {
    Rng sub = rng.split(static_cast<std::uint64_t>(i));
    auto tr = ps::rsample(p.per_sphere[i], sub);
    parts.push_back(sphere::project_to_sphere(tr.z));
    traces.push_back(std::move(tr));
  }
  return {ProductLatent(std::move(parts)), std::move(traces)};
}

ProductLatent slerp_product(const ProductLatent& a, const ProductLatent& b, double t) {
  require(a.n_spheres() == b.n_spheres() && a.sphere_dim() == b.sphere_dim(), ErrorKind::DimensionMismatch,
          "slerp_product needs latents with the same spec");
  std::vector<SpherePoint> parts;
  parts.reserve(a.parts().size());
  for (int i = 0; i < a.n_spheres(); ++i) parts.push_back(sphere::slerp(a.part(i), b.part(i), t));
  return ProductLatent(std::move(parts));
}

}  // namespace s2vae::product
