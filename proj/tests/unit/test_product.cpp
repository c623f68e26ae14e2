#include <cmath>

#include "helpers.hpp"
#include "s2vae/power_spherical.hpp"
#include "s2vae/product.hpp"

using namespace s2vae;
using namespace s2vae::product;

namespace {
ProductParams uniform_params(int n, int d, double kappa) {
  ProductParams p;
  for (int i = 0; i < n; ++i) p.per_sphere.emplace_back(SpherePoint(Vec::Unit(d, i % d)), kappa);
  return p;
}
}  // namespace

TEST_SUITE("product_manifold") {
  TEST_CASE("split") {
    Vec flat(4);
    flat << 1, 0, 0, 2;
    const auto l = split(flat, ProductSphereSpec(2, 2));
    CHECK((l.part(0).coords() - Vec::Unit(2, 0)).norm() == 0.0);
    CHECK((l.part(1).coords() - Vec::Unit(2, 1)).norm() == 0.0);

    Rng rng(4);
    Vec r = Vec::Zero(12);
    for (int i = 0; i < 12; ++i) r[i] = rng.normal();
    const ProductSphereSpec spec(3, 4);
    const Vec once = split(r, spec).flat();
    CHECK((split(once, spec).flat() - once).norm() < 1e-15);
    CHECK(std::abs(once.norm() - std::sqrt(3.0)) < 1e-12);

    CHECK_ERROR_KIND(split(Vec::Ones(5), spec), ErrorKind::DimensionMismatch);
    Vec z = Vec::Ones(12);
    z.segment(4, 4).setZero();
    CHECK_ERROR_KIND(split(z, spec), ErrorKind::ZeroChunk);
    CHECK_ERROR_KIND(ProductSphereSpec(0, 4), ErrorKind::InvalidDimension);
    CHECK_ERROR_KIND(ProductSphereSpec(2, 1), ErrorKind::InvalidDimension);
  }

  TEST_CASE("kl_total is additive") {
    CHECK(kl_total(uniform_params(4, 3, 0.0)) == doctest::Approx(0.0));
    CHECK(std::abs(kl_total(uniform_params(16, 8, 30.0)) - 16 * ps::kl_to_uniform(8, 30.0)) < 1e-10);
  }

  TEST_CASE("rsample_product is reproducible and unit per part") {
    const auto p = uniform_params(5, 4, 20.0);
    const auto a = rsample_product(p, Rng(8)), b = rsample_product(p, Rng(8));
    CHECK((a.latent.flat() - b.latent.flat()).norm() == 0.0);
    for (const auto& part : a.latent.parts()) CHECK(std::abs(part.coords().norm() - 1.0) < 1e-12);
  }

  TEST_CASE("parts are independent") {
    const auto p = uniform_params(2, 3, 5.0);
    const int n = 100000;
    Rng rng(10);
    double sx = 0, sy = 0, sxy = 0, sxx = 0, syy = 0;
    for (int i = 0; i < n; ++i) {
      const auto s = rsample_product(p, rng.split(static_cast<std::uint64_t>(i)));
      const double x = s.latent.part(0)[1], y = s.latent.part(1)[2];
      sx += x, sy += y, sxy += x * y, sxx += x * x, syy += y * y;
    }
    const double cov = sxy / n - (sx / n) * (sy / n);
    const double corr = cov / std::sqrt((sxx / n - sx * sx / n / n) * (syy / n - sy * sy / n / n));
    CHECK(std::abs(corr) < 4.0 / std::sqrt(n));
  }

  TEST_CASE("slerp_product") {
    const ProductLatent a({SpherePoint(Vec::Unit(3, 0)), SpherePoint(Vec::Unit(3, 1))});
    const ProductLatent b({SpherePoint(Vec::Unit(3, 1)), SpherePoint(Vec::Unit(3, 2))});
    CHECK((slerp_product(a, b, 0.0).flat() - a.flat()).norm() == 0.0);
    CHECK((slerp_product(a, b, 1.0).flat() - b.flat()).norm() < 1e-15);
    CHECK((slerp_product(a, b, 0.5).flat() - (a.flat() + b.flat()) / std::sqrt(2.0)).norm() < 1e-15);
    const ProductLatent c({SpherePoint(Vec::Unit(4, 0))});
    CHECK_ERROR_KIND(slerp_product(a, c, 0.5), ErrorKind::DimensionMismatch);
  }
}
