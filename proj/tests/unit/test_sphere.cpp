#include <cmath>
#include <numbers>

#include "helpers.hpp"
#include "s2vae/rng.hpp"
#include "s2vae/sphere.hpp"

using namespace s2vae;
using namespace s2vae::sphere;

namespace {
Vec v(std::initializer_list<double> xs) {
  Vec out(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) out[i++] = x;
  return out;
}
}  // namespace

TEST_SUITE("sphere_core") {
  TEST_CASE("project_to_sphere") {
    CHECK((project_to_sphere(v({3, 0, 0, 0})).coords() - v({1, 0, 0, 0})).norm() < 1e-15);
    const Vec u = v({0.6, 0.8});
    CHECK((project_to_sphere(u).coords() - u).norm() == 0.0);
    CHECK((project_to_sphere(v({1, 1})).coords() - v({0.70710678118654752, 0.70710678118654752})).norm() < 1e-15);
    CHECK_ERROR_KIND(project_to_sphere(v({0, 0, 0})), ErrorKind::ZeroVector);
    CHECK_ERROR_KIND(SpherePoint(v({1.0})), ErrorKind::InvalidDimension);
    CHECK_ERROR_KIND(SpherePoint(v({1.0, 1.0})), ErrorKind::DomainError);
  }

  TEST_CASE("log_surface_area") {
    CHECK(std::abs(log_surface_area(2) - std::log(2 * std::numbers::pi)) < 1e-14);
    CHECK(std::abs(log_surface_area(3) - std::log(4 * std::numbers::pi)) < 1e-14);
    // 2 pi^64 / Gamma(64), in log form with ln(63!) from an exact integer sum
    long double lf = 0.0L;
    for (int k = 2; k <= 63; ++k) lf += std::log(static_cast<long double>(k));
    const long double ref = std::log(2.0L) + 64.0L * std::log(std::numbers::pi_v<long double>) - lf;
    CHECK(std::isfinite(log_surface_area(128)));
    CHECK(std::abs(log_surface_area(128) - static_cast<double>(ref)) < 1e-11);
    CHECK_ERROR_KIND(log_surface_area(1), ErrorKind::InvalidDimension);
  }

  TEST_CASE("householder") {
    const auto id = make_householder(SpherePoint(v({1, 0, 0})));
    CHECK(id.degenerate);
    CHECK((apply_householder(id, v({1, 2, 3})) - v({1, 2, 3})).norm() == 0.0);

    const auto r = make_householder(SpherePoint(v({-1, 0, 0})));
    CHECK(!r.degenerate);
    CHECK((r.u - v({1, 0, 0})).norm() < 1e-15);
    CHECK((apply_householder(r, v({1, 0, 0})) - v({-1, 0, 0})).norm() < 1e-15);
    CHECK((apply_householder(r, v({1, 2, 3})) - v({-1, 2, 3})).norm() < 1e-15);

    // maps the north pole to mu, preserves norms, is an involution
    Rng rng(3);
    for (int k = 0; k < 20; ++k) {
      const Vec mu = sample_uniform_sphere(6, rng);
      const auto h = make_householder(SpherePoint(mu));
      Vec e1 = Vec::Zero(6);
      e1[0] = 1.0;
      CHECK((apply_householder(h, e1) - mu).norm() < 1e-12);
      const Vec x = Vec::Random(6);
      CHECK(std::abs(apply_householder(h, x).norm() - x.norm()) < 1e-12);
      CHECK((apply_householder(h, apply_householder(h, x)) - x).norm() < 1e-12);
    }
    CHECK_ERROR_KIND(apply_householder(r, v({1, 2})), ErrorKind::DimensionMismatch);
  }

  TEST_CASE("slerp") {
    const SpherePoint x(v({1, 0, 0})), y(v({0, 1, 0}));
    CHECK((slerp(x, y, 0.0).coords() - x.coords()).norm() == 0.0);
    CHECK((slerp(x, y, 1.0).coords() - y.coords()).norm() < 1e-15);
    CHECK((slerp(x, y, 0.5).coords() - (x.coords() + y.coords()) / std::sqrt(2.0)).norm() < 1e-15);
    CHECK(std::abs(slerp(x, y, 0.3).coords().norm() - 1.0) < 1e-15);
    CHECK_ERROR_KIND(slerp(x, SpherePoint(v({-1, 0, 0})), 0.5), ErrorKind::AntipodalPoints);
    CHECK_ERROR_KIND(slerp(x, y, 1.5), ErrorKind::DomainError);
    CHECK_ERROR_KIND(slerp(x, SpherePoint(v({1, 0})), 0.5), ErrorKind::DimensionMismatch);
  }

  TEST_CASE("sample_uniform_sphere statistics") {
    Rng rng(9);
    const int n = 100000;
    Vec mean = Vec::Zero(3);
    for (int i = 0; i < n; ++i) {
      const Vec z = sample_uniform_sphere(3, rng);
      CHECK_MESSAGE(std::abs(z.norm() - 1.0) < 1e-6, "unit norm");
      mean += z;
    }
    mean /= n;
    const double se = 1.0 / std::sqrt(3.0 * n);
    for (int k = 0; k < 3; ++k) CHECK(std::abs(mean[k]) < 4.0 * se);

    // circle: angle histogram, chi-square with 15 dof at alpha 0.01
    std::vector<int> hist(16, 0);
    for (int i = 0; i < n; ++i) {
      const Vec z = sample_uniform_sphere(2, rng);
      double a = std::atan2(z[1], z[0]);
      if (a < 0) a += 2 * std::numbers::pi;
      ++hist[std::min(15, static_cast<int>(a / (2 * std::numbers::pi) * 16))];
    }
    double chi2 = 0.0;
    for (int c : hist) chi2 += (c - n / 16.0) * (c - n / 16.0) / (n / 16.0);
    CHECK(chi2 < 30.5779);
  }
}
