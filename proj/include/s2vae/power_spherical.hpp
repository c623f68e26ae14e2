#pragma once

#include <functional>

#include "s2vae/rng.hpp"
#include "s2vae/special.hpp"
#include "s2vae/sphere.hpp"

namespace s2vae::ps {

using sphere::SpherePoint;

/// Location mu on S^(d-1) and concentration kappa >= 0 (kappa = 0 is the
/// uniform distribution).
class PowerSphericalParams {
 public:
  PowerSphericalParams(SpherePoint mu, double kappa);

  const SpherePoint& mu() const { return mu_; }
  double kappa() const { return kappa_; }
  int dim() const { return static_cast<int>(mu_.dim()); }
  /// Beta shapes of the marginal of (1 + mu^T z) / 2.
  special::BetaParams beta_params() const;

 private:
  SpherePoint mu_;
  double kappa_;
};

/// Every intermediate of one reparameterized draw.
struct SampleTrace {
  double y = 0.0;          // Beta(alpha, beta) draw
  double t = 0.0;          // 2y - 1, coordinate along mu
  Vec v;                   // uniform direction on S^(d-2)
  Vec z;                   // final sample on S^(d-1)
  double dy_dalpha = 0.0;  // implicit derivative of y at fixed uniform
  double u = 0.0;          // uniform that produced y

  /// [t; v sqrt(1 - t^2)], the sample before the Householder map.
  Vec north_pole_sample() const;
};

double log_normalizer(int d, double kappa);
/// Returns -inf at the exact antipode when kappa > 0.
double log_prob(const PowerSphericalParams& p, const Vec& z);
double entropy(const PowerSphericalParams& p);
double kl_to_uniform(int d, double kappa);
double kl_to_uniform(const PowerSphericalParams& p);
/// d KL / d kappa = kappa (psi'(alpha) - psi'(alpha + beta)).
double kl_to_uniform_dkappa(int d, double kappa);
/// E[mu^T z] = kappa / (kappa + d - 1).
double mean_resultant(int d, double kappa);

SampleTrace rsample(const PowerSphericalParams& p, Rng& rng);
/// Draw from explicit noise (uniform for the Beta stage, tangent direction v).
SampleTrace rsample_from_noise(const PowerSphericalParams& p, double u, const Vec& v);

struct PathwiseGradient {
  Vec d_mu;  // ambient gradient w.r.t. mu (not tangent-projected)
  double d_kappa = 0.0;
};

/// Backpropagates dL/dz through the sampling path of `trace`.
PathwiseGradient pathwise_gradient(const PowerSphericalParams& p, const SampleTrace& trace, const Vec& dl_dz);

/// Projection onto the tangent space of the sphere at mu.
Vec tangent_project(const SpherePoint& mu, const Vec& g);

/// Smooth scalar functional of a sample, with its gradient.
struct TestFunctional {
  std::function<double(const Vec&)> value;
  std::function<Vec(const Vec&)> gradient;
};

TestFunctional linear_functional(const Vec& c);

struct GradientReport {
  double pathwise_dkappa = 0.0;
  double fd_dkappa = 0.0;
  double rel_err_kappa = 0.0;
  Vec pathwise_dmu;  // tangent components in an orthonormal tangent basis
  Vec fd_dmu;
  double rel_err_mu = 0.0;
};

struct GradCheckOptions {
  int n = 50000;
  double h = 0.05;
  std::uint64_t seed = 7;
};

/// Compares pathwise gradients of E[f(z)] with common-random-number central
/// differences, w.r.t. kappa and w.r.t. mu along the tangent space.
GradientReport grad_check_rsample(const PowerSphericalParams& p, const TestFunctional& f,
                                  const GradCheckOptions& opt = {});

/// Naive linear-space evaluation of the normalizer, next to the log-space one.
struct NormalizerStability {
  double log_space = 0.0;
  double linear_double = 0.0;
  bool double_overflow = false;
  float linear_float = 0.0f;
  bool float_overflow = false;
};

NormalizerStability normalizer_stability(int d, double kappa);

}  // namespace s2vae::ps
