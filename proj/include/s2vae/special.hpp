#pragma once

#include "s2vae/rng.hpp"

namespace s2vae::special {

/// Shape parameters of a Beta distribution; both strictly positive and finite.
struct BetaParams {
  double alpha;
  double beta;
};

double log_gamma(double x);
double digamma(double x);
/// First derivative of the digamma function.
double trigamma(double x);
double log_beta(double a, double b);

double beta_log_pdf(const BetaParams& p, double t);
/// Regularized incomplete beta I_t(alpha, beta), continued-fraction evaluation.
double beta_cdf(const BetaParams& p, double t);
/// Inverse of beta_cdf by bracketed Newton iteration (bisection fallback,
/// at most 200 iterations). Throws NoConvergence on failure.
double beta_inverse_cdf(const BetaParams& p, double q);

/// A reparameterized Beta draw y = F^{-1}(u) together with dy/dalpha obtained
/// by implicit differentiation of the CDF at fixed u.
struct BetaSample {
  double y;
  double u;
  double dy_dalpha;
};

/// dy/dalpha at fixed quantile: -(dI_y/dalpha) / pdf(y), with dI/dalpha by
/// central difference (step 1e-5).
double beta_quantile_dalpha(const BetaParams& p, double y);

BetaSample sample_beta(const BetaParams& p, Rng& rng);
/// Same draw from a caller-supplied uniform, for common-random-number use.
BetaSample beta_from_uniform(const BetaParams& p, double u);

namespace testing {
/// Adds `offset` to every log_gamma result until reset to 0. Used by the
/// self-test command to prove it detects a broken special function.
void set_log_gamma_fault(double offset);
}  // namespace testing

}  // namespace s2vae::special
