#include "s2vae/special.hpp"

#include <atomic>
#include <cmath>
#include <limits>
#include <string>

#include "s2vae/error.hpp"

namespace s2vae::special {
namespace {

std::atomic<double> g_log_gamma_fault{0.0};

void check_params(const BetaParams& p) {
  require(p.alpha > 0.0 && p.beta > 0.0 && std::isfinite(p.alpha) && std::isfinite(p.beta),
          ErrorKind::DomainError,
          "beta parameters must be positive and finite (alpha=" + std::to_string(p.alpha) +
              ", beta=" + std::to_string(p.beta) + ")");
}

// Modified Lentz evaluation of the incomplete-beta continued fraction.
double beta_continued_fraction(double a, double b, double x) {
  constexpr double tiny = 1e-300;
  constexpr double eps = 1e-16;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 20000; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < eps) return h;
  }
  fail(ErrorKind::NoConvergence, "incomplete beta continued fraction did not converge");
}

}  // namespace

double log_gamma(double x) {
  require(x > 0.0 && !std::isnan(x), ErrorKind::DomainError, "log_gamma needs x > 0");
  return std::lgamma(x) + g_log_gamma_fault.load(std::memory_order_relaxed);
}

double digamma(double x) {
  require(x > 0.0 && !std::isnan(x), ErrorKind::DomainError, "digamma needs x > 0");
  double acc = 0.0;
  while (x < 6.0) {
    acc -= 1.0 / x;
    x += 1.0;
  }
  const double r = 1.0 / (x * x);
  // Asymptotic series with Bernoulli coefficients B_2k / 2k.
  const double series =
      r * (1.0 / 12 -
           r * (1.0 / 120 -
                r * (1.0 / 252 -
                     r * (1.0 / 240 - r * (1.0 / 132 - r * (691.0 / 32760 - r * (1.0 / 12)))))));
  return acc + std::log(x) - 0.5 / x - series;
}

double trigamma(double x) {
  require(x > 0.0 && !std::isnan(x), ErrorKind::DomainError, "trigamma needs x > 0");
  double acc = 0.0;
  while (x < 6.0) {
    acc += 1.0 / (x * x);
    x += 1.0;
  }
  const double r = 1.0 / (x * x);
  const double series =
      1.0 / 6 -
      r * (1.0 / 30 - r * (1.0 / 42 - r * (1.0 / 30 - r * (5.0 / 66 - r * (691.0 / 2730 - r * (7.0 / 6))))));
  return acc + 1.0 / x + 0.5 * r + series * r / x;
}

double log_beta(double a, double b) { return log_gamma(a) + log_gamma(b) - log_gamma(a + b); }

double beta_log_pdf(const BetaParams& p, double t) {
  check_params(p);
  require(t >= 0.0 && t <= 1.0, ErrorKind::DomainError, "beta_log_pdf needs t in [0, 1]");
  if (t == 0.0 || t == 1.0) {
    const double e = t == 0.0 ? p.alpha : p.beta;
    if (e < 1.0) return std::numeric_limits<double>::infinity();
    if (e > 1.0) return -std::numeric_limits<double>::infinity();
    return -log_beta(p.alpha, p.beta);
  }
  return (p.alpha - 1.0) * std::log(t) + (p.beta - 1.0) * std::log1p(-t) - log_beta(p.alpha, p.beta);
}

double beta_cdf(const BetaParams& p, double t) {
  check_params(p);
  require(t >= 0.0 && t <= 1.0, ErrorKind::DomainError, "beta_cdf needs t in [0, 1]");
  if (t == 0.0) return 0.0;
  if (t == 1.0) return 1.0;
  const double a = p.alpha;
  const double b = p.beta;
  const double log_front = a * std::log(t) + b * std::log1p(-t) - log_beta(a, b);
  if (t < (a + 1.0) / (a + b + 2.0)) return std::exp(log_front) * beta_continued_fraction(a, b, t) / a;
  return 1.0 - std::exp(log_front) * beta_continued_fraction(b, a, 1.0 - t) / b;
}

double beta_inverse_cdf(const BetaParams& p, double q) {
  check_params(p);
  require(q > 0.0 && q < 1.0, ErrorKind::DomainError, "beta_inverse_cdf needs q in (0, 1)");
  double lo = 0.0;
  double hi = 1.0;
  double t = p.alpha / (p.alpha + p.beta);
  const double lb = log_beta(p.alpha, p.beta);
  for (int it = 0; it < 200; ++it) {
    const double f = beta_cdf(p, t) - q;
    if (f == 0.0) return t;
    if (f < 0.0) lo = t; else hi = t;
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(hi, 1e-300)) return t;
    const double log_pdf = (p.alpha - 1.0) * std::log(t) + (p.beta - 1.0) * std::log1p(-t) - lb;
    const double pdf = std::exp(log_pdf);
    double next = (pdf > 0.0 && std::isfinite(pdf)) ? t - f / pdf : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - t) <= 1e-16 * std::max(t, 1e-300) && std::abs(f) < 1e-12) return next;
    t = next;
  }
  if (std::abs(beta_cdf(p, t) - q) <= 1e-9) return t;
  fail(ErrorKind::NoConvergence, "beta_inverse_cdf exceeded 200 iterations (alpha=" + std::to_string(p.alpha) +
                                     ", beta=" + std::to_string(p.beta) + ", q=" + std::to_string(q) + ")");
}

double beta_quantile_dalpha(const BetaParams& p, double y) {
  if (y <= 0.0 || y >= 1.0) return 0.0;
  constexpr double h = 1e-5;
  const double up = beta_cdf({p.alpha + h, p.beta}, y);
  const double dn = beta_cdf({std::max(p.alpha - h, 0.5 * p.alpha), p.beta}, y);
  const double step = p.alpha + h - std::max(p.alpha - h, 0.5 * p.alpha);
  const double dcdf = (up - dn) / step;
  const double pdf = std::exp(beta_log_pdf(p, y));
  if (!(pdf > 1e-300) || !std::isfinite(pdf)) return 0.0;
  return -dcdf / pdf;
}

BetaSample beta_from_uniform(const BetaParams& p, double u) {
  check_params(p);
  if (p.alpha == 1.0 && p.beta == 1.0) return {u, u, beta_quantile_dalpha(p, u)};
  const double y = beta_inverse_cdf(p, u);
  return {y, u, beta_quantile_dalpha(p, y)};
}

BetaSample sample_beta(const BetaParams& p, Rng& rng) { return beta_from_uniform(p, rng.uniform_open()); }

namespace testing {
void set_log_gamma_fault(double offset) { g_log_gamma_fault.store(offset, std::memory_order_relaxed); }
}  // namespace testing

}  // namespace s2vae::special
