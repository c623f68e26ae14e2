#include "s2vae/power_spherical.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "s2vae/error.hpp"

namespace s2vae::ps {

PowerSphericalParams::PowerSphericalParams(SpherePoint mu, double kappa) : mu_(std::move(mu)), kappa_(kappa) {
  require(kappa >= 0.0 && std::isfinite(kappa), ErrorKind::DomainError,
          "kappa must be finite and >= 0, got " + std::to_string(kappa));
}

special::BetaParams PowerSphericalParams::beta_params() const {
  const double b = 0.5 * (dim() - 1);
  return {kappa_ + b, b};
}

Vec SampleTrace::north_pole_sample() const {
  Vec yp(v.size() + 1);
  yp[0] = t;
  yp.tail(v.size()) = v * std::sqrt(std::max(0.0, 1.0 - t * t));
  return yp;
}

double log_normalizer(int d, double kappa) {
  require(d >= 2, ErrorKind::DomainError, "log_normalizer needs d >= 2");
  require(kappa >= 0.0 && std::isfinite(kappa), ErrorKind::DomainError, "log_normalizer needs kappa >= 0");
  const double beta = 0.5 * (d - 1);
  const double alpha = kappa + beta;
  return (alpha + beta) * std::log(2.0) + beta * std::log(std::numbers::pi) + special::log_gamma(alpha) -
         special::log_gamma(alpha + beta);
}

double log_prob(const PowerSphericalParams& p, const Vec& z) {
  require(z.size() == p.dim(), ErrorKind::DimensionMismatch, "log_prob dimension mismatch");
  const double c = p.mu().coords().dot(z);
  const double lc = log_normalizer(p.dim(), p.kappa());
  if (p.kappa() == 0.0) return -lc;
  if (1.0 + c <= 0.0) return -std::numeric_limits<double>::infinity();
  return p.kappa() * std::log1p(c) - lc;
}

double entropy(const PowerSphericalParams& p) {
  const auto bp = p.beta_params();
  const double k = p.kappa();
  return log_normalizer(p.dim(), k) -
         k * (std::log(2.0) + special::digamma(bp.alpha) - special::digamma(bp.alpha + bp.beta));
}

double kl_to_uniform(int d, double kappa) {
  const double beta = 0.5 * (d - 1);
  const double alpha = kappa + beta;
  const double h = log_normalizer(d, kappa) -
                   kappa * (std::log(2.0) + special::digamma(alpha) - special::digamma(alpha + beta));
  return std::max(0.0, sphere::log_surface_area(d) - h);
}

double kl_to_uniform(const PowerSphericalParams& p) { return kl_to_uniform(p.dim(), p.kappa()); }

double kl_to_uniform_dkappa(int d, double kappa) {
  const double beta = 0.5 * (d - 1);
  const double alpha = kappa + beta;
  return kappa * (special::trigamma(alpha) - special::trigamma(alpha + beta));
}

double mean_resultant(int d, double kappa) { return kappa / (kappa + d - 1); }

SampleTrace rsample_from_noise(const PowerSphericalParams& p, double u, const Vec& v) {
  require(v.size() == p.dim() - 1, ErrorKind::DimensionMismatch, "tangent direction must have length d - 1");
  const auto draw = special::beta_from_uniform(p.beta_params(), u);
  SampleTrace tr;
  tr.u = u;
  tr.y = draw.y;
  tr.dy_dalpha = draw.dy_dalpha;
  tr.t = 2.0 * draw.y - 1.0;
  tr.v = v;
  const auto h = sphere::make_householder(p.mu());
  tr.z = sphere::apply_householder(h, tr.north_pole_sample());
  return tr;
}

SampleTrace rsample(const PowerSphericalParams& p, Rng& rng) {
  const double u = rng.uniform_open();
  const Vec v = sphere::sample_uniform_sphere(p.dim() - 1, rng);
  return rsample_from_noise(p, u, v);
}

PathwiseGradient pathwise_gradient(const PowerSphericalParams& p, const SampleTrace& tr, const Vec& g) {
  require(g.size() == p.dim(), ErrorKind::DimensionMismatch, "upstream gradient dimension mismatch");
  const Vec yp = tr.north_pole_sample();
  PathwiseGradient out;
  Vec g_yp;
  Vec w = -p.mu().coords();
  w[0] += 1.0;
  const double n2 = w.squaredNorm();
  if (std::sqrt(n2) < 1e-7) {
    out.d_mu = Vec::Zero(p.dim());
    g_yp = g;
  } else {
    const double a = w.dot(yp);
    const double b = g.dot(w);
    g_yp = g - (2.0 * b / n2) * w;
    const Vec d_w = (-2.0 / n2) * (a * g + b * yp) + (4.0 * a * b / (n2 * n2)) * w;
    out.d_mu = -d_w;
  }
  const double s = std::sqrt(std::max(0.0, 1.0 - tr.t * tr.t));
  double d_t = g_yp[0];
  if (s > 1e-12) d_t -= (tr.t / s) * g_yp.tail(tr.v.size()).dot(tr.v);
  out.d_kappa = d_t * 2.0 * tr.dy_dalpha;
  return out;
}

Vec tangent_project(const SpherePoint& mu, const Vec& g) {
  return g - mu.coords() * mu.coords().dot(g);
}

TestFunctional linear_functional(const Vec& c) {
  return {[c](const Vec& z) { return c.dot(z); }, [c](const Vec&) { return c; }};
}

namespace {

// Orthonormal basis of the tangent space at mu (columns).
Eigen::MatrixXd tangent_basis(const SpherePoint& mu) {
  const int d = static_cast<int>(mu.dim());
  Eigen::MatrixXd m(d, d);
  m.col(0) = mu.coords();
  m.rightCols(d - 1).setIdentity();
  // Pick the d-1 identity columns least aligned with mu.
  Eigen::Index skip = 0;
  mu.coords().cwiseAbs().maxCoeff(&skip);
  int col = 1;
  for (int i = 0; i < d; ++i) {
    if (i == skip) continue;
    m.col(col).setZero();
    m(i, col) = 1.0;
    ++col;
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
  Eigen::MatrixXd q = qr.householderQ();
  return q.rightCols(d - 1);
}

}  // namespace

GradientReport grad_check_rsample(const PowerSphericalParams& p, const TestFunctional& f,
                                  const GradCheckOptions& opt) {
  const int d = p.dim();
  Rng rng(opt.seed);
  std::vector<double> us(opt.n);
  std::vector<Vec> vs(opt.n);
  for (int i = 0; i < opt.n; ++i) {
    us[i] = rng.uniform_open();
    vs[i] = sphere::sample_uniform_sphere(d - 1, rng);
  }
  const Eigen::MatrixXd basis = tangent_basis(p.mu());

  auto mean_f = [&](const PowerSphericalParams& q) {
    double acc = 0.0;
    for (int i = 0; i < opt.n; ++i) acc += f.value(rsample_from_noise(q, us[i], vs[i]).z);
    return acc / opt.n;
  };

  GradientReport rep;
  double dk = 0.0;
  Vec dmu = Vec::Zero(d);
  for (int i = 0; i < opt.n; ++i) {
    const auto tr = rsample_from_noise(p, us[i], vs[i]);
    const auto g = pathwise_gradient(p, tr, f.gradient(tr.z));
    dk += g.d_kappa;
    dmu += g.d_mu;
  }
  rep.pathwise_dkappa = dk / opt.n;
  rep.pathwise_dmu = basis.transpose() * (dmu / opt.n);

  const double kp = p.kappa() + opt.h;
  const double km = std::max(0.0, p.kappa() - opt.h);
  rep.fd_dkappa = (mean_f(PowerSphericalParams(p.mu(), kp)) - mean_f(PowerSphericalParams(p.mu(), km))) / (kp - km);

  rep.fd_dmu = Vec::Zero(d - 1);
  for (int k = 0; k < d - 1; ++k) {
    const Vec dir = basis.col(k);
    const auto plus = sphere::project_to_sphere(p.mu().coords() + opt.h * dir);
    const auto minus = sphere::project_to_sphere(p.mu().coords() - opt.h * dir);
    // Retraction distance along the geodesic is atan(h), not h.
    rep.fd_dmu[k] = (mean_f(PowerSphericalParams(plus, p.kappa())) -
                     mean_f(PowerSphericalParams(minus, p.kappa()))) /
                    (2.0 * std::atan(opt.h));
  }

  auto rel = [](double a, double b) {
    const double scale = std::max(std::abs(b), 1e-12);
    return std::abs(a - b) / scale;
  };
  rep.rel_err_kappa = rel(rep.pathwise_dkappa, rep.fd_dkappa);
  const double fd_norm = rep.fd_dmu.norm();
  rep.rel_err_mu = (rep.pathwise_dmu - rep.fd_dmu).norm() / std::max(fd_norm, 1e-12);
  return rep;
}

NormalizerStability normalizer_stability(int d, double kappa) {
  NormalizerStability s;
  s.log_space = log_normalizer(d, kappa);
  const double beta = 0.5 * (d - 1);
  const double alpha = kappa + beta;
  s.linear_double = std::pow(2.0, alpha + beta) * std::pow(std::numbers::pi, beta) * std::tgamma(alpha) /
                    std::tgamma(alpha + beta);
  s.double_overflow = !std::isfinite(s.linear_double) || !std::isfinite(std::tgamma(alpha + beta));
  const float af = static_cast<float>(alpha);
  const float bf = static_cast<float>(beta);
  s.linear_float = std::pow(2.0f, af + bf) * std::pow(std::numbers::pi_v<float>, bf) * std::tgamma(af) /
                   std::tgamma(af + bf);
  s.float_overflow = !std::isfinite(s.linear_float) || !std::isfinite(std::tgamma(af + bf));
  return s;
}

}  // namespace s2vae::ps
