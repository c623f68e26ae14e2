#include "oracles.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

#include "s2vae/error.hpp"
#include "s2vae/layers.hpp"
#include "s2vae/losses.hpp"
#include "s2vae/model.hpp"
#include "s2vae/power_spherical.hpp"
#include "s2vae/special.hpp"

namespace s2vae::oracle {

namespace {

using Clock = std::chrono::steady_clock;

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

template <typename F>
CheckResult timed(const std::string& name, F&& body) {
  const auto t0 = Clock::now();
  CheckResult r;
  r.name = name;
  try {
    body(r);
  } catch (const std::exception& e) {
    r.passed = false;
    r.detail = std::string("threw: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return r;
}

// Area of S^(k-1) in R^k, via std::lgamma.
double log_area(int k) { return std::log(2.0) + 0.5 * k * std::log(std::numbers::pi) - std::lgamma(0.5 * k); }

}  // namespace

double log_normalizer_quadrature(int d, double kappa) {
  // C = |S^(d-2)| * int_0^pi (1 + cos th)^kappa sin^(d-2) th dth, scaled by 2^-kappa.
  auto f = [d, kappa](double th) {
    const double c = std::cos(th);
    return std::exp(kappa * std::log1p(c) - kappa * std::log(2.0)) * std::pow(std::sin(th), d - 2);
  };
  double err = 0.0;
  // Split so the peak at th = 0 is resolved for large kappa.
  const double cut = std::min(std::numbers::pi / 2, 6.0 / std::sqrt(kappa + 1.0));
  const double a = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 0.0, cut, 20, 1e-14, &err);
  const double b = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, cut, std::numbers::pi, 20, 1e-14, &err);
  return std::log(a + b) + kappa * std::log(2.0) + log_area(d - 1);
}

CheckResult check_special_functions() {
  return timed("special_functions", [](CheckResult& r) {
    double worst = 0.0;
    for (double x : {0.001, 0.1, 0.5, 1.5, 3.7, 10.0, 64.0, 1000.0, 9999.5}) {
      worst = std::max(worst, std::abs(special::log_gamma(x) - boost::math::lgamma(x)) / std::max(1.0, std::abs(boost::math::lgamma(x))));
      worst = std::max(worst, std::abs(special::digamma(x) - boost::math::digamma(x)) / std::max(1.0, std::abs(boost::math::digamma(x))));
      worst = std::max(worst, std::abs(special::trigamma(x) - boost::math::trigamma(x)) / std::max(1.0, std::abs(boost::math::trigamma(x))));
    }
    const double grid[][3] = {{33.5, 3.5, 0.9}, {2, 3, 0.5}, {0.5, 0.5, 0.2}, {100, 3.5, 0.97}, {5, 50, 0.1}, {1.5, 1.5, 0.75}};
    for (const auto& g : grid) {
      worst = std::max(worst, std::abs(special::beta_cdf({g[0], g[1]}, g[2]) - boost::math::ibeta(g[0], g[1], g[2])));
      const double q = boost::math::ibeta(g[0], g[1], g[2]);
      worst = std::max(worst, std::abs(special::beta_inverse_cdf({g[0], g[1]}, q) - g[2]));
    }
    r.passed = worst <= 1e-10;
    r.detail = fmt("max error vs reference %.3g (limit 1e-10)", worst);
  });
}

CheckResult check_normalizer_quadrature() {
  return timed("normalizer_quadrature", [](CheckResult& r) {
    double worst = 0.0;
    std::string where;
    for (int d : {2, 3, 4, 8}) {
      for (double k : {0.1, 1.0, 10.0, 30.0, 100.0}) {
        const double rel = std::abs(std::expm1(ps::log_normalizer(d, k) - log_normalizer_quadrature(d, k)));
        if (rel > worst) {
          worst = rel;
          where = fmt("d=%g kappa=%g", d, k);
        }
      }
    }
    r.passed = worst <= 1e-6;
    r.detail = fmt("max relative error %.3g (limit 1e-6) at ", worst) + where;
  });
}

CheckResult check_entropy_kl_mc(int draws) {
  return timed("entropy_kl_mc", [draws](CheckResult& r) {
    double worst = 0.0;
    std::string where;
    const std::pair<int, double> grid[] = {{4, 5.0}, {8, 30.0}, {16, 100.0}};
    for (const auto& [d, k] : grid) {
      Vec m = Vec::Zero(d);
      m[0] = 1.0;
      const ps::PowerSphericalParams p(sphere::SpherePoint(m), k);
      Rng rng(Rng::mix(11, static_cast<std::uint64_t>(d)));
      // Stratified uniforms for the Beta stage; the direction stays random.
      double acc = 0.0;
      for (int i = 0; i < draws; ++i) {
        const double u = (i + rng.uniform_open()) / draws;
        const Vec v = sphere::sample_uniform_sphere(d - 1, rng);
        acc += ps::log_prob(p, ps::rsample_from_noise(p, u, v).z);
      }
      const double h_mc = -acc / draws;
      const double kl_mc = acc / draws + sphere::log_surface_area(d);
      const double e = std::max(std::abs(h_mc - ps::entropy(p)), std::abs(kl_mc - ps::kl_to_uniform(p)));
      if (e > worst) {
        worst = e;
        where = fmt("d=%g kappa=%g", d, k);
      }
    }
    r.passed = worst <= 1e-2;
    r.detail = fmt("max |closed form - MC| %.3g (limit 1e-2) at ", worst) + where;
  });
}

CheckResult check_sampler_statistics(int draws) {
  return timed("sampler_statistics", [draws](CheckResult& r) {
    double worst = 0.0;
    const std::pair<int, double> grid[] = {{4, 5.0}, {8, 30.0}, {16, 100.0}};
    for (const auto& [d, k] : grid) {
      Rng rng(Rng::mix(23, static_cast<std::uint64_t>(d)));
      const Vec m = sphere::sample_uniform_sphere(d, rng);
      const ps::PowerSphericalParams p(sphere::SpherePoint(m), k);
      double s = 0.0, s2 = 0.0;
      for (int i = 0; i < draws; ++i) {
        const double c = m.dot(ps::rsample(p, rng).z);
        s += c;
        s2 += c * c;
      }
      const double mean = s / draws;
      const double se = std::sqrt((s2 / draws - mean * mean) / draws);
      worst = std::max(worst, std::abs(mean - ps::mean_resultant(d, k)) / se);
    }
    // kappa = 0 on S^1: chi-square over 16 angular bins, critical value at alpha = 0.01.
    constexpr int kBins = 16;
    std::vector<double> counts(kBins, 0.0);
    Rng rng(29);
    const ps::PowerSphericalParams uni(sphere::SpherePoint(Vec::Unit(2, 0)), 0.0);
    for (int i = 0; i < draws; ++i) {
      const Vec z = ps::rsample(uni, rng).z;
      const double a = std::atan2(z[1], z[0]) + std::numbers::pi;
      counts[std::min(kBins - 1, static_cast<int>(a / (2 * std::numbers::pi) * kBins))] += 1.0;
    }
    double chi2 = 0.0;
    const double expect = static_cast<double>(draws) / kBins;
    for (double c : counts) chi2 += (c - expect) * (c - expect) / expect;
    constexpr double kCritical = 30.5779;  // chi2(15), upper 1%
    r.passed = worst <= 4.0 && chi2 < kCritical;
    r.detail = fmt("mean resultant max %.2f standard errors (limit 4); uniform chi2 %.2f (limit %.2f)", worst, chi2,
                   kCritical);
  });
}

CheckResult check_reparam_gradients(int draws) {
  return timed("reparam_gradients", [draws](CheckResult& r) {
    Vec m(4), c(4);
    m << 0.5, -0.5, 0.5, 0.5;
    c << 0.3, 1.0, -0.7, 0.2;
    const ps::PowerSphericalParams p(sphere::SpherePoint(m), 10.0);
    ps::GradCheckOptions opt;
    opt.n = draws;
    const auto rep = ps::grad_check_rsample(p, ps::linear_functional(c), opt);
    r.passed = rep.rel_err_kappa <= 0.02 && rep.rel_err_mu <= 0.02;
    r.detail = fmt("relative error kappa %.3g, mu %.3g (limit 0.02)", rep.rel_err_kappa, rep.rel_err_mu);
  });
}

CheckResult check_log_space_stability() {
  return timed("log_space_stability", [](CheckResult& r) {
    constexpr double kReference = -124.25723938490614164;  // 50-digit evaluation
    const auto s = ps::normalizer_stability(128, 30.0);
    const double rel = std::abs((s.log_space - kReference) / kReference);
    r.passed = std::isfinite(s.log_space) && rel <= 1e-8 && s.float_overflow;
    r.detail = fmt("log C = %.12g, relative error %.3g; linear double %.3g", s.log_space, rel, s.linear_double) +
               (s.float_overflow ? ", linear float overflows" : ", linear float finite");
  });
}

namespace {

nn::Mat random_mat(Eigen::Index r, Eigen::Index c, Rng& rng, double scale = 1.0) {
  nn::Mat m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

}  // namespace

CheckResult check_network_gradients() {
  return timed("network_gradients", [](CheckResult& r) {
    using nn::Tensor;
    Rng rng(41);
    double worst = 0.0;
    std::string where;
    auto audit = [&](const std::string& name, const std::function<Tensor()>& f,
                     const std::vector<std::pair<std::string, Tensor>>& params) {
      const auto res = nn::gradient_check(f, params, 1e-6, 64, 1);
      if (res.max_rel_error >= worst) {
        worst = res.max_rel_error;
        where = name + "/" + res.worst;
      }
    };
    // Projections and weights in the readout keep every op's gradient non-trivial.
    const Tensor x = Tensor::parameter(random_mat(6, 5, rng));
    const Tensor readout = Tensor::constant(random_mat(6, 4, rng));
    {
      nn::ParamStore s;
      nn::GatedProjection g(s, "g", 5, 4, rng);
      auto params = s.entries();
      params.emplace_back("x", x);
      audit("gated_projection", [&] { return nn::sum(nn::mul(g(x), readout)); }, params);
    }
    {
      nn::ParamStore s;
      nn::LayerNormAffine ln(s, "ln", 5, 1e-5);
      auto params = s.entries();
      params.emplace_back("x", x);
      const Tensor w = Tensor::constant(random_mat(6, 5, rng));
      audit("layer_norm", [&] { return nn::sum(nn::mul(ln(x), w)); }, params);
    }
    {
      nn::ParamStore s;
      nn::AttentionBlock blk(s, "blk", 8, 2, 1e-5, rng);
      const Tensor h = Tensor::parameter(random_mat(6, 8, rng));
      const Tensor w = Tensor::constant(random_mat(6, 8, rng));
      auto params = s.entries();
      params.emplace_back("h", h);
      audit("attention_block", [&] { return nn::sum(nn::mul(blk(h, 3), w)); }, params);
    }
    {
      const Tensor a = Tensor::parameter(random_mat(8, 5, rng));
      const Tensor b = Tensor::parameter(random_mat(8, 3, rng));
      const Tensor xa = Tensor::constant(random_mat(8, 5, rng));
      const Tensor xb = Tensor::constant(random_mat(8, 3, rng));
      const std::vector<std::pair<std::string, Tensor>> params{{"a", a}, {"b", b}};
      audit("mse", [&] { return loss::mse_loss({xa, xb}, {a, b}); }, params);
      audit("cosine", [&] { return loss::cosine_distance_loss({xa, xb}, {a, b}); }, params);
      audit("gram", [&] { return loss::gram_loss({xa, xb}, {a, b}, 4); }, params);
      audit("variance", [&] { return loss::variance_preservation_loss({xa, xb}, {a, b}); }, params);
      audit("norm", [&] { return loss::norm_preservation_loss({xa, xb}, {a, b}); }, params);
    }
    {
      nn::Mat kv = random_mat(4, 3, rng).cwiseAbs();
      kv.array() += 0.5;
      kv *= 10.0;
      const Tensor kappa = Tensor::parameter(kv);
      audit("spherical_kl", [&] { return loss::spherical_kl(kappa, 8); }, {{"kappa", kappa}});
      const Tensor mu = Tensor::parameter(random_mat(4, 6, rng));
      const Tensor lv = Tensor::parameter(random_mat(4, 6, rng, 0.5));
      audit("gaussian_kl", [&] { return loss::gaussian_kl(mu, lv); }, {{"mu", mu}, {"log_var", lv}});
      const Tensor g = Tensor::constant(random_mat(3, 7, rng));
      const Tensor gh = Tensor::parameter(random_mat(3, 7, rng));
      audit("camera_huber", [&] { return loss::camera_huber_loss(g, gh, 0.5); }, {{"pose", gh}});
      nn::Mat dv = random_mat(2, 16, rng).cwiseAbs();
      dv.array() += 1.0;
      const Tensor depth = Tensor::constant(dv);
      nn::Mat dh = dv + random_mat(2, 16, rng, 0.3);
      const Tensor dhat = Tensor::parameter(dh);
      nn::Mat sv = random_mat(2, 16, rng).cwiseAbs();
      sv.array() += 0.2;
      const Tensor sigma = Tensor::parameter(sv);
      audit("aleatoric_depth", [&] { return loss::aleatoric_depth_loss(depth, dhat, sigma, 0.1, 4, 4); },
            {{"depth_hat", dhat}, {"sigma", sigma}});
    }
    for (auto kind : {nn::BottleneckKind::ProductSpherical, nn::BottleneckKind::Gaussian}) {
      nn::ModelConfig mc;
      mc.layer_dims = {4, 6};
      mc.tokens = 3;
      mc.n_layers = 1;
      mc.n_heads = 2;
      mc.hidden = 8;
      mc.n_spheres = 2;
      mc.sphere_dim = 3;
      mc.bottleneck = kind;
      nn::S2Vae model(mc, 5);
      const std::vector<Tensor> in{Tensor::constant(random_mat(6, 4, rng)), Tensor::constant(random_mat(6, 6, rng))};
      const auto f = [&] {
        const auto post = model.encode(in, 2);
        Rng noise(17);
        const Tensor z = model.sample(post, noise);
        const auto out = model.decode(z, 2);
        const Tensor kl = mc.spherical() ? loss::spherical_kl(post.kappa, mc.sphere_dim)
                                         : loss::gaussian_kl(post.mu, post.log_var);
        return nn::add(loss::mse_loss(in, out), nn::scale(kl, 0.1));
      };
      audit(std::string("bottleneck_") + nn::to_string(kind), f, model.params().entries());
    }
    r.passed = worst <= 0.02;
    r.detail = fmt("max relative gradient error %.3g (limit 0.02), worst ", worst) + where;
  });
}

std::vector<CheckResult> selftest_suite() {
  return {check_special_functions(),  check_normalizer_quadrature(), check_entropy_kl_mc(),
          check_sampler_statistics(), check_reparam_gradients(),     check_log_space_stability()};
}

}  // namespace s2vae::oracle
