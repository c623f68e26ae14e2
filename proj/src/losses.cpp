#include "s2vae/losses.hpp"

#include <cmath>

#include "s2vae/error.hpp"

namespace s2vae::loss {

using nn::Mat;

void LossWeights::validate() const {
  for (double w : {w_mse, w_sim, w_gram, w_var, w_norm, w_kl, w_camera, w_depth, alpha_reg}) {
    require(w >= 0.0 && std::isfinite(w), ErrorKind::ConfigError, "loss weights must be finite and >= 0");
  }
  require(huber_eps > 0.0, ErrorKind::ConfigError, "huber_eps must be > 0");
}

namespace {

void check_pairs(const std::vector<Tensor>& x, const std::vector<Tensor>& xhat) {
  require(!x.empty() && x.size() == xhat.size(), ErrorKind::ShapeMismatch, "layer counts differ");
  for (std::size_t l = 0; l < x.size(); ++l) {
    require(x[l].rows() == xhat[l].rows() && x[l].cols() == xhat[l].cols(), ErrorKind::ShapeMismatch,
            "layer " + std::to_string(l) + " shapes differ");
  }
}

Tensor safe_row_norm(const Tensor& a) { return nn::sqrt(nn::add_scalar(nn::row_sum(nn::square(a)), 1e-12)); }

Tensor average(const std::vector<Tensor>& parts) {
  Tensor acc = parts.front();
  for (std::size_t i = 1; i < parts.size(); ++i) acc = nn::add(acc, parts[i]);
  return nn::scale(acc, 1.0 / static_cast<double>(parts.size()));
}

}  // namespace

Tensor mse_loss(const std::vector<Tensor>& x, const std::vector<Tensor>& xhat) {
  check_pairs(x, xhat);
  double count = 0.0;
  Tensor acc;
  for (std::size_t l = 0; l < x.size(); ++l) {
    const Tensor s = nn::sum(nn::square(nn::sub(xhat[l], x[l])));
    acc = acc.defined() ? nn::add(acc, s) : s;
    count += static_cast<double>(x[l].value().size());
  }
  return nn::scale(acc, 1.0 / count);
}

Tensor cosine_distance_loss(const std::vector<Tensor>& x, const std::vector<Tensor>& xhat) {
  check_pairs(x, xhat);
  double count = 0.0;
  Tensor acc;
  for (std::size_t l = 0; l < x.size(); ++l) {
    const Tensor dot = nn::row_sum(nn::mul(x[l], xhat[l]));
    const Tensor cos = nn::div(dot, nn::mul(safe_row_norm(x[l]), safe_row_norm(xhat[l])));
    const Tensor s = nn::sum(nn::add_scalar(nn::scale(cos, -1.0), 1.0));
    acc = acc.defined() ? nn::add(acc, s) : s;
    count += static_cast<double>(x[l].rows());
  }
  return nn::scale(acc, 1.0 / count);
}

Tensor feature_recon_loss(const std::vector<Tensor>& x, const std::vector<Tensor>& xhat, double w_sim) {
  return nn::add(mse_loss(x, xhat), nn::scale(cosine_distance_loss(x, xhat), w_sim));
}

Tensor gram_loss(const std::vector<Tensor>& x, const std::vector<Tensor>& xhat, Eigen::Index tokens_per_scene) {
  check_pairs(x, xhat);
  const Eigen::Index t = tokens_per_scene;
  require(t >= 1 && x.front().rows() % t == 0, ErrorKind::ShapeMismatch, "rows must divide into scenes");
  const Eigen::Index scenes = x.front().rows() / t;
  std::vector<Tensor> parts;
  for (std::size_t l = 0; l < x.size(); ++l) {
    const Tensor xn = nn::div(x[l], safe_row_norm(x[l]));
    const Tensor yn = nn::div(xhat[l], safe_row_norm(xhat[l]));
    for (Eigen::Index s = 0; s < scenes; ++s) {
      std::vector<Eigen::Index> idx(static_cast<std::size_t>(t));
      for (Eigen::Index r = 0; r < t; ++r) idx[static_cast<std::size_t>(r)] = s * t + r;
      const Tensor a = nn::gather_rows(xn, idx);
      const Tensor b = nn::gather_rows(yn, idx);
      const Tensor ga = nn::matmul(a, nn::transpose(a));
      const Tensor gb = nn::matmul(b, nn::transpose(b));
      const Tensor num = nn::sum(nn::mul(ga, gb));
      const Tensor den = nn::sqrt(nn::add_scalar(nn::mul(nn::sum(nn::square(ga)), nn::sum(nn::square(gb))), 1e-24));
      parts.push_back(nn::add_scalar(nn::scale(nn::div(num, den), -1.0), 1.0));
    }
  }
  return average(parts);
}

Tensor variance_preservation_loss(const std::vector<Tensor>& x, const std::vector<Tensor>& xhat) {
  check_pairs(x, xhat);
  std::vector<Tensor> parts;
  for (std::size_t l = 0; l < x.size(); ++l) {
    const Tensor vx = nn::col_mean(nn::square(nn::sub(x[l], nn::col_mean(x[l]))));
    const Tensor vy = nn::col_mean(nn::square(nn::sub(xhat[l], nn::col_mean(xhat[l]))));
    parts.push_back(nn::mean(nn::abs(nn::sub(vx, vy))));
  }
  return average(parts);
}

Tensor norm_preservation_loss(const std::vector<Tensor>& x, const std::vector<Tensor>& xhat) {
  check_pairs(x, xhat);
  std::vector<Tensor> parts;
  for (std::size_t l = 0; l < x.size(); ++l) {
    parts.push_back(nn::mean(nn::abs(nn::sub(nn::row_norm(x[l]), nn::row_norm(xhat[l])))));
  }
  return average(parts);
}

Tensor spherical_kl(const Tensor& kappa, int sphere_dim) {
  return nn::scale(nn::sum(nn::power_spherical_kl(kappa, sphere_dim)), 1.0 / static_cast<double>(kappa.rows()));
}

Tensor gaussian_kl(const Tensor& mu, const Tensor& log_var) {
  require(mu.rows() == log_var.rows() && mu.cols() == log_var.cols(), ErrorKind::ShapeMismatch,
          "gaussian_kl shapes differ");
  const Tensor inner = nn::sub(nn::add_scalar(log_var, 1.0), nn::add(nn::square(mu), nn::exp(log_var)));
  return nn::scale(nn::sum(inner), -0.5 / static_cast<double>(mu.rows()));
}

double gaussian_kl(const nn::GaussianParams& p) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < p.mu.size(); ++i) {
    acc += 1.0 + p.log_var[i] - p.mu[i] * p.mu[i] - std::exp(p.log_var[i]);
  }
  return -0.5 * acc;
}

Tensor camera_huber_loss(const Tensor& g, const Tensor& ghat, double eps) {
  require(g.rows() == ghat.rows() && g.cols() == ghat.cols(), ErrorKind::ShapeMismatch, "pose shapes differ");
  require(eps > 0.0, ErrorKind::DomainError, "huber eps must be > 0");
  const Tensor r = nn::sub(ghat, g);
  Mat v = r.value().unaryExpr([eps](double x) {
    const double a = std::abs(x);
    return a <= eps ? 0.5 * x * x : eps * (a - 0.5 * eps);
  });
  const Tensor elem = nn::make_result(std::move(v), {r}, [eps](nn::Node& self) {
    nn::Node& p = *self.parents[0];
    Mat d = p.value.unaryExpr([eps](double x) { return std::abs(x) <= eps ? x : (x > 0.0 ? eps : -eps); });
    p.accumulate(self.grad.cwiseProduct(d));
  });
  return nn::sum(elem);
}

Tensor spatial_gradient(const Tensor& maps, Eigen::Index height, Eigen::Index width, bool along_x) {
  require(maps.cols() == height * width, ErrorKind::ShapeMismatch, "map rows must hold height*width values");
  auto apply = [height, width, along_x](const Mat& in) {
    Mat out = Mat::Zero(in.rows(), in.cols());
    for (Eigen::Index r = 0; r < in.rows(); ++r) {
      for (Eigen::Index i = 0; i < height; ++i) {
        for (Eigen::Index j = 0; j < width; ++j) {
          const Eigen::Index k = i * width + j;
          if (along_x && j + 1 < width) out(r, k) = in(r, k + 1) - in(r, k);
          if (!along_x && i + 1 < height) out(r, k) = in(r, k + width) - in(r, k);
        }
      }
    }
    return out;
  };
  auto adjoint = [height, width, along_x](const Mat& g) {
    Mat out = Mat::Zero(g.rows(), g.cols());
    for (Eigen::Index r = 0; r < g.rows(); ++r) {
      for (Eigen::Index i = 0; i < height; ++i) {
        for (Eigen::Index j = 0; j < width; ++j) {
          const Eigen::Index k = i * width + j;
          if (along_x && j + 1 < width) {
            out(r, k + 1) += g(r, k);
            out(r, k) -= g(r, k);
          }
          if (!along_x && i + 1 < height) {
            out(r, k + width) += g(r, k);
            out(r, k) -= g(r, k);
          }
        }
      }
    }
    return out;
  };
  return nn::make_result(apply(maps.value()), {maps}, [adjoint](nn::Node& self) {
    self.parents[0]->accumulate(adjoint(self.grad));
  });
}

Tensor aleatoric_depth_loss(const Tensor& depth, const Tensor& depth_hat, const Tensor& sigma, double alpha_reg,
                            Eigen::Index height, Eigen::Index width) {
  require(depth.rows() == depth_hat.rows() && depth.cols() == depth_hat.cols() && sigma.rows() == depth.rows() &&
              sigma.cols() == depth.cols(),
          ErrorKind::ShapeMismatch, "depth, prediction and uncertainty maps must share a shape");
  require((sigma.value().array() > 0.0).all(), ErrorKind::NonPositiveUncertainty,
          "uncertainty map must be strictly positive");
  const Tensor value_term = nn::sum(nn::abs(nn::mul(sigma, nn::sub(depth_hat, depth))));
  const Tensor gx = nn::sub(spatial_gradient(depth_hat, height, width, true), spatial_gradient(depth, height, width, true));
  const Tensor gy =
      nn::sub(spatial_gradient(depth_hat, height, width, false), spatial_gradient(depth, height, width, false));
  const Tensor grad_term = nn::add(nn::sum(nn::abs(nn::mul(sigma, gx))), nn::sum(nn::abs(nn::mul(sigma, gy))));
  const Tensor reg = nn::scale(nn::sum(nn::log(sigma)), -alpha_reg);
  return nn::add(nn::add(value_term, grad_term), reg);
}

LossReport total_loss(const std::vector<std::pair<std::string, Tensor>>& terms,
                      const std::map<std::string, double>& weights) {
  LossReport rep;
  Tensor acc;
  double total = 0.0;
  for (const auto& [name, t] : terms) {
    const auto it = weights.find(name);
    const double w = it == weights.end() ? 0.0 : it->second;
    rep.terms[name] = t.item();
    rep.weights[name] = w;
    total += w * t.item();
    const Tensor wt = nn::scale(t, w);
    acc = acc.defined() ? nn::add(acc, wt) : wt;
  }
  rep.total = total;
  rep.total_tensor = acc.defined() ? acc : Tensor::scalar(0.0);
  return rep;
}

std::map<std::string, double> weight_table(const LossWeights& w) {
  return {{"mse", w.w_mse},   {"cos", w.w_sim}, {"gram", w.w_gram},     {"var", w.w_var},
          {"norm", w.w_norm}, {"kl", w.w_kl},   {"camera", w.w_camera}, {"depth", w.w_depth}};
}

}  // namespace s2vae::loss
