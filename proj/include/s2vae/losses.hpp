#pragma once

#include <map>
#include <string>
#include <vector>

#include "s2vae/autodiff.hpp"
#include "s2vae/model.hpp"

namespace s2vae::loss {

using nn::Tensor;

struct LossWeights {
  double w_mse = 1.0;
  double w_sim = 0.25;
  double w_gram = 0.5;
  double w_var = 0.1;
  double w_norm = 0.1;
  double w_kl = 1e-4;
  double w_camera = 1.0;
  double w_depth = 1.0;
  double alpha_reg = 0.1;  // weight of the -log(Sigma) regularizer
  double huber_eps = 0.1;

  void validate() const;
};

/// Per-term values and their weighted total. `total_tensor` carries the graph.
struct LossReport {
  std::map<std::string, double> terms;
  std::map<std::string, double> weights;
  double total = 0.0;
  Tensor total_tensor;
};

/// Mean squared error over every element of every layer.
Tensor mse_loss(const std::vector<Tensor>& x, const std::vector<Tensor>& xhat);
/// Mean over (layer, token) of 1 - cos(x_t, xhat_t).
Tensor cosine_distance_loss(const std::vector<Tensor>& x, const std::vector<Tensor>& xhat);
/// MSE + w_sim * cosine distance.
Tensor feature_recon_loss(const std::vector<Tensor>& x, const std::vector<Tensor>& xhat, double w_sim);

/// 1 - cos(G, G_hat) with G = X X^T of row-normalized tokens, per scene and
/// layer, averaged.
Tensor gram_loss(const std::vector<Tensor>& x, const std::vector<Tensor>& xhat, Eigen::Index tokens_per_scene);
/// Mean L1 gap between per-dimension variances over the batch, per layer.
Tensor variance_preservation_loss(const std::vector<Tensor>& x, const std::vector<Tensor>& xhat);
/// Mean L1 gap between per-token norms.
Tensor norm_preservation_loss(const std::vector<Tensor>& x, const std::vector<Tensor>& xhat);

/// Mean over tokens of the summed per-sphere KL to the uniform prior.
Tensor spherical_kl(const Tensor& kappa, int sphere_dim);
/// Mean over tokens of -1/2 sum(1 + log_var - mu^2 - exp(log_var)).
Tensor gaussian_kl(const Tensor& mu, const Tensor& log_var);
/// Sum over elements of -1/2 (1 + log_var - mu^2 - exp(log_var)).
double gaussian_kl(const nn::GaussianParams& p);

/// Sum of elementwise Huber penalties (quadratic for |r| <= eps).
Tensor camera_huber_loss(const Tensor& g, const Tensor& ghat, double eps);

/// Forward differences along x or y of maps stored one per row, each
/// height x width row-major; the last column/row is zero.
Tensor spatial_gradient(const Tensor& maps, Eigen::Index height, Eigen::Index width, bool along_x);

/// Uncertainty-weighted depth loss summed over maps:
/// |S*(Dh - D)|_1 + |S*(grad Dh - grad D)|_1 - alpha_reg * sum log S.
/// Maps are rows of height*width values.
Tensor aleatoric_depth_loss(const Tensor& depth, const Tensor& depth_hat, const Tensor& sigma, double alpha_reg,
                            Eigen::Index height, Eigen::Index width);

/// Weighted sum of named terms. Terms missing from `weights` get weight 0.
LossReport total_loss(const std::vector<std::pair<std::string, Tensor>>& terms,
                      const std::map<std::string, double>& weights);

/// Weight table for the standard term names used by the trainer.
std::map<std::string, double> weight_table(const LossWeights& w);

}  // namespace s2vae::loss
