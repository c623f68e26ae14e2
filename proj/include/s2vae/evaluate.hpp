#pragma once

#include <cstdint>
#include <vector>

#include "s2vae/losses.hpp"
#include "s2vae/model.hpp"
#include "s2vae/synthetic.hpp"

namespace s2vae::train {

using nn::Mat;
using nn::Tensor;

struct DepthMetrics {
  double abs_rel = 0.0;   // mean |Dh - D| / D
  double delta1 = 0.0;    // fraction with max(Dh/D, D/Dh) < 1.25
  double sq_rel = 0.0;    // mean (Dh - D)^2 / D
  double rmse_log = 0.0;  // sqrt mean (log Dh - log D)^2
};

/// Both maps must be strictly positive and share a shape.
DepthMetrics depth_metrics(const Mat& pred, const Mat& truth);
/// Mean translation error after removing each trajectory's mean offset.
/// Poses are rows whose first three entries are the translation.
double pose_ate(const Mat& pred, const Mat& truth);
/// Mean over (layer, token) of cos(x, xhat).
double feature_cosine(const std::vector<Mat>& x, const std::vector<Mat>& xhat);

/// Per-token depth head (each token predicts its own patch of log-depth and
/// uncertainty) and a pooled pose head, both two-layer MLPs over
/// layer-normalized features. Used on reconstructed features.
class TaskHeads {
 public:
  TaskHeads(const data::DataConfig& cfg, int hidden, std::uint64_t seed);

  struct Output {
    Tensor depth;  // scenes x P^2, > 0
    Tensor sigma;  // scenes x P^2, > 0
    Tensor pose;   // scenes x 7
  };

  Output operator()(const std::vector<Tensor>& features, Eigen::Index scenes) const;
  /// Depth term (aleatoric loss per pixel) and camera term (Huber per scene).
  std::pair<Tensor, Tensor> losses(const Output& out, const data::Batch& batch, const loss::LossWeights& w) const;

  nn::ParamStore& params() { return store_; }
  const nn::ParamStore& params() const { return store_; }

 private:
  data::DataConfig cfg_;
  nn::ParamStore store_;
  nn::Mlp2 depth_;
  nn::Mlp2 pose_;
  std::vector<Eigen::Index> patch_to_map_;  // column gather from token-major patches to the map
};

/// Posterior-mode reconstruction of a batch, no sampling.
struct Reconstruction {
  std::vector<Mat> layers;
  Mat mu;     // bottleneck tokens x D
  Mat kappa;  // bottleneck tokens x N (spherical kinds)
  Mat log_var;
};

Reconstruction reconstruct(const nn::S2Vae& model, const data::Batch& batch);

struct MetricRecord {
  DepthMetrics depth;
  double ate = 0.0;
  double feature_cosine = 0.0;
  double recon_loss = 0.0;  // mse + w_sim * cosine distance
  double kl = 0.0;          // mean per bottleneck token
  std::size_t scenes = 0;
};

/// Metrics of the posterior-mode reconstruction over all scenes of `split`.
MetricRecord evaluate(const nn::S2Vae& model, const TaskHeads& heads, const data::Dataset& ds, data::Split split,
                      const loss::LossWeights& w, int batch_size = 32);

/// Consecutive chunks of `idx` of at most `size` entries.
std::vector<std::vector<std::size_t>> chunk(const std::vector<std::size_t>& idx, std::size_t size);

}  // namespace s2vae::train
