#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "s2vae/trainer.hpp"

namespace s2vae::diag {

using nn::Mat;

struct DimensionReport {
  Vec variance;  // per latent dimension, unbiased
  int active_count = 0;
  double threshold = 0.1;
  double min_variance = 0.0;
  double max_variance = 0.0;
};

/// Rows of `latents` are samples. Needs at least two rows.
DimensionReport active_dimensions(const Mat& latents, double threshold = 0.1);

/// std(norms) / mean(norms) with the population standard deviation.
double norm_cv(const Mat& tokens);
/// One coefficient of variation per feature layer.
std::vector<double> norm_cv_profile(const data::FeatureBatch& features);

/// sqrt(d) * eps / (2 sigma_min): how far layer-norm outputs of tokens whose
/// variance is at least sigma_min sit from the radius sqrt(d).
double shell_thickness_bound(int d, double eps, double sigma_min);

struct ShellCheck {
  double bound = 0.0;
  double fraction_within = 0.0;  // of tokens with | |y| - sqrt(d) | <= factor * bound
  double max_deviation = 0.0;
  std::size_t tokens = 0;
};

/// Layer-normalizes every row of `tokens` and measures the norm deviation.
/// Rows with variance below sigma_min are skipped.
ShellCheck shell_check(const Mat& tokens, double eps, double sigma_min, double factor = 2.0);

/// max over pairs of |f(a) - f(b)| / |a - b|; pairs with a == b are skipped.
double lipschitz_probe(const std::function<Vec(const Vec&)>& decoder, const std::vector<std::pair<Vec, Vec>>& pairs);

/// Average-rank Spearman correlation. n >= 3, neither input constant.
double spearman(const std::vector<double>& a, const std::vector<double>& b);
/// Plug-in MI in nats over equal-frequency bins. n >= 10 * bins.
double mutual_information(const std::vector<double>& a, const std::vector<double>& b, int bins = 8);

/// Per-token bottleneck latents of a set of scenes.
struct LatentSet {
  Mat mu;       // posterior mode, rows = scenes * bottleneck tokens
  Mat sampled;  // one posterior draw per row
  Mat spread;   // Gaussian: exp(log_var / 2); spherical: 1 / kappa per sphere
  std::vector<std::size_t> scenes;
};

LatentSet collect_latents(const nn::S2Vae& model, const data::Dataset& ds, const std::vector<std::size_t>& scenes,
                          std::uint64_t seed, int batch_size = 32);

struct SpecializationReport {
  std::vector<std::string> tasks;
  Mat abs_rho;  // spheres x tasks
  Mat mi;       // spheres x tasks, nats
  Vec mean_abs_rho_per_task;
  Vec mean_mi_per_task;
  std::vector<std::vector<int>> specialists;  // per task: spheres with MI >= 2x the task average
  double min_max_abs_rho = 0.0;               // min over spheres of the best task |rho|
};

/// Correlates the first principal coordinate of every sub-sphere's mean
/// direction with per-token synthetic variables (scene factors, patch mean
/// log-depth, patch depth slope). Needs one bottleneck token per input token.
SpecializationReport sphere_specialization(const nn::S2Vae& model, const data::Dataset& ds,
                                           const std::vector<std::size_t>& scenes, int bins = 8);

/// Scene depth maps (S x P^2) regrouped into per-token patches (S*T x pr*pc).
Mat map_to_patches(const Mat& maps, const data::DataConfig& cfg);

struct ProbeConfig {
  int hidden = 128;
  int steps = 300;
  int batch_size = 16;
  double lr = 1e-2;
  std::uint64_t seed = 3;
};

struct ProbeResult {
  std::size_t params = 0;
  double abs_rel_train = 0.0;
  double abs_rel_test = 0.0;
  double final_loss = 0.0;
};

inline constexpr std::size_t kMaxProbeParams = 500000;

/// Two-layer per-token probe from latents to log-depth patches. Latent rows
/// are scene-major with cfg.tokens() rows per scene. Inputs are constants, so
/// nothing flows back into whatever produced them.
ProbeResult probe_latents(const Mat& train_latents, const Mat& train_depth, const Mat& test_latents,
                          const Mat& test_depth, const data::DataConfig& cfg, const ProbeConfig& pc);

struct SlerpSweep {
  int steps = 0;
  std::vector<Mat> depth;                 // steps + 1 maps, P x P
  std::vector<std::vector<Mat>> features; // per step, per layer
  std::vector<double> adjacent;           // |depth[k+1] - depth[k]|
  double smoothness_ratio = 0.0;          // max / median of adjacent
  double max_unit_error = 0.0;            // over every interpolated sub-sphere
  bool endpoints_exact = false;
};

/// Interpolates the posterior modes of two scenes per token and sub-sphere,
/// decoding each step on its own.
SlerpSweep slerp_sweep(const nn::S2Vae& model, const train::TaskHeads& heads, const data::Dataset& ds,
                       std::size_t scene_a, std::size_t scene_b, int steps);

/// Binary 8-bit PGM (P5), values mapped linearly from [lo, hi] to [0, 255].
void write_pgm(const std::string& path, const Mat& image, double lo, double hi);

/// Pairs (mode, posterior draw) per bottleneck token, decoded one scene at a time.
double model_lipschitz(const nn::S2Vae& model, const data::Dataset& ds, const std::vector<std::size_t>& scenes,
                       std::uint64_t seed);

struct LipschitzPoint {
  double w_kl = 0.0;
  double estimate = 0.0;
  double mean_spread = 0.0;
  double recon_loss = 0.0;
};

/// Trains the Gaussian variant of `base` once per KL weight and reports the
/// decoder Lipschitz estimate next to the mean posterior spread.
std::vector<LipschitzPoint> lipschitz_vs_kl(const nn::ModelConfig& base, const data::Dataset& ds,
                                            const train::TrainConfig& cfg, const loss::LossWeights& w,
                                            const std::vector<double>& kl_weights, std::uint64_t seed);

}  // namespace s2vae::diag
