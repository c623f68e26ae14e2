#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "s2vae/layers.hpp"
#include "s2vae/product.hpp"

namespace s2vae::nn {

enum class BottleneckKind { ProductSpherical, Gaussian, SingleSphere };

std::string to_string(BottleneckKind kind);
BottleneckKind bottleneck_from_string(const std::string& name);

/// Architecture of the VAE. The latent is n_spheres x sphere_dim per token;
/// the Gaussian arm uses the same total width and SingleSphere collapses it
/// into one sphere of dimension n_spheres * sphere_dim.
struct ModelConfig {
  std::vector<int> layer_dims{128, 128};
  int tokens = 32;
  int n_layers = 4;
  int n_heads = 4;
  int hidden = 128;
  int n_spheres = 16;
  int sphere_dim = 8;
  double kappa_init = 30.0;
  int n_register_tokens = 0;
  bool learned_positions = false;
  bool input_layer_norm = true;
  double ln_eps = 1e-5;
  BottleneckKind bottleneck = BottleneckKind::ProductSpherical;

  int input_dim() const;
  int latent_dim() const { return n_spheres * sphere_dim; }
  product::ProductSphereSpec latent_spec() const;
  /// Tokens per scene that reach the bottleneck.
  int bottleneck_tokens() const { return n_register_tokens > 0 ? n_register_tokens : tokens; }
  bool spherical() const { return bottleneck != BottleneckKind::Gaussian; }
  void validate() const;
};

/// Posterior parameters for every bottleneck token of a batch, scene-major.
struct Posterior {
  BottleneckKind kind = BottleneckKind::ProductSpherical;
  Tensor mu;       // R x D; unit chunks for spherical kinds
  Tensor kappa;    // R x N (spherical)
  Tensor log_var;  // R x D (Gaussian), clamped to [-12, 12]
  Eigen::Index scenes = 0;
  Eigen::Index tokens_per_scene = 0;

  /// Per-sphere Power Spherical parameters of bottleneck token `row`.
  product::ProductParams product_params(Eigen::Index row, const product::ProductSphereSpec& spec) const;
};

class S2Vae {
 public:
  S2Vae(ModelConfig cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }

  /// `layers[l]` is (scenes * tokens) x layer_dims[l].
  Posterior encode(const std::vector<Tensor>& layers, Eigen::Index scenes) const;
  /// Reparameterized draw, R x D.
  Tensor sample(const Posterior& post, Rng& rng) const;
  /// Posterior mode: mu for both families.
  Tensor mode(const Posterior& post) const { return post.mu; }
  /// Reconstructed per-layer features, (scenes * tokens) x layer_dims[l].
  std::vector<Tensor> decode(const Tensor& z, Eigen::Index scenes) const;

 private:
  Tensor tile_rows(const Tensor& per_scene, Eigen::Index scenes) const;

  ModelConfig cfg_;
  ParamStore store_;
  GatedProjection in_proj_;
  Tensor enc_pos_;
  Tensor enc_registers_;
  std::vector<AttentionBlock> enc_blocks_;
  LayerNormAffine enc_norm_;
  Linear mu_head_;
  Linear kappa_head_;
  Linear logvar_head_;
  double kappa_offset_ = 0.0;

  Linear unproj_;
  Tensor dec_pos_;
  Tensor dec_registers_;
  std::vector<AttentionBlock> dec_blocks_;
  LayerNormAffine dec_norm_;
  Linear out_proj_;
};

/// Diagonal Gaussian posterior of one latent; log_var is kept in [-12, 12].
struct GaussianParams {
  Vec mu;
  Vec log_var;

  GaussianParams(Vec mu, Vec log_var);
};

/// z = mu + exp(log_var / 2) * eps, eps ~ N(0, I).
Vec gaussian_rsample(const GaussianParams& p, Rng& rng);

/// Packs a batch of per-layer feature matrices into constant tensors.
std::vector<Tensor> as_constants(const std::vector<Mat>& layers);

}  // namespace s2vae::nn
