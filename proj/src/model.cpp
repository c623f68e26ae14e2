#include "s2vae/model.hpp"

#include <algorithm>
#include <cmath>

#include "s2vae/error.hpp"

namespace s2vae::nn {

std::string to_string(BottleneckKind kind) {
  switch (kind) {
    case BottleneckKind::ProductSpherical: return "product_spherical";
    case BottleneckKind::Gaussian: return "gaussian";
    case BottleneckKind::SingleSphere: return "single_sphere";
  }
  return "unknown";
}

BottleneckKind bottleneck_from_string(const std::string& name) {
  if (name == "product_spherical") return BottleneckKind::ProductSpherical;
  if (name == "gaussian") return BottleneckKind::Gaussian;
  if (name == "single_sphere") return BottleneckKind::SingleSphere;
  fail(ErrorKind::ConfigError, "unknown bottleneck kind '" + name + "'");
}

int ModelConfig::input_dim() const {
  int d = 0;
  for (int l : layer_dims) d += l;
  return d;
}

product::ProductSphereSpec ModelConfig::latent_spec() const {
  if (bottleneck == BottleneckKind::SingleSphere) return {1, latent_dim()};
  return {n_spheres, sphere_dim};
}

void ModelConfig::validate() const {
  require(!layer_dims.empty(), ErrorKind::ConfigError, "model needs at least one feature layer");
  for (int l : layer_dims) require(l >= 2, ErrorKind::ConfigError, "feature layers need width >= 2");
  require(tokens >= 1, ErrorKind::ConfigError, "tokens must be >= 1");
  require(n_layers >= 0, ErrorKind::ConfigError, "n_layers must be >= 0");
  require(hidden >= 2 && n_heads >= 1 && hidden % n_heads == 0, ErrorKind::ConfigError,
          "hidden must be divisible by n_heads");
  require(n_spheres >= 1 && sphere_dim >= 2, ErrorKind::ConfigError, "latent spec needs N >= 1 and d' >= 2");
  require(kappa_init > 0.0, ErrorKind::ConfigError, "kappa_init must be > 0");
  require(n_register_tokens >= 0, ErrorKind::ConfigError, "n_register_tokens must be >= 0");
  require(ln_eps >= 0.0, ErrorKind::ConfigError, "ln_eps must be >= 0");
}

product::ProductParams Posterior::product_params(Eigen::Index row, const product::ProductSphereSpec& spec) const {
  require(kind != BottleneckKind::Gaussian, ErrorKind::ConfigMismatch, "Gaussian posterior has no sphere params");
  product::ProductParams out;
  for (int i = 0; i < spec.n_spheres; ++i) {
    const Vec m = mu.value().row(row).segment(i * spec.sphere_dim, spec.sphere_dim).transpose();
    out.per_sphere.emplace_back(sphere::SpherePoint(m), kappa.value()(row, i));
  }
  return out;
}

S2Vae::S2Vae(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  Rng rng(seed);
  const Eigen::Index h = cfg_.hidden;
  const auto spec = cfg_.latent_spec();

  in_proj_ = GatedProjection(store_, "enc.in_proj", cfg_.input_dim(), h, rng);
  if (cfg_.learned_positions) {
    Mat pos(cfg_.tokens, h);
    for (Eigen::Index i = 0; i < pos.size(); ++i) pos.data()[i] = 0.02 * rng.normal();
    enc_pos_ = store_.add("enc.pos", std::move(pos));
  }
  if (cfg_.n_register_tokens > 0) {
    Mat reg(cfg_.n_register_tokens, h);
    for (Eigen::Index i = 0; i < reg.size(); ++i) reg.data()[i] = 0.5 * rng.normal();
    enc_registers_ = store_.add("enc.registers", std::move(reg));
  }
  for (int i = 0; i < cfg_.n_layers; ++i) {
    enc_blocks_.emplace_back(store_, "enc.block" + std::to_string(i), h, cfg_.n_heads, cfg_.ln_eps, rng);
  }
  enc_norm_ = LayerNormAffine(store_, "enc.norm", h, cfg_.ln_eps);
  mu_head_ = Linear(store_, "enc.mu_head", h, cfg_.latent_dim(), rng);
  if (cfg_.spherical()) {
    kappa_head_ = Linear(store_, "enc.kappa_head", h, spec.n_spheres, rng);
    // softplus(offset) == kappa_init
    kappa_offset_ = cfg_.kappa_init > 30.0 ? cfg_.kappa_init : std::log(std::expm1(cfg_.kappa_init));
  } else {
    logvar_head_ = Linear(store_, "enc.logvar_head", h, cfg_.latent_dim(), rng);
  }

  unproj_ = Linear(store_, "dec.unproj", cfg_.latent_dim(), h, rng);
  if (cfg_.learned_positions) {
    Mat pos(cfg_.bottleneck_tokens(), h);
    for (Eigen::Index i = 0; i < pos.size(); ++i) pos.data()[i] = 0.02 * rng.normal();
    dec_pos_ = store_.add("dec.pos", std::move(pos));
  }
  if (cfg_.n_register_tokens > 0) {
    Mat reg(cfg_.tokens, h);
    for (Eigen::Index i = 0; i < reg.size(); ++i) reg.data()[i] = 0.5 * rng.normal();
    dec_registers_ = store_.add("dec.registers", std::move(reg));
  }
  for (int i = 0; i < cfg_.n_layers; ++i) {
    dec_blocks_.emplace_back(store_, "dec.block" + std::to_string(i), h, cfg_.n_heads, cfg_.ln_eps, rng);
  }
  dec_norm_ = LayerNormAffine(store_, "dec.norm", h, cfg_.ln_eps);
  out_proj_ = Linear(store_, "dec.out_proj", h, cfg_.input_dim(), rng);
}

Tensor S2Vae::tile_rows(const Tensor& per_scene, Eigen::Index scenes) const {
  std::vector<Eigen::Index> idx;
  idx.reserve(static_cast<std::size_t>(scenes * per_scene.rows()));
  for (Eigen::Index s = 0; s < scenes; ++s) {
    for (Eigen::Index r = 0; r < per_scene.rows(); ++r) idx.push_back(r);
  }
  return gather_rows(per_scene, idx);
}

namespace {

// Rows of concat_rows({prefix, x}) ordered as [prefix; group_s] per scene.
std::vector<Eigen::Index> prepend_index(Eigen::Index prefix, Eigen::Index group, Eigen::Index scenes) {
  std::vector<Eigen::Index> idx;
  idx.reserve(static_cast<std::size_t>(scenes * (prefix + group)));
  for (Eigen::Index s = 0; s < scenes; ++s) {
    for (Eigen::Index r = 0; r < prefix; ++r) idx.push_back(r);
    for (Eigen::Index r = 0; r < group; ++r) idx.push_back(prefix + s * group + r);
  }
  return idx;
}

std::vector<Eigen::Index> leading_index(Eigen::Index keep, Eigen::Index group, Eigen::Index scenes) {
  std::vector<Eigen::Index> idx;
  idx.reserve(static_cast<std::size_t>(scenes * keep));
  for (Eigen::Index s = 0; s < scenes; ++s) {
    for (Eigen::Index r = 0; r < keep; ++r) idx.push_back(s * group + r);
  }
  return idx;
}

}  // namespace

Posterior S2Vae::encode(const std::vector<Tensor>& layers, Eigen::Index scenes) const {
  require(layers.size() == cfg_.layer_dims.size(), ErrorKind::ConfigMismatch,
          "expected " + std::to_string(cfg_.layer_dims.size()) + " feature layers, got " +
              std::to_string(layers.size()));
  const Eigen::Index rows = scenes * cfg_.tokens;
  std::vector<Tensor> normed;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    require(layers[l].cols() == cfg_.layer_dims[l] && layers[l].rows() == rows, ErrorKind::ConfigMismatch,
            "feature layer " + std::to_string(l) + " has shape " + std::to_string(layers[l].rows()) + "x" +
                std::to_string(layers[l].cols()));
    normed.push_back(cfg_.input_layer_norm ? layer_norm(layers[l], cfg_.ln_eps) : layers[l]);
  }
  Tensor h = in_proj_(normed.size() == 1 ? normed.front() : concat_cols(normed));
  if (cfg_.learned_positions) h = add(h, tile_rows(enc_pos_, scenes));
  Eigen::Index group = cfg_.tokens;
  const Eigen::Index m = cfg_.n_register_tokens;
  if (m > 0) {
    h = gather_rows(concat_rows({enc_registers_, h}), prepend_index(m, group, scenes));
    group += m;
  }
  for (const auto& block : enc_blocks_) h = block(h, group);
  h = enc_norm_(h);
  if (m > 0) h = gather_rows(h, leading_index(m, group, scenes));

  Posterior post;
  post.kind = cfg_.bottleneck;
  post.scenes = scenes;
  post.tokens_per_scene = cfg_.bottleneck_tokens();
  if (cfg_.spherical()) {
    const auto spec = cfg_.latent_spec();
    post.mu = normalize_chunks(mu_head_(h), spec.sphere_dim);
    post.kappa = softplus(add_scalar(kappa_head_(h), kappa_offset_));
  } else {
    post.mu = mu_head_(h);
    post.log_var = clamp(logvar_head_(h), -12.0, 12.0);
  }
  return post;
}

Tensor S2Vae::sample(const Posterior& post, Rng& rng) const {
  if (post.kind == BottleneckKind::Gaussian) {
    Mat eps(post.mu.rows(), post.mu.cols());
    for (Eigen::Index i = 0; i < eps.size(); ++i) eps.data()[i] = rng.normal();
    return add(post.mu, mul(exp(scale(post.log_var, 0.5)), Tensor::constant(std::move(eps))));
  }
  return power_spherical_sample(post.mu, post.kappa, cfg_.latent_spec(), rng);
}

std::vector<Tensor> S2Vae::decode(const Tensor& z, Eigen::Index scenes) const {
  const Eigen::Index group_in = cfg_.bottleneck_tokens();
  require(z.cols() == cfg_.latent_dim() && z.rows() == scenes * group_in, ErrorKind::ConfigMismatch,
          "latent batch has shape " + std::to_string(z.rows()) + "x" + std::to_string(z.cols()));
  Tensor h = unproj_(z);
  if (cfg_.learned_positions) h = add(h, tile_rows(dec_pos_, scenes));
  Eigen::Index group = group_in;
  const Eigen::Index t = cfg_.tokens;
  if (cfg_.n_register_tokens > 0) {
    h = gather_rows(concat_rows({dec_registers_, h}), prepend_index(t, group, scenes));
    group += t;
  }
  for (const auto& block : dec_blocks_) h = block(h, group);
  h = dec_norm_(h);
  if (cfg_.n_register_tokens > 0) h = gather_rows(h, leading_index(t, group, scenes));
  const Tensor out = out_proj_(h);
  std::vector<Tensor> layers;
  Eigen::Index off = 0;
  for (int w : cfg_.layer_dims) {
    layers.push_back(slice_cols(out, off, w));
    off += w;
  }
  return layers;
}

GaussianParams::GaussianParams(Vec mu_, Vec log_var_) : mu(std::move(mu_)), log_var(std::move(log_var_)) {
  require(mu.size() == log_var.size(), ErrorKind::DimensionMismatch, "Gaussian mu and log_var lengths differ");
  for (Eigen::Index i = 0; i < log_var.size(); ++i) {
    require(!std::isnan(log_var[i]), ErrorKind::DomainError, "log_var must not be NaN");
    log_var[i] = std::clamp(log_var[i], -12.0, 12.0);
  }
}

Vec gaussian_rsample(const GaussianParams& p, Rng& rng) {
  Vec z(p.mu.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = p.mu[i] + std::exp(0.5 * p.log_var[i]) * rng.normal();
  return z;
}

std::vector<Tensor> as_constants(const std::vector<Mat>& layers) {
  std::vector<Tensor> out;
  out.reserve(layers.size());
  for (const auto& m : layers) out.push_back(Tensor::constant(m));
  return out;
}

}  // namespace s2vae::nn
