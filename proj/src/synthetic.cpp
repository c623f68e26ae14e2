#include "s2vae/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "s2vae/error.hpp"

namespace s2vae::data {

void DataConfig::validate() const {
  require(!layer_dims.empty(), ErrorKind::ConfigError, "data needs at least one layer");
  require(layer_radius_scale.size() == layer_dims.size(), ErrorKind::ConfigError,
          "layer_radius_scale must have one entry per layer");
  for (int d : layer_dims) require(d >= 2, ErrorKind::ConfigError, "layer width must be >= 2");
  for (double r : layer_radius_scale) require(r > 0.0, ErrorKind::ConfigError, "layer radii must be > 0");
  require(token_rows >= 1 && token_cols >= 1, ErrorKind::ConfigError, "token grid must be non-empty");
  require(depth_size >= 2 && depth_size % token_rows == 0 && depth_size % token_cols == 0, ErrorKind::ConfigError,
          "depth_size must be divisible by the token grid");
  require(n_factors >= 3, ErrorKind::ConfigError, "need at least 3 factors");
  require(cv_target > 0.0 && cv_target <= 0.15, ErrorKind::ConfigError, "cv_target must lie in (0, 0.15]");
  require(anisotropy_decay >= 0.0 && feature_noise >= 0.0 && depth_noise >= 0.0, ErrorKind::ConfigError,
          "noise and anisotropy settings must be >= 0");
  require(expansion_width >= 1, ErrorKind::ConfigError, "expansion_width must be >= 1");
}

namespace {

constexpr int kPositional = 4;
constexpr int kLocal = 2;

double factor(const Vec& f, int k) { return f[k % f.size()]; }

double log_depth_at(const Vec& f, double x, double y) {
  return 0.8 + 0.3 * factor(f, 0) + 0.25 * factor(f, 1) * x + 0.25 * factor(f, 2) * y +
         0.15 * std::sin(std::numbers::pi * (x * (1.0 + 0.3 * factor(f, 3)) + 0.5 * factor(f, 4))) +
         0.1 * std::cos(std::numbers::pi * y * (1.0 + 0.3 * factor(f, 5)));
}

}  // namespace

SceneGenerator::SceneGenerator(DataConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  Rng rng(cfg_.generator_seed);
  const int desc = cfg_.n_factors + kLocal + kPositional;
  const int w = cfg_.expansion_width;
  for (int d : cfg_.layer_dims) {
    Expansion e;
    e.in = Mat(w, desc);
    for (Eigen::Index i = 0; i < e.in.size(); ++i) e.in.data()[i] = rng.normal() / std::sqrt(static_cast<double>(desc));
    e.in_bias = Vec(w);
    for (int i = 0; i < w; ++i) e.in_bias[i] = 0.3 * rng.normal();
    e.out = Mat(d, w);
    for (Eigen::Index i = 0; i < e.out.size(); ++i) e.out.data()[i] = rng.normal() / std::sqrt(static_cast<double>(w));
    e.spectrum = Vec(d);
    for (int k = 0; k < d; ++k) e.spectrum[k] = std::pow(1.0 + k, -cfg_.anisotropy_decay);
    // Random coordinate order so the dominant directions are not axis 0..k.
    for (int k = d - 1; k > 0; --k) std::swap(e.spectrum[k], e.spectrum[static_cast<int>(rng.below(k + 1))]);
    e.spectrum *= std::sqrt(static_cast<double>(d)) / e.spectrum.norm();
    expansions_.push_back(std::move(e));
  }
}

SyntheticScene SceneGenerator::generate(std::uint64_t seed) const {
  Rng rng(seed);
  SyntheticScene sc;
  sc.seed = seed;
  const int k = cfg_.n_factors;
  sc.factors = Vec(k);
  for (int i = 0; i < k; ++i) sc.factors[i] = rng.normal();
  const Vec& f = sc.factors;

  const int p = cfg_.depth_size;
  sc.depth = Mat(p, p);
  Mat log_depth(p, p);
  for (int i = 0; i < p; ++i) {
    for (int j = 0; j < p; ++j) {
      const double x = (j + 0.5) / p * 2.0 - 1.0;
      const double y = (i + 0.5) / p * 2.0 - 1.0;
      log_depth(i, j) = log_depth_at(f, x, y);
      if (cfg_.depth_noise > 0.0) log_depth(i, j) += cfg_.depth_noise * rng.normal();
      sc.depth(i, j) = std::exp(log_depth(i, j));
    }
  }

  sc.pose.head<3>() << 0.5 * factor(f, 3), 0.5 * factor(f, 4), 0.5 * factor(f, 5);
  Eigen::Vector4d q(1.0, 0.2 * factor(f, 0), 0.2 * factor(f, 1), 0.2 * factor(f, 2));
  sc.pose.tail<4>() = q.normalized();

  const int tr = cfg_.token_rows;
  const int tc = cfg_.token_cols;
  const int pr = cfg_.patch_rows();
  const int pc = cfg_.patch_cols();
  const int desc = k + kLocal + kPositional;
  Mat descriptors(tr * tc, desc);
  for (int r = 0; r < tr; ++r) {
    for (int c = 0; c < tc; ++c) {
      const auto patch = log_depth.block(r * pr, c * pc, pr, pc);
      const double mean = patch.mean();
      const double slope = patch.col(pc - 1).mean() - patch.col(0).mean();
      auto row = descriptors.row(r * tc + c);
      row.head(k) = f.transpose();
      row[k] = mean;
      row[k + 1] = slope;
      const double u = (r + 0.5) / tr;
      const double v = (c + 0.5) / tc;
      row[k + 2] = std::sin(std::numbers::pi * u);
      row[k + 3] = std::cos(std::numbers::pi * u);
      row[k + 4] = std::sin(std::numbers::pi * v);
      row[k + 5] = std::cos(std::numbers::pi * v);
    }
  }

  const double jitter_sd = cfg_.cv_target / 3.0;
  for (std::size_t l = 0; l < cfg_.layer_dims.size(); ++l) {
    const auto& e = expansions_[l];
    const int d = cfg_.layer_dims[l];
    const double radius = cfg_.layer_radius_scale[l] * std::sqrt(static_cast<double>(d));
    Mat feats(tr * tc, d);
    for (int t = 0; t < tr * tc; ++t) {
      const Vec hidden = (e.in * descriptors.row(t).transpose() + e.in_bias).array().tanh();
      Vec x = e.out * hidden;
      for (int i = 0; i < d; ++i) x[i] += cfg_.feature_noise * rng.normal();
      x = x.cwiseProduct(e.spectrum);
      double jitter = rng.normal() * jitter_sd;
      jitter = std::clamp(jitter, -2.5 * jitter_sd, 2.5 * jitter_sd);
      feats.row(t) = (x * (radius * (1.0 + jitter) / x.norm())).transpose();
    }
    sc.features.layers.push_back(std::move(feats));
    sc.features.layer_radii.push_back(radius);
  }
  sc.features.factors = f;
  return sc;
}

SyntheticScene generate_scene(std::uint64_t seed, const DataConfig& cfg) { return SceneGenerator(cfg).generate(seed); }

std::uint64_t scene_seed(std::uint64_t dataset_seed, std::size_t index) { return Rng::mix(dataset_seed, index); }

Split split_for(std::uint64_t dataset_seed, std::size_t index) {
  const auto bucket = Rng::mix(dataset_seed ^ 0x5EEDC0FFEEULL, index) % 10;
  if (bucket < 8) return Split::Train;
  return bucket == 8 ? Split::Val : Split::Test;
}

Dataset::Dataset(DataConfig cfg, std::uint64_t seed, std::vector<SyntheticScene> scenes)
    : cfg_(std::move(cfg)), seed_(seed), scenes_(std::move(scenes)) {}

Split Dataset::split_of(std::size_t i) const { return split_for(seed_, i); }

std::vector<std::size_t> Dataset::indices(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < scenes_.size(); ++i) {
    if (split_of(i) == s) out.push_back(i);
  }
  return out;
}

Dataset make_dataset(std::size_t n, const DataConfig& cfg, std::uint64_t seed) {
  require(n >= 1, ErrorKind::ConfigError, "dataset needs n >= 1");
  const SceneGenerator gen(cfg);
  std::vector<SyntheticScene> scenes;
  scenes.reserve(n);
  for (std::size_t i = 0; i < n; ++i) scenes.push_back(gen.generate(scene_seed(seed, i)));
  return Dataset(cfg, seed, std::move(scenes));
}

Batch make_batch(const Dataset& ds, const std::vector<std::size_t>& indices) {
  require(!indices.empty(), ErrorKind::ConfigError, "empty batch");
  const auto& cfg = ds.config();
  const Eigen::Index b = static_cast<Eigen::Index>(indices.size());
  const Eigen::Index t = cfg.tokens();
  const int p = cfg.depth_size;
  Batch out;
  out.scenes = b;
  for (int d : cfg.layer_dims) out.layers.emplace_back(b * t, d);
  out.depth = Mat(b, p * p);
  out.pose = Mat(b, 7);
  out.factors = Mat(b, cfg.n_factors);
  for (Eigen::Index s = 0; s < b; ++s) {
    const auto& sc = ds.scene(indices[static_cast<std::size_t>(s)]);
    for (std::size_t l = 0; l < out.layers.size(); ++l) out.layers[l].middleRows(s * t, t) = sc.features.layers[l];
    out.depth.row(s) = Eigen::Map<const Mat>(sc.depth.data(), 1, p * p);
    out.pose.row(s) = sc.pose.transpose();
    out.factors.row(s) = sc.factors.transpose();
  }
  return out;
}

}  // namespace s2vae::data
