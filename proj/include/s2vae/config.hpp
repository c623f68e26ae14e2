#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "s2vae/losses.hpp"
#include "s2vae/model.hpp"
#include "s2vae/synthetic.hpp"
#include "s2vae/trainer.hpp"

namespace s2vae::config {

using json = nlohmann::ordered_json;

struct DatasetConfig {
  std::size_t n_scenes = 256;
  std::uint64_t seed = 0;  // 0: derived from the run seed
  std::string dir;  // load from here instead of generating, when set
};

/// Architecture knobs that are not derived from the data shape.
struct ArchConfig {
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
  std::string bottleneck = "product_spherical";
};

struct DiagnoseConfig {
  int n_latents = 1000;
  double active_threshold = 0.1;
  int mi_bins = 8;
  int probe_steps = 300;
  int probe_hidden = 128;
  double probe_lr = 3e-3;
  int slerp_steps = 8;
  int lipschitz_pairs = 64;
  double lipschitz_radius = 0.05;
  std::vector<double> lipschitz_kl_weights{1e-4, 1e-2, 1.0};
  int lipschitz_steps = 100;
  std::size_t scene_a = 0;
  std::size_t scene_b = 1;
};

struct RunConfig {
  data::DataConfig data;
  DatasetConfig dataset;
  ArchConfig model;
  loss::LossWeights loss;
  train::TrainConfig train;
  DiagnoseConfig diagnose;
  std::uint64_t seed = 0;
  std::string out_dir = "runs/default";

  /// Full model config; layer widths and token count come from `data`.
  nn::ModelConfig model_config() const;
  std::uint64_t dataset_seed() const;
  void validate() const;
};

json to_json(const data::DataConfig& c);
data::DataConfig data_config_from_json(const json& j);
json to_json(const nn::ModelConfig& c);
nn::ModelConfig model_config_from_json(const json& j);
json to_json(const RunConfig& c);

/// Strict parse: every key must exist in the default document (ConfigError
/// names the first unknown key); missing keys keep their defaults.
RunConfig from_json(const json& j);

/// Applies "a.b.c=value". The value is parsed as JSON when possible, else
/// taken as a string.
void apply_override(json& doc, const std::string& assignment);

/// Defaults <- file (if non-empty) <- overrides, validated.
RunConfig resolve(const std::string& path, const std::vector<std::string>& overrides);

/// Small, fast settings used by tests and the quick-start.
RunConfig smoke_config();
/// ~1.8M parameters, 16:1 compression; the setting of the ablation study.
RunConfig desk_config();

std::string dump(const RunConfig& c);

}  // namespace s2vae::config
