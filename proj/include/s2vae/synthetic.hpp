#pragma once

#include <cstdint>
#include <vector>

#include "s2vae/autodiff.hpp"

namespace s2vae::data {

using nn::Mat;

/// Shape and statistics of the generated ViT-like features.
struct DataConfig {
  std::vector<int> layer_dims{128, 128};
  /// Mean token norm of layer l is layer_radius_scale[l] * sqrt(layer_dims[l]).
  std::vector<double> layer_radius_scale{1.0, 1.5};
  int token_rows = 4;
  int token_cols = 8;
  int depth_size = 16;
  int n_factors = 6;
  double cv_target = 0.15;
  double anisotropy_decay = 0.5;
  double feature_noise = 0.05;
  double depth_noise = 0.0;
  int expansion_width = 64;
  std::uint64_t generator_seed = 1234;

  int tokens() const { return token_rows * token_cols; }
  int patch_rows() const { return depth_size / token_rows; }
  int patch_cols() const { return depth_size / token_cols; }
  void validate() const;
};

/// Multi-layer token features of one scene (tokens x d_l per layer).
struct FeatureBatch {
  std::vector<Mat> layers;
  std::vector<double> layer_radii;
  Vec factors;
};

struct SyntheticScene {
  std::uint64_t seed = 0;
  Vec factors;
  FeatureBatch features;
  Mat depth;                         // depth_size x depth_size, > 0
  Eigen::Matrix<double, 7, 1> pose;  // translation, unit quaternion (w, x, y, z)
};

/// Holds the frozen random factor-to-feature expansion for a config.
class SceneGenerator {
 public:
  explicit SceneGenerator(DataConfig cfg);

  const DataConfig& config() const { return cfg_; }
  SyntheticScene generate(std::uint64_t seed) const;

 private:
  struct Expansion {
    Mat in;         // width x descriptor
    Vec in_bias;    // width
    Mat out;        // d_l x width
    Vec spectrum;   // d_l
  };

  DataConfig cfg_;
  std::vector<Expansion> expansions_;
};

SyntheticScene generate_scene(std::uint64_t seed, const DataConfig& cfg);

enum class Split { Train, Val, Test };

/// Deterministic collection of scenes with hashed 80/10/10 splits.
class Dataset {
 public:
  Dataset(DataConfig cfg, std::uint64_t seed, std::vector<SyntheticScene> scenes);

  const DataConfig& config() const { return cfg_; }
  std::uint64_t seed() const { return seed_; }
  std::size_t size() const { return scenes_.size(); }
  const SyntheticScene& scene(std::size_t i) const { return scenes_.at(i); }
  Split split_of(std::size_t i) const;
  std::vector<std::size_t> indices(Split s) const;

 private:
  DataConfig cfg_;
  std::uint64_t seed_;
  std::vector<SyntheticScene> scenes_;
};

std::uint64_t scene_seed(std::uint64_t dataset_seed, std::size_t index);
Split split_for(std::uint64_t dataset_seed, std::size_t index);
Dataset make_dataset(std::size_t n, const DataConfig& cfg, std::uint64_t seed);

/// Scenes stacked scene-major for the network.
struct Batch {
  std::vector<Mat> layers;  // (scenes * tokens) x d_l
  Mat depth;                // scenes x (P * P)
  Mat pose;                 // scenes x 7
  Mat factors;              // scenes x K
  Eigen::Index scenes = 0;
};

Batch make_batch(const Dataset& ds, const std::vector<std::size_t>& indices);

}  // namespace s2vae::data
