#pragma once

#include <string>
#include <utility>
#include <vector>

#include "s2vae/autodiff.hpp"

namespace s2vae::nn {

/// Ordered, named parameter registry. Order is creation order and defines
/// the checkpoint layout.
class ParamStore {
 public:
  Tensor add(const std::string& name, Mat init);
  Tensor get(const std::string& name) const;
  bool contains(const std::string& name) const;

  const std::vector<std::pair<std::string, Tensor>>& entries() const { return entries_; }
  std::size_t scalar_count() const;
  void zero_grad() const;

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)).
Mat fan_in_uniform(Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in, Rng& rng);

struct Linear {
  Tensor w;  // in x out
  Tensor b;  // 1 x out

  Linear() = default;
  Linear(ParamStore& store, const std::string& name, Eigen::Index in, Eigen::Index out, Rng& rng);
  Tensor operator()(const Tensor& x) const { return linear(x, w, b); }
};

struct LayerNormAffine {
  Tensor gain;
  Tensor bias;
  double eps = 1e-5;

  LayerNormAffine() = default;
  LayerNormAffine(ParamStore& store, const std::string& name, Eigen::Index width, double eps);
  Tensor operator()(const Tensor& x) const;
};

/// h = sigmoid(W_g x + b_g) * (W_h x + b_h).
struct GatedProjection {
  Linear gate;
  Linear value;

  GatedProjection() = default;
  GatedProjection(ParamStore& store, const std::string& name, Eigen::Index in, Eigen::Index out, Rng& rng);
  Tensor operator()(const Tensor& x) const;
};

/// Pre-norm transformer block: x + MHSA(LN(x)), then x + FFN(LN(x)), FFN
/// ratio 4 with GELU.
struct AttentionBlock {
  LayerNormAffine ln1;
  Linear qkv;
  Linear proj;
  LayerNormAffine ln2;
  Linear fc1;
  Linear fc2;
  int heads = 1;

  AttentionBlock() = default;
  AttentionBlock(ParamStore& store, const std::string& name, Eigen::Index hidden, int heads, double eps, Rng& rng);
  /// `group` is the number of tokens attending to each other.
  Tensor operator()(const Tensor& x, Eigen::Index group) const;
};

/// Two-layer per-token MLP.
struct Mlp2 {
  Linear fc1;
  Linear fc2;

  Mlp2() = default;
  Mlp2(ParamStore& store, const std::string& name, Eigen::Index in, Eigen::Index hidden, Eigen::Index out, Rng& rng);
  Tensor operator()(const Tensor& x) const { return fc2(gelu(fc1(x))); }
};

}  // namespace s2vae::nn
