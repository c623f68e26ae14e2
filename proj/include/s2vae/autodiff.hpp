#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "s2vae/product.hpp"
#include "s2vae/rng.hpp"

namespace s2vae::nn {

/// Token-major 2-D array: rows are tokens, columns are features.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Node {
  Mat value;
  Mat grad;  // empty until something accumulates into it
  bool requires_grad = false;
  bool retain_grad = false;  // keep grad after backward() on an op output
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  void accumulate(const Mat& g);
};

/// Handle to a node in the reverse-mode graph. Copies share the node.
class Tensor {
 public:
  Tensor() = default;

  static Tensor constant(Mat value);
  static Tensor parameter(Mat value);
  static Tensor scalar(double v);

  const Mat& value() const { return node_->value; }
  Mat& mutable_value() { return node_->value; }
  /// Accumulated gradient; zeros of the value's shape if nothing flowed here.
  Mat grad() const;
  double item() const;

  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool defined() const { return static_cast<bool>(node_); }

  /// Reverse sweep from this (1x1) tensor.
  void backward() const;
  void zero_grad() const { node_->grad.resize(0, 0); }
  /// Keeps this op output's gradient after backward() for inspection.
  void retain_grad() const { node_->retain_grad = true; }

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  friend Tensor make_result(Mat value, std::vector<Tensor> inputs, std::function<void(Node&)> backward);
  std::shared_ptr<Node> node_;
};

/// Builds an op output; the node tracks gradients iff any input does.
Tensor make_result(Mat value, std::vector<Tensor> inputs, std::function<void(Node&)> backward);

// Elementwise binary ops broadcast operands of shape (1|R) x (1|C).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
/// x W + b with W stored (in x out) and b a 1 x out row.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor gelu(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor square(const Tensor& a);
Tensor abs(const Tensor& a);
Tensor clamp(const Tensor& a, double lo, double hi);
Tensor detach(const Tensor& a);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
/// n x 1 column of row sums.
Tensor row_sum(const Tensor& a);
/// 1 x m row of column means.
Tensor col_mean(const Tensor& a);
/// n x 1 column of row L2 norms.
Tensor row_norm(const Tensor& a);

Tensor slice_cols(const Tensor& a, Eigen::Index start, Eigen::Index count);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor gather_rows(const Tensor& a, const std::vector<Eigen::Index>& index);
/// Same row-major data, new shape.
Tensor reshape(const Tensor& a, Eigen::Index rows, Eigen::Index cols);

/// Per-row standardization with eps inside the square root, no affine.
Tensor layer_norm(const Tensor& x, double eps);
/// Normalizes each contiguous chunk of `width` columns in every row.
Tensor normalize_chunks(const Tensor& x, Eigen::Index width);

/// Multi-head softmax attention over contiguous row groups of size `group`.
/// `qkv` holds [Q | K | V] along columns.
Tensor attention(const Tensor& qkv, Eigen::Index group, int heads);

/// Reparameterized Power Spherical draw per row and sub-sphere.
/// `mu` is R x (N d') with unit chunks, `kappa` is R x N. Gradients reach
/// both through the Householder map and the implicit Beta derivative.
Tensor power_spherical_sample(const Tensor& mu, const Tensor& kappa, const product::ProductSphereSpec& spec,
                              Rng& rng);
/// R x N matrix of KL(PowerSpherical(., kappa) || Uniform(S^{d'-1})).
Tensor power_spherical_kl(const Tensor& kappa, int sphere_dim);

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst;
};

/// Central-difference audit of d f / d params. For each parameter compares
/// the analytic and numeric gradient vectors (over at most `max_entries`
/// sampled entries) by ||g_a - g_n|| / ||g_n||.
GradCheckResult gradient_check(const std::function<Tensor()>& f, const std::vector<std::pair<std::string, Tensor>>& params,
                               double h = 1e-6, int max_entries = 64, std::uint64_t seed = 1);

}  // namespace s2vae::nn
