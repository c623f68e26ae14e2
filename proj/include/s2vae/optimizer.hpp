#pragma once

#include <string>
#include <utility>
#include <vector>

#include "s2vae/autodiff.hpp"

namespace s2vae::train {

using nn::Mat;
using nn::Tensor;

/// Linear warmup from 0 to peak_lr over warmup_steps, then cosine decay to
/// 0 at total_steps.
struct Schedule {
  double peak_lr = 1e-4;
  int warmup_steps = 10;
  int total_steps = 200;

  double lr(int step) const;
};

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.05;
};

/// Moments and step count for a fixed list of parameters.
struct OptimizerState {
  std::vector<Mat> m;
  std::vector<Mat> v;
  int step = 0;
};

OptimizerState make_optimizer_state(const std::vector<std::pair<std::string, Tensor>>& params);

/// True for parameters that receive decoupled weight decay (matrices; not
/// biases, gains or other single-row vectors).
bool decays(const Mat& value);

/// One AdamW update with bias correction and decoupled decay, using the
/// schedule's rate at state.step; advances state.step. Throws
/// NonFiniteGradient if any gradient is NaN or infinite. Returns the rate used.
double optimizer_step(OptimizerState& state, const std::vector<std::pair<std::string, Tensor>>& params,
                      const std::vector<Mat>& grads, const AdamWConfig& cfg, const Schedule& schedule);

/// Global L2 norm of a gradient list.
double global_norm(const std::vector<Mat>& grads);
/// Rescales grads in place so the global norm is at most max_norm; returns
/// the norm before clipping.
double clip_global_norm(std::vector<Mat>& grads, double max_norm);

}  // namespace s2vae::train
