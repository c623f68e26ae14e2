#include "s2vae/optimizer.hpp"

#include <cmath>
#include <numbers>

#include "s2vae/error.hpp"

namespace s2vae::train {

double Schedule::lr(int step) const {
  if (step < warmup_steps) return peak_lr * static_cast<double>(step) / warmup_steps;
  if (step >= total_steps) return 0.0;
  const double span = std::max(1, total_steps - warmup_steps);
  const double progress = static_cast<double>(step - warmup_steps) / span;
  return 0.5 * peak_lr * (1.0 + std::cos(std::numbers::pi * progress));
}

OptimizerState make_optimizer_state(const std::vector<std::pair<std::string, Tensor>>& params) {
  OptimizerState s;
  for (const auto& [name, p] : params) {
    s.m.push_back(Mat::Zero(p.rows(), p.cols()));
    s.v.push_back(Mat::Zero(p.rows(), p.cols()));
  }
  return s;
}

bool decays(const Mat& value) { return value.rows() > 1 && value.cols() > 1; }

double optimizer_step(OptimizerState& state, const std::vector<std::pair<std::string, Tensor>>& params,
                      const std::vector<Mat>& grads, const AdamWConfig& cfg, const Schedule& schedule) {
  require(grads.size() == params.size() && state.m.size() == params.size(), ErrorKind::ShapeMismatch,
          "optimizer: parameter, gradient and state lists differ in length");
  for (std::size_t i = 0; i < grads.size(); ++i) {
    require(grads[i].rows() == params[i].second.rows() && grads[i].cols() == params[i].second.cols(),
            ErrorKind::ShapeMismatch, "optimizer: gradient shape of " + params[i].first);
    require(grads[i].allFinite(), ErrorKind::NonFiniteGradient, "non-finite gradient in " + params[i].first);
  }
  const double lr = schedule.lr(state.step);
  const int t = state.step + 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor p = params[i].second;
    Mat& value = p.mutable_value();
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grads[i];
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grads[i].cwiseAbs2();
    if (cfg.weight_decay > 0.0 && decays(value)) value *= (1.0 - lr * cfg.weight_decay);
    value.array() -= lr * (state.m[i].array() / bc1) / ((state.v[i].array() / bc2).sqrt() + cfg.eps);
  }
  state.step = t;
  return lr;
}

double global_norm(const std::vector<Mat>& grads) {
  double acc = 0.0;
  for (const auto& g : grads) acc += g.squaredNorm();
  return std::sqrt(acc);
}

double clip_global_norm(std::vector<Mat>& grads, double max_norm) {
  const double n = global_norm(grads);
  if (max_norm > 0.0 && n > max_norm) {
    const double s = max_norm / n;
    for (auto& g : grads) g *= s;
  }
  return n;
}

}  // namespace s2vae::train
