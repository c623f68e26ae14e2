#include "s2vae/evaluate.hpp"

#include <algorithm>
#include <cmath>

#include "s2vae/error.hpp"
#include "s2vae/power_spherical.hpp"

namespace s2vae::train {

DepthMetrics depth_metrics(const Mat& pred, const Mat& truth) {
  require(pred.rows() == truth.rows() && pred.cols() == truth.cols() && pred.size() > 0, ErrorKind::ShapeMismatch,
          "depth maps must share a non-empty shape");
  require((truth.array() > 0.0).all() && (pred.array() > 0.0).all() && pred.allFinite(), ErrorKind::DomainError,
          "depth values must be positive and finite");
  DepthMetrics m;
  const auto p = pred.array();
  const auto t = truth.array();
  const double n = static_cast<double>(pred.size());
  m.abs_rel = ((p - t).abs() / t).sum() / n;
  m.sq_rel = ((p - t).square() / t).sum() / n;
  m.rmse_log = std::sqrt((p.log() - t.log()).square().sum() / n);
  m.delta1 = ((p / t).max(t / p) < 1.25).cast<double>().sum() / n;
  return m;
}

double pose_ate(const Mat& pred, const Mat& truth) {
  require(pred.rows() == truth.rows() && pred.cols() == truth.cols() && pred.cols() >= 3 && pred.rows() > 0,
          ErrorKind::ShapeMismatch, "pose arrays must share a shape with >= 3 columns");
  const Mat a = pred.leftCols(3).rowwise() - pred.leftCols(3).colwise().mean();
  const Mat b = truth.leftCols(3).rowwise() - truth.leftCols(3).colwise().mean();
  return (a - b).rowwise().norm().mean();
}

double feature_cosine(const std::vector<Mat>& x, const std::vector<Mat>& xhat) {
  require(!x.empty() && x.size() == xhat.size(), ErrorKind::ShapeMismatch, "layer counts differ");
  double acc = 0.0;
  double count = 0.0;
  for (std::size_t l = 0; l < x.size(); ++l) {
    require(x[l].rows() == xhat[l].rows() && x[l].cols() == xhat[l].cols(), ErrorKind::ShapeMismatch,
            "layer shapes differ");
    for (Eigen::Index r = 0; r < x[l].rows(); ++r) {
      const double den = x[l].row(r).norm() * xhat[l].row(r).norm();
      acc += den > 0.0 ? x[l].row(r).dot(xhat[l].row(r)) / den : 0.0;
      count += 1.0;
    }
  }
  return acc / count;
}

TaskHeads::TaskHeads(const data::DataConfig& cfg, int hidden, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  require(hidden >= 1, ErrorKind::ConfigError, "head_hidden must be >= 1");
  Rng rng(seed);
  int din = 0;
  for (int d : cfg_.layer_dims) din += d;
  const int pr = cfg_.patch_rows();
  const int pc = cfg_.patch_cols();
  depth_ = nn::Mlp2(store_, "head.depth", din, hidden, 2 * pr * pc, rng);
  pose_ = nn::Mlp2(store_, "head.pose", din, hidden, 7, rng);

  const int p = cfg_.depth_size;
  patch_to_map_.resize(static_cast<std::size_t>(p * p));
  for (int r = 0; r < cfg_.token_rows; ++r) {
    for (int c = 0; c < cfg_.token_cols; ++c) {
      const int t = r * cfg_.token_cols + c;
      for (int i = 0; i < pr; ++i) {
        for (int j = 0; j < pc; ++j) {
          patch_to_map_[static_cast<std::size_t>((r * pr + i) * p + c * pc + j)] = t * pr * pc + i * pc + j;
        }
      }
    }
  }
}

TaskHeads::Output TaskHeads::operator()(const std::vector<Tensor>& features, Eigen::Index scenes) const {
  require(features.size() == cfg_.layer_dims.size(), ErrorKind::ConfigMismatch, "task heads: layer count");
  std::vector<Tensor> normed;
  for (const auto& f : features) normed.push_back(nn::layer_norm(f, 1e-5));
  const Tensor in = normed.size() == 1 ? normed.front() : nn::concat_cols(normed);
  const Eigen::Index t = cfg_.tokens();
  require(in.rows() == scenes * t, ErrorKind::ShapeMismatch, "task heads: rows must be scenes * tokens");
  const Eigen::Index pp = cfg_.patch_rows() * cfg_.patch_cols();

  const Tensor o = depth_(in);
  auto to_map = [&](const Tensor& patches) {
    const Tensor flat = nn::reshape(patches, scenes, t * pp);
    return nn::transpose(nn::gather_rows(nn::transpose(flat), patch_to_map_));
  };
  Output out;
  out.depth = nn::exp(to_map(nn::slice_cols(o, 0, pp)));
  out.sigma = nn::add_scalar(nn::softplus(to_map(nn::slice_cols(o, pp, pp))), 1e-3);

  Mat pool = Mat::Zero(scenes, scenes * t);
  for (Eigen::Index s = 0; s < scenes; ++s) pool.row(s).segment(s * t, t).setConstant(1.0 / static_cast<double>(t));
  out.pose = pose_(nn::matmul(Tensor::constant(std::move(pool)), in));
  return out;
}

std::pair<Tensor, Tensor> TaskHeads::losses(const Output& out, const data::Batch& batch,
                                            const loss::LossWeights& w) const {
  const double b = static_cast<double>(batch.scenes);
  const int p = cfg_.depth_size;
  const Tensor depth = nn::scale(
      loss::aleatoric_depth_loss(Tensor::constant(batch.depth), out.depth, out.sigma, w.alpha_reg, p, p),
      1.0 / (b * p * p));
  const Tensor camera = nn::scale(loss::camera_huber_loss(Tensor::constant(batch.pose), out.pose, w.huber_eps), 1.0 / b);
  return {depth, camera};
}

Reconstruction reconstruct(const nn::S2Vae& model, const data::Batch& batch) {
  const auto post = model.encode(nn::as_constants(batch.layers), batch.scenes);
  const auto xhat = model.decode(model.mode(post), batch.scenes);
  Reconstruction r;
  for (const auto& t : xhat) r.layers.push_back(t.value());
  r.mu = post.mu.value();
  if (post.kappa.defined()) r.kappa = post.kappa.value();
  if (post.log_var.defined()) r.log_var = post.log_var.value();
  return r;
}

std::vector<std::vector<std::size_t>> chunk(const std::vector<std::size_t>& idx, std::size_t size) {
  require(size >= 1, ErrorKind::ConfigError, "chunk size must be >= 1");
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < idx.size(); i += size) {
    out.emplace_back(idx.begin() + static_cast<std::ptrdiff_t>(i),
                     idx.begin() + static_cast<std::ptrdiff_t>(std::min(idx.size(), i + size)));
  }
  return out;
}

MetricRecord evaluate(const nn::S2Vae& model, const TaskHeads& heads, const data::Dataset& ds, data::Split split,
                      const loss::LossWeights& w, int batch_size) {
  const auto idx = ds.indices(split);
  require(!idx.empty(), ErrorKind::InsufficientSamples, "evaluation split is empty");
  const auto& mc = model.config();
  const int p = ds.config().depth_size;
  const auto n = static_cast<Eigen::Index>(idx.size());
  Mat pred_depth(n, p * p), true_depth(n, p * p), pred_pose(n, 7), true_pose(n, 7);
  double sq = 0.0, elems = 0.0, cos = 0.0, tokens = 0.0, kl = 0.0, latents = 0.0;
  Eigen::Index at = 0;
  for (const auto& part : chunk(idx, static_cast<std::size_t>(batch_size))) {
    const auto batch = data::make_batch(ds, part);
    const auto rec = reconstruct(model, batch);
    const auto out = heads(nn::as_constants(rec.layers), batch.scenes);
    const Eigen::Index b = batch.scenes;
    pred_depth.middleRows(at, b) = out.depth.value();
    true_depth.middleRows(at, b) = batch.depth;
    pred_pose.middleRows(at, b) = out.pose.value();
    true_pose.middleRows(at, b) = batch.pose;
    at += b;
    for (std::size_t l = 0; l < rec.layers.size(); ++l) {
      sq += (rec.layers[l] - batch.layers[l]).squaredNorm();
      elems += static_cast<double>(rec.layers[l].size());
    }
    const double c = feature_cosine(batch.layers, rec.layers);
    const double tk = static_cast<double>(batch.layers.front().rows() * batch.layers.size());
    cos += c * tk;
    tokens += tk;
    if (mc.spherical()) {
      const int d = mc.latent_spec().sphere_dim;
      for (Eigen::Index i = 0; i < rec.kappa.size(); ++i) kl += ps::kl_to_uniform(d, rec.kappa.data()[i]);
    } else {
      kl += loss::gaussian_kl(Tensor::constant(rec.mu), Tensor::constant(rec.log_var)).item() *
            static_cast<double>(rec.mu.rows());
    }
    latents += static_cast<double>(rec.mu.rows());
  }
  MetricRecord m;
  m.depth = depth_metrics(pred_depth, true_depth);
  m.ate = pose_ate(pred_pose, true_pose);
  m.feature_cosine = cos / tokens;
  m.recon_loss = sq / elems + w.w_sim * (1.0 - m.feature_cosine);
  m.kl = kl / latents;
  m.scenes = idx.size();
  return m;
}

}  // namespace s2vae::train
