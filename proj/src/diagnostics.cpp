#include "s2vae/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "s2vae/error.hpp"

namespace s2vae::diag {

DimensionReport active_dimensions(const Mat& latents, double threshold) {
  require(latents.rows() >= 2, ErrorKind::InsufficientSamples, "active_dimensions needs at least 2 samples");
  require(latents.cols() >= 1, ErrorKind::ShapeMismatch, "active_dimensions needs at least one dimension");
  DimensionReport r;
  r.threshold = threshold;
  const Eigen::RowVectorXd mean = latents.colwise().mean();
  r.variance = ((latents.rowwise() - mean).array().square().colwise().sum() / static_cast<double>(latents.rows() - 1))
                   .transpose();
  r.active_count = static_cast<int>((r.variance.array() >= threshold).count());
  r.min_variance = r.variance.minCoeff();
  r.max_variance = r.variance.maxCoeff();
  return r;
}

double norm_cv(const Mat& tokens) {
  require(tokens.rows() >= 2, ErrorKind::InsufficientSamples, "norm CV needs at least 2 tokens");
  const Eigen::VectorXd norms = tokens.rowwise().norm();
  const double mean = norms.mean();
  require(mean >= 1e-12, ErrorKind::DegenerateLayer, "mean token norm is zero");
  const double var = (norms.array() - mean).square().mean();
  return std::sqrt(var) / mean;
}

std::vector<double> norm_cv_profile(const data::FeatureBatch& features) {
  std::vector<double> out;
  for (const auto& layer : features.layers) out.push_back(norm_cv(layer));
  return out;
}

double shell_thickness_bound(int d, double eps, double sigma_min) {
  require(d >= 1 && eps >= 0.0 && sigma_min > 0.0 && std::isfinite(eps) && std::isfinite(sigma_min),
          ErrorKind::DomainError, "shell bound needs d >= 1, eps >= 0, sigma_min > 0");
  return std::sqrt(static_cast<double>(d)) * eps / (2.0 * sigma_min);
}

ShellCheck shell_check(const Mat& tokens, double eps, double sigma_min, double factor) {
  const int d = static_cast<int>(tokens.cols());
  ShellCheck c;
  c.bound = shell_thickness_bound(d, eps, sigma_min);
  const Mat y = nn::layer_norm(nn::Tensor::constant(tokens), eps).value();
  const double radius = std::sqrt(static_cast<double>(d));
  std::size_t within = 0;
  for (Eigen::Index i = 0; i < tokens.rows(); ++i) {
    const auto centered = (tokens.row(i).array() - tokens.row(i).mean()).eval();
    if (centered.square().mean() < sigma_min) continue;
    const double dev = std::abs(y.row(i).norm() - radius);
    c.max_deviation = std::max(c.max_deviation, dev);
    ++c.tokens;
    if (dev <= factor * c.bound) ++within;
  }
  require(c.tokens > 0, ErrorKind::InsufficientSamples, "no token reaches the variance floor");
  c.fraction_within = static_cast<double>(within) / static_cast<double>(c.tokens);
  return c;
}

double lipschitz_probe(const std::function<Vec(const Vec&)>& decoder, const std::vector<std::pair<Vec, Vec>>& pairs) {
  double best = 0.0;
  for (const auto& [a, b] : pairs) {
    const double dz = (a - b).norm();
    if (dz == 0.0) continue;
    best = std::max(best, (decoder(a) - decoder(b)).norm() / dz);
  }
  return best;
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&v](std::size_t i, std::size_t j) { return v[i] < v[j]; });
  std::vector<double> rank(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = r;
    i = j + 1;
  }
  return rank;
}

bool constant(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [&v](double x) { return x == v.front(); });
}

// Equal-frequency bin of every entry; ties share the bin of their first member.
std::vector<int> equal_frequency_bins(const std::vector<double>& v, int bins) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&v](std::size_t i, std::size_t j) { return v[i] < v[j]; });
  std::vector<int> out(v.size());
  const std::size_t n = v.size();
  for (std::size_t p = 0; p < n; ++p) {
    const std::size_t i = order[p];
    if (p > 0 && v[i] == v[order[p - 1]]) {
      out[i] = out[order[p - 1]];
    } else {
      out[i] = static_cast<int>(p * static_cast<std::size_t>(bins) / n);
    }
  }
  return out;
}

}  // namespace

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  require(a.size() == b.size(), ErrorKind::DimensionMismatch, "spearman inputs differ in length");
  require(a.size() >= 3, ErrorKind::InsufficientSamples, "spearman needs n >= 3");
  require(!constant(a) && !constant(b), ErrorKind::DegenerateInput, "spearman input is constant");
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  const Eigen::Map<const Eigen::VectorXd> x(ra.data(), static_cast<Eigen::Index>(ra.size()));
  const Eigen::Map<const Eigen::VectorXd> y(rb.data(), static_cast<Eigen::Index>(rb.size()));
  const Eigen::VectorXd xc = x.array() - x.mean();
  const Eigen::VectorXd yc = y.array() - y.mean();
  return std::clamp(xc.dot(yc) / std::sqrt(xc.squaredNorm() * yc.squaredNorm()), -1.0, 1.0);
}

double mutual_information(const std::vector<double>& a, const std::vector<double>& b, int bins) {
  require(a.size() == b.size(), ErrorKind::DimensionMismatch, "mutual_information inputs differ in length");
  require(bins >= 1, ErrorKind::DomainError, "bins must be >= 1");
  require(a.size() >= 10 * static_cast<std::size_t>(bins), ErrorKind::InsufficientSamples,
          "mutual_information needs n >= 10 * bins");
  require(!constant(a) && !constant(b), ErrorKind::DegenerateInput, "mutual_information input is constant");
  const auto ba = equal_frequency_bins(a, bins);
  const auto bb = equal_frequency_bins(b, bins);
  Eigen::MatrixXd joint = Eigen::MatrixXd::Zero(bins, bins);
  for (std::size_t i = 0; i < a.size(); ++i) joint(ba[i], bb[i]) += 1.0;
  joint /= static_cast<double>(a.size());
  const Eigen::VectorXd pa = joint.rowwise().sum();
  const Eigen::VectorXd pb = joint.colwise().sum().transpose();
  // Accumulate in a fixed symmetric order so MI(a, b) == MI(b, a).
  double mi = 0.0;
  for (int i = 0; i < bins; ++i) {
    for (int j = 0; j < bins; ++j) {
      const double p = joint(i, j);
      if (p > 0.0) mi += p * (std::log(p) - std::log(pa[i]) - std::log(pb[j]));
    }
  }
  return std::max(0.0, mi);
}

LatentSet collect_latents(const nn::S2Vae& model, const data::Dataset& ds, const std::vector<std::size_t>& scenes,
                          std::uint64_t seed, int batch_size) {
  require(!scenes.empty(), ErrorKind::InsufficientSamples, "no scenes to encode");
  const auto& mc = model.config();
  const Eigen::Index per = mc.bottleneck_tokens();
  const auto rows = static_cast<Eigen::Index>(scenes.size()) * per;
  LatentSet out;
  out.scenes = scenes;
  out.mu.resize(rows, mc.latent_dim());
  out.sampled.resize(rows, mc.latent_dim());
  out.spread.resize(rows, mc.spherical() ? mc.latent_spec().n_spheres : mc.latent_dim());
  Rng rng(seed);
  Eigen::Index at = 0;
  for (const auto& part : train::chunk(scenes, static_cast<std::size_t>(batch_size))) {
    const auto batch = data::make_batch(ds, part);
    const auto post = model.encode(nn::as_constants(batch.layers), batch.scenes);
    const Eigen::Index n = post.mu.rows();
    out.mu.middleRows(at, n) = post.mu.value();
    out.sampled.middleRows(at, n) = model.sample(post, rng).value();
    if (mc.spherical()) {
      out.spread.middleRows(at, n) = post.kappa.value().cwiseInverse();
    } else {
      out.spread.middleRows(at, n) = (0.5 * post.log_var.value().array()).exp().matrix();
    }
    at += n;
  }
  return out;
}

Mat map_to_patches(const Mat& maps, const data::DataConfig& cfg) {
  const int p = cfg.depth_size;
  require(maps.cols() == p * p, ErrorKind::ShapeMismatch, "maps must hold depth_size^2 values per row");
  const int pr = cfg.patch_rows();
  const int pc = cfg.patch_cols();
  const int t = cfg.tokens();
  Mat out(maps.rows() * t, pr * pc);
  for (Eigen::Index s = 0; s < maps.rows(); ++s) {
    for (int r = 0; r < cfg.token_rows; ++r) {
      for (int c = 0; c < cfg.token_cols; ++c) {
        for (int i = 0; i < pr; ++i) {
          for (int j = 0; j < pc; ++j) {
            out(s * t + r * cfg.token_cols + c, i * pc + j) = maps(s, (r * pr + i) * p + c * pc + j);
          }
        }
      }
    }
  }
  return out;
}

SpecializationReport sphere_specialization(const nn::S2Vae& model, const data::Dataset& ds,
                                           const std::vector<std::size_t>& scenes, int bins) {
  const auto& mc = model.config();
  const auto& dc = ds.config();
  require(mc.bottleneck_tokens() == dc.tokens(), ErrorKind::ConfigMismatch,
          "specialization needs one bottleneck token per input token");
  const auto lat = collect_latents(model, ds, scenes, 0);
  const auto spec = mc.latent_spec();
  const Eigen::Index n = lat.mu.rows();
  const int t = dc.tokens();

  SpecializationReport rep;
  std::vector<std::vector<double>> task_values;
  for (int k = 0; k < dc.n_factors; ++k) rep.tasks.push_back("factor_" + std::to_string(k));
  rep.tasks.push_back("patch_log_depth");
  rep.tasks.push_back("patch_depth_slope");
  task_values.assign(rep.tasks.size(), std::vector<double>(static_cast<std::size_t>(n)));
  Mat maps(static_cast<Eigen::Index>(scenes.size()), dc.depth_size * dc.depth_size);
  for (std::size_t s = 0; s < scenes.size(); ++s) {
    const auto& sc = ds.scene(scenes[s]);
    maps.row(static_cast<Eigen::Index>(s)) =
        Eigen::Map<const Mat>(sc.depth.data(), 1, dc.depth_size * dc.depth_size).array().log().matrix();
  }
  const Mat patches = map_to_patches(maps, dc);
  const int pc = dc.patch_cols();
  const int pr = dc.patch_rows();
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& sc = ds.scene(scenes[static_cast<std::size_t>(r / t)]);
    const auto u = static_cast<std::size_t>(r);
    for (int k = 0; k < dc.n_factors; ++k) task_values[static_cast<std::size_t>(k)][u] = sc.factors[k];
    task_values[static_cast<std::size_t>(dc.n_factors)][u] = patches.row(r).mean();
    double left = 0.0, right = 0.0;
    for (int i = 0; i < pr; ++i) {
      left += patches(r, i * pc);
      right += patches(r, i * pc + pc - 1);
    }
    task_values[static_cast<std::size_t>(dc.n_factors) + 1][u] = (right - left) / pr;
  }

  const auto nt = static_cast<Eigen::Index>(rep.tasks.size());
  rep.abs_rho = Mat::Zero(spec.n_spheres, nt);
  rep.mi = Mat::Zero(spec.n_spheres, nt);
  for (int i = 0; i < spec.n_spheres; ++i) {
    const Mat part = lat.mu.middleCols(i * spec.sphere_dim, spec.sphere_dim);
    const Mat centered = part.rowwise() - part.colwise().mean();
    const Eigen::MatrixXd cov = centered.transpose() * centered;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    const Eigen::VectorXd dir = eig.eigenvectors().col(spec.sphere_dim - 1);
    const Eigen::VectorXd coord = centered * dir;
    const std::vector<double> x(coord.data(), coord.data() + coord.size());
    for (Eigen::Index k = 0; k < nt; ++k) {
      const auto& y = task_values[static_cast<std::size_t>(k)];
      if (constant(x) || constant(y)) continue;
      rep.abs_rho(i, k) = std::abs(spearman(x, y));
      if (x.size() >= 10 * static_cast<std::size_t>(bins)) rep.mi(i, k) = mutual_information(x, y, bins);
    }
  }
  rep.mean_abs_rho_per_task = rep.abs_rho.colwise().mean().transpose();
  rep.mean_mi_per_task = rep.mi.colwise().mean().transpose();
  rep.specialists.resize(rep.tasks.size());
  for (Eigen::Index k = 0; k < nt; ++k) {
    for (int i = 0; i < spec.n_spheres; ++i) {
      if (rep.mean_mi_per_task[k] > 0.0 && rep.mi(i, k) >= 2.0 * rep.mean_mi_per_task[k])
        rep.specialists[static_cast<std::size_t>(k)].push_back(i);
    }
  }
  rep.min_max_abs_rho = rep.abs_rho.rowwise().maxCoeff().minCoeff();
  return rep;
}

ProbeResult probe_latents(const Mat& train_latents, const Mat& train_depth, const Mat& test_latents,
                          const Mat& test_depth, const data::DataConfig& cfg, const ProbeConfig& pc) {
  const int t = cfg.tokens();
  const Eigen::Index dz = train_latents.cols();
  require(test_latents.cols() == dz, ErrorKind::ShapeMismatch, "train and test latents differ in width");
  require(train_latents.rows() == train_depth.rows() * t && test_latents.rows() == test_depth.rows() * t,
          ErrorKind::ShapeMismatch, "latent rows must equal scenes * tokens");
  require(train_depth.rows() >= 1 && test_depth.rows() >= 1, ErrorKind::InsufficientSamples, "probe needs data");
  const Eigen::Index pp = cfg.patch_rows() * cfg.patch_cols();
  ProbeResult res;
  res.params = static_cast<std::size_t>((dz + 1) * pc.hidden + (pc.hidden + 1) * pp);
  require(res.params <= kMaxProbeParams, ErrorKind::ConfigError,
          "probe has " + std::to_string(res.params) + " parameters, limit is 500000");

  const Mat target = map_to_patches(train_depth.array().log().matrix(), cfg);
  Rng rng(pc.seed);
  nn::ParamStore store;
  nn::Mlp2 probe(store, "probe", dz, pc.hidden, pp, rng);
  probe.fc2.b.mutable_value() = target.colwise().mean();

  auto params = store.entries();
  auto state = train::make_optimizer_state(params);
  train::Schedule sched;
  sched.peak_lr = pc.lr;
  sched.warmup_steps = 0;
  sched.total_steps = pc.steps;
  train::AdamWConfig adam;
  adam.weight_decay = 0.0;
  const auto scenes = train_depth.rows();
  for (int step = 0; step < pc.steps; ++step) {
    const Eigen::Index b = std::min<Eigen::Index>(pc.batch_size, scenes);
    std::vector<Eigen::Index> rows;
    for (Eigen::Index k = 0; k < b; ++k) {
      const auto s = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(scenes)));
      for (int r = 0; r < t; ++r) rows.push_back(s * t + r);
    }
    const nn::Tensor x = nn::gather_rows(nn::Tensor::constant(train_latents), rows);
    const nn::Tensor y = nn::gather_rows(nn::Tensor::constant(target), rows);
    const nn::Tensor loss = nn::mean(nn::square(nn::sub(probe(x), y)));
    store.zero_grad();
    loss.backward();
    std::vector<Mat> grads;
    for (const auto& [name, p] : params) grads.push_back(p.grad());
    train::clip_global_norm(grads, 1.0);
    train::optimizer_step(state, params, grads, adam, sched);
    res.final_loss = loss.item();
  }
  auto abs_rel = [&](const Mat& lat, const Mat& depth) {
    const Mat pred = probe(nn::Tensor::constant(lat)).value().array().exp().matrix();
    return train::depth_metrics(pred, map_to_patches(depth, cfg)).abs_rel;
  };
  res.abs_rel_train = abs_rel(train_latents, train_depth);
  res.abs_rel_test = abs_rel(test_latents, test_depth);
  return res;
}

namespace {

product::ProductLatent as_product(const Mat& mu, Eigen::Index row, const product::ProductSphereSpec& spec) {
  std::vector<sphere::SpherePoint> parts;
  for (int i = 0; i < spec.n_spheres; ++i) {
    parts.emplace_back(Vec(mu.row(row).segment(i * spec.sphere_dim, spec.sphere_dim).transpose()));
  }
  return product::ProductLatent(std::move(parts));
}

}  // namespace

SlerpSweep slerp_sweep(const nn::S2Vae& model, const train::TaskHeads& heads, const data::Dataset& ds,
                       std::size_t scene_a, std::size_t scene_b, int steps) {
  const auto& mc = model.config();
  require(mc.spherical(), ErrorKind::ConfigMismatch, "slerp sweep needs a spherical bottleneck");
  require(steps >= 1, ErrorKind::DomainError, "slerp sweep needs steps >= 1");
  const auto spec = mc.latent_spec();
  const int p = ds.config().depth_size;
  const auto rec_a = train::reconstruct(model, data::make_batch(ds, {scene_a}));
  const auto rec_b = train::reconstruct(model, data::make_batch(ds, {scene_b}));
  const Eigen::Index rows = rec_a.mu.rows();

  SlerpSweep sw;
  sw.steps = steps;
  for (int k = 0; k <= steps; ++k) {
    const double t = static_cast<double>(k) / steps;
    Mat z(rows, mc.latent_dim());
    for (Eigen::Index r = 0; r < rows; ++r) {
      const auto zi = product::slerp_product(as_product(rec_a.mu, r, spec), as_product(rec_b.mu, r, spec), t);
      for (const auto& part : zi.parts()) sw.max_unit_error = std::max(sw.max_unit_error, std::abs(part.coords().norm() - 1.0));
      z.row(r) = zi.flat().transpose();
    }
    const auto dec = model.decode(nn::Tensor::constant(z), 1);
    std::vector<Mat> layers;
    for (const auto& l : dec) layers.push_back(l.value());
    const auto out = heads(nn::as_constants(layers), 1);
    sw.depth.push_back(Eigen::Map<const Mat>(out.depth.value().data(), p, p));
    sw.features.push_back(std::move(layers));
  }
  auto same = [](const std::vector<Mat>& x, const std::vector<Mat>& y) {
    for (std::size_t l = 0; l < x.size(); ++l) {
      if (!(x[l].array() == y[l].array()).all()) return false;
    }
    return true;
  };
  sw.endpoints_exact = same(sw.features.front(), rec_a.layers) && same(sw.features.back(), rec_b.layers);
  for (int k = 0; k < steps; ++k) sw.adjacent.push_back((sw.depth[k + 1] - sw.depth[k]).norm());
  std::vector<double> sorted = sw.adjacent;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t m = sorted.size();
  const double median = m % 2 ? sorted[m / 2] : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]);
  const double mx = sorted.back();
  sw.smoothness_ratio = mx == 0.0 ? 1.0 : (median > 0.0 ? mx / median : INFINITY);
  return sw;
}

void write_pgm(const std::string& path, const Mat& image, double lo, double hi) {
  require(image.size() > 0, ErrorKind::ShapeMismatch, "empty image");
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(os), ErrorKind::IoError, "cannot write " + path);
  os << "P5\n" << image.cols() << " " << image.rows() << "\n255\n";
  const double span = hi > lo ? hi - lo : 1.0;
  for (Eigen::Index i = 0; i < image.rows(); ++i) {
    for (Eigen::Index j = 0; j < image.cols(); ++j) {
      const double v = std::clamp((image(i, j) - lo) / span, 0.0, 1.0);
      os.put(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
    }
  }
  require(static_cast<bool>(os), ErrorKind::IoError, "write failed for " + path);
}

double model_lipschitz(const nn::S2Vae& model, const data::Dataset& ds, const std::vector<std::size_t>& scenes,
                       std::uint64_t seed) {
  const auto& mc = model.config();
  const Eigen::Index rows = mc.bottleneck_tokens();
  const auto decoder = [&](const Vec& flat) {
    const Mat z = Eigen::Map<const Mat>(flat.data(), rows, mc.latent_dim());
    const auto dec = model.decode(nn::Tensor::constant(z), 1);
    std::vector<Mat> parts;
    Eigen::Index n = 0;
    for (const auto& l : dec) n += l.value().size();
    Vec out(n);
    Eigen::Index at = 0;
    for (const auto& l : dec) {
      out.segment(at, l.value().size()) = Eigen::Map<const Vec>(l.value().data(), l.value().size());
      at += l.value().size();
    }
    return out;
  };
  const auto lat = collect_latents(model, ds, scenes, seed, 1);
  std::vector<std::pair<Vec, Vec>> pairs;
  for (std::size_t s = 0; s < scenes.size(); ++s) {
    const Mat a = lat.mu.middleRows(static_cast<Eigen::Index>(s) * rows, rows);
    const Mat b = lat.sampled.middleRows(static_cast<Eigen::Index>(s) * rows, rows);
    pairs.emplace_back(Eigen::Map<const Vec>(a.data(), a.size()), Eigen::Map<const Vec>(b.data(), b.size()));
  }
  return lipschitz_probe(decoder, pairs);
}

std::vector<LipschitzPoint> lipschitz_vs_kl(const nn::ModelConfig& base, const data::Dataset& ds,
                                            const train::TrainConfig& cfg, const loss::LossWeights& w,
                                            const std::vector<double>& kl_weights, std::uint64_t seed) {
  nn::ModelConfig mc = base;
  mc.bottleneck = nn::BottleneckKind::Gaussian;
  auto scenes = ds.indices(data::Split::Val);
  if (scenes.empty()) scenes = ds.indices(data::Split::Train);
  std::vector<LipschitzPoint> out;
  for (double wk : kl_weights) {
    loss::LossWeights lw = w;
    lw.w_kl = wk;
    nn::S2Vae model(mc, Rng::mix(seed, 1));
    train::TaskHeads heads(ds.config(), cfg.head_hidden, Rng::mix(seed, 2));
    const auto run = train::train(model, heads, ds, cfg, lw, seed);
    LipschitzPoint pt;
    pt.w_kl = wk;
    pt.estimate = model_lipschitz(model, ds, scenes, Rng::mix(seed, 3));
    pt.mean_spread = collect_latents(model, ds, scenes, 0).spread.mean();
    pt.recon_loss = run.final().recon_loss;
    out.push_back(pt);
  }
  return out;
}

}  // namespace s2vae::diag
