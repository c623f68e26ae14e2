#include "s2vae/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <thread>

#include "s2vae/error.hpp"

namespace s2vae::train {

Schedule TrainConfig::schedule() const {
  Schedule s;
  s.peak_lr = peak_lr;
  s.total_steps = steps;
  s.warmup_steps = std::max(1, static_cast<int>(std::lround(warmup_frac * steps)));
  return s;
}

void TrainConfig::validate() const {
  require(steps >= 1, ErrorKind::ConfigError, "train.steps must be >= 1");
  require(batch_size >= 1, ErrorKind::ConfigError, "train.batch_size must be >= 1");
  require(peak_lr > 0.0 && std::isfinite(peak_lr), ErrorKind::ConfigError, "train.peak_lr must be > 0");
  require(warmup_frac >= 0.0 && warmup_frac < 1.0, ErrorKind::ConfigError, "train.warmup_frac must lie in [0, 1)");
  require(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0 && adam.eps > 0.0,
          ErrorKind::ConfigError, "invalid AdamW moments");
  require(adam.weight_decay >= 0.0, ErrorKind::ConfigError, "weight decay must be >= 0");
  require(grad_clip >= 0.0, ErrorKind::ConfigError, "grad_clip must be >= 0 (0 disables)");
  require(eval_every >= 0 && checkpoint_every >= 0, ErrorKind::ConfigError, "eval/checkpoint periods must be >= 0");
  require(head_hidden >= 1 && eval_batch >= 1, ErrorKind::ConfigError, "head_hidden and eval_batch must be >= 1");
  require(kappa_max > 0.0, ErrorKind::ConfigError, "kappa_max must be > 0");
}

double TrainRun::mean_kappa_grad_var() const {
  if (history.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& r : history) acc += r.kappa_grad_var;
  return acc / static_cast<double>(history.size());
}

namespace {

data::Split eval_split(const data::Dataset& ds) {
  return ds.indices(data::Split::Val).empty() ? data::Split::Train : data::Split::Val;
}

double variance(const Mat& m) {
  if (m.size() < 2) return 0.0;
  const double mean = m.mean();
  return (m.array() - mean).square().sum() / static_cast<double>(m.size() - 1);
}

}  // namespace

TrainRun train(nn::S2Vae& model, TaskHeads& heads, const data::Dataset& ds, const TrainConfig& cfg,
               const loss::LossWeights& w, std::uint64_t seed, const TrainHooks& hooks) {
  cfg.validate();
  w.validate();
  const auto train_idx = ds.indices(data::Split::Train);
  require(!train_idx.empty(), ErrorKind::InsufficientSamples, "training split is empty");
  const auto& mc = model.config();
  const auto weights = loss::weight_table(w);

  std::vector<std::pair<std::string, Tensor>> params = model.params().entries();
  for (const auto& e : heads.params().entries()) params.push_back(e);
  auto state = make_optimizer_state(params);
  const Schedule sched = cfg.schedule();

  Rng batch_rng(Rng::mix(seed, 101));
  Rng sample_rng(Rng::mix(seed, 202));
  const data::Split split = eval_split(ds);

  TrainRun run;
  run.seed = seed;
  auto do_eval = [&](int step) {
    EvalPoint e{step, {}};
    try {
      e.metrics = evaluate(model, heads, ds, split, w, cfg.eval_batch);
    } catch (const Error&) {
      // A diverged model cannot be scored; keep the record so the run still reports.
      constexpr double nan = std::numeric_limits<double>::quiet_NaN();
      e.metrics.depth = {nan, nan, nan, nan};
      e.metrics.ate = e.metrics.feature_cosine = e.metrics.recon_loss = e.metrics.kl = nan;
    }
    run.evals.push_back(e);
    if (hooks.on_eval) hooks.on_eval(e);
  };
  do_eval(0);

  const int last = cfg.stop_after >= 0 ? std::min(cfg.steps, cfg.stop_after) : cfg.steps;
  for (int s = 0; s < last; ++s) {
    std::vector<std::size_t> pick(static_cast<std::size_t>(cfg.batch_size));
    for (auto& i : pick) i = train_idx[batch_rng.below(train_idx.size())];
    const auto batch = data::make_batch(ds, pick);
    const auto x = nn::as_constants(batch.layers);

    const auto post = model.encode(x, batch.scenes);
    const bool finite_post = post.mu.value().allFinite() && (!post.kappa.defined() || post.kappa.value().allFinite()) &&
                             (!post.log_var.defined() || post.log_var.value().allFinite());
    if (!finite_post) {
      // Sampling needs a valid posterior, so stop here.
      run.aborted = true;
      run.abort_reason = "NonFiniteLoss at step " + std::to_string(s + 1) + " (non-finite posterior)";
      run.kappa_bounded = run.kappa_bounded && !post.kappa.defined();
      break;
    }
    if (post.kappa.defined()) post.kappa.retain_grad();
    const Tensor z = model.sample(post, sample_rng);
    const auto xhat = model.decode(z, batch.scenes);

    std::vector<std::pair<std::string, Tensor>> terms;
    terms.emplace_back("mse", loss::mse_loss(x, xhat));
    terms.emplace_back("cos", loss::cosine_distance_loss(x, xhat));
    terms.emplace_back("gram", loss::gram_loss(x, xhat, mc.tokens));
    terms.emplace_back("var", loss::variance_preservation_loss(x, xhat));
    terms.emplace_back("norm", loss::norm_preservation_loss(x, xhat));
    terms.emplace_back("kl", mc.spherical() ? loss::spherical_kl(post.kappa, mc.latent_spec().sphere_dim)
                                            : loss::gaussian_kl(post.mu, post.log_var));
    std::vector<Tensor> detached;
    for (const auto& t : xhat) detached.push_back(nn::detach(t));
    const auto [depth_term, camera_term] = heads.losses(heads(detached, batch.scenes), batch, w);
    terms.emplace_back("depth", depth_term);
    terms.emplace_back("camera", camera_term);
    const auto rep = loss::total_loss(terms, weights);

    StepRecord rec;
    rec.step = s + 1;
    rec.lr = sched.lr(state.step);
    rec.terms = rep.terms;
    rec.total = rep.total;
    rec.feature_recon = rep.terms.at("mse") + w.w_sim * rep.terms.at("cos");
    if (post.kappa.defined()) {
      const Mat& k = post.kappa.value();
      rec.kappa_min = k.minCoeff();
      rec.kappa_max = k.maxCoeff();
      rec.kappa_mean = k.mean();
      if (!(rec.kappa_min > 0.0 && rec.kappa_max < cfg.kappa_max && k.allFinite())) run.kappa_bounded = false;
    }
    if (!std::isfinite(rep.total)) {
      run.aborted = true;
      run.abort_reason = "NonFiniteLoss at step " + std::to_string(rec.step);
      run.history.push_back(rec);
      break;
    }

    for (const auto& [name, p] : params) p.zero_grad();
    rep.total_tensor.backward();
    std::vector<Mat> grads;
    grads.reserve(params.size());
    for (const auto& [name, p] : params) grads.push_back(p.grad());
    if (post.kappa.defined()) rec.kappa_grad_var = variance(post.kappa.grad());
    rec.grad_norm = clip_global_norm(grads, cfg.grad_clip);
    try {
      optimizer_step(state, params, grads, cfg.adam, sched);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::NonFiniteGradient) throw;
      run.aborted = true;
      run.abort_reason = std::string(e.what()) + " at step " + std::to_string(rec.step);
      run.history.push_back(rec);
      break;
    }
    run.history.push_back(rec);
    if (hooks.on_step) hooks.on_step(rec);
    if (cfg.eval_every > 0 && rec.step % cfg.eval_every == 0 && rec.step != last) do_eval(rec.step);
    if (hooks.on_checkpoint && cfg.checkpoint_every > 0 && rec.step % cfg.checkpoint_every == 0)
      hooks.on_checkpoint(rec.step);
  }
  const int done = run.history.empty() ? 0 : run.history.back().step - (run.aborted ? 1 : 0);
  if (run.evals.back().step != done) do_eval(done);
  return run;
}

std::vector<std::string> metrics_columns() {
  return {"step",       "lr",        "total",      "feature_recon",  "mse",        "cos",
          "gram",       "var",       "norm",       "kl",             "depth",      "camera",
          "grad_norm",  "kappa_min", "kappa_mean", "kappa_max",      "kappa_grad_var",
          "eval_recon", "eval_feature_cosine",     "eval_abs_rel",   "eval_delta1", "eval_ate"};
}

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string metrics_row(const StepRecord& r, const EvalPoint* eval) {
  std::string out = std::to_string(r.step);
  auto add = [&out](const std::string& s) { out += ',' + s; };
  add(num(r.lr));
  add(num(r.total));
  add(num(r.feature_recon));
  for (const char* k : {"mse", "cos", "gram", "var", "norm", "kl", "depth", "camera"}) {
    const auto it = r.terms.find(k);
    add(it == r.terms.end() ? "" : num(it->second));
  }
  for (double v : {r.grad_norm, r.kappa_min, r.kappa_mean, r.kappa_max, r.kappa_grad_var}) add(num(v));
  if (eval) {
    const auto& m = eval->metrics;
    for (double v : {m.recon_loss, m.feature_cosine, m.depth.abs_rel, m.depth.delta1, m.ate}) add(num(v));
  } else {
    for (int i = 0; i < 5; ++i) add("");
  }
  return out;
}

std::vector<std::pair<std::string, nn::ModelConfig>> ablation_arms(const nn::ModelConfig& base) {
  nn::ModelConfig prod = base;
  prod.bottleneck = nn::BottleneckKind::ProductSpherical;
  nn::ModelConfig gauss = base;
  gauss.bottleneck = nn::BottleneckKind::Gaussian;
  nn::ModelConfig single = base;
  single.bottleneck = nn::BottleneckKind::SingleSphere;
  return {{"product_spherical", prod}, {"gaussian", gauss}, {"single_sphere", single}};
}

AblationResult run_ablation(const nn::ModelConfig& base, const data::Dataset& ds, const TrainConfig& cfg,
                            const loss::LossWeights& w, std::uint64_t seed, int threads) {
  const auto specs = ablation_arms(base);
  AblationResult res;
  res.arms.resize(specs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < specs.size(); i = next++) {
      ArmResult& arm = res.arms[i];
      arm.name = specs[i].first;
      arm.model_cfg = specs[i].second;
      try {
        arm.model = std::make_shared<nn::S2Vae>(arm.model_cfg, Rng::mix(seed, 1));
        arm.heads = std::make_shared<TaskHeads>(ds.config(), cfg.head_hidden, Rng::mix(seed, 2));
        arm.run = train(*arm.model, *arm.heads, ds, cfg, w, seed);
        const data::Split split = ds.indices(data::Split::Test).empty() ? data::Split::Train : data::Split::Test;
        arm.test = evaluate(*arm.model, *arm.heads, ds, split, w, cfg.eval_batch);
        if (arm.run.aborted) {
          arm.failed = true;
          arm.error = arm.run.abort_reason;
        }
      } catch (const std::exception& e) {
        arm.failed = true;
        arm.error = e.what();
      }
    }
  };
  const int n = std::clamp(threads, 1, static_cast<int>(specs.size()));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  const auto& p = res.arms[0];
  const auto& g = res.arms[1];
  const auto& s = res.arms[2];
  res.compression = static_cast<double>(base.input_dim() * base.tokens) /
                    static_cast<double>(base.latent_dim() * base.bottleneck_tokens());
  res.product_ge_gaussian = !p.failed && (g.failed || p.test.feature_cosine >= g.test.feature_cosine);
  const bool single_unstable = s.failed || !s.run.kappa_bounded;
  const bool single_worse = !p.failed && !g.failed && s.test.feature_cosine < p.test.feature_cosine &&
                            s.test.feature_cosine < g.test.feature_cosine;
  res.single_unstable_or_worse = single_unstable || single_worse;
  char buf[256];
  std::snprintf(buf, sizeof buf, "ordering %s: product cos %.6f %s gaussian cos %.6f; single_sphere %s",
                res.product_ge_gaussian && res.single_unstable_or_worse ? "HOLDS" : "FAILS", p.test.feature_cosine,
                res.product_ge_gaussian ? ">=" : "<", g.test.feature_cosine,
                single_unstable ? "unstable" : (single_worse ? "underperforms both" : "competitive"));
  res.verdict = buf;
  return res;
}

int thread_count_from_env() {
  if (const char* v = std::getenv("S2VAE_THREADS")) {
    const int n = std::atoi(v);
    if (n >= 1) return n;
  }
  return 1;
}

}  // namespace s2vae::train
