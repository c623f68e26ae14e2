// End-to-end acceptance run: one line per criterion, exit 1 if any fails.
//   s2vae_acceptance --cli <path to s2vae>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include <CLI11.hpp>

#include "oracles.hpp"
#include "s2vae/config.hpp"
#include "s2vae/diagnostics.hpp"

using namespace s2vae;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Line {
  int id;
  std::string name;
  bool passed;
  std::string detail;
};

std::vector<Line> lines;

void report(int id, const std::string& name, bool passed, const std::string& detail) {
  lines.push_back({id, name, passed, detail});
  std::printf("[%s] %2d %-28s %s\n", passed ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

void oracle_line(int id, const std::string& name, const oracle::CheckResult& r, double max_seconds) {
  const bool fast = r.seconds < max_seconds;
  report(id, name, r.passed && fast, fmt("%s; %.1fs (limit %.0fs)", r.detail.c_str(), r.seconds, max_seconds));
}

/// Runs a shell command, returning its exit status and stdout.
std::pair<int, std::string> run(const std::string& cmd) {
  std::string out;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return {-1, out};
  char buf[4096];
  while (std::fgets(buf, sizeof buf, p)) out += buf;
  const int status = pclose(p);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

bool same_history(const train::TrainRun& a, const train::TrainRun& b, std::size_t n) {
  if (a.history.size() < n || b.history.size() < n) return false;
  for (std::size_t i = 0; i < n; ++i) {
    if (train::metrics_row(a.history[i], nullptr) != train::metrics_row(b.history[i], nullptr)) return false;
  }
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance suite"};
  std::string cli_path;
  app.add_option("--cli", cli_path, "path to the s2vae binary")->required();
  CLI11_PARSE(app, argc, argv);
  const auto t_all = Clock::now();

  // Distribution and network oracles.
  oracle_line(1, "normalizer quadrature", oracle::check_normalizer_quadrature(), 10.0);
  oracle_line(2, "entropy/KL Monte Carlo", oracle::check_entropy_kl_mc(200000), 60.0);
  oracle_line(3, "sampler statistics", oracle::check_sampler_statistics(100000), 300.0);
  oracle_line(4, "reparameterization grads", oracle::check_reparam_gradients(50000), 300.0);
  oracle_line(5, "log-space stability", oracle::check_log_space_stability(), 60.0);
  oracle_line(6, "network gradient audit", oracle::check_network_gradients(), 300.0);

  // Desk-scale training.
  const auto cfg = config::desk_config();
  const auto ds = data::make_dataset(cfg.dataset.n_scenes, cfg.data, cfg.dataset_seed());
  const auto mc = cfg.model_config();

  auto t0 = Clock::now();
  nn::S2Vae model(mc, Rng::mix(cfg.seed, 1));
  train::TaskHeads heads(cfg.data, cfg.train.head_hidden, Rng::mix(cfg.seed, 2));
  const std::size_t n_params = model.params().scalar_count();
  const auto run7 = train::train(model, heads, ds, cfg.train, cfg.loss, cfg.seed);
  const double train_seconds = since(t0);
  {
    const int replay_steps = 25;
    auto short_cfg = cfg.train;
    short_cfg.stop_after = replay_steps;
    nn::S2Vae m2(mc, Rng::mix(cfg.seed, 1));
    train::TaskHeads h2(cfg.data, cfg.train.head_hidden, Rng::mix(cfg.seed, 2));
    const auto replay = train::train(m2, h2, ds, short_cfg, cfg.loss, cfg.seed);
    const bool deterministic = same_history(run7, replay, replay_steps);
    const double ratio = run7.final().recon_loss / run7.initial().recon_loss;
    double kmin = 1e300, kmax = 0.0;
    for (const auto& r : run7.history) kmin = std::min(kmin, r.kappa_min), kmax = std::max(kmax, r.kappa_max);
    const bool size_ok = n_params >= 1000000 && n_params <= 3000000 && cfg.train.steps >= 200 &&
                         cfg.train.steps <= 2000;
    const bool ok = !run7.aborted && size_ok && ratio <= 0.5 && run7.kappa_bounded && deterministic &&
                    train_seconds < 1800.0;
    report(7, "desk training", ok,
           fmt("%zu params, %d steps, recon %.4f -> %.4f (ratio %.3f), kappa in [%.2f, %.2f], replay %s, %.0fs",
               n_params, cfg.train.steps, run7.initial().recon_loss, run7.final().recon_loss, ratio, kmin, kmax,
               deterministic ? "identical" : "DIFFERS", train_seconds));
  }

  // Ablation at matched budget and seed.
  t0 = Clock::now();
  const auto abl = train::run_ablation(mc, ds, cfg.train, cfg.loss, cfg.seed, train::thread_count_from_env());
  const double abl_seconds = since(t0);
  const auto& prod = abl.arms[0];
  const auto& gauss = abl.arms[1];
  const auto& single = abl.arms[2];
  {
    auto pool = ds.indices(data::Split::Train);
    const std::size_t per = static_cast<std::size_t>(mc.bottleneck_tokens());
    pool.resize(std::min(pool.size(), (1000 + per - 1) / per));
    auto active = [&](const nn::S2Vae& m) {
      const auto lat = diag::collect_latents(m, ds, pool, Rng::mix(cfg.seed, 31));
      return diag::active_dimensions(lat.sampled.topRows(1000), 0.1);
    };
    const auto ap = active(*prod.model);
    const auto ag = active(*gauss.model);
    const int dim = mc.latent_dim();
    const bool ok = !prod.failed && !gauss.failed && ap.active_count == dim && ag.active_count <= ap.active_count;
    report(8, "active-dimension ordering", ok,
           fmt("product %d/%d (min var %.3f), gaussian %d/%d (min var %.3f), 1000 latents", ap.active_count, dim,
               ap.min_variance, ag.active_count, dim, ag.min_variance));
  }
  {
    const bool ok = abl.compression >= 16.0 && abl.product_ge_gaussian && abl.single_unstable_or_worse &&
                    abl_seconds < 7200.0;
    report(9, "ablation direction", ok,
           fmt("%.0f:1, cosine product %.4f / gaussian %.4f / single %.4f%s, kappa-grad var single/product %.3g; "
               "%.0fs",
               abl.compression, prod.test.feature_cosine, gauss.test.feature_cosine, single.test.feature_cosine,
               single.failed ? " (failed)" : "",
               single.run.mean_kappa_grad_var() / std::max(prod.run.mean_kappa_grad_var(), 1e-300), abl_seconds));
  }

  // Interpolation on the trained product model.
  {
    const auto sw = diag::slerp_sweep(model, heads, ds, cfg.diagnose.scene_a, cfg.diagnose.scene_b,
                                      cfg.diagnose.slerp_steps);
    const bool ok = sw.endpoints_exact && sw.max_unit_error <= 1e-6 && sw.smoothness_ratio <= 3.0;
    report(10, "slerp sweep", ok,
           fmt("endpoints %s, max unit error %.2g, smoothness ratio %.3f", sw.endpoints_exact ? "exact" : "DIFFER",
               sw.max_unit_error, sw.smoothness_ratio));
  }

  // Shell property of the generated features and of layer norm outputs.
  {
    double worst_cv = 0.0;
    std::size_t within = 0, counted = 0;
    const double sigma_min = 0.5, eps = cfg.model.ln_eps;
    double bound = 0.0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const auto& f = ds.scene(i).features;
      for (double cv : diag::norm_cv_profile(f)) worst_cv = std::max(worst_cv, cv);
      for (const auto& layer : f.layers) {
        const auto sc = diag::shell_check(layer, eps, sigma_min, 2.0);
        within += static_cast<std::size_t>(std::llround(sc.fraction_within * static_cast<double>(sc.tokens)));
        counted += sc.tokens;
        bound = std::max(bound, sc.bound);
      }
    }
    const double frac = counted ? static_cast<double>(within) / static_cast<double>(counted) : 0.0;
    const bool ok = worst_cv <= 0.15 && counted > 0 && frac >= 0.99;
    report(11, "shell verification", ok,
           fmt("max layer CV %.4f over %zu scenes; %.4f of %zu tokens within 2x bound %.3g", worst_cv, ds.size(), frac,
               counted, bound));
  }

  // Probe: trained vs untrained latents.
  {
    const auto tr = ds.indices(data::Split::Train);
    const auto te = ds.indices(data::Split::Test);
    diag::ProbeConfig pc;
    pc.hidden = cfg.diagnose.probe_hidden;
    pc.steps = cfg.diagnose.probe_steps;
    pc.lr = cfg.diagnose.probe_lr;
    pc.seed = Rng::mix(cfg.seed, 41);
    const nn::S2Vae fresh(mc, Rng::mix(cfg.seed, 99));
    const auto dtr = data::make_batch(ds, tr).depth, dte = data::make_batch(ds, te).depth;
    auto probe = [&](const nn::S2Vae& m) {
      return diag::probe_latents(diag::collect_latents(m, ds, tr, 0).mu, dtr, diag::collect_latents(m, ds, te, 0).mu,
                                 dte, cfg.data, pc);
    };
    const auto a = probe(model);
    const auto b = probe(fresh);
    const bool ok = a.params <= diag::kMaxProbeParams && a.abs_rel_test < b.abs_rel_test;
    report(12, "probe trained vs untrained", ok,
           fmt("AbsRel %.4f vs %.4f, %zu probe parameters", a.abs_rel_test, b.abs_rel_test, a.params));
  }

  // The shipped self-test command.
  {
    t0 = Clock::now();
    const auto [code, out] = run("\"" + cli_path + "\" selftest");
    const double secs = since(t0);
    const auto [fcode, fout] = run("\"" + cli_path + "\" selftest --fault-log-gamma 0.01");
    const bool fault_named = fcode != 0 && fout.find("failed check:") != std::string::npos;
    const bool ok = code == 0 && secs < 300.0 && fault_named;
    report(13, "selftest command", ok,
           fmt("exit %d in %.1fs; log_gamma fault -> exit %d%s", code, secs, fcode,
               fault_named ? " naming the failed checks" : " WITHOUT naming a check"));
  }

  int failed = 0;
  for (const auto& l : lines) failed += l.passed ? 0 : 1;
  std::printf("acceptance: %zu/%zu criteria passed in %.0fs\n", lines.size() - failed, lines.size(), since(t_all));
  return failed == 0 ? 0 : 1;
}
