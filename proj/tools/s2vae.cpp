#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "oracles.hpp"
#include "s2vae/checkpoint.hpp"
#include "s2vae/config.hpp"
#include "s2vae/dataset_io.hpp"
#include "s2vae/diagnostics.hpp"
#include "s2vae/error.hpp"
#include "s2vae/special.hpp"

namespace fs = std::filesystem;
using namespace s2vae;
using config::json;
using nn::Mat;

namespace {

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool json_out = false;
  std::vector<std::string> sets;
  std::string checkpoint;
};

void add_common(CLI::App* app, Common& c, bool with_checkpoint = false) {
  app->add_option("--config", c.config_path, "JSON run config");
  app->add_option("--seed", c.seed, "master seed");
  app->add_option("--out", c.out, "output directory");
  app->add_flag("--json", c.json_out, "print a JSON report on stdout");
  app->add_option("--set", c.sets, "override, e.g. --set train.steps=50")->take_all();
  if (with_checkpoint) app->add_option("--checkpoint", c.checkpoint, "checkpoint (default <out>/model.ckpt)");
}

config::RunConfig resolve(const Common& c, const std::string& embedded = "") {
  std::vector<std::string> sets = c.sets;
  if (c.seed) sets.push_back("seed=" + std::to_string(*c.seed));
  if (!c.out.empty()) sets.push_back("out_dir=" + json(c.out).dump());
  if (c.config_path.empty() && !embedded.empty()) {
    json doc = json::parse(embedded);
    for (const auto& s : sets) config::apply_override(doc, s);
    auto cfg = config::from_json(doc);
    cfg.validate();
    return cfg;
  }
  return config::resolve(c.config_path, sets);
}

/// Output directory with a fresh config echo and no DONE marker.
fs::path prepare_out(const config::RunConfig& cfg) {
  const fs::path out(cfg.out_dir);
  fs::create_directories(out);
  fs::remove(out / "DONE");
  std::ofstream(out / "config.json") << config::dump(cfg);
  return out;
}

void mark_done(const fs::path& out) { std::ofstream(out / "DONE") << "ok\n"; }

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream os(p, std::ios::trunc);
  require(static_cast<bool>(os), ErrorKind::IoError, "cannot write " + p.string());
  os << s;
}

/// Two-column plot data: x y per line, optional comment header.
void write_curve(const fs::path& p, const std::string& header, const std::vector<std::pair<double, double>>& pts) {
  std::string s = "# " + header + "\n";
  char buf[96];
  for (const auto& [x, y] : pts) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g\n", x, y);
    s += buf;
  }
  write_text(p, s);
}

data::Dataset obtain_dataset(const config::RunConfig& cfg) {
  if (!cfg.dataset.dir.empty()) {
    auto ds = data::load_dataset(cfg.dataset.dir);
    require(ds.config().layer_dims == cfg.data.layer_dims && ds.config().tokens() == cfg.data.tokens() &&
                ds.config().depth_size == cfg.data.depth_size,
            ErrorKind::ConfigMismatch, "dataset in " + cfg.dataset.dir + " does not match the data config");
    return ds;
  }
  return data::make_dataset(cfg.dataset.n_scenes, cfg.data, cfg.dataset_seed());
}

json metrics_json(const train::MetricRecord& m) {
  return json{{"abs_rel", m.depth.abs_rel}, {"delta1", m.depth.delta1},      {"sq_rel", m.depth.sq_rel},
              {"rmse_log", m.depth.rmse_log}, {"ate", m.ate},              {"feature_cosine", m.feature_cosine},
              {"recon_loss", m.recon_loss}, {"kl", m.kl},                  {"scenes", m.scenes}};
}

struct Bundle {
  std::unique_ptr<nn::S2Vae> model;
  std::unique_ptr<train::TaskHeads> heads;
};

Bundle make_bundle(const config::RunConfig& cfg) {
  Bundle b;
  b.model = std::make_unique<nn::S2Vae>(cfg.model_config(), Rng::mix(cfg.seed, 1));
  b.heads = std::make_unique<train::TaskHeads>(cfg.data, cfg.train.head_hidden, Rng::mix(cfg.seed, 2));
  return b;
}

void save_bundle(const fs::path& path, const Bundle& b, const config::RunConfig& cfg) {
  auto ckp = nn::snapshot(b.model->params(), config::dump(cfg));
  for (const auto& [name, t] : b.heads->params().entries()) ckp.params.emplace_back(name, t.value());
  nn::write_checkpoint(path.string(), ckp);
}

void load_bundle(Bundle& b, const nn::Checkpoint& ckp) {
  const std::size_t n = b.model->params().entries().size();
  require(ckp.params.size() == n + b.heads->params().entries().size(), ErrorKind::ConfigMismatch,
          "checkpoint does not match model plus task heads");
  nn::Checkpoint m, h;
  m.params.assign(ckp.params.begin(), ckp.params.begin() + static_cast<std::ptrdiff_t>(n));
  h.params.assign(ckp.params.begin() + static_cast<std::ptrdiff_t>(n), ckp.params.end());
  nn::restore(b.model->params(), m);
  nn::restore(b.heads->params(), h);
}

/// Loads a trained bundle; the run config comes from --config if given, else
/// from the checkpoint itself.
std::pair<config::RunConfig, Bundle> load_trained(const Common& c) {
  std::string path = c.checkpoint;
  if (path.empty()) {
    const std::string out = c.out.empty() ? config::RunConfig{}.out_dir : c.out;
    path = (fs::path(out) / "model.ckpt").string();
  }
  const auto ckp = nn::read_checkpoint(path);
  auto cfg = resolve(c, ckp.config_json);
  Bundle b = make_bundle(cfg);
  load_bundle(b, ckp);
  return {cfg, std::move(b)};
}

void emit(const Common& c, const json& report, const std::string& human) {
  if (c.json_out) {
    std::cout << report.dump(2) << "\n";
  } else {
    std::cout << human;
  }
}

std::vector<std::size_t> split_or_train(const data::Dataset& ds, data::Split s) {
  auto idx = ds.indices(s);
  return idx.empty() ? ds.indices(data::Split::Train) : idx;
}

// ---------------------------------------------------------------------------

int cmd_selftest(const Common& c, double fault) {
  if (fault != 0.0) special::testing::set_log_gamma_fault(fault);
  const auto t0 = std::chrono::steady_clock::now();
  const auto results = oracle::selftest_suite();
  const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  bool ok = true;
  json rows = json::array();
  std::string table;
  char buf[512];
  for (const auto& r : results) {
    ok = ok && r.passed;
    rows.push_back(json{{"check", r.name}, {"passed", r.passed}, {"seconds", r.seconds}, {"detail", r.detail}});
    std::snprintf(buf, sizeof buf, "%-22s %s %7.2fs  %s\n", r.name.c_str(), r.passed ? "PASS" : "FAIL", r.seconds,
                  r.detail.c_str());
    table += buf;
  }
  std::snprintf(buf, sizeof buf, "selftest %s in %.1fs\n", ok ? "passed" : "FAILED", total);
  table += buf;
  for (const auto& r : results) {
    if (!r.passed) table += "failed check: " + r.name + "\n";
  }
  emit(c, json{{"passed", ok}, {"seconds", total}, {"checks", rows}}, table);
  return ok ? 0 : 1;
}

int cmd_gen_data(const Common& c) {
  const auto cfg = resolve(c);
  const auto out = prepare_out(cfg);
  const auto ds = data::make_dataset(cfg.dataset.n_scenes, cfg.data, cfg.dataset_seed());
  data::save_dataset(ds, (out / "dataset").string());
  // Shell statistics pooled over up to 64 scenes.
  std::vector<double> cv(cfg.data.layer_dims.size(), 0.0);
  const std::size_t probe = std::min<std::size_t>(ds.size(), 64);
  for (std::size_t i = 0; i < probe; ++i) {
    const auto p = diag::norm_cv_profile(ds.scene(i).features);
    for (std::size_t l = 0; l < p.size(); ++l) cv[l] = std::max(cv[l], p[l]);
  }
  json report{{"scenes", ds.size()},
              {"dataset_seed", ds.seed()},
              {"train", ds.indices(data::Split::Train).size()},
              {"val", ds.indices(data::Split::Val).size()},
              {"test", ds.indices(data::Split::Test).size()},
              {"max_norm_cv_per_layer", cv}};
  write_text(out / "data_report.json", report.dump(2) + "\n");
  mark_done(out);
  std::string human = "wrote " + std::to_string(ds.size()) + " scenes to " + (out / "dataset").string() + "\n";
  for (std::size_t l = 0; l < cv.size(); ++l) human += "layer " + std::to_string(l) + " max norm CV " + std::to_string(cv[l]) + "\n";
  emit(c, report, human);
  return 0;
}

int cmd_train(const Common& c) {
  const auto cfg = resolve(c);
  const auto out = prepare_out(cfg);
  const auto ds = obtain_dataset(cfg);
  Bundle b = make_bundle(cfg);
  fs::create_directories(out / "checkpoints");

  std::ofstream csv(out / "metrics.csv", std::ios::trunc);
  const auto cols = train::metrics_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) csv << (i ? "," : "") << cols[i];
  csv << "\n";
  // A step's row is written once its eval (if any) is known, so hold one row back.
  std::optional<train::StepRecord> pending;
  std::optional<train::EvalPoint> pending_eval;
  auto flush = [&] {
    if (pending) csv << train::metrics_row(*pending, pending_eval ? &*pending_eval : nullptr) << "\n";
    pending.reset();
    pending_eval.reset();
  };
  train::TrainHooks hooks;
  hooks.on_step = [&](const train::StepRecord& r) {
    flush();
    pending = r;
  };
  hooks.on_eval = [&](const train::EvalPoint& e) {
    if (pending && pending->step == e.step) pending_eval = e;
  };
  hooks.on_checkpoint = [&](int step) {
    char name[64];
    std::snprintf(name, sizeof name, "step_%06d.ckpt", step);
    save_bundle(out / "checkpoints" / name, b, cfg);
  };
  const auto run = train::train(*b.model, *b.heads, ds, cfg.train, cfg.loss, cfg.seed, hooks);
  flush();
  csv.close();

  std::vector<std::pair<double, double>> total, recon, kmin, kmean, kmax, lr, ecos;
  for (const auto& r : run.history) {
    total.emplace_back(r.step, r.total);
    recon.emplace_back(r.step, r.feature_recon);
    kmin.emplace_back(r.step, r.kappa_min);
    kmean.emplace_back(r.step, r.kappa_mean);
    kmax.emplace_back(r.step, r.kappa_max);
    lr.emplace_back(r.step, r.lr);
  }
  for (const auto& e : run.evals) ecos.emplace_back(e.step, e.metrics.feature_cosine);
  fs::create_directories(out / "plots");
  write_curve(out / "plots" / "loss_total.dat", "step total_loss", total);
  write_curve(out / "plots" / "feature_recon.dat", "step feature_recon_loss", recon);
  write_curve(out / "plots" / "kappa_min.dat", "step kappa_min", kmin);
  write_curve(out / "plots" / "kappa_mean.dat", "step kappa_mean", kmean);
  write_curve(out / "plots" / "kappa_max.dat", "step kappa_max", kmax);
  write_curve(out / "plots" / "lr.dat", "step learning_rate", lr);
  write_curve(out / "plots" / "eval_feature_cosine.dat", "step eval_feature_cosine", ecos);

  const std::string ckpt = run.aborted ? "last_good.ckpt" : "model.ckpt";
  save_bundle(out / ckpt, b, cfg);
  json report{{"steps_completed", run.evals.back().step},
              {"aborted", run.aborted},
              {"abort_reason", run.abort_reason},
              {"kappa_bounded", run.kappa_bounded},
              {"initial", metrics_json(run.initial())},
              {"final", metrics_json(run.final())},
              {"recon_ratio", run.final().recon_loss / run.initial().recon_loss},
              {"checkpoint", (out / ckpt).string()},
              {"parameters", b.model->params().scalar_count()}};
  write_text(out / "report.json", report.dump(2) + "\n");
  char buf[256];
  std::snprintf(buf, sizeof buf, "recon loss %.5f -> %.5f (ratio %.3f), feature cosine %.4f, kappa bounded: %s\n",
                run.initial().recon_loss, run.final().recon_loss, run.final().recon_loss / run.initial().recon_loss,
                run.final().feature_cosine, run.kappa_bounded ? "yes" : "no");
  if (run.aborted) {
    emit(c, report, std::string(buf) + "training aborted: " + run.abort_reason + "\n");
    return 1;
  }
  mark_done(out);
  emit(c, report, buf);
  return 0;
}

int cmd_eval(const Common& c) {
  auto [cfg, b] = load_trained(c);
  const auto out = prepare_out(cfg);
  const auto ds = obtain_dataset(cfg);
  json report = json::object();
  std::string human;
  for (auto [name, split] : {std::pair{"val", data::Split::Val}, std::pair{"test", data::Split::Test}}) {
    if (ds.indices(split).empty()) continue;
    const auto m = train::evaluate(*b.model, *b.heads, ds, split, cfg.loss, cfg.train.eval_batch);
    report[name] = metrics_json(m);
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-4s AbsRel %.4f  d1 %.4f  SqRel %.4f  RMSElog %.4f  ATE %.4f  cos %.4f\n", name,
                  m.depth.abs_rel, m.depth.delta1, m.depth.sq_rel, m.depth.rmse_log, m.ate, m.feature_cosine);
    human += buf;
  }
  write_text(out / "eval.json", report.dump(2) + "\n");
  mark_done(out);
  emit(c, report, human);
  return 0;
}

int cmd_ablate(const Common& c) {
  const auto cfg = resolve(c);
  const auto out = prepare_out(cfg);
  const auto ds = obtain_dataset(cfg);
  const auto res = train::run_ablation(cfg.model_config(), ds, cfg.train, cfg.loss, cfg.seed,
                                       train::thread_count_from_env());
  std::string csv = "arm,failed,feature_cosine,abs_rel,delta1,sq_rel,rmse_log,ate,recon_loss,kl,kappa_bounded,"
                    "mean_kappa_grad_var,error\n";
  json arms = json::array();
  std::vector<std::pair<double, double>> bars;
  char buf[512];
  for (std::size_t i = 0; i < res.arms.size(); ++i) {
    const auto& a = res.arms[i];
    const auto& m = a.test;
    std::snprintf(buf, sizeof buf, "%s,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d,%.17g,\"%s\"\n",
                  a.name.c_str(), a.failed ? 1 : 0, m.feature_cosine, m.depth.abs_rel, m.depth.delta1, m.depth.sq_rel,
                  m.depth.rmse_log, m.ate, m.recon_loss, m.kl, a.run.kappa_bounded ? 1 : 0, a.run.mean_kappa_grad_var(),
                  a.error.c_str());
    csv += buf;
    arms.push_back(json{{"arm", a.name},
                        {"failed", a.failed},
                        {"error", a.error},
                        {"latent_spec", json{{"n_spheres", a.model_cfg.latent_spec().n_spheres},
                                             {"sphere_dim", a.model_cfg.latent_spec().sphere_dim}}},
                        {"test", metrics_json(m)},
                        {"kappa_bounded", a.run.kappa_bounded},
                        {"mean_kappa_grad_var", a.run.mean_kappa_grad_var()}});
    bars.emplace_back(static_cast<double>(i), m.feature_cosine);
    std::ofstream arm_csv(out / ("metrics_" + a.name + ".csv"), std::ios::trunc);
    const auto cols = train::metrics_columns();
    for (std::size_t k = 0; k < cols.size(); ++k) arm_csv << (k ? "," : "") << cols[k];
    arm_csv << "\n";
    for (const auto& r : a.run.history) arm_csv << train::metrics_row(r, nullptr) << "\n";
  }
  write_text(out / "ablation.csv", csv);
  fs::create_directories(out / "plots");
  write_curve(out / "plots" / "ablation_bars.dat",
              "arm_index feature_cosine (0 product_spherical, 1 gaussian, 2 single_sphere)", bars);
  json report{{"arms", arms},
              {"compression", res.compression},
              {"product_ge_gaussian", res.product_ge_gaussian},
              {"single_unstable_or_worse", res.single_unstable_or_worse},
              {"verdict", res.verdict}};
  write_text(out / "ablation.json", report.dump(2) + "\n");
  mark_done(out);
  emit(c, report, csv + res.verdict + "\n");
  return 0;
}

int cmd_diagnose(const Common& c, bool lipschitz) {
  auto [cfg, b] = load_trained(c);
  const auto out = prepare_out(cfg);
  const auto ds = obtain_dataset(cfg);
  const auto& dg = cfg.diagnose;
  const auto mc = cfg.model_config();
  json report = json::object();
  std::string human;
  char buf[256];

  // Active dimensions over n_latents sampled bottleneck tokens.
  auto pool = ds.indices(data::Split::Train);
  const std::size_t per = static_cast<std::size_t>(mc.bottleneck_tokens());
  pool.resize(std::min(pool.size(), (static_cast<std::size_t>(dg.n_latents) + per - 1) / per));
  const auto lat = diag::collect_latents(*b.model, ds, pool, Rng::mix(cfg.seed, 31));
  const Mat sampled = lat.sampled.topRows(std::min<Eigen::Index>(dg.n_latents, lat.sampled.rows()));
  const auto dims = diag::active_dimensions(sampled, dg.active_threshold);
  report["active_dimensions"] = json{{"active", dims.active_count},
                                     {"total", dims.variance.size()},
                                     {"threshold", dims.threshold},
                                     {"min_variance", dims.min_variance},
                                     {"max_variance", dims.max_variance},
                                     {"samples", sampled.rows()}};
  std::vector<std::pair<double, double>> hist;
  for (Eigen::Index i = 0; i < dims.variance.size(); ++i) hist.emplace_back(static_cast<double>(i), dims.variance[i]);
  fs::create_directories(out / "plots");
  write_curve(out / "plots" / "active_dim_variance.dat", "dimension variance", hist);
  std::snprintf(buf, sizeof buf, "active dimensions %d/%ld (threshold %.3g)\n", dims.active_count,
                static_cast<long>(dims.variance.size()), dims.threshold);
  human += buf;

  // Shell statistics.
  std::vector<double> cv(cfg.data.layer_dims.size(), 0.0);
  for (std::size_t i : pool) {
    const auto p = diag::norm_cv_profile(ds.scene(i).features);
    for (std::size_t l = 0; l < p.size(); ++l) cv[l] = std::max(cv[l], p[l]);
  }
  report["max_norm_cv_per_layer"] = cv;

  // Probe: trained latents vs a freshly initialized model.
  const auto train_idx = ds.indices(data::Split::Train);
  const auto test_idx = split_or_train(ds, data::Split::Test);
  auto depth_of = [&](const std::vector<std::size_t>& idx) { return data::make_batch(ds, idx).depth; };
  diag::ProbeConfig pc;
  pc.hidden = dg.probe_hidden;
  pc.steps = dg.probe_steps;
  pc.lr = dg.probe_lr;
  pc.seed = Rng::mix(cfg.seed, 41);
  if (mc.bottleneck_tokens() == mc.tokens) {
    const nn::S2Vae fresh(mc, Rng::mix(cfg.seed, 99));
    auto probe = [&](const nn::S2Vae& m) {
      return diag::probe_latents(diag::collect_latents(m, ds, train_idx, 0).mu, depth_of(train_idx),
                                 diag::collect_latents(m, ds, test_idx, 0).mu, depth_of(test_idx), cfg.data, pc);
    };
    const auto trained = probe(*b.model);
    const auto untrained = probe(fresh);
    report["probe"] = json{{"parameters", trained.params},
                           {"trained_abs_rel", trained.abs_rel_test},
                           {"untrained_abs_rel", untrained.abs_rel_test}};
    std::snprintf(buf, sizeof buf, "probe AbsRel trained %.4f vs untrained %.4f (%zu parameters)\n",
                  trained.abs_rel_test, untrained.abs_rel_test, trained.params);
    human += buf;

    const auto spec_idx = split_or_train(ds, data::Split::Val);
    const auto sr = diag::sphere_specialization(*b.model, ds, train_idx, dg.mi_bins);
    std::string scsv = "sphere";
    for (const auto& t : sr.tasks) scsv += ",rho_" + t;
    for (const auto& t : sr.tasks) scsv += ",mi_" + t;
    scsv += "\n";
    for (Eigen::Index i = 0; i < sr.abs_rho.rows(); ++i) {
      scsv += std::to_string(i);
      for (Eigen::Index k = 0; k < sr.abs_rho.cols(); ++k) scsv += "," + std::to_string(sr.abs_rho(i, k));
      for (Eigen::Index k = 0; k < sr.mi.cols(); ++k) scsv += "," + std::to_string(sr.mi(i, k));
      scsv += "\n";
    }
    write_text(out / "specialization.csv", scsv);
    json spec_j{{"tasks", sr.tasks}, {"min_over_spheres_of_max_abs_rho", sr.min_max_abs_rho}};
    json specialists = json::object();
    for (std::size_t k = 0; k < sr.tasks.size(); ++k) specialists[sr.tasks[k]] = sr.specialists[k];
    spec_j["specialists"] = specialists;
    report["specialization"] = spec_j;
    std::snprintf(buf, sizeof buf, "specialization: min over spheres of best |rho| %.3f\n", sr.min_max_abs_rho);
    human += buf;
  }

  report["decoder_lipschitz"] = diag::model_lipschitz(*b.model, ds, split_or_train(ds, data::Split::Val),
                                                      Rng::mix(cfg.seed, 51));
  if (lipschitz) {
    auto tc = cfg.train;
    tc.steps = dg.lipschitz_steps;
    const auto pts = diag::lipschitz_vs_kl(mc, ds, tc, cfg.loss, dg.lipschitz_kl_weights, cfg.seed);
    json arr = json::array();
    std::vector<std::pair<double, double>> curve;
    for (const auto& p : pts) {
      arr.push_back(json{{"w_kl", p.w_kl}, {"lipschitz", p.estimate}, {"mean_spread", p.mean_spread},
                         {"recon_loss", p.recon_loss}});
      curve.emplace_back(p.w_kl, p.estimate);
      std::snprintf(buf, sizeof buf, "w_kl %.3g: Lipschitz estimate %.4f, posterior spread %.4f\n", p.w_kl,
                    p.estimate, p.mean_spread);
      human += buf;
    }
    report["lipschitz_vs_kl"] = arr;
    write_curve(out / "plots" / "lipschitz_vs_kl.dat", "w_kl lipschitz_estimate", curve);
  }
  write_text(out / "diagnostics.json", report.dump(2) + "\n");
  mark_done(out);
  emit(c, report, human);
  return 0;
}

int cmd_interp(const Common& c) {
  auto [cfg, b] = load_trained(c);
  const auto out = prepare_out(cfg);
  const auto ds = obtain_dataset(cfg);
  const auto& dg = cfg.diagnose;
  require(dg.scene_a < ds.size() && dg.scene_b < ds.size(), ErrorKind::ConfigError, "scene index out of range");
  const auto sw = diag::slerp_sweep(*b.model, *b.heads, ds, dg.scene_a, dg.scene_b, dg.slerp_steps);
  fs::create_directories(out / "interp");
  double lo = sw.depth.front().minCoeff(), hi = sw.depth.front().maxCoeff();
  for (const auto& d : sw.depth) {
    lo = std::min(lo, d.minCoeff());
    hi = std::max(hi, d.maxCoeff());
  }
  for (std::size_t k = 0; k < sw.depth.size(); ++k) {
    char name[32];
    std::snprintf(name, sizeof name, "step_%03zu.pgm", k);
    diag::write_pgm((out / "interp" / name).string(), sw.depth[k], lo, hi);
  }
  std::vector<std::pair<double, double>> adj;
  for (std::size_t k = 0; k < sw.adjacent.size(); ++k) adj.emplace_back(static_cast<double>(k), sw.adjacent[k]);
  fs::create_directories(out / "plots");
  write_curve(out / "plots" / "interp_adjacent.dat", "step adjacent_depth_distance", adj);
  json report{{"scene_a", dg.scene_a},         {"scene_b", dg.scene_b},
              {"steps", sw.steps},              {"adjacent", sw.adjacent},
              {"smoothness_ratio", sw.smoothness_ratio}, {"max_unit_error", sw.max_unit_error},
              {"endpoints_exact", sw.endpoints_exact},   {"depth_range", json::array({lo, hi})}};
  write_text(out / "interp.json", report.dump(2) + "\n");
  mark_done(out);
  char buf[256];
  std::snprintf(buf, sizeof buf, "smoothness ratio %.3f, endpoints exact: %s, max unit error %.2g\n",
                sw.smoothness_ratio, sw.endpoints_exact ? "yes" : "no", sw.max_unit_error);
  emit(c, report, buf);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Product-of-spheres variational autoencoder toolkit"};
  app.require_subcommand(1);

  Common c;
  double fault = 0.0;
  bool lipschitz = false;
  auto* selftest = app.add_subcommand("selftest", "run the distribution oracle suite");
  add_common(selftest, c);
  selftest->add_option("--fault-log-gamma", fault, "add this offset to every log-gamma value (fault injection)");
  auto* gen = app.add_subcommand("gen-data", "generate and export a synthetic dataset");
  add_common(gen, c);
  auto* tr = app.add_subcommand("train", "train a model");
  add_common(tr, c);
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(ev, c, true);
  auto* ab = app.add_subcommand("ablate", "train and compare the three bottlenecks");
  add_common(ab, c);
  auto* dg = app.add_subcommand("diagnose", "latent diagnostics of a checkpoint");
  add_common(dg, c, true);
  dg->add_flag("--lipschitz", lipschitz, "also run the KL-weight Lipschitz sweep (trains extra models)");
  auto* ip = app.add_subcommand("interp", "slerp sweep between two scenes");
  add_common(ip, c, true);

  CLI11_PARSE(app, argc, argv);
  try {
    if (selftest->parsed()) return cmd_selftest(c, fault);
    if (gen->parsed()) return cmd_gen_data(c);
    if (tr->parsed()) return cmd_train(c);
    if (ev->parsed()) return cmd_eval(c);
    if (ab->parsed()) return cmd_ablate(c);
    if (dg->parsed()) return cmd_diagnose(c, lipschitz);
    if (ip->parsed()) return cmd_interp(c);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
