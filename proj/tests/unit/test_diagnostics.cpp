#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "helpers.hpp"
#include "s2vae/config.hpp"
#include "s2vae/diagnostics.hpp"

using namespace s2vae;
using namespace s2vae::diag;

namespace {
Mat normal_mat(Eigen::Index r, Eigen::Index c, Rng& rng, double sd = 1.0) {
  Mat m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = sd * rng.normal();
  return m;
}

config::RunConfig tiny_run() {
  config::RunConfig c;
  c.data.layer_dims = {16, 12};
  c.data.token_rows = 2;
  c.data.token_cols = 4;
  c.data.depth_size = 8;
  c.data.expansion_width = 16;
  c.dataset.n_scenes = 40;
  c.model.n_layers = 1;
  c.model.n_heads = 2;
  c.model.hidden = 16;
  c.model.n_spheres = 4;
  c.model.sphere_dim = 4;
  c.seed = 5;
  return c;
}
}  // namespace

TEST_SUITE("diagnostics") {
  TEST_CASE("active dimensions") {
    CHECK(active_dimensions(Mat::Constant(10, 4, 2.0)).active_count == 0);
    Rng rng(1);
    const Mat z = normal_mat(10000, 6, rng);
    CHECK(active_dimensions(z, 0.1).active_count == 6);
    CHECK(active_dimensions(Mat::Constant(10, 4, 2.0), 0.0).active_count == 4);
    const auto r = active_dimensions((Mat(2, 1) << 0.0, 2.0).finished(), 0.1);
    CHECK(r.variance[0] == 2.0);  // unbiased
    CHECK_ERROR_KIND(active_dimensions(Mat::Ones(1, 3)), ErrorKind::InsufficientSamples);
  }

  TEST_CASE("norm cv") {
    CHECK(norm_cv(Mat::Constant(5, 3, 1.0)) < 1e-15);
    const Mat two = (Mat(2, 2) << 1.0, 0.0, 0.0, 3.0).finished();
    CHECK(std::abs(norm_cv(two) - 0.5) < 1e-15);
    CHECK_ERROR_KIND(norm_cv(Mat::Zero(3, 2)), ErrorKind::DegenerateLayer);
  }

  TEST_CASE("shell thickness bound") {
    CHECK(shell_thickness_bound(64, 0.0, 0.5) == 0.0);
    CHECK(std::abs(shell_thickness_bound(64, 1e-5, 0.5) - 8e-5) < 1e-20);
    CHECK_ERROR_KIND(shell_thickness_bound(64, 1e-5, 0.0), ErrorKind::DomainError);
    Rng rng(2);
    const auto c = shell_check(normal_mat(2000, 64, rng, 2.0), 1e-5, 0.5);
    CHECK(c.tokens > 1900);
    CHECK(c.fraction_within >= 0.99);
  }

  TEST_CASE("lipschitz probe") {
    Rng rng(3);
    std::vector<std::pair<Vec, Vec>> pairs;
    for (int i = 0; i < 500; ++i) {
      const Vec a = normal_mat(4, 1, rng).col(0);
      pairs.emplace_back(a, a + 0.01 * normal_mat(4, 1, rng).col(0));
    }
    CHECK(std::abs(lipschitz_probe([](const Vec& z) { return z; }, pairs) - 1.0) < 1e-9);
    CHECK(lipschitz_probe([](const Vec& z) { return Vec(Vec::Zero(z.size())); }, pairs) == 0.0);
    const Eigen::MatrixXd a = normal_mat(3, 4, rng);
    const double top = Eigen::JacobiSVD<Eigen::MatrixXd>(a).singularValues()[0];
    const double est = lipschitz_probe([&a](const Vec& z) { return Vec(a * z); }, pairs);
    CHECK(est <= top * (1 + 1e-12));
    CHECK(est >= 0.8 * top);
  }

  TEST_CASE("spearman") {
    CHECK(std::abs(spearman({1, 2, 3, 4}, {2, 5, 9, 30}) - 1.0) < 1e-15);
    CHECK(std::abs(spearman({1, 2, 3, 4}, {-1, -2, -3, -4}) + 1.0) < 1e-15);
    CHECK(std::abs(spearman({1, 2, 3}, {3, 1, 2}) + 0.5) < 1e-15);
    // ties take the average rank: ranks (1.5, 1.5, 3) vs (1, 2, 3)
    CHECK(std::abs(spearman({5, 5, 7}, {1, 2, 3}) - std::sqrt(3.0) / 2.0) < 1e-12);
    CHECK_ERROR_KIND(spearman({1, 2}, {1, 2}), ErrorKind::InsufficientSamples);
    CHECK_ERROR_KIND(spearman({1, 1, 1}, {1, 2, 3}), ErrorKind::DegenerateInput);
  }

  TEST_CASE("mutual information") {
    Rng rng(4);
    std::vector<double> a(10000), b(10000);
    for (auto& x : a) x = rng.normal();
    for (auto& x : b) x = rng.normal();
    CHECK(mutual_information(a, b, 8) < 0.05);
    CHECK(std::abs(mutual_information(a, a, 8) - std::log(8.0)) < 1e-9);
    std::vector<double> c(a);
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = a[i] + 0.5 * b[i];
    CHECK(std::abs(mutual_information(a, c, 8) - mutual_information(c, a, 8)) < 1e-12);
    CHECK(mutual_information(a, c, 8) > 0.3);
    CHECK_ERROR_KIND(mutual_information({1, 2, 3}, {3, 2, 1}, 8), ErrorKind::InsufficientSamples);
    CHECK_ERROR_KIND(mutual_information(std::vector<double>(100, 1.0), b, 8),
                     ErrorKind::DimensionMismatch);
    CHECK_ERROR_KIND(mutual_information(std::vector<double>(100, 1.0), std::vector<double>(b.begin(), b.begin() + 100), 8),
                     ErrorKind::DegenerateInput);
  }

  TEST_CASE("probe") {
    const auto cfg = tiny_run();
    Rng rng(6);
    const int t = cfg.data.tokens(), px = cfg.data.depth_size * cfg.data.depth_size;
    const Mat lat_train = normal_mat(30 * t, 16, rng), lat_test = normal_mat(10 * t, 16, rng);
    ProbeConfig pc;
    pc.hidden = 16;
    pc.steps = 100;
    const auto r = probe_latents(lat_train, Mat::Constant(30, px, 2.0), lat_test, Mat::Constant(10, px, 2.0),
                                 cfg.data, pc);
    CHECK(r.abs_rel_test < 0.01);
    CHECK(r.params <= kMaxProbeParams);
    pc.hidden = 40000;
    CHECK_ERROR_KIND(probe_latents(lat_train, Mat::Constant(30, px, 2.0), lat_test, Mat::Constant(10, px, 2.0),
                                   cfg.data, pc),
                     ErrorKind::ConfigError);
  }

  TEST_CASE("model diagnostics on an untrained model") {
    const auto cfg = tiny_run();
    const auto ds = data::make_dataset(cfg.dataset.n_scenes, cfg.data, cfg.dataset_seed());
    nn::S2Vae model(cfg.model_config(), 1);
    train::TaskHeads heads(cfg.data, 8, 2);
    const auto idx = ds.indices(data::Split::Train);

    const auto sr = sphere_specialization(model, ds, idx, 4);
    CHECK(sr.abs_rho.rows() == cfg.model.n_spheres);
    CHECK(sr.abs_rho.cols() == static_cast<Eigen::Index>(sr.tasks.size()));
    CHECK(sr.mi.rows() == cfg.model.n_spheres);
    CHECK(sr.specialists.size() == sr.tasks.size());

    const auto same = slerp_sweep(model, heads, ds, 3, 3, 4);
    REQUIRE(same.depth.size() == 5);
    for (const auto& d : same.depth) CHECK((d - same.depth.front()).norm() == 0.0);

    const auto sw = slerp_sweep(model, heads, ds, 0, 1, 6);
    CHECK(sw.endpoints_exact);
    CHECK(sw.max_unit_error < 1e-6);
    CHECK(sw.adjacent.size() == 6);

    const auto lat = collect_latents(model, ds, idx, 3);
    CHECK(lat.mu.rows() == static_cast<Eigen::Index>(idx.size()) * cfg.data.tokens());
    CHECK(std::isfinite(model_lipschitz(model, ds, idx, 4)));
  }

  TEST_CASE("pgm writer") {
    const auto path = (std::filesystem::temp_directory_path() / "s2vae_unit.pgm").string();
    write_pgm(path, (Mat(2, 3) << 0, 1, 2, 3, 4, 5).finished(), 0.0, 5.0);
    std::ifstream is(path, std::ios::binary);
    std::string magic;
    int w = 0, h = 0, maxv = 0;
    is >> magic >> w >> h >> maxv;
    is.get();
    std::string px(6, '\0');
    is.read(px.data(), 6);
    CHECK(magic == "P5");
    CHECK(w == 3);
    CHECK(h == 2);
    CHECK(maxv == 255);
    CHECK(static_cast<unsigned char>(px[0]) == 0);
    CHECK(static_cast<unsigned char>(px[5]) == 255);
    std::filesystem::remove(path);
  }
}
