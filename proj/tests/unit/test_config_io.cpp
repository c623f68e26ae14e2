#include <filesystem>
#include <fstream>

#include "helpers.hpp"
#include "s2vae/config.hpp"
#include "s2vae/dataset_io.hpp"

using namespace s2vae;
using config::json;
namespace fs = std::filesystem;

namespace {
fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("s2vae_unit_" + name);
  fs::remove_all(p);
  return p;
}
}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("run config round trips through json") {
    const auto a = config::desk_config();
    const auto b = config::from_json(config::to_json(a));
    CHECK(config::dump(a) == config::dump(b));
    CHECK(b.model_config().latent_dim() == a.model.n_spheres * a.model.sphere_dim);
  }

  TEST_CASE("unknown keys are rejected with their path") {
    json doc = config::to_json(config::smoke_config());
    doc["model"]["n_sphere"] = 3;
    try {
      config::from_json(doc);
      FAIL("accepted an unknown key");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::ConfigError);
      CHECK(std::string(e.what()).find("model.n_sphere") != std::string::npos);
    }
  }

  TEST_CASE("partial documents merge into defaults") {
    const auto c = config::from_json(json::parse(R"({"train": {"steps": 7}, "seed": 3})"));
    CHECK(c.train.steps == 7);
    CHECK(c.seed == 3);
    CHECK(c.train.batch_size == config::RunConfig{}.train.batch_size);
  }

  TEST_CASE("overrides") {
    json doc = config::to_json(config::RunConfig{});
    config::apply_override(doc, "train.peak_lr=0.002");
    config::apply_override(doc, "data.layer_dims=[32,32]");
    config::apply_override(doc, "model.bottleneck=gaussian");
    const auto c = config::from_json(doc);
    CHECK(c.train.peak_lr == 0.002);
    CHECK(c.data.layer_dims == std::vector<int>{32, 32});
    CHECK(c.model_config().bottleneck == nn::BottleneckKind::Gaussian);
    CHECK_ERROR_KIND(config::apply_override(doc, "no_equals_sign"), ErrorKind::ConfigError);
    config::apply_override(doc, "model.bottleneck=vmf");
    CHECK_ERROR_KIND(config::from_json(doc).validate(), ErrorKind::ConfigError);
  }

  TEST_CASE("resolve reads files and applies overrides") {
    const auto dir = scratch("cfg");
    fs::create_directories(dir);
    std::ofstream(dir / "c.json") << config::dump(config::smoke_config());
    const auto c = config::resolve((dir / "c.json").string(), {"train.steps=3"});
    CHECK(c.train.steps == 3);
    CHECK(c.model.hidden == config::smoke_config().model.hidden);
    CHECK_ERROR_KIND(config::resolve((dir / "missing.json").string(), {}), ErrorKind::IoError);
    std::ofstream(dir / "bad.json") << "{ not json";
    CHECK_ERROR_KIND(config::resolve((dir / "bad.json").string(), {}), ErrorKind::ConfigError);
    fs::remove_all(dir);
  }

  TEST_CASE("dataset seed derives from the run seed unless pinned") {
    config::RunConfig a, b;
    a.seed = 1;
    b.seed = 2;
    CHECK(a.dataset_seed() != b.dataset_seed());
    a.dataset.seed = b.dataset.seed = 55;
    CHECK(a.dataset_seed() == 55);
    CHECK(b.dataset_seed() == 55);
  }

  TEST_CASE("dataset export round trip") {
    const auto cfg = config::smoke_config();
    const auto ds = data::make_dataset(6, cfg.data, 12);
    const auto dir = scratch("ds");
    data::save_dataset(ds, dir.string());
    const auto back = data::load_dataset(dir.string());
    REQUIRE(back.size() == ds.size());
    CHECK(back.seed() == ds.seed());
    for (std::size_t i = 0; i < ds.size(); ++i) {
      CHECK(back.split_of(i) == ds.split_of(i));
      for (std::size_t l = 0; l < cfg.data.layer_dims.size(); ++l) {
        CHECK((back.scene(i).features.layers[l] - ds.scene(i).features.layers[l]).norm() == 0.0);
      }
      CHECK((back.scene(i).depth - ds.scene(i).depth).norm() == 0.0);
      CHECK((back.scene(i).pose - ds.scene(i).pose).norm() == 0.0);
    }
    fs::resize_file(dir / "scene_000002.bin", 10);
    CHECK_ERROR_KIND(data::load_dataset(dir.string()), ErrorKind::IoError);
    CHECK_ERROR_KIND(data::load_dataset((dir / "nope").string()), ErrorKind::IoError);
    fs::remove_all(dir);
  }
}
