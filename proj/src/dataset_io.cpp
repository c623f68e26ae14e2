#include "s2vae/dataset_io.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "s2vae/config.hpp"
#include "s2vae/error.hpp"

namespace s2vae::data {

static_assert(std::endian::native == std::endian::little, "dataset IO assumes a little-endian host");

namespace fs = std::filesystem;

namespace {

std::string record_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "scene_%06zu.bin", i);
  return buf;
}

void write_f64(std::ostream& os, const double* p, Eigen::Index n) {
  os.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
}

void read_f64(std::istream& is, double* p, Eigen::Index n, const std::string& path) {
  is.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
  require(static_cast<bool>(is), ErrorKind::IoError, "truncated record " + path);
}

std::size_t record_floats(const DataConfig& c) {
  std::size_t n = static_cast<std::size_t>(c.n_factors) + 7;
  for (int d : c.layer_dims) n += static_cast<std::size_t>(c.tokens()) * static_cast<std::size_t>(d);
  return n + static_cast<std::size_t>(c.depth_size) * static_cast<std::size_t>(c.depth_size);
}

}  // namespace

void save_dataset(const Dataset& ds, const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, ErrorKind::IoError, "cannot create " + dir + ": " + ec.message());
  const auto& cfg = ds.config();
  config::json manifest{{"format_version", kDatasetFormatVersion},
                        {"dataset_seed", ds.seed()},
                        {"n_scenes", ds.size()},
                        {"record_floats", record_floats(cfg)},
                        {"data", config::to_json(cfg)},
                        {"scenes", config::json::array()}};
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& sc = ds.scene(i);
    const std::string name = record_name(i);
    const std::string path = (fs::path(dir) / name).string();
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(os), ErrorKind::IoError, "cannot write " + path);
    write_f64(os, sc.factors.data(), sc.factors.size());
    for (const auto& layer : sc.features.layers) write_f64(os, layer.data(), layer.size());
    write_f64(os, sc.depth.data(), sc.depth.size());
    write_f64(os, sc.pose.data(), sc.pose.size());
    require(static_cast<bool>(os), ErrorKind::IoError, "write failed for " + path);
    manifest["scenes"].push_back(config::json{{"file", name}, {"seed", sc.seed}});
  }
  std::ofstream ms((fs::path(dir) / "manifest.json").string(), std::ios::trunc);
  require(static_cast<bool>(ms), ErrorKind::IoError, "cannot write manifest in " + dir);
  ms << manifest.dump(2) << "\n";
}

Dataset load_dataset(const std::string& dir) {
  const std::string mpath = (fs::path(dir) / "manifest.json").string();
  std::ifstream ms(mpath);
  require(static_cast<bool>(ms), ErrorKind::IoError, "cannot read " + mpath);
  config::json manifest;
  try {
    manifest = config::json::parse(ms);
  } catch (const config::json::exception& e) {
    fail(ErrorKind::IoError, "invalid manifest " + mpath + ": " + e.what());
  }
  require(manifest.value("format_version", 0) == kDatasetFormatVersion, ErrorKind::IoError,
          "unsupported dataset format in " + mpath);
  DataConfig cfg;
  std::uint64_t seed = 0;
  try {
    cfg = config::data_config_from_json(manifest.at("data"));
    seed = manifest.at("dataset_seed").get<std::uint64_t>();
  } catch (const config::json::exception& e) {
    fail(ErrorKind::IoError, "incomplete manifest " + mpath + ": " + e.what());
  }
  cfg.validate();
  const auto expected = record_floats(cfg) * sizeof(double);
  std::vector<SyntheticScene> scenes;
  for (const auto& entry : manifest.at("scenes")) {
    const std::string path = (fs::path(dir) / entry.at("file").get<std::string>()).string();
    std::error_code ec;
    const auto size = fs::file_size(path, ec);
    require(!ec && size == expected, ErrorKind::IoError,
            "record " + path + " has " + (ec ? std::string("no") : std::to_string(size)) + " bytes, expected " +
                std::to_string(expected));
    std::ifstream is(path, std::ios::binary);
    SyntheticScene sc;
    sc.seed = entry.at("seed").get<std::uint64_t>();
    sc.factors = Vec(cfg.n_factors);
    read_f64(is, sc.factors.data(), sc.factors.size(), path);
    for (std::size_t l = 0; l < cfg.layer_dims.size(); ++l) {
      Mat layer(cfg.tokens(), cfg.layer_dims[l]);
      read_f64(is, layer.data(), layer.size(), path);
      sc.features.layers.push_back(std::move(layer));
      sc.features.layer_radii.push_back(cfg.layer_radius_scale[l] * std::sqrt(static_cast<double>(cfg.layer_dims[l])));
    }
    sc.features.factors = sc.factors;
    sc.depth = Mat(cfg.depth_size, cfg.depth_size);
    read_f64(is, sc.depth.data(), sc.depth.size(), path);
    read_f64(is, sc.pose.data(), sc.pose.size(), path);
    scenes.push_back(std::move(sc));
  }
  require(scenes.size() == manifest.at("n_scenes").get<std::size_t>(), ErrorKind::IoError,
          "manifest scene count disagrees with its scene list");
  return Dataset(cfg, seed, std::move(scenes));
}

}  // namespace s2vae::data
