#include "s2vae/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "s2vae/error.hpp"

namespace s2vae::nn {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'S', '2', 'V', 'A', 'E', 'C', 'K', 'P'};

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is, const std::string& path) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  require(static_cast<bool>(is), ErrorKind::IoError, "truncated checkpoint " + path);
  return v;
}

std::string get_string(std::istream& is, std::uint64_t n, const std::string& path) {
  require(n < (1ULL << 32), ErrorKind::IoError, "implausible string length in " + path);
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  require(static_cast<bool>(is), ErrorKind::IoError, "truncated checkpoint " + path);
  return s;
}

}  // namespace

void write_checkpoint(const std::string& path, const Checkpoint& ckp) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(os), ErrorKind::IoError, "cannot open " + path + " for writing");
  os.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(os, ckp.version);
  put<std::uint64_t>(os, ckp.config_json.size());
  os.write(ckp.config_json.data(), static_cast<std::streamsize>(ckp.config_json.size()));
  put<std::uint64_t>(os, ckp.params.size());
  for (const auto& [name, m] : ckp.params) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint64_t>(os, static_cast<std::uint64_t>(m.rows()));
    put<std::uint64_t>(os, static_cast<std::uint64_t>(m.cols()));
    os.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
  }
  require(static_cast<bool>(os), ErrorKind::IoError, "write failed for " + path);
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), ErrorKind::IoError, "cannot open " + path);
  char magic[8];
  is.read(magic, sizeof magic);
  require(is && std::memcmp(magic, kMagic, sizeof magic) == 0, ErrorKind::IoError, path + " is not a checkpoint");
  Checkpoint ckp;
  ckp.version = get<std::uint32_t>(is, path);
  require(ckp.version == kCheckpointVersion, ErrorKind::IoError,
          "unsupported checkpoint version " + std::to_string(ckp.version));
  ckp.config_json = get_string(is, get<std::uint64_t>(is, path), path);
  const auto count = get<std::uint64_t>(is, path);
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string name = get_string(is, get<std::uint32_t>(is, path), path);
    const auto rows = get<std::uint64_t>(is, path);
    const auto cols = get<std::uint64_t>(is, path);
    require(rows < (1ULL << 28) && cols < (1ULL << 28), ErrorKind::IoError, "implausible shape for " + name);
    Mat m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    is.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
    require(static_cast<bool>(is), ErrorKind::IoError, "truncated data for " + name);
    ckp.params.emplace_back(std::move(name), std::move(m));
  }
  return ckp;
}

Checkpoint snapshot(const ParamStore& store, std::string config_json) {
  Checkpoint ckp;
  ckp.config_json = std::move(config_json);
  for (const auto& [name, t] : store.entries()) ckp.params.emplace_back(name, t.value());
  return ckp;
}

void restore(ParamStore& store, const Checkpoint& ckp) {
  const auto& entries = store.entries();
  require(entries.size() == ckp.params.size(), ErrorKind::ConfigMismatch,
          "checkpoint holds " + std::to_string(ckp.params.size()) + " arrays, model has " +
              std::to_string(entries.size()));
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& [name, m] = ckp.params[i];
    Tensor t = entries[i].second;
    require(name == entries[i].first, ErrorKind::ConfigMismatch,
            "checkpoint array '" + name + "' where model expects '" + entries[i].first + "'");
    require(m.rows() == t.rows() && m.cols() == t.cols(), ErrorKind::ConfigMismatch, "shape mismatch for " + name);
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    Tensor t = entries[i].second;
    t.mutable_value() = ckp.params[i].second;
  }
}

}  // namespace s2vae::nn
