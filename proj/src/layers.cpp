#include "s2vae/layers.hpp"

#include <cmath>

#include "s2vae/error.hpp"

namespace s2vae::nn {

Tensor ParamStore::add(const std::string& name, Mat init) {
  require(!contains(name), ErrorKind::ConfigError, "duplicate parameter name " + name);
  Tensor t = Tensor::parameter(std::move(init));
  entries_.emplace_back(name, t);
  return t;
}

Tensor ParamStore::get(const std::string& name) const {
  for (const auto& [n, t] : entries_) {
    if (n == name) return t;
  }
  fail(ErrorKind::ConfigError, "unknown parameter " + name);
}

bool ParamStore::contains(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.first == name) return true;
  }
  return false;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += static_cast<std::size_t>(e.second.value().size());
  return n;
}

void ParamStore::zero_grad() const {
  for (const auto& e : entries_) e.second.zero_grad();
}

Mat fan_in_uniform(Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = (2.0 * rng.uniform() - 1.0) * bound;
  return m;
}

Linear::Linear(ParamStore& store, const std::string& name, Eigen::Index in, Eigen::Index out, Rng& rng) {
  w = store.add(name + ".w", fan_in_uniform(in, out, in, rng));
  b = store.add(name + ".b", fan_in_uniform(1, out, in, rng));
}

LayerNormAffine::LayerNormAffine(ParamStore& store, const std::string& name, Eigen::Index width, double eps_)
    : eps(eps_) {
  gain = store.add(name + ".gain", Mat::Ones(1, width));
  bias = store.add(name + ".bias", Mat::Zero(1, width));
}

Tensor LayerNormAffine::operator()(const Tensor& x) const { return add(mul(layer_norm(x, eps), gain), bias); }

GatedProjection::GatedProjection(ParamStore& store, const std::string& name, Eigen::Index in, Eigen::Index out,
                                 Rng& rng)
    : gate(store, name + ".gate", in, out, rng), value(store, name + ".value", in, out, rng) {}

Tensor GatedProjection::operator()(const Tensor& x) const { return mul(sigmoid(gate(x)), value(x)); }

AttentionBlock::AttentionBlock(ParamStore& store, const std::string& name, Eigen::Index hidden, int heads_,
                               double eps, Rng& rng)
    : ln1(store, name + ".ln1", hidden, eps),
      qkv(store, name + ".qkv", hidden, 3 * hidden, rng),
      proj(store, name + ".proj", hidden, hidden, rng),
      ln2(store, name + ".ln2", hidden, eps),
      fc1(store, name + ".fc1", hidden, 4 * hidden, rng),
      fc2(store, name + ".fc2", 4 * hidden, hidden, rng),
      heads(heads_) {}

Tensor AttentionBlock::operator()(const Tensor& x, Eigen::Index group) const {
  const Tensor a = proj(attention(qkv(ln1(x)), group, heads));
  const Tensor h = add(x, a);
  return add(h, fc2(gelu(fc1(ln2(h)))));
}

Mlp2::Mlp2(ParamStore& store, const std::string& name, Eigen::Index in, Eigen::Index hidden, Eigen::Index out,
           Rng& rng)
    : fc1(store, name + ".fc1", in, hidden, rng), fc2(store, name + ".fc2", hidden, out, rng) {}

}  // namespace s2vae::nn
