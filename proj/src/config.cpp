#include "s2vae/config.hpp"

#include <fstream>
#include <sstream>

#include "s2vae/error.hpp"

namespace s2vae::config {

namespace {

// Reads j[key] into `out` if present; type errors become ConfigError.
template <typename T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(ErrorKind::ConfigError, std::string("bad value for '") + key + "': " + e.what());
  }
}

void merge_strict(json& base, const json& patch, const std::string& path) {
  require(patch.is_object(), ErrorKind::ConfigError, "expected an object at '" + (path.empty() ? "<root>" : path) + "'");
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string key = path.empty() ? it.key() : path + "." + it.key();
    require(base.contains(it.key()), ErrorKind::ConfigError, "unknown config key '" + key + "'");
    json& slot = base[it.key()];
    if (slot.is_object()) {
      merge_strict(slot, it.value(), key);
    } else {
      slot = it.value();
    }
  }
}

}  // namespace

json to_json(const data::DataConfig& c) {
  return json{{"layer_dims", c.layer_dims},
              {"layer_radius_scale", c.layer_radius_scale},
              {"token_rows", c.token_rows},
              {"token_cols", c.token_cols},
              {"depth_size", c.depth_size},
              {"n_factors", c.n_factors},
              {"cv_target", c.cv_target},
              {"anisotropy_decay", c.anisotropy_decay},
              {"feature_noise", c.feature_noise},
              {"depth_noise", c.depth_noise},
              {"expansion_width", c.expansion_width},
              {"generator_seed", c.generator_seed}};
}

data::DataConfig data_config_from_json(const json& j) {
  data::DataConfig c;
  read(j, "layer_dims", c.layer_dims);
  read(j, "layer_radius_scale", c.layer_radius_scale);
  read(j, "token_rows", c.token_rows);
  read(j, "token_cols", c.token_cols);
  read(j, "depth_size", c.depth_size);
  read(j, "n_factors", c.n_factors);
  read(j, "cv_target", c.cv_target);
  read(j, "anisotropy_decay", c.anisotropy_decay);
  read(j, "feature_noise", c.feature_noise);
  read(j, "depth_noise", c.depth_noise);
  read(j, "expansion_width", c.expansion_width);
  read(j, "generator_seed", c.generator_seed);
  return c;
}

namespace {

json arch_json(const ArchConfig& a) {
  return json{{"n_layers", a.n_layers},
              {"n_heads", a.n_heads},
              {"hidden", a.hidden},
              {"n_spheres", a.n_spheres},
              {"sphere_dim", a.sphere_dim},
              {"kappa_init", a.kappa_init},
              {"n_register_tokens", a.n_register_tokens},
              {"learned_positions", a.learned_positions},
              {"input_layer_norm", a.input_layer_norm},
              {"ln_eps", a.ln_eps},
              {"bottleneck", a.bottleneck}};
}

ArchConfig arch_from_json(const json& j) {
  ArchConfig a;
  read(j, "n_layers", a.n_layers);
  read(j, "n_heads", a.n_heads);
  read(j, "hidden", a.hidden);
  read(j, "n_spheres", a.n_spheres);
  read(j, "sphere_dim", a.sphere_dim);
  read(j, "kappa_init", a.kappa_init);
  read(j, "n_register_tokens", a.n_register_tokens);
  read(j, "learned_positions", a.learned_positions);
  read(j, "input_layer_norm", a.input_layer_norm);
  read(j, "ln_eps", a.ln_eps);
  read(j, "bottleneck", a.bottleneck);
  return a;
}

ArchConfig arch_of(const nn::ModelConfig& c) {
  ArchConfig a;
  a.n_layers = c.n_layers;
  a.n_heads = c.n_heads;
  a.hidden = c.hidden;
  a.n_spheres = c.n_spheres;
  a.sphere_dim = c.sphere_dim;
  a.kappa_init = c.kappa_init;
  a.n_register_tokens = c.n_register_tokens;
  a.learned_positions = c.learned_positions;
  a.input_layer_norm = c.input_layer_norm;
  a.ln_eps = c.ln_eps;
  a.bottleneck = nn::to_string(c.bottleneck);
  return a;
}

nn::ModelConfig model_of(const ArchConfig& a, std::vector<int> layer_dims, int tokens) {
  nn::ModelConfig c;
  c.layer_dims = std::move(layer_dims);
  c.tokens = tokens;
  c.n_layers = a.n_layers;
  c.n_heads = a.n_heads;
  c.hidden = a.hidden;
  c.n_spheres = a.n_spheres;
  c.sphere_dim = a.sphere_dim;
  c.kappa_init = a.kappa_init;
  c.n_register_tokens = a.n_register_tokens;
  c.learned_positions = a.learned_positions;
  c.input_layer_norm = a.input_layer_norm;
  c.ln_eps = a.ln_eps;
  c.bottleneck = nn::bottleneck_from_string(a.bottleneck);
  return c;
}

json loss_json(const loss::LossWeights& w) {
  return json{{"w_mse", w.w_mse},       {"w_sim", w.w_sim},         {"w_gram", w.w_gram},
              {"w_var", w.w_var},       {"w_norm", w.w_norm},       {"w_kl", w.w_kl},
              {"w_camera", w.w_camera}, {"w_depth", w.w_depth},     {"alpha_reg", w.alpha_reg},
              {"huber_eps", w.huber_eps}};
}

loss::LossWeights loss_from_json(const json& j) {
  loss::LossWeights w;
  read(j, "w_mse", w.w_mse);
  read(j, "w_sim", w.w_sim);
  read(j, "w_gram", w.w_gram);
  read(j, "w_var", w.w_var);
  read(j, "w_norm", w.w_norm);
  read(j, "w_kl", w.w_kl);
  read(j, "w_camera", w.w_camera);
  read(j, "w_depth", w.w_depth);
  read(j, "alpha_reg", w.alpha_reg);
  read(j, "huber_eps", w.huber_eps);
  return w;
}

json train_json(const train::TrainConfig& t) {
  return json{{"steps", t.steps},
              {"batch_size", t.batch_size},
              {"peak_lr", t.peak_lr},
              {"warmup_frac", t.warmup_frac},
              {"beta1", t.adam.beta1},
              {"beta2", t.adam.beta2},
              {"adam_eps", t.adam.eps},
              {"weight_decay", t.adam.weight_decay},
              {"grad_clip", t.grad_clip},
              {"eval_every", t.eval_every},
              {"checkpoint_every", t.checkpoint_every},
              {"head_hidden", t.head_hidden},
              {"kappa_max", t.kappa_max},
              {"eval_batch", t.eval_batch},
              {"stop_after", t.stop_after}};
}

train::TrainConfig train_from_json(const json& j) {
  train::TrainConfig t;
  read(j, "steps", t.steps);
  read(j, "batch_size", t.batch_size);
  read(j, "peak_lr", t.peak_lr);
  read(j, "warmup_frac", t.warmup_frac);
  read(j, "beta1", t.adam.beta1);
  read(j, "beta2", t.adam.beta2);
  read(j, "adam_eps", t.adam.eps);
  read(j, "weight_decay", t.adam.weight_decay);
  read(j, "grad_clip", t.grad_clip);
  read(j, "eval_every", t.eval_every);
  read(j, "checkpoint_every", t.checkpoint_every);
  read(j, "head_hidden", t.head_hidden);
  read(j, "kappa_max", t.kappa_max);
  read(j, "eval_batch", t.eval_batch);
  read(j, "stop_after", t.stop_after);
  return t;
}

json diagnose_json(const DiagnoseConfig& d) {
  return json{{"n_latents", d.n_latents},
              {"active_threshold", d.active_threshold},
              {"mi_bins", d.mi_bins},
              {"probe_steps", d.probe_steps},
              {"probe_hidden", d.probe_hidden},
              {"probe_lr", d.probe_lr},
              {"slerp_steps", d.slerp_steps},
              {"lipschitz_pairs", d.lipschitz_pairs},
              {"lipschitz_radius", d.lipschitz_radius},
              {"lipschitz_kl_weights", d.lipschitz_kl_weights},
              {"lipschitz_steps", d.lipschitz_steps},
              {"scene_a", d.scene_a},
              {"scene_b", d.scene_b}};
}

DiagnoseConfig diagnose_from_json(const json& j) {
  DiagnoseConfig d;
  read(j, "n_latents", d.n_latents);
  read(j, "active_threshold", d.active_threshold);
  read(j, "mi_bins", d.mi_bins);
  read(j, "probe_steps", d.probe_steps);
  read(j, "probe_hidden", d.probe_hidden);
  read(j, "probe_lr", d.probe_lr);
  read(j, "slerp_steps", d.slerp_steps);
  read(j, "lipschitz_pairs", d.lipschitz_pairs);
  read(j, "lipschitz_radius", d.lipschitz_radius);
  read(j, "lipschitz_kl_weights", d.lipschitz_kl_weights);
  read(j, "lipschitz_steps", d.lipschitz_steps);
  read(j, "scene_a", d.scene_a);
  read(j, "scene_b", d.scene_b);
  return d;
}

}  // namespace

json to_json(const nn::ModelConfig& c) {
  json j{{"layer_dims", c.layer_dims}, {"tokens", c.tokens}};
  for (auto& [k, v] : arch_json(arch_of(c)).items()) j[k] = v;
  return j;
}

nn::ModelConfig model_config_from_json(const json& j) {
  std::vector<int> dims{128, 128};
  int tokens = 32;
  read(j, "layer_dims", dims);
  read(j, "tokens", tokens);
  auto c = model_of(arch_from_json(j), std::move(dims), tokens);
  c.validate();
  return c;
}

nn::ModelConfig RunConfig::model_config() const { return model_of(model, data.layer_dims, data.tokens()); }

std::uint64_t RunConfig::dataset_seed() const { return dataset.seed != 0 ? dataset.seed : Rng::mix(seed, 0xDA7A); }

void RunConfig::validate() const {
  data.validate();
  require(dataset.n_scenes >= 1, ErrorKind::ConfigError, "dataset.n_scenes must be >= 1");
  model_config().validate();
  loss.validate();
  train.validate();
  require(diagnose.n_latents >= 2 && diagnose.mi_bins >= 1 && diagnose.probe_steps >= 1 && diagnose.probe_hidden >= 1 &&
              diagnose.slerp_steps >= 2 && diagnose.lipschitz_pairs >= 1 && diagnose.lipschitz_radius > 0.0 &&
              diagnose.lipschitz_steps >= 1 && diagnose.probe_lr > 0.0,
          ErrorKind::ConfigError, "invalid diagnose settings");
  require(!out_dir.empty(), ErrorKind::ConfigError, "out_dir must not be empty");
}

json to_json(const RunConfig& c) {
  return json{{"data", to_json(c.data)},
              {"dataset", json{{"n_scenes", c.dataset.n_scenes}, {"seed", c.dataset.seed}, {"dir", c.dataset.dir}}},
              {"model", arch_json(c.model)},
              {"loss", loss_json(c.loss)},
              {"train", train_json(c.train)},
              {"diagnose", diagnose_json(c.diagnose)},
              {"seed", c.seed},
              {"out_dir", c.out_dir}};
}

RunConfig from_json(const json& j) {
  json doc = to_json(RunConfig{});
  merge_strict(doc, j, "");
  RunConfig c;
  c.data = data_config_from_json(doc["data"]);
  read(doc["dataset"], "n_scenes", c.dataset.n_scenes);
  read(doc["dataset"], "seed", c.dataset.seed);
  read(doc["dataset"], "dir", c.dataset.dir);
  c.model = arch_from_json(doc["model"]);
  c.loss = loss_from_json(doc["loss"]);
  c.train = train_from_json(doc["train"]);
  c.diagnose = diagnose_from_json(doc["diagnose"]);
  read(doc, "seed", c.seed);
  read(doc, "out_dir", c.out_dir);
  return c;
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  require(eq != std::string::npos && eq > 0, ErrorKind::ConfigError, "override must look like key=value: " + assignment);
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  json* node = &doc;
  std::stringstream ss(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->contains(parts[i])) (*node)[parts[i]] = json::object();
    node = &(*node)[parts[i]];
    require(node->is_object(), ErrorKind::ConfigError, "override path '" + key + "' crosses a non-object");
  }
  (*node)[parts.back()] = value;
}

RunConfig resolve(const std::string& path, const std::vector<std::string>& overrides) {
  json doc = json::object();
  if (!path.empty()) {
    std::ifstream is(path);
    require(static_cast<bool>(is), ErrorKind::IoError, "cannot read config " + path);
    try {
      doc = json::parse(is);
    } catch (const json::exception& e) {
      fail(ErrorKind::ConfigError, "invalid JSON in " + path + ": " + e.what());
    }
  }
  for (const auto& o : overrides) apply_override(doc, o);
  RunConfig c = from_json(doc);
  c.validate();
  return c;
}

RunConfig smoke_config() {
  RunConfig c;
  c.data.layer_dims = {64, 64};
  c.data.layer_radius_scale = {1.0, 1.5};
  c.data.expansion_width = 48;
  c.dataset.n_scenes = 64;
  c.model.n_layers = 2;
  c.model.n_heads = 4;
  c.model.hidden = 64;
  c.model.n_spheres = 8;
  c.model.sphere_dim = 4;
  c.train.steps = 200;
  c.train.batch_size = 8;
  c.train.peak_lr = 1e-3;
  c.train.eval_every = 50;
  c.train.head_hidden = 32;
  c.out_dir = "runs/smoke";
  return c;
}

RunConfig desk_config() {
  RunConfig c;
  c.data.layer_dims = {256, 256};
  c.data.layer_radius_scale = {1.0, 1.5};
  c.dataset.n_scenes = 256;
  c.model.n_layers = 4;
  c.model.n_heads = 4;
  c.model.hidden = 128;
  c.model.n_spheres = 8;
  c.model.sphere_dim = 4;
  c.train.steps = 600;
  c.train.batch_size = 16;
  c.train.peak_lr = 3e-4;
  c.train.eval_every = 100;
  c.out_dir = "runs/desk";
  return c;
}

std::string dump(const RunConfig& c) { return to_json(c).dump(2) + "\n"; }

}  // namespace s2vae::config
