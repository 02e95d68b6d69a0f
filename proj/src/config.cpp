#include "clue/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace clue {

using nlohmann::json;

namespace {

json mix_json(const std::array<double, 4>& mix) {
  json j;
  for (std::size_t i = 0; i < 4; ++i) j[to_string(kAllKinds[i])] = mix[i];
  return j;
}

// Shortest decimal that reads back as the same float, so 1e-3f prints as 0.001.
double shortest(float v) {
  char buf[32];
  for (int digits = 6; digits < 9; ++digits) {
    std::snprintf(buf, sizeof buf, "%.*g", digits, static_cast<double>(v));
    if (std::strtof(buf, nullptr) == v) return std::strtod(buf, nullptr);
  }
  std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(v));
  return std::strtod(buf, nullptr);
}

json lora_json(const LoraConfig& l) { return {{"rank", l.rank}, {"alpha", shortest(l.alpha)}}; }

void check_keys(const json& user, const json& reference, const std::string& path) {
  if (!user.is_object()) return;
  for (const auto& [key, value] : user.items()) {
    const std::string where = path.empty() ? key : path + "." + key;
    if (!reference.contains(key)) throw ConfigError("unknown config key '" + where + "'");
    if (value.is_object() && reference[key].is_object()) check_keys(value, reference[key], where);
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("train.epochs must be non-negative");
  if (batch_size <= 0) throw ConfigError("train.batch_size must be positive");
  if (!(val_fraction >= 0 && val_fraction < 1))
    throw ConfigError("train.val_fraction must lie in [0, 1)");
}

void ExperimentConfig::validate() const {
  data.validate();
  model.validate();
  loss.validate();
  optimizer.validate();
  train.validate();
  if (!(threshold > 0 && threshold < 1)) throw ConfigError("threshold must lie in (0, 1)");
  if (data.height % model.latent.downsample_factor != 0 ||
      data.width % model.latent.downsample_factor != 0)
    throw ConfigError("image size must be divisible by the latent downsample factor");
  if (data.height % model.semantic.patch_size != 0 || data.width % model.semantic.patch_size != 0)
    throw ConfigError("image size must be divisible by the semantic patch size");
  if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
}

json ExperimentConfig::to_json() const {
  json j;
  j["seed"] = seed;
  j["threshold"] = threshold;
  j["output_dir"] = output_dir;

  json splits = json::array();
  for (const auto& s : data.splits) splits.push_back({{"name", s.name}, {"count", s.count}});
  j["data"] = {{"splits", splits},
               {"height", data.height},
               {"width", data.width},
               {"mix", mix_json(data.mix)},
               {"seed", data.seed}};

  const auto& m = model;
  j["model"] = {
      {"latent",
       {{"in_channels", m.latent.in_channels},
        {"latent_channels", m.latent.latent_channels},
        {"downsample_factor", m.latent.downsample_factor},
        {"weights_seed", m.latent.weights_seed}}},
      {"denoiser",
       {{"width", m.denoiser.width},
        {"depth", m.denoiser.depth},
        {"time_embed_dim", m.denoiser.time_embed_dim},
        {"out_channels", m.denoiser.out_channels},
        {"tap_layer", m.denoiser.tap_layer},
        {"mlp_ratio", m.denoiser.mlp_ratio},
        {"weights_seed", m.denoiser.weights_seed}}},
      {"semantic",
       {{"patch_size", m.semantic.patch_size},
        {"embed_dim", m.semantic.embed_dim},
        {"depth", m.semantic.depth},
        {"out_channels", m.semantic.out_channels},
        {"mlp_ratio", m.semantic.mlp_ratio},
        {"weights_seed", m.semantic.weights_seed}}},
      {"fusion",
       {{"proj_channels", m.fusion.proj_channels},
        {"fuse_channels", m.fusion.fuse_channels},
        {"groupnorm_groups", m.fusion.groupnorm_groups}}},
      {"head", {{"mid_channels", m.head.mid_channels}, {"upsample_scale", m.head.upsample_scale}}},
      {"noise",
       {{"mechanism", to_string(m.noise.mechanism)},
        {"shift", m.noise.shift},
        {"levels", m.noise.levels},
        {"seed", m.noise.seed}}},
      {"lora", {{"denoiser", lora_json(m.lora_denoiser)}, {"semantic", lora_json(m.lora_semantic)}}},
      {"branches", {{"denoiser", to_string(m.denoiser_mode)}, {"semantic", to_string(m.semantic_mode)}}},
      {"init_seed", m.init_seed}};

  j["loss"] = {{"lambda_bce", shortest(loss.lambda_bce)},
               {"lambda_dice", shortest(loss.lambda_dice)},
               {"epsilon_smooth", shortest(loss.epsilon_smooth)}};
  j["optimizer"] = {{"kind", "adam"},
                    {"lr", shortest(optimizer.lr)},
                    {"beta1", shortest(optimizer.beta1)},
                    {"beta2", shortest(optimizer.beta2)},
                    {"eps", shortest(optimizer.eps)},
                    {"weight_decay", shortest(optimizer.weight_decay)}};
  j["train"] = {{"epochs", train.epochs},
                {"batch_size", train.batch_size},
                {"val_fraction", train.val_fraction},
                {"augment", train.augment}};
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig c;
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");
  check_keys(j, c.to_json(), "");

  read(j, "seed", c.seed);
  read(j, "threshold", c.threshold);
  read(j, "output_dir", c.output_dir);

  if (j.contains("data")) {
    const json& d = j["data"];
    if (d.contains("splits")) {
      if (!d["splits"].is_array()) throw ConfigError("data.splits must be an array");
      c.data.splits.clear();
      for (const auto& s : d["splits"]) {
        SplitSpec sp;
        read(s, "name", sp.name);
        read(s, "count", sp.count);
        if (sp.name.empty()) throw ConfigError("data.splits entries need a name");
        c.data.splits.push_back(sp);
      }
    }
    read(d, "height", c.data.height);
    read(d, "width", c.data.width);
    read(d, "seed", c.data.seed);
    if (d.contains("mix")) {
      check_keys(d["mix"], mix_json(c.data.mix), "data.mix");
      for (std::size_t i = 0; i < 4; ++i) read(d["mix"], to_string(kAllKinds[i]).c_str(), c.data.mix[i]);
    }
  }

  if (j.contains("model")) {
    const json& m = j["model"];
    auto& mc = c.model;
    if (m.contains("latent")) {
      const json& x = m["latent"];
      read(x, "in_channels", mc.latent.in_channels);
      read(x, "latent_channels", mc.latent.latent_channels);
      read(x, "downsample_factor", mc.latent.downsample_factor);
      read(x, "weights_seed", mc.latent.weights_seed);
    }
    if (m.contains("denoiser")) {
      const json& x = m["denoiser"];
      read(x, "width", mc.denoiser.width);
      read(x, "depth", mc.denoiser.depth);
      read(x, "time_embed_dim", mc.denoiser.time_embed_dim);
      read(x, "out_channels", mc.denoiser.out_channels);
      read(x, "tap_layer", mc.denoiser.tap_layer);
      read(x, "mlp_ratio", mc.denoiser.mlp_ratio);
      read(x, "weights_seed", mc.denoiser.weights_seed);
    }
    if (m.contains("semantic")) {
      const json& x = m["semantic"];
      read(x, "patch_size", mc.semantic.patch_size);
      read(x, "embed_dim", mc.semantic.embed_dim);
      read(x, "depth", mc.semantic.depth);
      read(x, "out_channels", mc.semantic.out_channels);
      read(x, "mlp_ratio", mc.semantic.mlp_ratio);
      read(x, "weights_seed", mc.semantic.weights_seed);
    }
    if (m.contains("fusion")) {
      const json& x = m["fusion"];
      read(x, "proj_channels", mc.fusion.proj_channels);
      read(x, "fuse_channels", mc.fusion.fuse_channels);
      read(x, "groupnorm_groups", mc.fusion.groupnorm_groups);
    }
    if (m.contains("head")) {
      read(m["head"], "mid_channels", mc.head.mid_channels);
      read(m["head"], "upsample_scale", mc.head.upsample_scale);
    }
    if (m.contains("noise")) {
      const json& x = m["noise"];
      if (x.contains("mechanism")) {
        std::string mech;
        read(x, "mechanism", mech);
        try {
          mc.noise.mechanism = noise_mechanism_from_string(mech);
        } catch (const std::exception& e) {
          throw ConfigError(e.what());
        }
      }
      read(x, "shift", mc.noise.shift);
      read(x, "levels", mc.noise.levels);
      read(x, "seed", mc.noise.seed);
    }
    if (m.contains("lora")) {
      for (auto [key, target] : {std::pair{"denoiser", &mc.lora_denoiser},
                                 std::pair{"semantic", &mc.lora_semantic}}) {
        if (!m["lora"].contains(key)) continue;
        read(m["lora"][key], "rank", target->rank);
        read(m["lora"][key], "alpha", target->alpha);
      }
    }
    if (m.contains("branches")) {
      std::string mode;
      if (m["branches"].contains("denoiser")) {
        read(m["branches"], "denoiser", mode);
        mc.denoiser_mode = branch_mode_from_string(mode);
      }
      if (m["branches"].contains("semantic")) {
        read(m["branches"], "semantic", mode);
        mc.semantic_mode = branch_mode_from_string(mode);
      }
    }
    read(m, "init_seed", mc.init_seed);
  }

  if (j.contains("loss")) {
    read(j["loss"], "lambda_bce", c.loss.lambda_bce);
    read(j["loss"], "lambda_dice", c.loss.lambda_dice);
    read(j["loss"], "epsilon_smooth", c.loss.epsilon_smooth);
  }
  if (j.contains("optimizer")) {
    const json& o = j["optimizer"];
    std::string kind = "adam";
    read(o, "kind", kind);
    if (kind != "adam") throw ConfigError("optimizer.kind must be 'adam'");
    read(o, "lr", c.optimizer.lr);
    read(o, "beta1", c.optimizer.beta1);
    read(o, "beta2", c.optimizer.beta2);
    read(o, "eps", c.optimizer.eps);
    read(o, "weight_decay", c.optimizer.weight_decay);
  }
  if (j.contains("train")) {
    const json& t = j["train"];
    read(t, "epochs", c.train.epochs);
    read(t, "batch_size", c.train.batch_size);
    read(t, "val_fraction", c.train.val_fraction);
    read(t, "augment", c.train.augment);
  }
  c.validate();
  return c;
}

std::uint64_t ExperimentConfig::hash() const {
  json j = to_json();
  j.erase("output_dir");
  j["train"].erase("epochs");
  const std::string s = j.dump();
  return fnv1a(std::as_bytes(std::span<const char>(s.data(), s.size())));
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return ExperimentConfig::from_json(j);
}

void save_config(const ExperimentConfig& cfg, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path);
  if (!f) throw FormatError("cannot write " + path.string());
  f << cfg.to_json().dump(2) << '\n';
}

void apply_override(ExperimentConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("override '" + assignment + "' must look like key.path=value");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::exception&) {
    value = raw;
  }
  json j = cfg.to_json();
  json* node = &j;
  std::stringstream ss(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const std::string& p = parts[i];
    if (node->is_array()) {
      char* end = nullptr;
      const long idx = std::strtol(p.c_str(), &end, 10);
      if (*end != '\0' || idx < 0 || static_cast<std::size_t>(idx) >= node->size())
        throw ConfigError("override key '" + key + "': bad index '" + p + "'");
      node = &(*node)[static_cast<std::size_t>(idx)];
    } else {
      if (!node->is_object() || !node->contains(p))
        throw ConfigError("unknown config key '" + key + "'");
      node = &(*node)[p];
    }
  }
  *node = value;
  cfg = ExperimentConfig::from_json(j);
}

std::filesystem::path resolve_output(const std::string& path) {
  std::filesystem::path p(path);
  if (p.is_absolute()) return p;
  if (const char* root = std::getenv("CLUE_OUTPUT_ROOT"); root != nullptr && *root != '\0')
    return std::filesystem::path(root) / p;
  return p;
}

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace clue
