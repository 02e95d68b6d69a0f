#include "clue/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace clue {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'C', 'L', 'U', 'E', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

struct Entry {
  std::string name;
  const Tensor* tensor;
};

void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t read_uint(std::istream& is, int bytes, const std::filesystem::path& path) {
  unsigned char b[8] = {};
  if (!is.read(reinterpret_cast<char*>(b), bytes)) throw FormatError("truncated checkpoint " + path.string());
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

void write_floats(std::ostream& os, const Tensor& t) {
  for (float f : t.values()) {
    std::uint32_t u;
    std::memcpy(&u, &f, 4);
    write_u32(os, u);
  }
}

json read_header(std::ifstream& f, const std::filesystem::path& path) {
  if (!f) throw FormatError("cannot open checkpoint " + path.string());
  char magic[8];
  if (!f.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0)
    throw FormatError(path.string() + " is not a checkpoint");
  const auto version = read_uint(f, 4, path);
  if (version != kVersion)
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  const auto size = read_uint(f, 8, path);
  std::string text(size, '\0');
  if (!f.read(text.data(), static_cast<std::streamsize>(size)))
    throw FormatError("truncated checkpoint header in " + path.string());
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError("corrupt checkpoint header: " + std::string(e.what()));
  }
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ExperimentConfig& cfg,
                     const ClueModel& model, const Adam* optimizer, const TrainState& state) {
  const ParamStore& store = model.store();
  std::vector<Entry> entries;
  for (ParamId id = 0; id < store.size(); ++id) entries.push_back({store[id].name, &store[id].value});
  if (optimizer != nullptr) {
    for (ParamId id = 0; id < store.size(); ++id) {
      const auto i = static_cast<std::size_t>(id);
      if (optimizer->first_moments()[i].size() == 0) continue;
      entries.push_back({"adam.m." + store[id].name, &optimizer->first_moments()[i]});
      entries.push_back({"adam.v." + store[id].name, &optimizer->second_moments()[i]});
    }
  }
  json table = json::array();
  for (const auto& e : entries) table.push_back({{"name", e.name}, {"shape", e.tensor->shape()}});
  std::ostringstream rng_state;
  rng_state << state.order_rng;
  json header = {{"config", cfg.to_json()},
                 {"config_hash", hex64(cfg.hash())},
                 {"epoch", state.epoch},
                 {"best_val_f1", state.best_val_f1},
                 {"optimizer_steps", optimizer != nullptr ? optimizer->steps() : 0},
                 {"rng_state", rng_state.str()},
                 {"tensors", table}};
  const std::string text = header.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary);
    if (!f) throw FormatError("cannot write checkpoint " + path.string());
    f.write(kMagic, 8);
    write_u32(f, kVersion);
    write_u64(f, text.size());
    f.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& e : entries) write_floats(f, *e.tensor);
    if (!f) throw FormatError("failed writing checkpoint " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

CheckpointInfo read_checkpoint_info(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  const json header = read_header(f, path);
  CheckpointInfo info;
  info.config = ExperimentConfig::from_json(header.at("config"));
  info.config_hash = std::stoull(header.at("config_hash").get<std::string>(), nullptr, 16);
  info.epoch = header.at("epoch").get<int>();
  info.best_val_f1 = header.at("best_val_f1").get<double>();
  return info;
}

void load_checkpoint(const std::filesystem::path& path, const ExperimentConfig& cfg,
                     ClueModel& model, Adam* optimizer, TrainState* state) {
  std::ifstream f(path, std::ios::binary);
  const json header = read_header(f, path);
  const std::string stored = header.at("config_hash").get<std::string>();
  if (stored != hex64(cfg.hash()))
    throw FormatError("checkpoint " + path.string() + " was written for config " + stored +
                      ", current config is " + hex64(cfg.hash()) + "; refusing to load");

  ParamStore& store = model.store();
  std::vector<bool> seen(static_cast<std::size_t>(store.size()), false);
  for (const auto& e : header.at("tensors")) {
    const auto name = e.at("name").get<std::string>();
    const auto shape = e.at("shape").get<std::vector<int>>();
    Tensor t(shape);
    for (float& v : t.values()) {
      const auto u = static_cast<std::uint32_t>(read_uint(f, 4, path));
      std::memcpy(&v, &u, 4);
    }
    Tensor* target = nullptr;
    std::string param = name;
    int slot = 0;
    if (name.rfind("adam.m.", 0) == 0) {
      param = name.substr(7);
      slot = 1;
    } else if (name.rfind("adam.v.", 0) == 0) {
      param = name.substr(7);
      slot = 2;
    }
    if (!store.contains(param)) throw FormatError("checkpoint tensor '" + name + "' has no counterpart");
    const ParamId id = store.id(param);
    const auto i = static_cast<std::size_t>(id);
    if (slot == 0) {
      target = &store[id].value;
      seen[i] = true;
    } else if (optimizer != nullptr) {
      target = slot == 1 ? &optimizer->first_moments()[i] : &optimizer->second_moments()[i];
    } else {
      continue;
    }
    if (target->shape() != shape)
      throw FormatError("checkpoint tensor '" + name + "' has shape " + shape_str(shape) +
                        ", expected " + shape_str(target->shape()));
    *target = std::move(t);
  }
  for (ParamId id = 0; id < store.size(); ++id)
    if (!seen[static_cast<std::size_t>(id)])
      throw FormatError("checkpoint lacks parameter '" + store[id].name + "'");
  if (optimizer != nullptr) optimizer->set_steps(header.at("optimizer_steps").get<long long>());
  if (state != nullptr) {
    state->epoch = header.at("epoch").get<int>();
    state->best_val_f1 = header.at("best_val_f1").get<double>();
    std::istringstream is(header.at("rng_state").get<std::string>());
    is >> state->order_rng;
    if (!is) throw FormatError("corrupt RNG state in checkpoint");
  }
}

}  // namespace clue
