#include "clue/backbones.hpp"

#include <cmath>
#include <numbers>

namespace clue {
namespace {

LinearRef make_linear(ParamStore& store, const std::string& name, int d_in, int d_out,
                      bool trainable, std::mt19937_64& rng) {
  LinearRef ref;
  ref.name = name;
  ref.d_in = d_in;
  ref.d_out = d_out;
  ref.weight = store.add(name + ".weight",
                         normal_tensor({d_out, d_in}, 1.0f / std::sqrt(float(d_in)), rng),
                         trainable);
  ref.bias = store.add(name + ".bias", Tensor({d_out}), trainable);
  return ref;
}

void append(std::vector<ParamId>& ids, const LinearRef& ref) {
  ids.push_back(ref.weight);
  ids.push_back(ref.bias);
}

constexpr float kDetailGain = 12.0f;
constexpr double kPatchDcGain = 0.25;
constexpr double kPatchAcGain = 3.0;

// Fixed patch filters: 2-D DCT basis functions. Even filters are luminance
// and step through the whole frequency range; odd filters alternate between
// two opponent colour axes at the lowest frequencies. Gain is kPatchDcGain
// for the DC term and kPatchAcGain·(1 + u + v) otherwise.
Tensor dct_patch_bank(int count, int in_channels, int p) {
  std::vector<std::pair<int, int>> freqs;
  for (int s = 0; s <= 2 * (p - 1); ++s)
    for (int u = 0; u < p; ++u)
      if (s - u >= 0 && s - u < p) freqs.emplace_back(u, s - u);
  const auto nf = static_cast<int>(freqs.size());
  std::vector<float> lum(static_cast<std::size_t>(in_channels), 1.0f / std::sqrt(float(in_channels)));
  std::vector<float> opp1(static_cast<std::size_t>(in_channels), 0.0f), opp2 = opp1;
  if (in_channels >= 3) {
    opp1[0] = 1.0f / std::sqrt(2.0f);
    opp1[1] = -opp1[0];
    opp2[0] = opp2[1] = 1.0f / std::sqrt(6.0f);
    opp2[2] = -2.0f / std::sqrt(6.0f);
  } else {
    opp1 = opp2 = lum;
  }
  Tensor w({count, in_channels, p, p});
  for (int j = 0; j < count; ++j) {
    const bool is_lum = j % 2 == 0;
    const auto [u, v] = freqs[static_cast<std::size_t>(is_lum ? j % nf : (j / 4) % nf)];
    const auto& col = is_lum ? lum : (j % 4 == 1 ? opp1 : opp2);
    const double gain = (u + v == 0) ? kPatchDcGain : kPatchAcGain * (1.0 + u + v);
    for (int y = 0; y < p; ++y)
      for (int x = 0; x < p; ++x) {
        const double cu = (u == 0 ? std::sqrt(1.0 / p) : std::sqrt(2.0 / p)) *
                          std::cos(std::numbers::pi * (2 * y + 1) * u / (2.0 * p));
        const double cv = (v == 0 ? std::sqrt(1.0 / p) : std::sqrt(2.0 / p)) *
                          std::cos(std::numbers::pi * (2 * x + 1) * v / (2.0 * p));
        for (int ch = 0; ch < in_channels; ++ch)
          w[static_cast<std::size_t>(((j * in_channels + ch) * p + y) * p + x)] =
              static_cast<float>(gain * cu * cv * col[static_cast<std::size_t>(ch)]);
      }
  }
  return w;
}

// Maps [0,1] pixels to [-1,1].
ImageTensor centered(const ImageTensor& image) {
  ImageTensor out = image;
  for (float& v : out.values()) v = 2.0f * v - 1.0f;
  return out;
}

// C×H×W → (H·W)×C
ag::Var to_tokens(ag::Var map) {
  const auto& s = map.shape();
  return ag::transpose(ag::reshape(map, {s[0], s[1] * s[2]}));
}

// (H·W)×C → C×H×W
ag::Var to_map(ag::Var tokens, int h, int w) {
  return ag::reshape(ag::transpose(tokens), {tokens.shape()[1], h, w});
}

}  // namespace

// ---- configs -------------------------------------------------------------

void LatentEncoderConfig::validate() const {
  if (in_channels <= 0 || latent_channels <= 0)
    throw ConfigError("latent encoder channel counts must be positive");
  if (downsample_factor < 2 || (downsample_factor & (downsample_factor - 1)) != 0)
    throw ConfigError("latent encoder downsample factor must be a power of two >= 2");
}

void DenoiserConfig::validate() const {
  if (width <= 0 || depth <= 0 || time_embed_dim <= 0 || out_channels <= 0 || mlp_ratio <= 0)
    throw ConfigError("denoiser dimensions must be positive");
  if (time_embed_dim % 2 != 0) throw ConfigError("denoiser time_embed_dim must be even");
  const int tap = resolved_tap();
  if (tap < 0 || tap >= depth)
    throw ConfigError("denoiser tap layer " + std::to_string(tap) + " outside [0, depth)");
}

void SemanticEncoderConfig::validate() const {
  if (patch_size <= 0 || embed_dim <= 0 || depth <= 0 || out_channels <= 0 || mlp_ratio <= 0)
    throw ConfigError("semantic encoder dimensions must be positive");
  if (embed_dim % 4 != 0) throw ConfigError("semantic encoder embed_dim must be divisible by 4");
}

// ---- shared pieces -------------------------------------------------------

TransformerBlock TransformerBlock::create(ParamStore& store, const std::string& prefix, int dim,
                                          int mlp_ratio, std::mt19937_64& rng) {
  TransformerBlock b;
  b.ln1_gamma = store.add(prefix + ".ln1.gamma", Tensor({dim}, 1.0f), false);
  b.ln1_beta = store.add(prefix + ".ln1.beta", Tensor({dim}), false);
  b.qkv.q = make_linear(store, prefix + ".attn.q", dim, dim, false, rng);
  b.qkv.k = make_linear(store, prefix + ".attn.k", dim, dim, false, rng);
  b.qkv.v = make_linear(store, prefix + ".attn.v", dim, dim, false, rng);
  b.out = make_linear(store, prefix + ".attn.o", dim, dim, false, rng);
  b.ln2_gamma = store.add(prefix + ".ln2.gamma", Tensor({dim}, 1.0f), false);
  b.ln2_beta = store.add(prefix + ".ln2.beta", Tensor({dim}), false);
  b.fc1 = make_linear(store, prefix + ".mlp.fc1", dim, dim * mlp_ratio, false, rng);
  b.fc2 = make_linear(store, prefix + ".mlp.fc2", dim * mlp_ratio, dim, false, rng);
  return b;
}

ag::Var TransformerBlock::forward(ag::Tape& tape, const ParamStore& store,
                                  const AdapterRegistry* reg, ag::Var tokens) const {
  using namespace ag;
  Var h = layer_norm(tokens, tape.param(store, ln1_gamma), tape.param(store, ln1_beta));
  Var q = adapted_linear(tape, store, qkv.q, reg, h);
  Var k = adapted_linear(tape, store, qkv.k, reg, h);
  Var v = adapted_linear(tape, store, qkv.v, reg, h);
  const float inv_sqrt_d = 1.0f / std::sqrt(static_cast<float>(qkv.q.d_out));
  Var attn = softmax_rows(scale(matmul(q, k, false, true), inv_sqrt_d));
  Var mixed = matmul(attn, v);
  Var x = add(tokens, adapted_linear(tape, store, out, reg, mixed));
  Var h2 = layer_norm(x, tape.param(store, ln2_gamma), tape.param(store, ln2_beta));
  Var m = adapted_linear(tape, store, fc2, reg, gelu(adapted_linear(tape, store, fc1, reg, h2)));
  return add(x, m);
}

std::vector<ParamId> TransformerBlock::parameters() const {
  std::vector<ParamId> ids{ln1_gamma, ln1_beta, ln2_gamma, ln2_beta};
  for (const LinearRef* r : {&qkv.q, &qkv.k, &qkv.v, &out, &fc1, &fc2}) append(ids, *r);
  return ids;
}

Tensor position_encoding(int h, int w, int dim) {
  if (dim % 4 != 0) throw ConfigError("position encoding dim must be divisible by 4");
  Tensor pe({h * w, dim});
  const int quarter = dim / 4;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int i = 0; i < quarter; ++i) {
        const double f = std::pow(100.0, -static_cast<double>(i) / quarter);
        const int row = y * w + x;
        pe.at(row, i) = static_cast<float>(std::sin(y * f));
        pe.at(row, quarter + i) = static_cast<float>(std::cos(y * f));
        pe.at(row, 2 * quarter + i) = static_cast<float>(std::sin(x * f));
        pe.at(row, 3 * quarter + i) = static_cast<float>(std::cos(x * f));
      }
  return pe;
}

Tensor timestep_embedding(double t, int dim) {
  Tensor e({dim});
  const int half = dim / 2;
  const double scaled = t * 1000.0;
  for (int i = 0; i < half; ++i) {
    const double f = std::exp(-std::log(10000.0) * i / half);
    e[static_cast<std::size_t>(i)] = static_cast<float>(std::sin(scaled * f));
    e[static_cast<std::size_t>(half + i)] = static_cast<float>(std::cos(scaled * f));
  }
  return e;
}

// ---- latent encoder ------------------------------------------------------

LatentEncoder::LatentEncoder(const LatentEncoderConfig& cfg, ParamStore& store) : cfg_(cfg) {
  cfg_.validate();
  std::mt19937_64 rng(cfg_.weights_seed);
  const int layers = static_cast<int>(std::lround(std::log2(cfg_.downsample_factor)));
  int cin = cfg_.in_channels;
  for (int i = 0; i < layers; ++i) {
    const int cout = (i == layers - 1) ? cfg_.latent_channels : 16 << i;
    const float stddev = 1.5f / std::sqrt(static_cast<float>(cin * 9));
    Tensor w = normal_tensor({cout, cin, 3, 3}, stddev, rng);
    Tensor b = normal_tensor({cout}, 0.1f, rng);
    if (i == 0) {
      // Odd filters of the first layer are zero-mean detail detectors with
      // a strong gain and offset bias, so local noise energy shifts their
      // mean response.
      std::normal_distribution<float> offset(0.0f, 1.0f);
      for (int o = 1; o < cout; o += 2) {
        for (int c = 0; c < cin; ++c) {
          float mean = 0;
          for (int k = 0; k < 9; ++k) mean += w[static_cast<std::size_t>(((o * cin) + c) * 9 + k)] / 9.0f;
          for (int k = 0; k < 9; ++k) {
            float& v = w[static_cast<std::size_t>(((o * cin) + c) * 9 + k)];
            v = (v - mean) * kDetailGain;
          }
        }
        b[static_cast<std::size_t>(o)] = offset(rng);
      }
    }
    weights_.push_back(store.add("ev.conv" + std::to_string(i) + ".weight", std::move(w), false));
    biases_.push_back(store.add("ev.conv" + std::to_string(i) + ".bias", std::move(b), false));
    cin = cout;
  }
}

LatentTensor LatentEncoder::encode(const ImageTensor& image, const ParamStore& store) const {
  if (image.rank() != 3 || image.dim(0) != cfg_.in_channels)
    throw DimensionError("encode_latent: expected " + std::to_string(cfg_.in_channels) +
                         "×H×W image, got " + shape_str(image.shape()));
  if (image.dim(1) % cfg_.downsample_factor != 0 || image.dim(2) % cfg_.downsample_factor != 0)
    throw DimensionError("encode_latent: image " + shape_str(image.shape()) +
                         " not divisible by downsample factor " +
                         std::to_string(cfg_.downsample_factor));
  ag::Tape tape;
  ag::Var x = tape.constant(centered(image));
  for (std::size_t i = 0; i < weights_.size(); ++i)
    x = ag::tanh(ag::conv2d(x, tape.param(store, weights_[i]), tape.param(store, biases_[i]), 2, 1));
  return x.value();
}

std::vector<ParamId> LatentEncoder::parameters() const {
  std::vector<ParamId> ids;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    ids.push_back(weights_[i]);
    ids.push_back(biases_[i]);
  }
  return ids;
}

LatentTensor encode_latent(const ImageTensor& image, const LatentEncoderConfig& cfg) {
  ParamStore store;
  LatentEncoder enc(cfg, store);
  return enc.encode(image, store);
}

// ---- denoiser ------------------------------------------------------------

Denoiser::Denoiser(const DenoiserConfig& cfg, int latent_channels, int num_levels,
                   ParamStore& store)
    : cfg_(cfg), latent_channels_(latent_channels), num_levels_(num_levels) {
  cfg_.validate();
  if (num_levels <= 0) throw ConfigError("denoiser needs at least one noise level");
  if (cfg_.width % 4 != 0) throw ConfigError("denoiser width must be divisible by 4");
  std::mt19937_64 rng(cfg_.weights_seed);
  stem_ = make_linear(store, "sd.stem", latent_channels, cfg_.width, false, rng);
  time1_ = make_linear(store, "sd.time.fc1", cfg_.time_embed_dim, cfg_.width, false, rng);
  time2_ = make_linear(store, "sd.time.fc2", cfg_.width, cfg_.width, false, rng);
  for (int i = 0; i < cfg_.depth; ++i)
    blocks_.push_back(TransformerBlock::create(store, "sd.blocks." + std::to_string(i),
                                               cfg_.width, cfg_.mlp_ratio, rng));
  const int cat = cfg_.width * num_levels;
  consolidate_w_ = store.add("sd.consolidate.weight",
                             normal_tensor({cfg_.out_channels, cat, 1, 1},
                                           1.0f / std::sqrt(static_cast<float>(cat)), rng),
                             true);
  consolidate_b_ = store.add("sd.consolidate.bias", Tensor({cfg_.out_channels}), true);
}

ag::Var Denoiser::level_features(ag::Tape& tape, const ParamStore& store, const LatentTensor& z_t,
                                 double t_effective, const AdapterRegistry* reg) const {
  using namespace ag;
  if (z_t.rank() != 3 || z_t.dim(0) != latent_channels_)
    throw DimensionError("denoiser: latent " + shape_str(z_t.shape()) + " does not have " +
                         std::to_string(latent_channels_) + " channels");
  const int h = z_t.dim(1), w = z_t.dim(2);
  Var tokens = to_tokens(tape.constant(z_t));
  tokens = adapted_linear(tape, store, stem_, reg, tokens);
  tokens = add(tokens, tape.constant(position_encoding(h, w, cfg_.width)));
  Var temb = tape.constant(timestep_embedding(t_effective, cfg_.time_embed_dim).reshaped({1, cfg_.time_embed_dim}));
  temb = adapted_linear(tape, store, time2_, reg, silu(adapted_linear(tape, store, time1_, reg, temb)));
  tokens = add_row(tokens, reshape(temb, {cfg_.width}));
  const int tap = cfg_.resolved_tap();
  // Blocks after the tap cannot influence f_D and are skipped.
  for (int i = 0; i <= tap; ++i) tokens = blocks_[static_cast<std::size_t>(i)].forward(tape, store, reg, tokens);
  return tokens;
}

ag::Var Denoiser::forward(ag::Tape& tape, const ParamStore& store, const NoisedLatentSet& noised,
                          const AdapterRegistry* reg) const {
  if (noised.entries.empty()) throw ConfigError("denoiser: empty noised latent set");
  if (static_cast<int>(noised.entries.size()) != num_levels_)
    throw ConfigError("denoiser: built for " + std::to_string(num_levels_) + " levels, got " +
                      std::to_string(noised.entries.size()));
  const auto& shape0 = noised.entries.front().z_t.shape();
  std::vector<ag::Var> maps;
  for (const auto& e : noised.entries) {
    if (e.z_t.shape() != shape0) throw DimensionError("denoiser: noised latents differ in shape");
    maps.push_back(to_map(level_features(tape, store, e.z_t, e.t_effective, reg), shape0[1], shape0[2]));
  }
  ag::Var cat = maps.size() == 1 ? maps.front() : ag::concat(maps);
  return ag::conv2d(cat, tape.param(store, consolidate_w_), tape.param(store, consolidate_b_), 1, 0);
}

std::vector<AttentionProjections> Denoiser::attention_blocks() const {
  std::vector<AttentionProjections> out;
  for (const auto& b : blocks_) out.push_back(b.qkv);
  return out;
}

std::vector<ParamId> Denoiser::base_parameters() const {
  std::vector<ParamId> ids;
  for (const LinearRef* r : {&stem_, &time1_, &time2_}) append(ids, *r);
  for (const auto& b : blocks_) {
    auto p = b.parameters();
    ids.insert(ids.end(), p.begin(), p.end());
  }
  return ids;
}

FeatureMap denoiser_features(const NoisedLatentSet& noised, const Denoiser& net,
                             const ParamStore& store, const AdapterRegistry* reg) {
  ag::Tape tape;
  return net.forward(tape, store, noised, reg).value();
}

// ---- semantic encoder ----------------------------------------------------

SemanticEncoder::SemanticEncoder(const SemanticEncoderConfig& cfg, int in_channels,
                                 ParamStore& store)
    : cfg_(cfg) {
  cfg_.validate();
  std::mt19937_64 rng(cfg_.weights_seed);
  const int p = cfg_.patch_size;
  patch_w_ = store.add("sam.patch.weight", dct_patch_bank(cfg_.embed_dim, in_channels, p), false);
  patch_b_ = store.add("sam.patch.bias", Tensor({cfg_.embed_dim}), false);
  for (int i = 0; i < cfg_.depth; ++i)
    blocks_.push_back(TransformerBlock::create(store, "sam.blocks." + std::to_string(i),
                                               cfg_.embed_dim, cfg_.mlp_ratio, rng));
  neck_gamma_ = store.add("sam.neck.ln.gamma", Tensor({cfg_.embed_dim}, 1.0f), false);
  neck_beta_ = store.add("sam.neck.ln.beta", Tensor({cfg_.embed_dim}), false);
  neck_ = make_linear(store, "sam.neck.proj", cfg_.embed_dim, cfg_.out_channels, false, rng);
}

ag::Var SemanticEncoder::forward(ag::Tape& tape, const ParamStore& store, ag::Var image,
                                 const AdapterRegistry* reg) const {
  using namespace ag;
  const auto& s = image.shape();
  if (s.size() != 3 || s[1] % cfg_.patch_size != 0 || s[2] % cfg_.patch_size != 0)
    throw DimensionError("semantic encoder: image " + shape_str(s) +
                         " not divisible by patch size " + std::to_string(cfg_.patch_size));
  const int gh = s[1] / cfg_.patch_size, gw = s[2] / cfg_.patch_size;
  Var img = image;
  // [0,1] → [-1,1]
  img = add(scale(img, 2.0f), tape.constant(Tensor(s, -1.0f)));
  Var patches = conv2d(img, tape.param(store, patch_w_), tape.param(store, patch_b_),
                       cfg_.patch_size, 0);
  Var tokens = add(to_tokens(patches), tape.constant(position_encoding(gh, gw, cfg_.embed_dim)));
  for (const auto& b : blocks_) tokens = b.forward(tape, store, reg, tokens);
  tokens = layer_norm(tokens, tape.param(store, neck_gamma_), tape.param(store, neck_beta_));
  tokens = adapted_linear(tape, store, neck_, reg, tokens);
  return to_map(tokens, gh, gw);
}

std::vector<AttentionProjections> SemanticEncoder::attention_blocks() const {
  std::vector<AttentionProjections> out;
  for (const auto& b : blocks_) out.push_back(b.qkv);
  return out;
}

std::vector<ParamId> SemanticEncoder::base_parameters() const {
  std::vector<ParamId> ids{patch_w_, patch_b_, neck_gamma_, neck_beta_};
  append(ids, neck_);
  for (const auto& b : blocks_) {
    auto p = b.parameters();
    ids.insert(ids.end(), p.begin(), p.end());
  }
  return ids;
}

FeatureMap semantic_features(const ImageTensor& image, const SemanticEncoder& net,
                             const ParamStore& store, const AdapterRegistry* reg) {
  ag::Tape tape;
  return net.forward(tape, store, tape.constant(image), reg).value();
}

}  // namespace clue
