#include "clue/forgegen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include <nlohmann/json.hpp>

#include "clue/image_io.hpp"
#include "clue/image_ops.hpp"

namespace clue {
namespace {

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

int uniform_int(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

float bilinear_sample(const Tensor& img, int c, double y, double x) {
  const int h = img.dim(1), w = img.dim(2);
  y = std::clamp(y, 0.0, h - 1.0);
  x = std::clamp(x, 0.0, w - 1.0);
  const int y0 = static_cast<int>(y), x0 = static_cast<int>(x);
  const int y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
  const auto fy = static_cast<float>(y - y0), fx = static_cast<float>(x - x0);
  return (1 - fy) * ((1 - fx) * img.at(c, y0, x0) + fx * img.at(c, y0, x1)) +
         fy * ((1 - fx) * img.at(c, y1, x0) + fx * img.at(c, y1, x1));
}

// Star-shaped random polygon rasterized at pixel centres (even-odd rule).
MaskTensor random_polygon_mask(Rng& rng, int h, int w, double& cx, double& cy, double& radius) {
  radius = uniform(rng, 10.0, 22.0);
  cx = uniform(rng, 0.2 * w, 0.8 * w);
  cy = uniform(rng, 0.2 * h, 0.8 * h);
  const int k = uniform_int(rng, 6, 10);
  std::vector<double> px(static_cast<std::size_t>(k)), py(static_cast<std::size_t>(k));
  const double phase = uniform(rng, 0, 2 * std::numbers::pi);
  for (int i = 0; i < k; ++i) {
    const double a = phase + 2 * std::numbers::pi * (i + uniform(rng, -0.3, 0.3)) / k;
    const double r = radius * uniform(rng, 0.7, 1.25);
    px[static_cast<std::size_t>(i)] = cx + r * std::cos(a);
    py[static_cast<std::size_t>(i)] = cy + r * std::sin(a);
  }
  MaskTensor m({1, h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double qx = x + 0.5, qy = y + 0.5;
      bool inside = false;
      for (int i = 0, j = k - 1; i < k; j = i++) {
        const double xi = px[static_cast<std::size_t>(i)], yi = py[static_cast<std::size_t>(i)];
        const double xj = px[static_cast<std::size_t>(j)], yj = py[static_cast<std::size_t>(j)];
        if ((yi > qy) != (yj > qy) && qx < (xj - xi) * (qy - yi) / (yj - yi) + xi) inside = !inside;
      }
      m.at(0, y, x) = inside ? 1.0f : 0.0f;
    }
  return m;
}

// Resampling scale away from 1 so the pasted content is always re-gridded.
double paste_scale(Rng& rng) {
  return uniform(rng, 1.6, 2.4);
}

ImageTensor paste_from(const ImageTensor& base, const ImageTensor& source, const MaskTensor& mask,
                       double src_cx, double src_cy, double dst_cx, double dst_cy, double scale) {
  ImageTensor out = base;
  const int h = base.dim(1), w = base.dim(2);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (mask.at(0, y, x) == 0.0f) continue;
      const double sy = src_cy + (y + 0.5 - dst_cy) / scale - 0.5;
      const double sx = src_cx + (x + 0.5 - dst_cx) / scale - 0.5;
      for (int c = 0; c < 3; ++c) out.at(c, y, x) = bilinear_sample(source, c, sy, sx);
    }
  return out;
}

// Normalized-convolution infill of the masked region from its surroundings.
ImageTensor smooth_infill(const ImageTensor& base, const MaskTensor& mask) {
  const int h = base.dim(1), w = base.dim(2);
  Tensor keep({1, h, w});
  for (std::size_t i = 0; i < keep.size(); ++i) keep[i] = 1.0f - mask[i];
  Tensor weighted = base;
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) weighted.at(c, y, x) *= keep.at(0, y, x);
  const Tensor num = gaussian_blur(weighted, 5.0f);
  const Tensor den = gaussian_blur(keep, 5.0f);
  ImageTensor out = base;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (mask.at(0, y, x) == 0.0f) continue;
      const float d = std::max(den.at(0, y, x), 1e-4f);
      for (int c = 0; c < 3; ++c) out.at(c, y, x) = num.at(c, y, x) / d;
    }
  return out;
}

double interior_changed_fraction(const ImageTensor& before, const ImageTensor& after,
                                 const MaskTensor& mask) {
  const int h = mask.dim(1), w = mask.dim(2);
  int interior = 0, changed = 0;
  for (int y = 1; y < h - 1; ++y)
    for (int x = 1; x < w - 1; ++x) {
      if (mask.at(0, y, x) == 0.0f || mask.at(0, y - 1, x) == 0.0f || mask.at(0, y + 1, x) == 0.0f ||
          mask.at(0, y, x - 1) == 0.0f || mask.at(0, y, x + 1) == 0.0f)
        continue;
      ++interior;
      float d = 0;
      for (int c = 0; c < 3; ++c) d = std::max(d, std::abs(after.at(c, y, x) - before.at(c, y, x)));
      if (d > 1.0f / 255.0f) ++changed;
    }
  return interior == 0 ? 0.0 : static_cast<double>(changed) / interior;
}

void clamp01(Tensor& t) {
  for (float& v : t.values()) v = std::clamp(v, 0.0f, 1.0f);
}

}  // namespace

std::string to_string(ForgeryKind k) {
  switch (k) {
    case ForgeryKind::kSplice: return "splice";
    case ForgeryKind::kCopyMove: return "copymove";
    case ForgeryKind::kRemoval: return "removal";
    case ForgeryKind::kAuthentic: return "authentic";
  }
  return "?";
}

ForgeryKind forgery_kind_from_string(const std::string& s) {
  for (ForgeryKind k : kAllKinds)
    if (to_string(k) == s) return k;
  throw FormatError("unknown forgery kind '" + s + "'");
}

void DatasetSpec::validate() const {
  if (splits.empty()) throw ConfigError("dataset spec has no splits");
  for (const auto& s : splits)
    if (s.count <= 0) throw ConfigError("split '" + s.name + "' must have a positive count");
  if (height <= 0 || width <= 0) throw ConfigError("dataset image size must be positive");
  double total = 0;
  for (double p : mix) {
    if (p < 0) throw ConfigError("kind proportions must be non-negative");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("kind proportions must sum to 1");
}

constexpr float kSharedNoise = 0.9f;

ImageTensor gen_base_image(Rng& rng, int height, int width) {
  ImageTensor img({3, height, width});
  std::array<float, 3> c0{}, c1{};
  for (int c = 0; c < 3; ++c) {
    c0[static_cast<std::size_t>(c)] = static_cast<float>(uniform(rng, 0.15, 0.85));
    c1[static_cast<std::size_t>(c)] = static_cast<float>(uniform(rng, 0.15, 0.85));
  }
  const double theta = uniform(rng, 0, 2 * std::numbers::pi);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const double t = std::clamp(((x + 0.5) / width - 0.5) * std::cos(theta) +
                                      ((y + 0.5) / height - 0.5) * std::sin(theta) + 0.5,
                                  0.0, 1.0);
      for (int c = 0; c < 3; ++c)
        img.at(c, y, x) = static_cast<float>(c0[static_cast<std::size_t>(c)] * (1 - t) +
                                             c1[static_cast<std::size_t>(c)] * t);
    }

  // Band-limited texture: blurred white noise normalized to unit std.
  Tensor tex({1, height, width});
  std::normal_distribution<float> unit(0.0f, 1.0f);
  for (float& v : tex.values()) v = unit(rng);
  tex = gaussian_blur(tex, static_cast<float>(uniform(rng, 1.2, 3.0)));
  double var = 0;
  for (float v : tex.values()) var += static_cast<double>(v) * v;
  const auto tex_scale =
      static_cast<float>(uniform(rng, 0.03, 0.12) / std::sqrt(var / static_cast<double>(tex.size())));
  std::array<float, 3> tint{};
  for (float& t : tint) t = 1.0f + 0.2f * unit(rng);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x)
        img.at(c, y, x) += tex_scale * tint[static_cast<std::size_t>(c)] * tex.at(0, y, x);

  const int shapes = uniform_int(rng, 1, 4);
  for (int s = 0; s < shapes; ++s) {
    const double cx = uniform(rng, 0, width), cy = uniform(rng, 0, height);
    const double a = uniform(rng, 5, 18), b = uniform(rng, 5, 18);
    const double rot = uniform(rng, 0, std::numbers::pi);
    const double opacity = uniform(rng, 0.6, 1.0);
    std::array<float, 3> col{};
    for (float& v : col) v = static_cast<float>(uniform(rng, 0.05, 0.95));
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
        const double u = dx * std::cos(rot) + dy * std::sin(rot);
        const double v = -dx * std::sin(rot) + dy * std::cos(rot);
        const double r = std::sqrt((u / a) * (u / a) + (v / b) * (v / b));
        const double alpha = std::clamp((1.0 - r) * std::min(a, b) + 0.5, 0.0, 1.0) * opacity;
        if (alpha <= 0) continue;
        for (int c = 0; c < 3; ++c)
          img.at(c, y, x) = static_cast<float>(img.at(c, y, x) * (1 - alpha) +
                                               col[static_cast<std::size_t>(c)] * alpha);
      }
  }

  // Scene illumination: a per-image colour cast shared by every pixel.
  for (int c = 0; c < 3; ++c) {
    const auto gain = static_cast<float>(std::exp(uniform(rng, -0.35, 0.35)));
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) img.at(c, y, x) *= gain;
  }

  // Per-image sensor noise: the fine-grain statistic forgeries disturb.
  // Mostly shared across channels, as after demosaicing.
  const auto sigma = static_cast<float>(uniform(rng, 0.03, 0.06));
  const float shared = std::sqrt(kSharedNoise), own = std::sqrt(1.0f - kSharedNoise);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const float common = unit(rng);
      for (int c = 0; c < 3; ++c) img.at(c, y, x) += sigma * (shared * common + own * unit(rng));
    }
  clamp01(img);
  return img;
}

ForgerySample apply_forgery(const ImageTensor& base, const ImageTensor& donor, ForgeryKind kind,
                            Rng& rng) {
  require_same_shape(base, donor, "apply_forgery");
  if (base.rank() != 3 || base.dim(0) != 3)
    throw DimensionError("apply_forgery: expected 3×H×W images, got " + shape_str(base.shape()));
  const int h = base.dim(1), w = base.dim(2);
  ForgerySample out;
  out.kind = kind;
  if (kind == ForgeryKind::kAuthentic) {
    out.image = base;
    out.mask = MaskTensor({1, h, w});
    return out;
  }
  constexpr int kMaxTries = 16;
  for (int attempt = 0; attempt < kMaxTries; ++attempt) {
    double cx = 0, cy = 0, radius = 0;
    MaskTensor mask = random_polygon_mask(rng, h, w, cx, cy, radius);
    const double frac = forged_fraction(mask);
    if (frac < kMinForgedFraction || frac > kMaxForgedFraction) continue;

    ImageTensor forged;
    if (kind == ForgeryKind::kSplice) {
      const double sx = uniform(rng, radius, std::max(radius, w - radius));
      const double sy = uniform(rng, radius, std::max(radius, h - radius));
      forged = paste_from(base, donor, mask, sx, sy, cx, cy, paste_scale(rng));
    } else if (kind == ForgeryKind::kCopyMove) {
      // Source centre displaced by at least one radius from the target.
      double sx = cx, sy = cy;
      bool found = false;
      for (int t = 0; t < 32 && !found; ++t) {
        sx = uniform(rng, 0.15 * w, 0.85 * w);
        sy = uniform(rng, 0.15 * h, 0.85 * h);
        found = std::hypot(sx - cx, sy - cy) >= radius;
      }
      if (!found) continue;
      forged = paste_from(base, base, mask, sx, sy, cx, cy, paste_scale(rng));
      // Brightness/colour retouch the forger applies to blend the copy.
      for (int c = 0; c < 3; ++c) {
        const double mag = uniform(rng, 0.1, 0.25);
        const auto gain = static_cast<float>(rng() % 2 ? 1 + mag : 1 - mag);
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < w; ++x)
            if (mask.at(0, y, x) > 0) forged.at(c, y, x) *= gain;
      }
    } else {
      forged = smooth_infill(base, mask);
    }

    if (rng() % 2) {
      // Feathered composite; the mask keeps the hard region.
      const Tensor alpha = gaussian_blur(mask, 0.6f);
      for (int c = 0; c < 3; ++c)
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < w; ++x) {
            const float a = std::max(alpha.at(0, y, x), mask.at(0, y, x) > 0 ? 0.5f : 0.0f);
            forged.at(c, y, x) = a * forged.at(c, y, x) + (1 - a) * base.at(c, y, x);
          }
    }
    clamp01(forged);
    if (interior_changed_fraction(base, forged, mask) < 0.9) continue;
    out.image = std::move(forged);
    out.mask = std::move(mask);
    return out;
  }
  throw DomainError("apply_forgery: no admissible " + to_string(kind) + " region after " +
                    std::to_string(kMaxTries) + " attempts");
}

double forged_fraction(const MaskTensor& mask) {
  if (mask.size() == 0) return 0.0;
  double n = 0;
  for (float v : mask.values()) n += v > 0.5f ? 1.0 : 0.0;
  return n / static_cast<double>(mask.size());
}

std::array<int, 4> allocate_kinds(int count, const std::array<double, 4>& mix) {
  std::array<int, 4> out{};
  std::array<double, 4> rem{};
  int assigned = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    const double exact = count * mix[i];
    out[i] = static_cast<int>(std::floor(exact + 1e-9));
    rem[i] = exact - out[i];
    assigned += out[i];
  }
  std::array<std::size_t, 4> order{0, 1, 2, 3};
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
  for (std::size_t i = 0; assigned < count; ++i, ++assigned) ++out[order[i % 4]];
  return out;
}

std::uint64_t sample_seed(std::uint64_t dataset_seed, const std::string& id) {
  return dataset_seed ^ fnv1a(std::as_bytes(std::span<const char>(id.data(), id.size())));
}

ForgerySample generate_sample(const std::string& id, const std::string& split, ForgeryKind kind,
                              std::uint64_t seed, int height, int width) {
  Rng rng(seed);
  const ImageTensor base = gen_base_image(rng, height, width);
  const ImageTensor donor = gen_base_image(rng, height, width);
  ForgerySample s = apply_forgery(base, donor, kind, rng);
  s.id = id;
  s.split = split;
  s.seed = seed;
  return s;
}

std::vector<ForgerySample> generate_dataset(const DatasetSpec& spec) {
  spec.validate();
  std::vector<ForgerySample> out;
  for (const auto& split : spec.splits) {
    const auto counts = allocate_kinds(split.count, spec.mix);
    std::vector<ForgeryKind> kinds;
    for (std::size_t k = 0; k < 4; ++k) kinds.insert(kinds.end(), static_cast<std::size_t>(counts[k]), kAllKinds[k]);
    Rng order_rng(sample_seed(spec.seed, "order:" + split.name));
    std::shuffle(kinds.begin(), kinds.end(), order_rng);
    for (int i = 0; i < split.count; ++i) {
      char buf[16];
      std::snprintf(buf, sizeof buf, "%05d", i);
      const std::string id = split.name + "_" + buf;
      out.push_back(generate_sample(id, split.name, kinds[static_cast<std::size_t>(i)],
                                    sample_seed(spec.seed, id), spec.height, spec.width));
    }
  }
  return out;
}

void write_samples(const std::vector<ForgerySample>& samples, const DatasetSpec& spec,
                   const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "masks");
  nlohmann::json manifest;
  manifest["format"] = "clue-forgery-dataset";
  manifest["version"] = 1;
  manifest["height"] = spec.height;
  manifest["width"] = spec.width;
  manifest["seed"] = spec.seed;
  manifest["mix"] = {{"splice", spec.mix[0]}, {"copymove", spec.mix[1]},
                     {"removal", spec.mix[2]}, {"authentic", spec.mix[3]}};
  manifest["splits"] = nlohmann::json::array();
  for (const auto& s : spec.splits) manifest["splits"].push_back({{"name", s.name}, {"count", s.count}});
  manifest["samples"] = nlohmann::json::array();
  for (const auto& s : samples) {
    write_png(dir / "images" / (s.id + ".png"), s.image);
    write_png(dir / "masks" / (s.id + ".png"), s.mask);
    manifest["samples"].push_back(
        {{"id", s.id}, {"kind", to_string(s.kind)}, {"seed", s.seed}, {"split", s.split}});
  }
  std::ofstream f(dir / "manifest.json", std::ios::binary);
  if (!f) throw FormatError("cannot write " + (dir / "manifest.json").string());
  f << manifest.dump(2) << '\n';
}

void write_dataset(const DatasetSpec& spec, const std::filesystem::path& dir) {
  write_samples(generate_dataset(spec), spec, dir);
}

std::vector<ForgerySample> read_dataset(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  const fs::path manifest_path = dir / "manifest.json";
  std::ifstream f(manifest_path);
  if (!f) throw FormatError("missing manifest " + manifest_path.string());
  nlohmann::json manifest;
  try {
    f >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("unreadable manifest " + manifest_path.string() + ": " + e.what());
  }
  if (!manifest.contains("samples") || !manifest["samples"].is_array())
    throw FormatError("manifest has no samples array");
  const int h = manifest.value("height", 0), w = manifest.value("width", 0);
  std::vector<ForgerySample> out;
  for (const auto& entry : manifest["samples"]) {
    ForgerySample s;
    s.id = entry.at("id").get<std::string>();
    s.kind = forgery_kind_from_string(entry.at("kind").get<std::string>());
    s.split = entry.value("split", "");
    s.seed = entry.value("seed", std::uint64_t{0});
    const fs::path img = dir / "images" / (s.id + ".png");
    const fs::path msk = dir / "masks" / (s.id + ".png");
    if (!fs::exists(img)) throw FormatError("sample '" + s.id + "': missing image file");
    if (!fs::exists(msk)) throw FormatError("sample '" + s.id + "': missing mask file");
    s.image = read_png(img, 3);
    s.mask = read_png(msk, 1);
    if (s.image.dim(1) != s.mask.dim(1) || s.image.dim(2) != s.mask.dim(2))
      throw FormatError("sample '" + s.id + "': mask size does not match image");
    if ((h > 0 && s.image.dim(1) != h) || (w > 0 && s.image.dim(2) != w))
      throw FormatError("sample '" + s.id + "': image size differs from manifest");
    for (float v : s.mask.values())
      if (v != 0.0f && v != 1.0f) throw FormatError("sample '" + s.id + "': mask is not binary");
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<ForgerySample> filter_split(const std::vector<ForgerySample>& samples,
                                        const std::string& split) {
  std::vector<ForgerySample> out;
  for (const auto& s : samples)
    if (s.split == split) out.push_back(s);
  return out;
}

}  // namespace clue
