// Acceptance suite: one PASS/FAIL line per criterion.
//
//   clue_acceptance --cli build/tools/clue --work /tmp/acc [--only 1,4,9]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "clue/attacks.hpp"
#include "clue/forgegen.hpp"
#include "clue/harness.hpp"
#include "clue/image_io.hpp"
#include "clue/losses.hpp"
#include "clue/metrics.hpp"
#include "clue/model.hpp"
#include "clue/noise_schedule.hpp"
#include "clue/optim.hpp"
#include "test_util.hpp"

using namespace clue;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  // Records a named check; returns it so callers can stop early.
  bool check(bool ok, const std::string& what) {
    if (!ok) pass = false;
    notes.push_back(std::string(ok ? "ok " : "FAILED ") + what);
    return ok;
  }
  void info(const std::string& what) { notes.push_back("info " + what); }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(slurp(p));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

struct Context {
  fs::path cli;
  fs::path work;
  // Filled by criterion 7 and reused by 9 and 10.
  fs::path tuned_run;
};

int run_cli(const Context& ctx, const std::string& args, const std::string& log_name) {
  const fs::path log = ctx.work / (log_name + ".log");
  const std::string cmd = "\"" + ctx.cli.string() + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// Weighted-average row of a metrics.csv.
bool weighted_row(const fs::path& csv, double& f1, double& iou) {
  for (const auto& row : read_csv(csv))
    if (row.size() == 4 && row[0] == "weighted_avg") {
      f1 = std::stod(row[2]);
      iou = std::stod(row[3]);
      return true;
    }
  return false;
}

// ---------------------------------------------------------------------------

Outcome criterion1(Context&) {
  Outcome o;
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  double worst0 = 0, worst1 = 0;
  for (int i = 0; i < 100; ++i) {
    const LatentTensor z0 = normal_tensor({4, 8, 8}, 1.0f, rng);
    const LatentTensor eps = standard_normal_like(z0, rng);
    worst0 = std::max(worst0, static_cast<double>(max_abs_diff(rf_interpolate(z0, 0.0, eps), z0)));
    worst1 = std::max(worst1, static_cast<double>(max_abs_diff(rf_interpolate(z0, 1.0, eps), eps)));
  }
  o.check(worst0 <= 1e-6, "rf_interpolate(t=0) = z0 on 100 latents, max err " + fmt("%.2e", worst0));
  o.check(worst1 <= 1e-6, "rf_interpolate(t=1) = eps on 100 latents, max err " + fmt("%.2e", worst1));

  double id_err = 0;
  for (int i = 0; i <= 1000; ++i) id_err = std::max(id_err, std::abs(shift_warp(i / 1000.0, 1.0) - i / 1000.0));
  o.check(id_err <= 1e-12, "shift_warp(t, 1) = t on 1e-3 grid, max err " + fmt("%.2e", id_err));

  bool monotone = true;
  for (double s : {0.5, 1.0, 3.0, 4.0, 6.0}) {
    double prev = shift_warp(0.0, s);
    for (int i = 1; i <= 1000; ++i) {
      const double w = shift_warp(i / 1000.0, s);
      monotone = monotone && w > prev;
      prev = w;
    }
  }
  o.check(monotone, "shift_warp strictly increasing on 1e-3 grid for s in {0.5,1,3,4,6}");
  const double secs = seconds_since(t0);
  o.check(secs < 1.0, "runtime " + fmt("%.3f", secs) + " s < 1 s");
  return o;
}

Outcome criterion2(Context&) {
  Outcome o;
  const auto t0 = Clock::now();
  const ModelConfig cfg;
  ClueModel adapted(cfg);
  ClueModel plain(cfg);
  plain.detach_adapters();
  o.check(!adapted.denoiser_adapters().empty() && !adapted.semantic_adapters().empty(),
          "both branches carry QKV adapters");
  bool b_zero = true;
  for (const auto& p : adapted.store())
    if (p.name.rfind("lora.", 0) == 0 && p.name.size() > 2 && p.name.substr(p.name.size() - 2) == ".B")
      for (float v : p.value.values()) b_zero = b_zero && v == 0.0f;
  o.check(b_zero, "every adapter B matrix is zero at init");

  std::mt19937_64 img_rng(202);
  double worst = 0;
  for (int i = 0; i < 20; ++i) {
    const ImageTensor img = testing::random_image(64, 64, img_rng);
    std::mt19937_64 n1(1000 + i), n2(1000 + i);
    worst = std::max(worst, static_cast<double>(max_abs_diff(adapted.predict(img, n1), plain.predict(img, n2))));
  }
  o.check(worst <= 1e-5, "adapted vs adapter-free pipeline on 20 random images, max abs diff " +
                             fmt("%.2e", worst));

  std::map<std::string, std::uint64_t> frozen_before;
  for (const auto& p : adapted.store())
    if (!p.trainable) frozen_before[p.name] = adapted.store().checksum(p.name);
  const std::uint64_t lora_before = adapted.store().checksum("lora.");

  Adam opt(AdamConfig{}, adapted.store());
  const ForgerySample s = generate_sample("probe", "train", ForgeryKind::kSplice, 7, 64, 64);
  std::mt19937_64 noise(3);
  ag::Tape tape;
  const ag::Var loss = ag::total_loss(adapted.forward(tape, s.image, noise), s.mask, LossWeights{});
  tape.backward(loss);
  GradBuffer g(static_cast<std::size_t>(adapted.store().size()));
  tape.accumulate_param_grads(g);
  opt.step(adapted.store(), g);

  std::size_t unchanged = 0;
  for (const auto& [name, sum] : frozen_before) unchanged += adapted.store().checksum(name) == sum;
  o.check(unchanged == frozen_before.size(),
          std::to_string(unchanged) + "/" + std::to_string(frozen_before.size()) +
              " frozen parameter checksums unchanged after one Adam step");
  std::size_t changed = 0;
  for (const auto& p : adapted.store())
    if (p.name.rfind("lora.", 0) == 0) {
      const ParamStore& st = plain.store();
      changed += st.contains(p.name) ? p.value != st[st.id(p.name)].value : 0;
    }
  o.check(adapted.store().checksum("lora.") != lora_before && changed > 0,
          std::to_string(changed) + " adapter tensors changed");
  const double secs = seconds_since(t0);
  o.check(secs < 30.0, "runtime " + fmt("%.2f", secs) + " s < 30 s");
  return o;
}

Outcome criterion3(Context&) {
  Outcome o;
  const auto t0 = Clock::now();
  const ClueModel model{ModelConfig{}};
  const ParamStore& store = model.store();
  const int r = model.config().lora_denoiser.rank;
  o.check(r == 4 && model.config().lora_semantic.rank == 4, "default rank r = 4 on both branches");

  auto branch = [&](const char* name, const AdapterRegistry& reg, const AttentionNetwork& net) {
    std::size_t adapter_params = 0, formula_mismatch = 0, adapters = 0;
    for (const auto& block : net.attention_blocks())
      for (const LinearRef* ref : {&block.q, &block.k, &block.v}) {
        const AdapterSlot* slot = reg.find(ref->name);
        if (slot == nullptr) {
          ++formula_mismatch;
          continue;
        }
        ++adapters;
        const std::size_t n = store[slot->a].value.size() + store[slot->b].value.size();
        formula_mismatch += n != static_cast<std::size_t>(slot->rank * (ref->d_in + ref->d_out));
        adapter_params += n;
      }
    std::size_t base = 0;
    for (ParamId id : net.base_parameters()) base += store[id].value.size();
    const double frac = trainable_fraction(reg, net, store);
    const double expected = static_cast<double>(adapter_params) / static_cast<double>(adapter_params + base);
    o.check(formula_mismatch == 0 && adapters == reg.adapters.size(),
            std::string(name) + ": " + std::to_string(adapters) + " adapters match r(d_in+d_out)");
    o.check(std::abs(frac - expected) < 1e-12,
            std::string(name) + ": trainable_fraction equals recount " + std::to_string(adapter_params) +
                "/(" + std::to_string(adapter_params) + "+" + std::to_string(base) + ")");
    o.check(frac < 0.05, std::string(name) + ": trainable fraction " + fmt("%.4f", frac) + " < 0.05");
  };
  branch("denoiser", model.denoiser_adapters(), model.denoiser());
  branch("semantic", model.semantic_adapters(), model.semantic_encoder());
  const double secs = seconds_since(t0);
  o.check(secs < 1.0, "runtime " + fmt("%.3f", secs) + " s < 1 s");
  return o;
}

// ---- criterion 4: double-precision reference of fuse -> head -> loss --------

using Vec = std::vector<double>;

Vec to_vec(const Tensor& t) { return Vec(t.values().begin(), t.values().end()); }

// out[co][p] = b[co] + Σ w[co][ci][ky][kx]·x[ci][p + (ky,kx) − pad], zero padded.
Vec ref_conv(const Vec& x, int ci, int h, int w, const Vec& wt, const Vec& b, int co, int k, int pad) {
  Vec out(static_cast<std::size_t>(co) * h * w);
  for (int o = 0; o < co; ++o)
    for (int y = 0; y < h; ++y)
      for (int xx = 0; xx < w; ++xx) {
        double acc = b[static_cast<std::size_t>(o)];
        for (int c = 0; c < ci; ++c)
          for (int ky = 0; ky < k; ++ky) {
            const int iy = y + ky - pad;
            if (iy < 0 || iy >= h) continue;
            for (int kx = 0; kx < k; ++kx) {
              const int ix = xx + kx - pad;
              if (ix < 0 || ix >= w) continue;
              acc += wt[((static_cast<std::size_t>(o) * ci + c) * k + ky) * k + kx] *
                     x[(static_cast<std::size_t>(c) * h + iy) * w + ix];
            }
          }
        out[(static_cast<std::size_t>(o) * h + y) * w + xx] = acc;
      }
  return out;
}

Vec ref_group_norm(const Vec& x, int c, int hw, int groups, const Vec& gamma, const Vec& beta) {
  Vec out(x.size());
  const int cpg = c / groups;
  for (int g = 0; g < groups; ++g) {
    const std::size_t lo = static_cast<std::size_t>(g) * cpg * hw, n = static_cast<std::size_t>(cpg) * hw;
    double mean = 0, var = 0;
    for (std::size_t i = 0; i < n; ++i) mean += x[lo + i];
    mean /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) var += (x[lo + i] - mean) * (x[lo + i] - mean);
    var /= static_cast<double>(n);
    const double inv = 1.0 / std::sqrt(var + 1e-5);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t ch = (lo + i) / static_cast<std::size_t>(hw);
      out[lo + i] = (x[lo + i] - mean) * inv * gamma[ch] + beta[ch];
    }
  }
  return out;
}

struct RefNet {
  std::map<std::string, Vec> p;
  Vec f_s, f_d, gt;
  int c_s = 0, c_d = 0, proj = 0, fused = 0, mid = 0, groups = 0, h = 0, w = 0, scale = 0;

  // ReLU and clamp states of the last evaluation.
  mutable std::vector<bool> pattern;

  const Vec& P(const std::string& n) const { return p.at(n); }

  double loss() const {
    pattern.clear();
    const int hw = h * w;
    Vec ps = ref_group_norm(ref_conv(f_s, c_s, h, w, P("fuse.proj_s.weight"), P("fuse.proj_s.bias"), proj, 1, 0),
                            proj, hw, groups, P("fuse.gn_s.gamma"), P("fuse.gn_s.beta"));
    Vec pd = ref_group_norm(ref_conv(f_d, c_d, h, w, P("fuse.proj_d.weight"), P("fuse.proj_d.bias"), proj, 1, 0),
                            proj, hw, groups, P("fuse.gn_d.gamma"), P("fuse.gn_d.beta"));
    Vec cat = ps;
    cat.insert(cat.end(), pd.begin(), pd.end());
    Vec hmap = ref_group_norm(ref_conv(cat, 2 * proj, h, w, P("fuse.conv.weight"), P("fuse.conv.bias"), fused, 3, 1),
                              fused, hw, groups, P("fuse.gn.gamma"), P("fuse.gn.beta"));
    for (double& v : hmap) v = v / (1.0 + std::exp(-v));
    const Vec ff = ref_conv(hmap, fused, h, w, P("fuse.out.weight"), P("fuse.out.bias"), fused, 1, 0);
    Vec a = ref_conv(ff, fused, h, w, P("head.conv1.weight"), P("head.conv1.bias"), mid, 3, 1);
    for (double& v : a) {
      pattern.push_back(v > 0);
      v = std::max(v, 0.0);
    }
    const Vec logit = ref_conv(a, mid, h, w, P("head.conv2.weight"), P("head.conv2.bias"), 1, 1, 0);

    // Half-pixel bilinear upsampling with edge clamping.
    const int oh = h * scale, ow = w * scale;
    auto taps = [](int in, int out, int o, int& i0, int& i1, double& w1) {
      const double src = std::max((o + 0.5) * in / out - 0.5, 0.0);
      i0 = std::min(static_cast<int>(std::floor(src)), in - 1);
      i1 = std::min(i0 + 1, in - 1);
      w1 = src - i0;
    };
    double bce = 0, inter = 0, sum_p = 0, sum_g = 0;
    for (int y = 0; y < oh; ++y) {
      int y0, y1;
      double wy;
      taps(h, oh, y, y0, y1, wy);
      for (int x = 0; x < ow; ++x) {
        int x0, x1;
        double wx;
        taps(w, ow, x, x0, x1, wx);
        auto L = [&](int yy, int xx) { return logit[static_cast<std::size_t>(yy) * w + xx]; };
        const double z = (1 - wy) * ((1 - wx) * L(y0, x0) + wx * L(y0, x1)) +
                         wy * ((1 - wx) * L(y1, x0) + wx * L(y1, x1));
        const double sig = 1.0 / (1.0 + std::exp(-z));
        const double prob = std::clamp(sig, 1e-7, 0.99999994);
        const double g = gt[static_cast<std::size_t>(y) * ow + x];
        const double pc = std::clamp(prob, 1e-7, 1 - 1e-7);
        pattern.push_back(sig < 1e-7 || sig > 1 - 1e-7);
        bce -= g * std::log(pc) + (1 - g) * std::log(1 - pc);
        inter += prob * g;
        sum_p += prob;
        sum_g += g;
      }
    }
    bce /= static_cast<double>(oh) * ow;
    const double dice = 1.0 - (2.0 * inter + 1e-6) / (sum_p + sum_g + 1e-6);
    return 0.5 * bce + 0.5 * dice;
  }
};

Outcome criterion4(Context&) {
  Outcome o;
  const auto t0 = Clock::now();
  std::mt19937_64 rng(404);
  ParamStore store;
  const FusionConfig fc;
  const HeadConfig hc;
  const int c_s = 32, c_d = 64, h = 8, w = 8;
  Fusion fusion(fc, c_s, c_d, store, rng);
  LocalizationHead head(hc, fc.fuse_channels, store, rng);
  // Move biases, gains and offsets off their init values.
  for (ParamId id = 0; id < store.size(); ++id)
    if (store[id].value.rank() == 1)
      for (float& v : store[id].value.values()) v += static_cast<float>(std::normal_distribution<double>(0, 0.1)(rng));
  Tensor f_s = testing::random_tensor({c_s, h, w}, rng);
  Tensor f_d = testing::random_tensor({c_d, h, w}, rng);
  const MaskTensor gt = testing::random_mask(h * hc.upsample_scale, w * hc.upsample_scale, rng, 0.3);
  const LossWeights lw;

  ag::Tape tape;
  const ag::Var vs = tape.input(f_s), vd = tape.input(f_d);
  const ag::Var loss = ag::total_loss(head.forward(tape, store, fusion.forward(tape, store, vs, vd)), gt, lw);
  tape.backward(loss);
  GradBuffer grads(static_cast<std::size_t>(store.size()));
  tape.accumulate_param_grads(grads);

  RefNet ref;
  for (const auto& prm : store) ref.p[prm.name] = to_vec(prm.value);
  ref.f_s = to_vec(f_s);
  ref.f_d = to_vec(f_d);
  ref.gt = to_vec(gt);
  ref.c_s = c_s, ref.c_d = c_d, ref.proj = fc.proj_channels, ref.fused = fc.fuse_channels;
  ref.mid = hc.mid_channels, ref.groups = fc.groupnorm_groups, ref.h = h, ref.w = w;
  ref.scale = hc.upsample_scale;
  const double ref_loss = ref.loss();
  const double f32_loss = loss.value()[0];
  o.check(std::abs(ref_loss - f32_loss) <= 1e-5 * std::abs(ref_loss),
          "double reference reproduces float32 loss " + fmt("%.8f", f32_loss) + " vs " + fmt("%.8f", ref_loss));

  struct Target {
    std::string name;
    Vec* values;
    const Tensor* analytic;
  };
  std::vector<Target> targets{{"f_s", &ref.f_s, tape.grad_if(vs)}, {"f_d", &ref.f_d, tape.grad_if(vd)}};
  for (ParamId id = 0; id < store.size(); ++id) targets.push_back({store[id].name, &ref.p[store[id].name], &grads[static_cast<std::size_t>(id)]});

  // Every element of small tensors, a seeded sample of 160 from larger ones.
  constexpr std::size_t kSample = 160;
  constexpr double kStep = 1e-3;
  std::size_t checked = 0, straddled = 0;
  double straddle_d2 = 0, straddle_a2 = 0;
  double worst_rel = 0;
  std::string worst_name;
  for (const Target& t : targets) {
    if (t.analytic == nullptr || t.analytic->size() != t.values->size()) {
      o.check(false, t.name + ": missing analytic gradient");
      continue;
    }
    std::vector<std::size_t> idx(t.values->size());
    std::iota(idx.begin(), idx.end(), 0);
    if (idx.size() > kSample) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(kSample);
    }
    double d2 = 0, a2 = 0, n2 = 0, worst_elem = 0;
    std::size_t used = 0, skipped = 0;
    double kink_d2 = 0, kink_a2 = 0;
    ref.loss();
    const std::vector<bool> at_x = ref.pattern;
    for (std::size_t i : idx) {
      double& x = (*t.values)[i];
      const double orig = x;
      x = orig + kStep;
      const double lp = ref.loss();
      const bool kink_p = ref.pattern != at_x;
      x = orig - kStep;
      const double lm = ref.loss();
      const bool kink_m = ref.pattern != at_x;
      x = orig;
      // A stencil that flips a ReLU or clamp state differences across a kink.
      const double num = (lp - lm) / (2 * kStep);
      const double an = (*t.analytic)[i];
      if (kink_p || kink_m) {
        ++skipped;
        kink_d2 += (num - an) * (num - an);
        kink_a2 += an * an;
        continue;
      }
      ++used;
      d2 += (num - an) * (num - an);
      a2 += an * an;
      n2 += num * num;
      worst_elem = std::max(worst_elem, std::abs(num - an));
    }
    checked += used;
    straddled += skipped;
    straddle_d2 += kink_d2;
    straddle_a2 += kink_a2;
    const double denom = std::max(std::sqrt(a2), std::sqrt(n2));
    const double rel = denom == 0 ? 0 : std::sqrt(d2) / denom;
    if (rel >= worst_rel) {
      worst_rel = rel;
      worst_name = t.name;
    }
    o.check(rel < 1e-3 && used >= std::min<std::size_t>(16, idx.size()), t.name + ": rel err " + fmt("%.2e", rel) + " over " + std::to_string(used) +
                                        " coords (" + std::to_string(skipped) + " straddle a kink), max abs diff " +
                                        fmt("%.2e", worst_elem) + ", |g| " + fmt("%.2e", std::sqrt(a2)));
  }
  o.info("worst tensor " + worst_name + " rel err " + fmt("%.2e", worst_rel) + ", " + std::to_string(checked) +
         " coordinates checked with central differences, step 1e-3");
  o.info(std::to_string(straddled) + " coordinates whose stencil flips a ReLU or clamp state were excluded; their rel err is " +
         fmt("%.2e", straddle_a2 > 0 ? std::sqrt(straddle_d2 / straddle_a2) : 0.0));

  // Float32 central differences through the library itself, for reference only.
  auto f32_loss_of = [&]() { return total_loss(predict_mask(fuse(f_s, f_d, fusion, store), head, store), gt, lw); };
  for (const char* name : {"f_s", "head.conv1.weight"}) {
    Tensor& x = std::string(name) == "f_s" ? f_s : store[store.id(name)].value;
    const Tensor& an = std::string(name) == "f_s" ? *tape.grad_if(vs) : grads[static_cast<std::size_t>(store.id(name))];
    double d2 = 0, a2 = 0;
    for (std::size_t i = 0; i < 40; ++i) {
      const std::size_t k = (i * 7919) % x.size();
      const float orig = x[k];
      x[k] = orig + 1e-3f;
      const double lp = f32_loss_of();
      x[k] = orig - 1e-3f;
      const double lm = f32_loss_of();
      x[k] = orig;
      const double num = (lp - lm) / (static_cast<double>(orig + 1e-3f) - static_cast<double>(orig - 1e-3f));
      d2 += (num - an[k]) * (num - an[k]);
      a2 += static_cast<double>(an[k]) * an[k];
    }
    o.info(std::string("float32-forward differences on ") + name + ": rel err " + fmt("%.2e", std::sqrt(d2 / a2)) +
           " (single-coordinate loss changes sit at float32 rounding level)");
  }
  const double secs = seconds_since(t0);
  o.check(secs < 120.0, "runtime " + fmt("%.1f", secs) + " s < 120 s");
  return o;
}

Outcome criterion5(Context&) {
  Outcome o;
  std::mt19937_64 rng(505);
  double worst = 0;
  for (int i = 0; i < 10; ++i) {
    const MaskTensor gt = testing::random_mask(16, 16, rng, 0.1 * i);
    worst = std::max(worst, std::abs(bce_loss(MaskTensor({1, 16, 16}, 0.5f), gt) - std::log(2.0)));
  }
  o.check(worst <= 1e-6, "bce(0.5 constant, random gt) = ln 2, max err " + fmt("%.2e", worst));
  const MaskTensor a({1, 2, 2}, std::vector<float>{1, 1, 0, 0});
  const MaskTensor b({1, 2, 2}, std::vector<float>{1, 0, 0, 0});
  const MaskTensor c({1, 2, 2}, std::vector<float>{0, 0, 1, 1});
  const double perfect = dice_loss(a, a), disjoint = dice_loss(a, c), third = dice_loss(a, b);
  o.check(std::abs(perfect) <= 1e-6, "dice(perfect) = " + fmt("%.3e", perfect));
  o.check(std::abs(disjoint - 1.0) <= 1e-6, "dice(disjoint) = " + fmt("%.9f", disjoint));
  o.check(std::abs(third - 1.0 / 3.0) <= 1e-6, "dice([1,1,0,0],[1,0,0,0]) = " + fmt("%.9f", third));
  return o;
}

Outcome criterion6(Context&) {
  Outcome o;
  const auto t0 = Clock::now();
  std::mt19937_64 rng(606);
  int mismatches = 0, empty_pairs = 0, identity_fail = 0;
  for (int i = 0; i < 1000; ++i) {
    // Every 25th pair forces one or both masks empty.
    MaskTensor p = testing::random_mask(16, 16, rng, std::uniform_real_distribution<double>(0, 1)(rng));
    MaskTensor g = testing::random_mask(16, 16, rng, std::uniform_real_distribution<double>(0, 1)(rng));
    if (i % 25 == 0) p.fill(0.0f);
    if (i % 50 == 0) g.fill(0.0f);
    if (i % 75 == 0) g.fill(0.0f);
    long tp = 0, fp = 0, fn = 0;
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) {
        const bool pv = p.at(0, y, x) == 1.0f, gv = g.at(0, y, x) == 1.0f;
        tp += pv && gv;
        fp += pv && !gv;
        fn += !pv && gv;
      }
    double f1, iou;
    if (tp + fp == 0 && tp + fn == 0) {
      f1 = iou = 1.0;
      ++empty_pairs;
    } else if (tp + fp == 0 || tp + fn == 0) {
      f1 = iou = 0.0;
      ++empty_pairs;
    } else {
      f1 = 2.0 * tp / (2.0 * tp + fp + fn);
      iou = static_cast<double>(tp) / static_cast<double>(tp + fp + fn);
    }
    const F1IoU got = f1_iou(p, g);
    mismatches += got.f1 != f1 || got.iou != iou;
    if (tp + fp + fn > 0 && std::abs(got.f1 - 2 * got.iou / (1 + got.iou)) > 1e-12) ++identity_fail;
  }
  o.check(mismatches == 0, std::to_string(mismatches) + " exact mismatches vs brute force on 1000 pairs (" +
                               std::to_string(empty_pairs) + " with an empty mask)");
  o.check(identity_fail == 0, "F1 = 2 IoU/(1+IoU) on every pair with nonzero counts");
  const double secs = seconds_since(t0);
  o.check(secs < 10.0, "runtime " + fmt("%.3f", secs) + " s < 10 s");
  return o;
}

Outcome criterion7(Context& ctx) {
  Outcome o;
  const auto t0 = Clock::now();
  const fs::path tuned = ctx.work / "c7_tuned", frozen = ctx.work / "c7_frozen";
  const int rc1 = run_cli(ctx, "train -o \"" + tuned.string() + "\"", "c7_tuned");
  if (!o.check(rc1 == 0, "default-config train exits 0 (rc " + std::to_string(rc1) + ")")) return o;
  ctx.tuned_run = tuned;
  const int rc2 = run_cli(ctx,
                          "train -o \"" + frozen.string() +
                              "\" --set model.branches.denoiser=frozen --set model.branches.semantic=frozen",
                          "c7_frozen");
  if (!o.check(rc2 == 0, "both-frozen train exits 0 (rc " + std::to_string(rc2) + ")")) return o;
  double f1 = 0, iou = 0, ff1 = 0, fiou = 0;
  o.check(weighted_row(tuned / "metrics.csv", f1, iou) && weighted_row(frozen / "metrics.csv", ff1, fiou),
          "metrics.csv weighted rows present");
  o.check(f1 >= 0.70, "tuned held-out F1 " + fmt("%.4f", f1) + " >= 0.70");
  o.check(iou >= 0.55, "tuned held-out IoU " + fmt("%.4f", iou) + " >= 0.55");
  o.check(f1 - ff1 >= 0.10, "both-frozen F1 " + fmt("%.4f", ff1) + ", gap " + fmt("%.4f", f1 - ff1) + " >= 0.10");
  o.info("both-frozen IoU " + fmt("%.4f", fiou));
  const double secs = seconds_since(t0);
  o.check(secs <= 1800.0, "runtime " + fmt("%.0f", secs) + " s <= 1800 s");
  return o;
}

Outcome criterion8(Context& ctx) {
  Outcome o;
  const fs::path out = ctx.work / "c8";
  // Reduced scale: row structure is what is under test.
  const int rc = run_cli(ctx,
                         "ablate --table all -o \"" + out.string() +
                             "\" --epochs 2 --set data.splits.0.count=48 --set data.splits.1.count=16",
                         "c8_ablate");
  if (!o.check(rc == 0, "ablate --table all exits 0 (rc " + std::to_string(rc) + ")")) return o;
  const std::map<std::string, std::vector<std::vector<std::string>>> expected{
      {"components",
       {{"tuned", "frozen"}, {"tuned", "removed"}, {"removed", "tuned"}, {"frozen", "tuned"}, {"tuned", "tuned"}}},
      {"noise", {{"zero"}, {"ddpm"}, {"rf"}}},
      {"shift", {{"0.5"}, {"1"}, {"3"}, {"4"}, {"6"}}}};
  const std::map<std::string, std::string> headers{{"components", "sd3,sam,n_images,f1,iou"},
                                                   {"noise", "noise,n_images,f1,iou"},
                                                   {"shift", "shift,n_images,f1,iou"}};
  for (const auto& [table, rows] : expected) {
    const fs::path csv = out / table / "table.csv";
    if (!o.check(fs::exists(csv), table + "/table.csv written")) continue;
    const auto got = read_csv(csv);
    std::string header;
    if (!got.empty())
      for (std::size_t i = 0; i < got[0].size(); ++i) header += (i ? "," : "") + got[0][i];
    o.check(header == headers.at(table), table + " header '" + header + "'");
    bool labels_ok = got.size() == rows.size() + 1;
    std::string numbers;
    for (std::size_t r = 0; labels_ok && r < rows.size(); ++r) {
      const auto& row = got[r + 1];
      const std::size_t k = rows[r].size();
      labels_ok = row.size() == k + 3 && std::equal(rows[r].begin(), rows[r].end(), row.begin());
      if (labels_ok) {
        std::string label;
        for (std::size_t i = 0; i < k; ++i) label += (i ? "/" : "") + row[i];
        numbers += " " + label + "=" + row[k + 1];
      }
    }
    o.check(labels_ok, table + ": exactly " + std::to_string(rows.size()) + " rows in order");
    o.info(table + " F1 (reduced scale):" + numbers);
  }
  return o;
}

// Checkpoint for criterion 9: the criterion-7 run when present, else a short run.
fs::path attack_checkpoint(Context& ctx, Outcome& o) {
  if (!ctx.tuned_run.empty() && fs::exists(ctx.tuned_run / "best.ckpt")) return ctx.tuned_run / "best.ckpt";
  const fs::path dir = ctx.work / "c9_train";
  const int rc = run_cli(ctx, "train --epochs 2 -o \"" + dir.string() + "\"", "c9_train");
  o.check(rc == 0, "short training run for the attack checkpoint exits 0");
  return dir / "best.ckpt";
}

Outcome criterion9(Context& ctx) {
  Outcome o;
  const fs::path ckpt = attack_checkpoint(ctx, o);
  const auto t0 = Clock::now();
  const fs::path out = ctx.work / "c9";
  const int rc = run_cli(ctx, "attack --attack all --checkpoint \"" + ckpt.string() + "\" -o \"" + out.string() + "\"",
                         "c9_attack");
  if (o.check(rc == 0, "attack --attack all exits 0 (rc " + std::to_string(rc) + ")")) {
    const auto rows = read_csv(out / "robustness.csv");
    std::map<std::string, int> per_attack;
    for (std::size_t i = 1; i < rows.size(); ++i) ++per_attack[rows[i].at(0)];
    for (AttackKind k : kAllAttacks) {
      const std::size_t want = AttackSpec::defaults(k).grid.size() + 1;
      o.check(per_attack[to_string(k)] == static_cast<int>(want),
              to_string(k) + ": " + std::to_string(per_attack[to_string(k)]) + " rows = |grid| + 1");
    }
  }

  const LoadedModel loaded = load_model(ckpt);
  const ExperimentConfig& cfg = loaded.config;
  const DataSplits data = prepare_data(cfg, std::nullopt);
  std::vector<MaskTensor> gt_before;
  for (const auto& s : data.test) gt_before.push_back(s.mask);
  const fs::path dumps = ctx.work / "c9_identity";
  const auto curve = robustness_curve(cfg, *loaded.model, data.test, {AttackKind::kGaussNoise, {0.0}}, dumps);
  const double diff = std::abs(curve.at(1).f1 - curve.at(0).f1);
  o.check(diff <= 1e-6, "gauss_noise sigma=0 F1 " + fmt("%.9f", curve.at(1).f1) + " vs clean " +
                            fmt("%.9f", curve.at(0).f1));
  std::size_t equal_files = 0;
  for (const auto& s : data.test)
    for (const char* suffix : {"_mask.png", "_prob.png"}) {
      const std::string f = s.id + suffix;
      equal_files += slurp(dumps / "gauss_noise" / "clean" / f) == slurp(dumps / "gauss_noise" / "0" / f) &&
                     fs::exists(dumps / "gauss_noise" / "0" / f);
    }
  o.check(equal_files == 2 * data.test.size(),
          "sigma=0 predicted masks byte-identical to clean for " + std::to_string(equal_files / 2) + " images");
  std::size_t gt_same = 0;
  for (std::size_t i = 0; i < data.test.size(); ++i) {
    for (AttackKind k : kAllAttacks)
      for (double v : AttackSpec::defaults(k).grid) (void)apply_attack(data.test[i].image, {k, v}, i);
    gt_same += data.test[i].mask == gt_before[i];
  }
  o.check(gt_same == data.test.size(), "ground-truth masks bit-identical before and after every attack");

  double min_psnr = 1e9;
  for (std::uint64_t s = 0; s < 20; ++s) {
    std::mt19937_64 rng(sample_seed(9090, "psnr:" + std::to_string(s)));
    const ImageTensor img = gen_base_image(rng);
    min_psnr = std::min(min_psnr, psnr(img, apply_attack(img, {AttackKind::kJpeg, 90}, 0)));
  }
  o.check(min_psnr > 30.0, "JPEG q=90 PSNR on 20 random generator images, min " + fmt("%.2f", min_psnr) + " dB > 30");
  std::mt19937_64 urng(9091);
  double uniform_psnr = 0;
  for (int i = 0; i < 20; ++i) {
    const ImageTensor img = testing::random_image(64, 64, urng);
    uniform_psnr += psnr(img, apply_attack(img, {AttackKind::kJpeg, 90}, 0)) / 20;
  }
  o.info("JPEG q=90 mean PSNR on i.i.d. uniform-noise images " + fmt("%.2f", uniform_psnr) + " dB");
  const double secs = seconds_since(t0);
  o.check(secs < 300.0, "runtime " + fmt("%.0f", secs) + " s < 300 s");
  return o;
}

Outcome criterion10(Context& ctx) {
  Outcome o;
  fs::path first = ctx.tuned_run;
  if (first.empty()) {
    first = ctx.work / "c10_a";
    o.check(run_cli(ctx, "train -o \"" + first.string() + "\"", "c10_a") == 0, "first train exits 0");
  }
  const fs::path second = ctx.work / "c10_b";
  if (!o.check(run_cli(ctx, "train -o \"" + second.string() + "\"", "c10_b") == 0, "second train exits 0"))
    return o;
  for (const char* f : {"metrics.csv", "metrics.json", "train_log.csv"}) {
    const std::string a = slurp(first / f), b = slurp(second / f);
    o.check(!a.empty() && a == b, std::string("train ") + f + " byte-equal");
  }
  const fs::path ea = ctx.work / "c10_eval_a", eb = ctx.work / "c10_eval_b";
  const int ra = run_cli(ctx, "eval --checkpoint \"" + (first / "best.ckpt").string() + "\" -o \"" + ea.string() + "\"", "c10_eval_a");
  const int rb = run_cli(ctx, "eval --checkpoint \"" + (second / "best.ckpt").string() + "\" -o \"" + eb.string() + "\"", "c10_eval_b");
  if (o.check(ra == 0 && rb == 0, "both eval runs exit 0")) {
    const std::string a = slurp(ea / "metrics.csv");
    o.check(!a.empty() && a == slurp(eb / "metrics.csv"), "eval metrics.csv byte-equal");
    o.check(a == slurp(first / "metrics.csv"), "eval metrics.csv equals the train-time evaluation");
  }
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"clue acceptance suite"};
  Context ctx;
  std::vector<int> only;
  app.add_option("--cli", ctx.cli, "path to the clue executable")->required();
  app.add_option("--work", ctx.work, "scratch directory (wiped first)")->required();
  app.add_option("--only", only, "criteria to run")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  fs::remove_all(ctx.work);
  fs::create_directories(ctx.work);
  const std::vector<std::pair<const char*, std::function<Outcome(Context&)>>> criteria{
      {"rf schedule exactness", criterion1},     {"lora identity at init", criterion2},
      {"parameter efficiency", criterion3},      {"gradient correctness", criterion4},
      {"loss oracles", criterion5},              {"metric oracle equivalence", criterion6},
      {"end-to-end toy training", criterion7},   {"ablation harness fidelity", criterion8},
      {"robustness harness", criterion9},        {"determinism", criterion10}};
  const std::set<int> selected(only.begin(), only.end());
  bool all_pass = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int n = static_cast<int>(i) + 1;
    if (!selected.empty() && selected.count(n) == 0) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = criteria[i].second(ctx);
    } catch (const std::exception& e) {
      o.check(false, std::string("exception: ") + e.what());
    }
    all_pass = all_pass && o.pass;
    for (const auto& note : o.notes) std::cout << "    " << note << "\n";
    std::cout << "criterion " << n << " " << (o.pass ? "PASS" : "FAIL") << ": " << criteria[i].first << " ("
              << fmt("%.1f", seconds_since(t0)) << " s)\n"
              << std::flush;
  }
  return all_pass ? 0 : 1;
}
