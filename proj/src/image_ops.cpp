#include "clue/image_ops.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace clue {
namespace {

struct Tap {
  int i0, i1;
  float w0, w1;
};

std::vector<Tap> bilinear_taps(int in, int out) {
  std::vector<Tap> taps(static_cast<std::size_t>(out));
  const double ratio = static_cast<double>(in) / out;
  for (int o = 0; o < out; ++o) {
    double src = (o + 0.5) * ratio - 0.5;
    if (src < 0) src = 0;
    int i0 = std::min(static_cast<int>(src), in - 1);
    int i1 = std::min(i0 + 1, in - 1);
    auto w1 = static_cast<float>(src - i0);
    taps[static_cast<std::size_t>(o)] = {i0, i1, 1.0f - w1, w1};
  }
  return taps;
}

void require_chw(const Tensor& x, const char* what) {
  if (x.rank() != 3) throw DimensionError(std::string(what) + ": expected C×H×W, got " +
                                          shape_str(x.shape()));
}

}  // namespace

Tensor resize_bilinear(const Tensor& x, int out_h, int out_w) {
  require_chw(x, "resize_bilinear");
  if (out_h <= 0 || out_w <= 0) throw DimensionError("resize_bilinear: empty target size");
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const auto ty = bilinear_taps(h, out_h);
  const auto tx = bilinear_taps(w, out_w);
  Tensor out({c, out_h, out_w});
  for (int ch = 0; ch < c; ++ch) {
    for (int oy = 0; oy < out_h; ++oy) {
      const Tap& a = ty[static_cast<std::size_t>(oy)];
      for (int ox = 0; ox < out_w; ++ox) {
        const Tap& b = tx[static_cast<std::size_t>(ox)];
        out.at(ch, oy, ox) = a.w0 * (b.w0 * x.at(ch, a.i0, b.i0) + b.w1 * x.at(ch, a.i0, b.i1)) +
                             a.w1 * (b.w0 * x.at(ch, a.i1, b.i0) + b.w1 * x.at(ch, a.i1, b.i1));
      }
    }
  }
  return out;
}

Tensor resize_bilinear_adjoint(const Tensor& grad_out, int in_h, int in_w) {
  require_chw(grad_out, "resize_bilinear_adjoint");
  const int c = grad_out.dim(0), out_h = grad_out.dim(1), out_w = grad_out.dim(2);
  const auto ty = bilinear_taps(in_h, out_h);
  const auto tx = bilinear_taps(in_w, out_w);
  Tensor g({c, in_h, in_w});
  for (int ch = 0; ch < c; ++ch) {
    for (int oy = 0; oy < out_h; ++oy) {
      const Tap& a = ty[static_cast<std::size_t>(oy)];
      for (int ox = 0; ox < out_w; ++ox) {
        const Tap& b = tx[static_cast<std::size_t>(ox)];
        const float v = grad_out.at(ch, oy, ox);
        g.at(ch, a.i0, b.i0) += a.w0 * b.w0 * v;
        g.at(ch, a.i0, b.i1) += a.w0 * b.w1 * v;
        g.at(ch, a.i1, b.i0) += a.w1 * b.w0 * v;
        g.at(ch, a.i1, b.i1) += a.w1 * b.w1 * v;
      }
    }
  }
  return g;
}

Tensor gaussian_blur(const Tensor& x, float sigma) {
  require_chw(x, "gaussian_blur");
  if (sigma < 0) throw DomainError("gaussian_blur: negative sigma");
  if (sigma == 0.0f) return x;
  const int radius = static_cast<int>(std::ceil(3.0f * sigma));
  std::vector<float> k(static_cast<std::size_t>(2 * radius + 1));
  double total = 0;
  for (int i = -radius; i <= radius; ++i) {
    double v = std::exp(-0.5 * i * i / (static_cast<double>(sigma) * sigma));
    k[static_cast<std::size_t>(i + radius)] = static_cast<float>(v);
    total += v;
  }
  for (float& v : k) v = static_cast<float>(v / total);

  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  Tensor tmp({c, h, w});
  Tensor out({c, h, w});
  for (int ch = 0; ch < c; ++ch) {
    for (int y = 0; y < h; ++y) {
      for (int xx = 0; xx < w; ++xx) {
        float acc = 0;
        for (int i = -radius; i <= radius; ++i) {
          const int sx = std::clamp(xx + i, 0, w - 1);
          acc += k[static_cast<std::size_t>(i + radius)] * x.at(ch, y, sx);
        }
        tmp.at(ch, y, xx) = acc;
      }
    }
    for (int y = 0; y < h; ++y) {
      for (int xx = 0; xx < w; ++xx) {
        float acc = 0;
        for (int i = -radius; i <= radius; ++i) {
          const int sy = std::clamp(y + i, 0, h - 1);
          acc += k[static_cast<std::size_t>(i + radius)] * tmp.at(ch, sy, xx);
        }
        out.at(ch, y, xx) = acc;
      }
    }
  }
  return out;
}

Tensor pad_to_multiple(const Tensor& x, int m) {
  require_chw(x, "pad_to_multiple");
  if (m <= 0) throw DomainError("pad_to_multiple: multiple must be positive");
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const int ph = (h + m - 1) / m * m, pw = (w + m - 1) / m * m;
  if (ph == h && pw == w) return x;
  Tensor out({c, ph, pw});
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < h; ++y)
      for (int xx = 0; xx < w; ++xx) out.at(ch, y, xx) = x.at(ch, y, xx);
  return out;
}

Tensor dihedral(const Tensor& x, int op) {
  if (x.rank() != 3) throw DimensionError("dihedral expects C×H×W, got " + shape_str(x.shape()));
  if (op < 0 || op > 7) throw DomainError("dihedral op must lie in [0, 7]");
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if ((op & 4) && h != w) throw DimensionError("dihedral transpose needs a square map");
  Tensor out(x.shape());
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < h; ++y)
      for (int xx = 0; xx < w; ++xx) {
        int sy = y, sx = xx;
        if (op & 4) std::swap(sy, sx);
        if (op & 1) sx = w - 1 - sx;
        if (op & 2) sy = h - 1 - sy;
        out.at(ch, y, xx) = x.at(ch, sy, sx);
      }
  return out;
}

}  // namespace clue
