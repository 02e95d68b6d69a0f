#include "clue/autograd.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "clue/image_ops.hpp"

namespace clue::ag {
namespace {

using Mat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<Mat>;
using MapCM = Eigen::Map<const Mat>;
using VecA = Eigen::Array<float, Eigen::Dynamic, 1>;
using MapA = Eigen::Map<VecA>;
using MapCA = Eigen::Map<const VecA>;

MapCM as_mat(const Tensor& t, int rows, int cols) { return MapCM(t.data(), rows, cols); }
MapM as_mat(Tensor& t, int rows, int cols) { return MapM(t.data(), rows, cols); }
MapCA as_arr(const Tensor& t) { return MapCA(t.data(), static_cast<Eigen::Index>(t.size())); }
MapA as_arr(Tensor& t) { return MapA(t.data(), static_cast<Eigen::Index>(t.size())); }

void require_rank(const Tensor& t, int rank, const char* op) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) +
                         ", got " + shape_str(t.shape()));
  }
}

Tape& tape_of(Var a) {
  if (!a.valid()) throw std::logic_error("op on an unbound Var");
  return a.tape();
}

template <typename Fwd, typename Deriv>
Var unary(Var x, Fwd fwd, Deriv deriv) {
  Tensor y = Tensor::zeros_like(x.value());
  const Tensor& xv = x.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = fwd(xv[i]);
  const int xid = x.id();
  return tape_of(x).record(std::move(y), {x}, [xid, deriv](Tape& t, const Tensor& g) {
    const Tensor& xv = t.value(xid);
    Tensor& gx = t.grad(xid);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * deriv(xv[i]);
  });
}

}  // namespace

const Tensor& Var::value() const { return tape_->value(id_); }
bool Var::requires_grad() const { return tape_->requires_grad(id_); }

Var Tape::push(Tensor value, bool requires_grad, BackwardFn fn) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::param(const ParamStore& store, ParamId id) {
  if (id < 0 || id >= store.size()) throw ConfigError("parameter id out of range");
  if (param_nodes_.size() < static_cast<std::size_t>(store.size()))
    param_nodes_.resize(static_cast<std::size_t>(store.size()), -1);
  int& slot = param_nodes_[static_cast<std::size_t>(id)];
  if (slot >= 0) return Var(this, slot);
  const Parameter& p = store[id];
  Var v = push(p.value, p.trainable, {});
  nodes_.back().param = id;
  slot = v.id();
  return v;
}

Var Tape::record(Tensor value, std::initializer_list<Var> parents, BackwardFn fn) {
  bool req = false;
  for (const Var& p : parents) req = req || (p.valid() && p.requires_grad());
  return push(std::move(value), req, std::move(fn));
}

Var Tape::record(Tensor value, const std::vector<Var>& parents, BackwardFn fn) {
  bool req = false;
  for (const Var& p : parents) req = req || (p.valid() && p.requires_grad());
  return push(std::move(value), req, std::move(fn));
}

Tensor& Tape::grad(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (!n.has_grad) {
    n.grad = Tensor::zeros_like(n.value);
    n.has_grad = true;
  }
  return n.grad;
}

const Tensor* Tape::grad_if(int id) const {
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  return n.has_grad ? &n.grad : nullptr;
}

void Tape::backward(Var root) {
  if (root.value().size() != 1) throw DimensionError("backward: root must be a scalar");
  if (!root.requires_grad()) return;
  grad(root.id()).fill(1.0f);
  for (int id = root.id(); id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.requires_grad || !n.has_grad || !n.backward) continue;
    n.backward(*this, n.grad);
  }
}

void Tape::accumulate_param_grads(GradBuffer& buffer) const {
  for (std::size_t pid = 0; pid < param_nodes_.size(); ++pid) {
    const int nid = param_nodes_[pid];
    if (nid < 0) continue;
    const Node& n = nodes_[static_cast<std::size_t>(nid)];
    if (!n.requires_grad || !n.has_grad) continue;
    if (buffer.size() <= pid) buffer.resize(pid + 1);
    if (buffer[pid].empty()) buffer[pid] = Tensor::zeros_like(n.value);
    buffer[pid] += n.grad;
  }
}

// ---- linear algebra ------------------------------------------------------

Var matmul(Var a, Var b, bool ta, bool tb) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_rank(av, 2, "matmul");
  require_rank(bv, 2, "matmul");
  const int ar = av.dim(0), ac = av.dim(1), br = bv.dim(0), bc = bv.dim(1);
  const int m = ta ? ac : ar, k = ta ? ar : ac;
  const int k2 = tb ? bc : br, n = tb ? br : bc;
  if (k != k2) {
    throw DimensionError("matmul: inner dimensions differ " + shape_str(av.shape()) +
                         (ta ? "ᵀ" : "") + " · " + shape_str(bv.shape()) + (tb ? "ᵀ" : ""));
  }
  Tensor out({m, n});
  {
    auto A = as_mat(av, ar, ac);
    auto B = as_mat(bv, br, bc);
    auto C = as_mat(out, m, n);
    if (!ta && !tb) C.noalias() = A * B;
    else if (ta && !tb) C.noalias() = A.transpose() * B;
    else if (!ta && tb) C.noalias() = A * B.transpose();
    else C.noalias() = A.transpose() * B.transpose();
  }
  const int aid = a.id(), bid = b.id();
  return tape_of(a).record(std::move(out), {a, b},
                           [=](Tape& t, const Tensor& g) {
    auto G = as_mat(g, m, n);
    if (t.requires_grad(aid)) {
      auto B = as_mat(t.value(bid), br, bc);
      auto GA = as_mat(t.grad(aid), ar, ac);
      // d op(A) = G · op(B)ᵀ
      if (!ta && !tb) GA.noalias() += G * B.transpose();
      else if (!ta && tb) GA.noalias() += G * B;
      else if (ta && !tb) GA.noalias() += B * G.transpose();
      else GA.noalias() += B.transpose() * G.transpose();
    }
    if (t.requires_grad(bid)) {
      auto A = as_mat(t.value(aid), ar, ac);
      auto GB = as_mat(t.grad(bid), br, bc);
      // d op(B) = op(A)ᵀ · G
      if (!ta && !tb) GB.noalias() += A.transpose() * G;
      else if (ta && !tb) GB.noalias() += A * G;
      else if (!ta && tb) GB.noalias() += G.transpose() * A;
      else GB.noalias() += G.transpose() * A.transpose();
    }
  });
}

Var linear(Var x, Var weight, Var bias) {
  const Tensor& xv = x.value();
  const Tensor& wv = weight.value();
  require_rank(xv, 2, "linear");
  require_rank(wv, 2, "linear");
  if (xv.dim(1) != wv.dim(1)) {
    throw DimensionError("linear: input " + shape_str(xv.shape()) + " vs weight " +
                         shape_str(wv.shape()));
  }
  Var y = matmul(x, weight, false, true);
  if (!bias.valid()) return y;
  if (bias.value().size() != static_cast<std::size_t>(wv.dim(0)))
    throw DimensionError("linear: bias size does not match output features");
  return add_row(y, bias);
}

// ---- elementwise ---------------------------------------------------------

Var add(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  out += b.value();
  const int aid = a.id(), bid = b.id();
  return tape_of(a).record(std::move(out), {a, b}, [aid, bid](Tape& t, const Tensor& g) {
    if (t.requires_grad(aid)) t.grad(aid) += g;
    if (t.requires_grad(bid)) t.grad(bid) += g;
  });
}

Var sub(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  as_arr(out) -= as_arr(b.value());
  const int aid = a.id(), bid = b.id();
  return tape_of(a).record(std::move(out), {a, b}, [aid, bid](Tape& t, const Tensor& g) {
    if (t.requires_grad(aid)) t.grad(aid) += g;
    if (t.requires_grad(bid)) as_arr(t.grad(bid)) -= as_arr(g);
  });
}

Var mul(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "mul");
  Tensor out = a.value();
  as_arr(out) *= as_arr(b.value());
  const int aid = a.id(), bid = b.id();
  return tape_of(a).record(std::move(out), {a, b}, [aid, bid](Tape& t, const Tensor& g) {
    if (t.requires_grad(aid)) as_arr(t.grad(aid)) += as_arr(g) * as_arr(t.value(bid));
    if (t.requires_grad(bid)) as_arr(t.grad(bid)) += as_arr(g) * as_arr(t.value(aid));
  });
}

Var scale(Var a, float s) {
  Tensor out = a.value();
  out *= s;
  const int aid = a.id();
  return tape_of(a).record(std::move(out), {a}, [aid, s](Tape& t, const Tensor& g) {
    as_arr(t.grad(aid)) += s * as_arr(g);
  });
}

Var add_row(Var x, Var v) {
  const Tensor& xv = x.value();
  require_rank(xv, 2, "add_row");
  const int n = xv.dim(0), d = xv.dim(1);
  if (v.value().size() != static_cast<std::size_t>(d))
    throw DimensionError("add_row: vector length does not match columns of " +
                         shape_str(xv.shape()));
  Tensor out = xv;
  {
    auto O = as_mat(out, n, d);
    auto V = as_mat(v.value(), 1, d);
    O.rowwise() += V.row(0);
  }
  const int xid = x.id(), vid = v.id();
  return tape_of(x).record(std::move(out), {x, v}, [=](Tape& t, const Tensor& g) {
    if (t.requires_grad(xid)) t.grad(xid) += g;
    if (t.requires_grad(vid)) {
      auto GV = as_mat(t.grad(vid), 1, d);
      GV.row(0) += as_mat(g, n, d).colwise().sum();
    }
  });
}

Var tanh(Var x) {
  return unary(x, [](float v) { return std::tanh(v); },
               [](float v) { float y = std::tanh(v); return 1.0f - y * y; });
}

Var relu(Var x) {
  return unary(x, [](float v) { return v > 0 ? v : 0.0f; },
               [](float v) { return v > 0 ? 1.0f : 0.0f; });
}

Var silu(Var x) {
  return unary(x, [](float v) { return v / (1.0f + std::exp(-v)); },
               [](float v) {
                 float s = 1.0f / (1.0f + std::exp(-v));
                 return s * (1.0f + v * (1.0f - s));
               });
}

Var gelu(Var x) {
  constexpr float kInvSqrt2 = 0.70710678118654752f;
  constexpr float kInvSqrt2Pi = 0.39894228040143268f;
  return unary(x, [](float v) { return 0.5f * v * (1.0f + std::erf(v * kInvSqrt2)); },
               [](float v) {
                 return 0.5f * (1.0f + std::erf(v * kInvSqrt2)) +
                        v * kInvSqrt2Pi * std::exp(-0.5f * v * v);
               });
}

Var sigmoid(Var x) {
  Tensor y = Tensor::zeros_like(x.value());
  const Tensor& xv = x.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = 1.0f / (1.0f + std::exp(-xv[i]));
  const int xid = x.id();
  Tensor saved = y;
  return tape_of(x).record(std::move(y), {x}, [xid, y = std::move(saved)](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad(xid);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * y[i] * (1.0f - y[i]);
  });
}

Var clamp(Var x, float lo, float hi) {
  return unary(x, [lo, hi](float v) { return std::clamp(v, lo, hi); },
               [lo, hi](float v) { return (v > lo && v < hi) ? 1.0f : 0.0f; });
}

// ---- normalization -------------------------------------------------------

Var layer_norm(Var x, Var gamma, Var beta, float eps) {
  const Tensor& xv = x.value();
  require_rank(xv, 2, "layer_norm");
  const int n = xv.dim(0), d = xv.dim(1);
  if (gamma.value().size() != static_cast<std::size_t>(d) ||
      beta.value().size() != static_cast<std::size_t>(d))
    throw DimensionError("layer_norm: affine size does not match feature dim");
  Tensor xhat({n, d});
  std::vector<float> inv_std(static_cast<std::size_t>(n));
  Tensor out({n, d});
  const Tensor& gv = gamma.value();
  const Tensor& bv = beta.value();
  for (int r = 0; r < n; ++r) {
    double mu = 0, var = 0;
    for (int c = 0; c < d; ++c) mu += xv.at(r, c);
    mu /= d;
    for (int c = 0; c < d; ++c) {
      double dv = xv.at(r, c) - mu;
      var += dv * dv;
    }
    var /= d;
    const auto is = static_cast<float>(1.0 / std::sqrt(var + eps));
    inv_std[static_cast<std::size_t>(r)] = is;
    for (int c = 0; c < d; ++c) {
      float h = static_cast<float>(xv.at(r, c) - mu) * is;
      xhat.at(r, c) = h;
      out.at(r, c) = h * gv[static_cast<std::size_t>(c)] + bv[static_cast<std::size_t>(c)];
    }
  }
  const int xid = x.id(), gid = gamma.id(), bid = beta.id();
  return tape_of(x).record(
      std::move(out), {x, gamma, beta},
      [=, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& t, const Tensor& g) {
        const Tensor& gv = t.value(gid);
        if (t.requires_grad(gid) || t.requires_grad(bid)) {
          Tensor* gg = t.requires_grad(gid) ? &t.grad(gid) : nullptr;
          Tensor* gb = t.requires_grad(bid) ? &t.grad(bid) : nullptr;
          for (int r = 0; r < n; ++r)
            for (int c = 0; c < d; ++c) {
              if (gg) (*gg)[static_cast<std::size_t>(c)] += g.at(r, c) * xhat.at(r, c);
              if (gb) (*gb)[static_cast<std::size_t>(c)] += g.at(r, c);
            }
        }
        if (!t.requires_grad(xid)) return;
        Tensor& gx = t.grad(xid);
        for (int r = 0; r < n; ++r) {
          double m1 = 0, m2 = 0;
          for (int c = 0; c < d; ++c) {
            double dh = g.at(r, c) * gv[static_cast<std::size_t>(c)];
            m1 += dh;
            m2 += dh * xhat.at(r, c);
          }
          m1 /= d;
          m2 /= d;
          const float is = inv_std[static_cast<std::size_t>(r)];
          for (int c = 0; c < d; ++c) {
            double dh = g.at(r, c) * gv[static_cast<std::size_t>(c)];
            gx.at(r, c) += static_cast<float>(is * (dh - m1 - xhat.at(r, c) * m2));
          }
        }
      });
}

Var group_norm(Var x, int groups, Var gamma, Var beta, float eps) {
  const Tensor& xv = x.value();
  require_rank(xv, 3, "group_norm");
  const int c = xv.dim(0), hw = xv.dim(1) * xv.dim(2);
  if (groups <= 0 || c % groups != 0)
    throw DimensionError("group_norm: " + std::to_string(groups) +
                         " groups do not divide " + std::to_string(c) + " channels");
  if (gamma.value().size() != static_cast<std::size_t>(c) ||
      beta.value().size() != static_cast<std::size_t>(c))
    throw DimensionError("group_norm: affine size does not match channels");
  const int cpg = c / groups;
  const std::size_t group_size = static_cast<std::size_t>(cpg) * hw;
  Tensor xhat = Tensor::zeros_like(xv);
  std::vector<float> inv_std(static_cast<std::size_t>(groups));
  Tensor out = Tensor::zeros_like(xv);
  const Tensor& gv = gamma.value();
  const Tensor& bv = beta.value();
  for (int gi = 0; gi < groups; ++gi) {
    const std::size_t base = static_cast<std::size_t>(gi) * group_size;
    double mu = 0, var = 0;
    for (std::size_t i = 0; i < group_size; ++i) mu += xv[base + i];
    mu /= static_cast<double>(group_size);
    for (std::size_t i = 0; i < group_size; ++i) {
      double dv = xv[base + i] - mu;
      var += dv * dv;
    }
    var /= static_cast<double>(group_size);
    const auto is = static_cast<float>(1.0 / std::sqrt(var + eps));
    inv_std[static_cast<std::size_t>(gi)] = is;
    for (std::size_t i = 0; i < group_size; ++i) {
      const std::size_t ch = (base + i) / static_cast<std::size_t>(hw);
      float h = static_cast<float>(xv[base + i] - mu) * is;
      xhat[base + i] = h;
      out[base + i] = h * gv[ch] + bv[ch];
    }
  }
  const int xid = x.id(), gid = gamma.id(), bid = beta.id();
  return tape_of(x).record(
      std::move(out), {x, gamma, beta},
      [=, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& t, const Tensor& g) {
        const Tensor& gv = t.value(gid);
        const auto uhw = static_cast<std::size_t>(hw);
        if (t.requires_grad(gid)) {
          Tensor& gg = t.grad(gid);
          for (std::size_t i = 0; i < g.size(); ++i) gg[i / uhw] += g[i] * xhat[i];
        }
        if (t.requires_grad(bid)) {
          Tensor& gb = t.grad(bid);
          for (std::size_t i = 0; i < g.size(); ++i) gb[i / uhw] += g[i];
        }
        if (!t.requires_grad(xid)) return;
        Tensor& gx = t.grad(xid);
        for (int gi = 0; gi < groups; ++gi) {
          const std::size_t base = static_cast<std::size_t>(gi) * group_size;
          double m1 = 0, m2 = 0;
          for (std::size_t i = 0; i < group_size; ++i) {
            double dh = g[base + i] * gv[(base + i) / uhw];
            m1 += dh;
            m2 += dh * xhat[base + i];
          }
          m1 /= static_cast<double>(group_size);
          m2 /= static_cast<double>(group_size);
          const float is = inv_std[static_cast<std::size_t>(gi)];
          for (std::size_t i = 0; i < group_size; ++i) {
            double dh = g[base + i] * gv[(base + i) / uhw];
            gx[base + i] += static_cast<float>(is * (dh - m1 - xhat[base + i] * m2));
          }
        }
      });
}

Var softmax_rows(Var x) {
  const Tensor& xv = x.value();
  require_rank(xv, 2, "softmax_rows");
  const int n = xv.dim(0), d = xv.dim(1);
  Tensor y({n, d});
  for (int r = 0; r < n; ++r) {
    float mx = xv.at(r, 0);
    for (int c = 1; c < d; ++c) mx = std::max(mx, xv.at(r, c));
    double total = 0;
    for (int c = 0; c < d; ++c) {
      float e = std::exp(xv.at(r, c) - mx);
      y.at(r, c) = e;
      total += e;
    }
    const auto inv = static_cast<float>(1.0 / total);
    for (int c = 0; c < d; ++c) y.at(r, c) *= inv;
  }
  const int xid = x.id();
  Tensor ycopy = y;
  return tape_of(x).record(std::move(y), {x},
                           [=, y = std::move(ycopy)](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad(xid);
    for (int r = 0; r < n; ++r) {
      double dot = 0;
      for (int c = 0; c < d; ++c) dot += g.at(r, c) * y.at(r, c);
      for (int c = 0; c < d; ++c)
        gx.at(r, c) += y.at(r, c) * static_cast<float>(g.at(r, c) - dot);
    }
  });
}

// ---- shape ---------------------------------------------------------------

Var transpose(Var x) {
  const Tensor& xv = x.value();
  require_rank(xv, 2, "transpose");
  const int r = xv.dim(0), c = xv.dim(1);
  Tensor out({c, r});
  as_mat(out, c, r) = as_mat(xv, r, c).transpose();
  const int xid = x.id();
  return tape_of(x).record(std::move(out), {x}, [=](Tape& t, const Tensor& g) {
    as_mat(t.grad(xid), r, c) += as_mat(g, c, r).transpose();
  });
}

Var reshape(Var x, std::vector<int> shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  const int xid = x.id();
  return tape_of(x).record(std::move(out), {x}, [xid](Tape& t, const Tensor& g) {
    as_arr(t.grad(xid)) += as_arr(g);
  });
}

Var concat(const std::vector<Var>& parts) {
  if (parts.empty()) throw DimensionError("concat: no inputs");
  const auto& s0 = parts.front().shape();
  std::vector<int> shape = s0;
  shape[0] = 0;
  for (const Var& p : parts) {
    const auto& s = p.shape();
    if (s.size() != s0.size() || !std::equal(s.begin() + 1, s.end(), s0.begin() + 1))
      throw DimensionError("concat: trailing dims differ " + shape_str(s) + " vs " +
                           shape_str(s0));
    shape[0] += s[0];
  }
  Tensor out(shape);
  std::vector<int> ids;
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    std::copy(v.values().begin(), v.values().end(), out.values().begin() + static_cast<long>(off));
    ids.push_back(p.id());
    offsets.push_back(off);
    off += v.size();
  }
  return tape_of(parts.front()).record(std::move(out), parts,
                                       [ids, offsets](Tape& t, const Tensor& g) {
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (!t.requires_grad(ids[i])) continue;
      Tensor& gp = t.grad(ids[i]);
      for (std::size_t j = 0; j < gp.size(); ++j) gp[j] += g[offsets[i] + j];
    }
  });
}

// ---- spatial -------------------------------------------------------------

Var conv2d(Var x, Var weight, Var bias, int stride, int pad) {
  const Tensor& xv = x.value();
  const Tensor& wv = weight.value();
  require_rank(xv, 3, "conv2d");
  if (wv.rank() != 4 || wv.dim(2) != wv.dim(3))
    throw DimensionError("conv2d: weight must be Co×Ci×k×k, got " + shape_str(wv.shape()));
  const int ci = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
  const int co = wv.dim(0), k = wv.dim(2);
  if (wv.dim(1) != ci)
    throw DimensionError("conv2d: input has " + std::to_string(ci) + " channels, weight expects " +
                         std::to_string(wv.dim(1)));
  if (stride <= 0 || pad < 0) throw DimensionError("conv2d: bad stride/padding");
  const int ho = (h + 2 * pad - k) / stride + 1, wo = (w + 2 * pad - k) / stride + 1;
  if (ho <= 0 || wo <= 0) throw DimensionError("conv2d: input smaller than kernel");
  const int kk = ci * k * k, hwo = ho * wo;
  const bool pointwise = (k == 1 && stride == 1 && pad == 0);

  Tensor col;
  if (pointwise) {
    col = xv.reshaped({ci, hwo});
  } else {
    col = Tensor({kk, hwo});
    for (int c = 0; c < ci; ++c)
      for (int ky = 0; ky < k; ++ky)
        for (int kx = 0; kx < k; ++kx) {
          const int row = (c * k + ky) * k + kx;
          float* dst = col.data() + static_cast<std::size_t>(row) * hwo;
          for (int oy = 0; oy < ho; ++oy) {
            const int iy = oy * stride - pad + ky;
            for (int ox = 0; ox < wo; ++ox) {
              const int ix = ox * stride - pad + kx;
              dst[oy * wo + ox] =
                  (iy >= 0 && iy < h && ix >= 0 && ix < w) ? xv.at(c, iy, ix) : 0.0f;
            }
          }
        }
  }

  Tensor out({co, ho, wo});
  as_mat(out, co, hwo).noalias() = as_mat(wv, co, kk) * as_mat(col, kk, hwo);
  if (bias.valid()) {
    if (bias.value().size() != static_cast<std::size_t>(co))
      throw DimensionError("conv2d: bias size does not match output channels");
    auto O = as_mat(out, co, hwo);
    O.colwise() += as_mat(bias.value(), co, 1).col(0);
  }

  const int xid = x.id(), wid = weight.id(), bid = bias.valid() ? bias.id() : -1;
  std::vector<Var> parents{x, weight};
  if (bias.valid()) parents.push_back(bias);
  return tape_of(x).record(
      std::move(out), parents, [=, col = std::move(col)](Tape& t, const Tensor& g) {
        auto G = as_mat(g, co, hwo);
        if (t.requires_grad(wid)) as_mat(t.grad(wid), co, kk).noalias() += G * as_mat(col, kk, hwo).transpose();
        if (bid >= 0 && t.requires_grad(bid))
          as_mat(t.grad(bid), co, 1).col(0) += G.rowwise().sum();
        if (!t.requires_grad(xid)) return;
        if (pointwise) {
          as_mat(t.grad(xid), ci, hwo).noalias() += as_mat(t.value(wid), co, kk).transpose() * G;
          return;
        }
        Tensor dcol({kk, hwo});
        as_mat(dcol, kk, hwo).noalias() = as_mat(t.value(wid), co, kk).transpose() * G;
        Tensor& gx = t.grad(xid);
        for (int c = 0; c < ci; ++c)
          for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
              const int row = (c * k + ky) * k + kx;
              const float* src = dcol.data() + static_cast<std::size_t>(row) * hwo;
              for (int oy = 0; oy < ho; ++oy) {
                const int iy = oy * stride - pad + ky;
                if (iy < 0 || iy >= h) continue;
                for (int ox = 0; ox < wo; ++ox) {
                  const int ix = ox * stride - pad + kx;
                  if (ix >= 0 && ix < w) gx.at(c, iy, ix) += src[oy * wo + ox];
                }
              }
            }
      });
}

Var resize_bilinear(Var x, int out_h, int out_w) {
  const Tensor& xv = x.value();
  require_rank(xv, 3, "resize_bilinear");
  const int in_h = xv.dim(1), in_w = xv.dim(2);
  Tensor out = clue::resize_bilinear(xv, out_h, out_w);
  const int xid = x.id();
  return tape_of(x).record(std::move(out), {x}, [=](Tape& t, const Tensor& g) {
    t.grad(xid) += resize_bilinear_adjoint(g, in_h, in_w);
  });
}

// ---- reductions ----------------------------------------------------------

Var sum(Var x) {
  double s = 0;
  for (float v : x.value().values()) s += v;
  const int xid = x.id();
  return tape_of(x).record(Tensor({1}, static_cast<float>(s)), {x},
                           [xid](Tape& t, const Tensor& g) {
    as_arr(t.grad(xid)) += g[0];
  });
}

Var mean(Var x) {
  const auto n = static_cast<float>(x.value().size());
  return scale(sum(x), 1.0f / n);
}

}  // namespace clue::ag
