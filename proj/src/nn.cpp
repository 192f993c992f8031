#include "mimdarts/nn.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>
#include <vector>

namespace mimdarts {

namespace {

using MatRM = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatRM>;
using CMapRM = Eigen::Map<const MatRM>;

struct ConvGeom {
  int C, H, W, K, stride, pad, dilation;
  int out_h, out_w;
};

ConvGeom conv_geom(int C, int H, int W, int K, int stride, int pad, int dilation) {
  ConvGeom g{C, H, W, K, stride, pad, dilation, 0, 0};
  int eff = dilation * (K - 1) + 1;
  g.out_h = (H + 2 * pad - eff) / stride + 1;
  g.out_w = (W + 2 * pad - eff) / stride + 1;
  if (g.out_h <= 0 || g.out_w <= 0)
    throw std::invalid_argument("conv: kernel does not fit input (H=" + std::to_string(H) +
                                ", W=" + std::to_string(W) + ", K=" + std::to_string(K) + ")");
  return g;
}

// col is [C*K*K x out_h*out_w], row-major.
void im2col(const Scalar* src, const ConvGeom& g, Scalar* col) {
  const int P = g.out_h * g.out_w;
  for (int c = 0; c < g.C; ++c) {
    const Scalar* plane = src + int64_t(c) * g.H * g.W;
    for (int ki = 0; ki < g.K; ++ki)
      for (int kj = 0; kj < g.K; ++kj) {
        Scalar* row = col + (int64_t(c) * g.K * g.K + ki * g.K + kj) * P;
        for (int oy = 0; oy < g.out_h; ++oy) {
          int iy = oy * g.stride - g.pad + ki * g.dilation;
          if (iy < 0 || iy >= g.H) {
            std::fill(row + int64_t(oy) * g.out_w, row + int64_t(oy + 1) * g.out_w, Scalar(0));
            continue;
          }
          const Scalar* line = plane + int64_t(iy) * g.W;
          Scalar* out = row + int64_t(oy) * g.out_w;
          if (g.stride == 1) {
            // contiguous window: zero the out-of-range fringes, copy the rest
            const int ix0 = kj * g.dilation - g.pad;
            const int lo = std::max(0, -ix0), hi = std::min(g.out_w, g.W - ix0);
            if (lo > 0) std::fill(out, out + std::min(lo, g.out_w), Scalar(0));
            if (hi > lo) std::memcpy(out + lo, line + lo + ix0, size_t(hi - lo) * sizeof(Scalar));
            if (hi < g.out_w) std::fill(out + std::max(hi, lo), out + g.out_w, Scalar(0));
          } else {
            for (int ox = 0; ox < g.out_w; ++ox) {
              int ix = ox * g.stride - g.pad + kj * g.dilation;
              out[ox] = (ix >= 0 && ix < g.W) ? line[ix] : Scalar(0);
            }
          }
        }
      }
  }
}

// Adjoint of im2col: scatter-add col back into the image.
void col2im(const Scalar* col, const ConvGeom& g, Scalar* dst) {
  const int P = g.out_h * g.out_w;
  for (int c = 0; c < g.C; ++c) {
    Scalar* plane = dst + int64_t(c) * g.H * g.W;
    for (int ki = 0; ki < g.K; ++ki)
      for (int kj = 0; kj < g.K; ++kj) {
        const Scalar* row = col + (int64_t(c) * g.K * g.K + ki * g.K + kj) * P;
        for (int oy = 0; oy < g.out_h; ++oy) {
          int iy = oy * g.stride - g.pad + ki * g.dilation;
          if (iy < 0 || iy >= g.H) continue;
          Scalar* line = plane + int64_t(iy) * g.W;
          const Scalar* in = row + int64_t(oy) * g.out_w;
          if (g.stride == 1) {
            const int ix0 = kj * g.dilation - g.pad;
            const int lo = std::max(0, -ix0), hi = std::min(g.out_w, g.W - ix0);
            for (int ox = lo; ox < hi; ++ox) line[ox + ix0] += in[ox];
          } else {
            for (int ox = 0; ox < g.out_w; ++ox) {
              int ix = ox * g.stride - g.pad + kj * g.dilation;
              if (ix >= 0 && ix < g.W) line[ix] += in[ox];
            }
          }
        }
      }
  }
}

// Direct depthwise kernels; im2col would expand the input K*K-fold only to
// feed 1-row GEMMs.
void dw_forward(const Scalar* x, const Scalar* w, const ConvGeom& g, Scalar* out) {
  std::fill(out, out + int64_t(g.out_h) * g.out_w, Scalar(0));
  for (int ki = 0; ki < g.K; ++ki)
    for (int kj = 0; kj < g.K; ++kj) {
      const Scalar wv = w[ki * g.K + kj];
      const int ix0 = kj * g.dilation - g.pad;
      for (int oy = 0; oy < g.out_h; ++oy) {
        const int iy = oy * g.stride - g.pad + ki * g.dilation;
        if (iy < 0 || iy >= g.H) continue;
        const Scalar* line = x + int64_t(iy) * g.W;
        Scalar* o = out + int64_t(oy) * g.out_w;
        if (g.stride == 1) {
          const int lo = std::max(0, -ix0), hi = std::min(g.out_w, g.W - ix0);
          for (int ox = lo; ox < hi; ++ox) o[ox] += wv * line[ox + ix0];
        } else {
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ox * g.stride + ix0;
            if (ix >= 0 && ix < g.W) o[ox] += wv * line[ix];
          }
        }
      }
    }
}

void dw_backward(const Scalar* x, const Scalar* w, const Scalar* gout, const ConvGeom& g,
                 Scalar* gx, Scalar* gw) {
  for (int ki = 0; ki < g.K; ++ki)
    for (int kj = 0; kj < g.K; ++kj) {
      const Scalar wv = w[ki * g.K + kj];
      const int ix0 = kj * g.dilation - g.pad;
      Scalar acc = 0;
      for (int oy = 0; oy < g.out_h; ++oy) {
        const int iy = oy * g.stride - g.pad + ki * g.dilation;
        if (iy < 0 || iy >= g.H) continue;
        const Scalar* line = x + int64_t(iy) * g.W;
        Scalar* gline = gx ? gx + int64_t(iy) * g.W : nullptr;
        const Scalar* go = gout + int64_t(oy) * g.out_w;
        if (g.stride == 1) {
          const int lo = std::max(0, -ix0), hi = std::min(g.out_w, g.W - ix0);
          for (int ox = lo; ox < hi; ++ox) acc += go[ox] * line[ox + ix0];
          if (gline)
            for (int ox = lo; ox < hi; ++ox) gline[ox + ix0] += wv * go[ox];
        } else {
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ox * g.stride + ix0;
            if (ix < 0 || ix >= g.W) continue;
            acc += go[ox] * line[ix];
            if (gline) gline[ix] += wv * go[ox];
          }
        }
      }
      if (gw) gw[ki * g.K + kj] += acc;
    }
}

void check_4d(const Tensor& t, const char* what) {
  if (t.shape().size() != 4)
    throw std::invalid_argument(std::string(what) + ": expects a 4-D tensor, got " +
                                shape_str(t.shape()));
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& weight, int stride, int padding,
              int dilation, int groups) {
  check_4d(input, "conv2d input");
  check_4d(weight, "conv2d weight");
  const Shape& xs = input.shape();
  const Shape& ws = weight.shape();
  const int B = xs[0], C = xs[1], H = xs[2], W = xs[3];
  const int O = ws[0], Cw = ws[1], K = ws[2];
  if (ws[3] != K) throw std::invalid_argument("conv2d: non-square kernel");
  if (C % groups != 0 || O % groups != 0)
    throw std::invalid_argument("conv2d: channels not divisible by groups");
  if (Cw != C / groups)
    throw std::invalid_argument("conv2d: weight channels " + std::to_string(Cw) +
                                " do not match input channels " + std::to_string(C) +
                                " / groups " + std::to_string(groups));
  ConvGeom g = conv_geom(C, H, W, K, stride, padding, dilation);
  const int P = g.out_h * g.out_w;
  const int ckk = (C / groups) * K * K;
  const int og = O / groups;

  // pointwise convs skip im2col: the column matrix is the image itself
  const bool unit = K == 1 && stride == 1 && padding == 0 && dilation == 1;
  const bool depthwise = groups == C && O == C && K > 1;

  Buffer out(int64_t(B) * O * P);
  if (depthwise) {
    for (int b = 0; b < B; ++b)
      for (int c = 0; c < C; ++c)
        dw_forward(input.data().data() + (int64_t(b) * C + c) * H * W,
                   weight.data().data() + int64_t(c) * K * K, g,
                   out.data() + (int64_t(b) * C + c) * P);
    auto xn = input.node();
    auto wn = weight.node();
    auto rn = std::make_shared<TensorNode>();
    rn->shape = {B, O, g.out_h, g.out_w};
    rn->data = std::move(out);
    rn->requires_grad = xn->requires_grad || wn->requires_grad;
    if (rn->requires_grad) {
      rn->parents = {xn, wn};
      TensorNode* r = rn.get();
      rn->backprop = [r, xn, wn, g, B, C, K, P]() {
        Scalar* gw = wn->requires_grad ? wn->ensure_grad().data() : nullptr;
        Scalar* gx = xn->requires_grad ? xn->ensure_grad().data() : nullptr;
        for (int b = 0; b < B; ++b)
          for (int c = 0; c < C; ++c)
            dw_backward(xn->data.data() + (int64_t(b) * C + c) * g.H * g.W,
                        wn->data.data() + int64_t(c) * K * K,
                        r->grad.data() + (int64_t(b) * C + c) * P, g,
                        gx ? gx + (int64_t(b) * C + c) * g.H * g.W : nullptr,
                        gw ? gw + int64_t(c) * K * K : nullptr);
      };
    }
    return Tensor(std::move(rn));
  }
  Buffer col(unit ? 0 : int64_t(C) * K * K * P);
  for (int b = 0; b < B; ++b) {
    const Scalar* cols = input.data().data() + int64_t(b) * C * H * W;
    if (!unit) {
      im2col(cols, g, col.data());
      cols = col.data();
    }
    for (int gr = 0; gr < groups; ++gr) {
      CMapRM Wm(weight.data().data() + int64_t(gr) * og * ckk, og, ckk);
      CMapRM Cm(cols + int64_t(gr) * ckk * P, ckk, P);
      MapRM Om(out.data() + (int64_t(b) * O + int64_t(gr) * og) * P, og, P);
      Om.noalias() = Wm * Cm;
    }
  }

  auto xn = input.node();
  auto wn = weight.node();
  auto rn = std::make_shared<TensorNode>();
  rn->shape = {B, O, g.out_h, g.out_w};
  rn->data = std::move(out);
  rn->requires_grad = xn->requires_grad || wn->requires_grad;
  if (rn->requires_grad) {
    rn->parents = {xn, wn};
    TensorNode* r = rn.get();
    rn->backprop = [r, xn, wn, g, B, C, O, K, P, ckk, og, groups, unit]() {
      Buffer col(unit ? 0 : int64_t(C) * K * K * P);
      Buffer gcol(unit ? 0 : int64_t(C) * K * K * P);
      Scalar* gw = wn->requires_grad ? wn->ensure_grad().data() : nullptr;
      Scalar* gx = xn->requires_grad ? xn->ensure_grad().data() : nullptr;
      for (int b = 0; b < B; ++b) {
        const Scalar* cols = xn->data.data() + int64_t(b) * C * g.H * g.W;
        if (gw && !unit) {
          im2col(cols, g, col.data());
          cols = col.data();
        }
        Scalar* gcols = unit ? gx + int64_t(b) * C * g.H * g.W : gcol.data();
        for (int gr = 0; gr < groups; ++gr) {
          CMapRM Gm(r->grad.data() + (int64_t(b) * O + int64_t(gr) * og) * P, og, P);
          if (gw) {
            CMapRM Cm(cols + int64_t(gr) * ckk * P, ckk, P);
            MapRM GW(gw + int64_t(gr) * og * ckk, og, ckk);
            GW.noalias() += Gm * Cm.transpose();
          }
          if (gx) {
            CMapRM Wm(wn->data.data() + int64_t(gr) * og * ckk, og, ckk);
            MapRM GC(gcols + int64_t(gr) * ckk * P, ckk, P);
            if (unit)
              GC.noalias() += Wm.transpose() * Gm;
            else
              GC.noalias() = Wm.transpose() * Gm;
          }
        }
        if (gx && !unit) col2im(gcol.data(), g, gx + int64_t(b) * C * g.H * g.W);
      }
    };
  }
  return Tensor(std::move(rn));
}

Tensor conv_transpose2d(const Tensor& input, const Tensor& weight, int stride, int padding) {
  check_4d(input, "conv_transpose2d input");
  check_4d(weight, "conv_transpose2d weight");
  const Shape& xs = input.shape();
  const Shape& ws = weight.shape();
  const int B = xs[0], C = xs[1], H = xs[2], W = xs[3];
  const int Cw = ws[0], O = ws[1], K = ws[2];
  if (ws[3] != K) throw std::invalid_argument("conv_transpose2d: non-square kernel");
  if (Cw != C)
    throw std::invalid_argument("conv_transpose2d: weight in-channels " + std::to_string(Cw) +
                                " do not match input channels " + std::to_string(C));
  if (stride < 1) throw std::invalid_argument("conv_transpose2d: stride must be >= 1");
  const int out_h = (H - 1) * stride - 2 * padding + K;
  const int out_w = (W - 1) * stride - 2 * padding + K;
  if (out_h <= 0 || out_w <= 0) throw std::invalid_argument("conv_transpose2d: empty output");
  // Geometry of the conv this op is the adjoint of.
  ConvGeom g = conv_geom(O, out_h, out_w, K, stride, padding, 1);
  if (g.out_h != H || g.out_w != W)
    throw std::invalid_argument("conv_transpose2d: inconsistent geometry");
  const int P = H * W;
  const int okk = O * K * K;

  Buffer out = Buffer::Zero(int64_t(B) * O * out_h * out_w);
  Buffer col(int64_t(okk) * P);
  CMapRM Wm(weight.data().data(), C, okk);
  for (int b = 0; b < B; ++b) {
    CMapRM Xm(input.data().data() + int64_t(b) * C * P, C, P);
    MapRM Cm(col.data(), okk, P);
    Cm.noalias() = Wm.transpose() * Xm;
    col2im(col.data(), g, out.data() + int64_t(b) * O * out_h * out_w);
  }

  auto xn = input.node();
  auto wn = weight.node();
  auto rn = std::make_shared<TensorNode>();
  rn->shape = {B, O, out_h, out_w};
  rn->data = std::move(out);
  rn->requires_grad = xn->requires_grad || wn->requires_grad;
  if (rn->requires_grad) {
    rn->parents = {xn, wn};
    TensorNode* r = rn.get();
    rn->backprop = [r, xn, wn, g, B, C, O, P, okk, out_h, out_w]() {
      Buffer col(int64_t(okk) * P);
      CMapRM Wm(wn->data.data(), C, okk);
      for (int b = 0; b < B; ++b) {
        im2col(r->grad.data() + int64_t(b) * O * out_h * out_w, g, col.data());
        CMapRM Cm(col.data(), okk, P);
        if (xn->requires_grad) {
          MapRM GX(xn->ensure_grad().data() + int64_t(b) * C * P, C, P);
          GX.noalias() += Wm * Cm;
        }
        if (wn->requires_grad) {
          CMapRM Xm(xn->data.data() + int64_t(b) * C * P, C, P);
          MapRM GW(wn->ensure_grad().data(), C, okk);
          GW.noalias() += Xm * Cm.transpose();
        }
      }
    };
  }
  return Tensor(std::move(rn));
}

Tensor batch_norm(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                  BatchNormStats& stats, bool training, Scalar momentum, Scalar eps) {
  check_4d(input, "batch_norm input");
  if (!(eps > 0)) throw std::invalid_argument("batch_norm: eps must be > 0");
  const Shape& xs = input.shape();
  const int B = xs[0], C = xs[1], H = xs[2], W = xs[3];
  if (gamma.numel() != C || beta.numel() != C)
    throw std::invalid_argument("batch_norm: gamma/beta size mismatch");
  if (stats.running_mean.size() != C) {
    stats.running_mean = Buffer::Zero(C);
    stats.running_var = Buffer::Constant(C, Scalar(1));
  }
  const int64_t plane = int64_t(H) * W;
  const int64_t n = int64_t(B) * plane;

  Buffer mean_c(C), invstd_c(C);
  if (training) {
    for (int c = 0; c < C; ++c) {
      double s = 0.0, s2 = 0.0;
      for (int b = 0; b < B; ++b) {
        const Scalar* p = input.data().data() + (int64_t(b) * C + c) * plane;
        for (int64_t i = 0; i < plane; ++i) {
          s += double(p[i]);
          s2 += double(p[i]) * double(p[i]);
        }
      }
      double mu = s / double(n);
      double var = s2 / double(n) - mu * mu;
      if (var < 0) var = 0;
      mean_c[c] = Scalar(mu);
      invstd_c[c] = Scalar(1.0 / std::sqrt(var + double(eps)));
      stats.running_mean[c] = (Scalar(1) - momentum) * stats.running_mean[c] + momentum * Scalar(mu);
      stats.running_var[c] = (Scalar(1) - momentum) * stats.running_var[c] + momentum * Scalar(var);
    }
  } else {
    for (int c = 0; c < C; ++c) {
      mean_c[c] = stats.running_mean[c];
      invstd_c[c] = Scalar(1.0 / std::sqrt(double(stats.running_var[c]) + double(eps)));
    }
  }

  Buffer out(input.numel());
  for (int b = 0; b < B; ++b)
    for (int c = 0; c < C; ++c) {
      const Scalar* p = input.data().data() + (int64_t(b) * C + c) * plane;
      Scalar* o = out.data() + (int64_t(b) * C + c) * plane;
      const Scalar a = gamma.data()[c] * invstd_c[c];
      const Scalar d = beta.data()[c] - a * mean_c[c];
      for (int64_t i = 0; i < plane; ++i) o[i] = a * p[i] + d;
    }

  auto xn = input.node();
  auto gn = gamma.node();
  auto bn = beta.node();
  auto rn = std::make_shared<TensorNode>();
  rn->shape = xs;
  rn->data = std::move(out);
  rn->requires_grad = xn->requires_grad || gn->requires_grad || bn->requires_grad;
  if (rn->requires_grad) {
    rn->parents = {xn, gn, bn};
    TensorNode* r = rn.get();
    rn->backprop = [r, xn, gn, bn, mean_c, invstd_c, training, B, C, plane, n]() {
      for (int c = 0; c < C; ++c) {
        const Scalar mu = mean_c[c], is = invstd_c[c];
        double sum_g = 0.0, sum_gx = 0.0;  // sum of grad, and of grad * xhat
        for (int b = 0; b < B; ++b) {
          const Scalar* gp = r->grad.data() + (int64_t(b) * C + c) * plane;
          const Scalar* xp = xn->data.data() + (int64_t(b) * C + c) * plane;
          for (int64_t i = 0; i < plane; ++i) {
            sum_g += double(gp[i]);
            sum_gx += double(gp[i]) * double((xp[i] - mu) * is);
          }
        }
        if (gn->requires_grad) gn->ensure_grad()[c] += Scalar(sum_gx);
        if (bn->requires_grad) bn->ensure_grad()[c] += Scalar(sum_g);
        if (xn->requires_grad) {
          const Scalar gam = gn->data[c];
          Buffer& gx = xn->ensure_grad();
          if (training) {
            const Scalar mean_g = Scalar(sum_g / double(n));
            const Scalar mean_gx = Scalar(sum_gx / double(n));
            for (int b = 0; b < B; ++b) {
              const Scalar* gp = r->grad.data() + (int64_t(b) * C + c) * plane;
              const Scalar* xp = xn->data.data() + (int64_t(b) * C + c) * plane;
              Scalar* o = gx.data() + (int64_t(b) * C + c) * plane;
              for (int64_t i = 0; i < plane; ++i) {
                const Scalar xhat = (xp[i] - mu) * is;
                o[i] += gam * is * (gp[i] - mean_g - xhat * mean_gx);
              }
            }
          } else {
            const Scalar a = gam * is;
            for (int b = 0; b < B; ++b) {
              const Scalar* gp = r->grad.data() + (int64_t(b) * C + c) * plane;
              Scalar* o = gx.data() + (int64_t(b) * C + c) * plane;
              for (int64_t i = 0; i < plane; ++i) o[i] += a * gp[i];
            }
          }
        }
      }
    };
  }
  return Tensor(std::move(rn));
}

Tensor max_pool2d(const Tensor& input, int kernel, int stride, int padding) {
  check_4d(input, "max_pool2d input");
  const Shape& xs = input.shape();
  const int B = xs[0], C = xs[1], H = xs[2], W = xs[3];
  ConvGeom g = conv_geom(C, H, W, kernel, stride, padding, 1);
  const int P = g.out_h * g.out_w;
  Buffer out(int64_t(B) * C * P);
  auto argmax = std::make_shared<std::vector<int32_t>>(size_t(int64_t(B) * C * P));
  for (int b = 0; b < B; ++b)
    for (int c = 0; c < C; ++c) {
      const Scalar* plane = input.data().data() + (int64_t(b) * C + c) * H * W;
      Scalar* o = out.data() + (int64_t(b) * C + c) * P;
      int32_t* am = argmax->data() + (int64_t(b) * C + c) * P;
      for (int oy = 0; oy < g.out_h; ++oy)
        for (int ox = 0; ox < g.out_w; ++ox) {
          Scalar best = -std::numeric_limits<Scalar>::infinity();
          int32_t best_i = -1;
          for (int ki = 0; ki < kernel; ++ki) {
            int iy = oy * stride - padding + ki;
            if (iy < 0 || iy >= H) continue;
            for (int kj = 0; kj < kernel; ++kj) {
              int ix = ox * stride - padding + kj;
              if (ix < 0 || ix >= W) continue;
              Scalar v = plane[int64_t(iy) * W + ix];
              if (v > best) {
                best = v;
                best_i = int32_t(iy * W + ix);
              }
            }
          }
          o[int64_t(oy) * g.out_w + ox] = best;
          am[int64_t(oy) * g.out_w + ox] = best_i;
        }
    }
  auto xn = input.node();
  auto rn = std::make_shared<TensorNode>();
  rn->shape = {B, C, g.out_h, g.out_w};
  rn->data = std::move(out);
  rn->requires_grad = xn->requires_grad;
  if (rn->requires_grad) {
    rn->parents = {xn};
    TensorNode* r = rn.get();
    rn->backprop = [r, xn, argmax, B, C, P, H, W]() {
      Buffer& gx = xn->ensure_grad();
      for (int64_t bc = 0; bc < int64_t(B) * C; ++bc) {
        const Scalar* gp = r->grad.data() + bc * P;
        const int32_t* am = argmax->data() + bc * P;
        Scalar* o = gx.data() + bc * H * W;
        for (int64_t i = 0; i < P; ++i)
          if (am[i] >= 0) o[am[i]] += gp[i];
      }
    };
  }
  return Tensor(std::move(rn));
}

Tensor avg_pool2d(const Tensor& input, int kernel, int stride, int padding) {
  check_4d(input, "avg_pool2d input");
  const Shape& xs = input.shape();
  const int B = xs[0], C = xs[1], H = xs[2], W = xs[3];
  ConvGeom g = conv_geom(C, H, W, kernel, stride, padding, 1);
  const int P = g.out_h * g.out_w;
  // counts depend only on the output position
  auto counts = std::make_shared<std::vector<Scalar>>(size_t(P));
  for (int oy = 0; oy < g.out_h; ++oy)
    for (int ox = 0; ox < g.out_w; ++ox) {
      int cnt = 0;
      for (int ki = 0; ki < kernel; ++ki) {
        int iy = oy * stride - padding + ki;
        if (iy < 0 || iy >= H) continue;
        for (int kj = 0; kj < kernel; ++kj) {
          int ix = ox * stride - padding + kj;
          if (ix >= 0 && ix < W) ++cnt;
        }
      }
      (*counts)[int64_t(oy) * g.out_w + ox] = Scalar(1) / Scalar(cnt);
    }
  Buffer out(int64_t(B) * C * P);
  for (int64_t bc = 0; bc < int64_t(B) * C; ++bc) {
    const Scalar* plane = input.data().data() + bc * H * W;
    Scalar* o = out.data() + bc * P;
    for (int oy = 0; oy < g.out_h; ++oy)
      for (int ox = 0; ox < g.out_w; ++ox) {
        double s = 0.0;
        for (int ki = 0; ki < kernel; ++ki) {
          int iy = oy * stride - padding + ki;
          if (iy < 0 || iy >= H) continue;
          for (int kj = 0; kj < kernel; ++kj) {
            int ix = ox * stride - padding + kj;
            if (ix >= 0 && ix < W) s += double(plane[int64_t(iy) * W + ix]);
          }
        }
        o[int64_t(oy) * g.out_w + ox] = Scalar(s) * (*counts)[int64_t(oy) * g.out_w + ox];
      }
  }
  auto xn = input.node();
  auto rn = std::make_shared<TensorNode>();
  rn->shape = {B, C, g.out_h, g.out_w};
  rn->data = std::move(out);
  rn->requires_grad = xn->requires_grad;
  if (rn->requires_grad) {
    rn->parents = {xn};
    TensorNode* r = rn.get();
    int k = kernel, s = stride, p = padding, oh = g.out_h, ow = g.out_w;
    rn->backprop = [r, xn, counts, B, C, P, H, W, k, s, p, oh, ow]() {
      Buffer& gx = xn->ensure_grad();
      for (int64_t bc = 0; bc < int64_t(B) * C; ++bc) {
        const Scalar* gp = r->grad.data() + bc * P;
        Scalar* o = gx.data() + bc * H * W;
        for (int oy = 0; oy < oh; ++oy)
          for (int ox = 0; ox < ow; ++ox) {
            const Scalar gv = gp[int64_t(oy) * ow + ox] * (*counts)[int64_t(oy) * ow + ox];
            for (int ki = 0; ki < k; ++ki) {
              int iy = oy * s - p + ki;
              if (iy < 0 || iy >= H) continue;
              for (int kj = 0; kj < k; ++kj) {
                int ix = ox * s - p + kj;
                if (ix >= 0 && ix < W) o[int64_t(iy) * W + ix] += gv;
              }
            }
          }
      }
    };
  }
  return Tensor(std::move(rn));
}

Tensor global_avg_pool(const Tensor& input) {
  check_4d(input, "global_avg_pool input");
  const Shape& xs = input.shape();
  const int B = xs[0], C = xs[1];
  const int64_t plane = int64_t(xs[2]) * xs[3];
  Buffer out(int64_t(B) * C);
  for (int64_t bc = 0; bc < int64_t(B) * C; ++bc) {
    const Scalar* p = input.data().data() + bc * plane;
    double s = 0.0;
    for (int64_t i = 0; i < plane; ++i) s += double(p[i]);
    out[bc] = Scalar(s / double(plane));
  }
  auto xn = input.node();
  auto rn = std::make_shared<TensorNode>();
  rn->shape = {B, C};
  rn->data = std::move(out);
  rn->requires_grad = xn->requires_grad;
  if (rn->requires_grad) {
    rn->parents = {xn};
    TensorNode* r = rn.get();
    rn->backprop = [r, xn, B, C, plane]() {
      Buffer& gx = xn->ensure_grad();
      for (int64_t bc = 0; bc < int64_t(B) * C; ++bc) {
        const Scalar gv = r->grad[bc] / Scalar(plane);
        Scalar* o = gx.data() + bc * plane;
        for (int64_t i = 0; i < plane; ++i) o[i] += gv;
      }
    };
  }
  return Tensor(std::move(rn));
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (x.shape().size() != 2 || weight.shape().size() != 2)
    throw std::invalid_argument("linear: expects 2-D input and weight");
  const int B = x.shape()[0], F = x.shape()[1];
  const int Fw = weight.shape()[0], K = weight.shape()[1];
  if (F != Fw) throw std::invalid_argument("linear: feature dimension mismatch");
  const bool has_bias = bias.defined();
  if (has_bias && bias.numel() != K) throw std::invalid_argument("linear: bias size mismatch");

  Buffer out(int64_t(B) * K);
  {
    CMapRM Xm(x.data().data(), B, F);
    CMapRM Wm(weight.data().data(), F, K);
    MapRM Om(out.data(), B, K);
    Om.noalias() = Xm * Wm;
    if (has_bias)
      for (int b = 0; b < B; ++b)
        for (int k = 0; k < K; ++k) out[int64_t(b) * K + k] += bias.data()[k];
  }
  auto xn = x.node();
  auto wn = weight.node();
  auto bn = has_bias ? bias.node() : nullptr;
  auto rn = std::make_shared<TensorNode>();
  rn->shape = {B, K};
  rn->data = std::move(out);
  rn->requires_grad = xn->requires_grad || wn->requires_grad || (bn && bn->requires_grad);
  if (rn->requires_grad) {
    rn->parents = {xn, wn};
    if (bn) rn->parents.push_back(bn);
    TensorNode* r = rn.get();
    rn->backprop = [r, xn, wn, bn, B, F, K]() {
      CMapRM Gm(r->grad.data(), B, K);
      if (xn->requires_grad) {
        CMapRM Wm(wn->data.data(), F, K);
        MapRM GX(xn->ensure_grad().data(), B, F);
        GX.noalias() += Gm * Wm.transpose();
      }
      if (wn->requires_grad) {
        CMapRM Xm(xn->data.data(), B, F);
        MapRM GW(wn->ensure_grad().data(), F, K);
        GW.noalias() += Xm.transpose() * Gm;
      }
      if (bn && bn->requires_grad) {
        Buffer& gb = bn->ensure_grad();
        for (int b = 0; b < B; ++b)
          for (int k = 0; k < K; ++k) gb[k] += r->grad[int64_t(b) * K + k];
      }
    };
  }
  return Tensor(std::move(rn));
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
  if (logits.shape().size() != 2) throw std::invalid_argument("cross_entropy: expects [B,K] logits");
  const int B = logits.shape()[0], K = logits.shape()[1];
  if (int(labels.size()) != B) throw std::invalid_argument("cross_entropy: label count mismatch");
  for (int y : labels)
    if (y < 0 || y >= K)
      throw std::invalid_argument("cross_entropy: label " + std::to_string(y) +
                                  " out of range [0," + std::to_string(K) + ")");
  auto probs = std::make_shared<Buffer>(int64_t(B) * K);
  double loss = 0.0;
  for (int b = 0; b < B; ++b) {
    const Scalar* row = logits.data().data() + int64_t(b) * K;
    Scalar m = *std::max_element(row, row + K);
    double denom = 0.0;
    for (int k = 0; k < K; ++k) denom += std::exp(double(row[k]) - double(m));
    for (int k = 0; k < K; ++k)
      (*probs)[int64_t(b) * K + k] = Scalar(std::exp(double(row[k]) - double(m)) / denom);
    loss += std::log(denom) - (double(row[labels[b]]) - double(m));
  }
  loss /= double(B);

  auto xn = logits.node();
  auto rn = std::make_shared<TensorNode>();
  rn->shape = {1};
  rn->data = Buffer::Constant(1, Scalar(loss));
  rn->requires_grad = xn->requires_grad;
  if (rn->requires_grad) {
    rn->parents = {xn};
    TensorNode* r = rn.get();
    auto lab = std::make_shared<std::vector<int>>(labels);
    rn->backprop = [r, xn, probs, lab, B, K]() {
      const Scalar g = r->grad[0] / Scalar(B);
      Buffer& gx = xn->ensure_grad();
      for (int b = 0; b < B; ++b) {
        const Scalar* p = probs->data() + int64_t(b) * K;
        Scalar* o = gx.data() + int64_t(b) * K;
        for (int k = 0; k < K; ++k) o[k] += g * (p[k] - Scalar(k == (*lab)[b]));
      }
    };
  }
  return Tensor(std::move(rn));
}

}  // namespace mimdarts
