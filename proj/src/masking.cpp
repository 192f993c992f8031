#include "mimdarts/masking.hpp"

#include <cmath>
#include <stdexcept>

namespace mimdarts {

PatchGeometry::PatchGeometry(int H, int W, int C, int P) : P(P), H(H), W(W), C(C) {
  if (P <= 0 || H % P != 0 || W % P != 0)
    throw std::invalid_argument("patch geometry: image " + std::to_string(H) + "x" +
                                std::to_string(W) + " not divisible by patch size " +
                                std::to_string(P));
  N = (H / P) * (W / P);
}

int MaskPlan::masked_count_per_image() const {
  return int(std::floor(double(ratio) * geom.N));
}

Tensor MaskPlan::pixel_mask() const {
  const int gw = geom.W / geom.P;
  Tensor m = Tensor::zeros({batch, geom.C, geom.H, geom.W});
  Buffer& d = m.data();
  for (int b = 0; b < batch; ++b)
    for (int c = 0; c < geom.C; ++c)
      for (int h = 0; h < geom.H; ++h)
        for (int w = 0; w < geom.W; ++w) {
          int patch = (h / geom.P) * gw + (w / geom.P);
          d[((int64_t(b) * geom.C + c) * geom.H + h) * geom.W + w] =
              Scalar(masked(b, patch));
        }
  return m;
}

Tensor patchify(const Tensor& x, int P) {
  const Shape& s = x.shape();
  if (s.size() != 4) throw std::invalid_argument("patchify: expects [B,C,H,W]");
  const int B = s[0], C = s[1], H = s[2], W = s[3];
  PatchGeometry g(H, W, C, P);
  const int gw = W / P;
  const int patch_len = P * P * C;
  Buffer out(x.numel());
  for (int b = 0; b < B; ++b)
    for (int n = 0; n < g.N; ++n) {
      const int py = (n / gw) * P, px = (n % gw) * P;
      Scalar* dst = out.data() + (int64_t(b) * g.N + n) * patch_len;
      for (int c = 0; c < C; ++c)
        for (int i = 0; i < P; ++i)
          for (int j = 0; j < P; ++j)
            dst[(int64_t(c) * P + i) * P + j] =
                x.data()[((int64_t(b) * C + c) * H + py + i) * W + px + j];
    }
  auto xn = x.node();
  auto rn = std::make_shared<TensorNode>();
  rn->shape = {B, g.N, patch_len};
  rn->data = std::move(out);
  rn->requires_grad = xn->requires_grad;
  if (rn->requires_grad) {
    rn->parents = {xn};
    TensorNode* r = rn.get();
    rn->backprop = [r, xn, g, B, gw, patch_len]() {
      Buffer& gx = xn->ensure_grad();
      const int C = g.C, H = g.H, W = g.W, P = g.P;
      for (int b = 0; b < B; ++b)
        for (int n = 0; n < g.N; ++n) {
          const int py = (n / gw) * P, px = (n % gw) * P;
          const Scalar* src = r->grad.data() + (int64_t(b) * g.N + n) * patch_len;
          for (int c = 0; c < C; ++c)
            for (int i = 0; i < P; ++i)
              for (int j = 0; j < P; ++j)
                gx[((int64_t(b) * C + c) * H + py + i) * W + px + j] +=
                    src[(int64_t(c) * P + i) * P + j];
        }
    };
  }
  return Tensor(std::move(rn));
}

Tensor unpatchify(const Tensor& xp, const PatchGeometry& g) {
  const Shape& s = xp.shape();
  const int patch_len = g.P * g.P * g.C;
  if (s.size() != 3 || s[1] != g.N || s[2] != patch_len)
    throw std::invalid_argument("unpatchify: shape " + shape_str(s) +
                                " does not match geometry");
  const int B = s[0], C = g.C, H = g.H, W = g.W, P = g.P;
  const int gw = W / P;
  Buffer out(xp.numel());
  for (int b = 0; b < B; ++b)
    for (int n = 0; n < g.N; ++n) {
      const int py = (n / gw) * P, px = (n % gw) * P;
      const Scalar* src = xp.data().data() + (int64_t(b) * g.N + n) * patch_len;
      for (int c = 0; c < C; ++c)
        for (int i = 0; i < P; ++i)
          for (int j = 0; j < P; ++j)
            out[((int64_t(b) * C + c) * H + py + i) * W + px + j] =
                src[(int64_t(c) * P + i) * P + j];
    }
  auto xn = xp.node();
  auto rn = std::make_shared<TensorNode>();
  rn->shape = {B, C, H, W};
  rn->data = std::move(out);
  rn->requires_grad = xn->requires_grad;
  if (rn->requires_grad) {
    rn->parents = {xn};
    TensorNode* r = rn.get();
    PatchGeometry geom = g;
    rn->backprop = [r, xn, geom, B, gw, patch_len]() {
      Buffer& gx = xn->ensure_grad();
      const int C = geom.C, H = geom.H, W = geom.W, P = geom.P;
      for (int b = 0; b < B; ++b)
        for (int n = 0; n < geom.N; ++n) {
          const int py = (n / gw) * P, px = (n % gw) * P;
          Scalar* dst = gx.data() + (int64_t(b) * geom.N + n) * patch_len;
          for (int c = 0; c < C; ++c)
            for (int i = 0; i < P; ++i)
              for (int j = 0; j < P; ++j)
                dst[(int64_t(c) * P + i) * P + j] +=
                    r->grad[((int64_t(b) * C + c) * H + py + i) * W + px + j];
        }
    };
  }
  return Tensor(std::move(rn));
}

MaskPlan sample_mask(const PatchGeometry& geom, int batch, float ratio, Rng& rng) {
  if (ratio < 0.f || ratio > 1.f) throw std::invalid_argument("sample_mask: ratio outside [0,1]");
  MaskPlan plan{geom, ratio, batch, std::vector<uint8_t>(size_t(batch) * geom.N, 0)};
  const int k = plan.masked_count_per_image();
  for (int b = 0; b < batch; ++b) {
    auto chosen = rng.sample_without_replacement(geom.N, k);
    for (int p : chosen) plan.mask[size_t(b) * geom.N + p] = 1;
  }
  return plan;
}

Tensor apply_mask(const Tensor& x, const MaskPlan& plan) {
  const Shape& s = x.shape();
  if (s.size() != 4 || s[0] != plan.batch || s[1] != plan.geom.C || s[2] != plan.geom.H ||
      s[3] != plan.geom.W)
    throw std::invalid_argument("apply_mask: input shape " + shape_str(s) +
                                " does not match mask plan");
  Tensor keep = plan.pixel_mask();
  keep.data() = Scalar(1) - keep.data();
  return mul(x, keep);
}

}  // namespace mimdarts
