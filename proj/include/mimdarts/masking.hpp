#pragma once

#include "mimdarts/rng.hpp"
#include "mimdarts/tensor.hpp"

namespace mimdarts {

/// Non-overlapping square patch grid over an image.
struct PatchGeometry {
  int P;  // patch resolution in pixels
  int N;  // patch count, (H/P)*(W/P)
  int H, W, C;

  PatchGeometry(int H, int W, int C, int P);
};

/// One batch worth of binary patch masks (1 = masked), one row per image.
struct MaskPlan {
  PatchGeometry geom;
  float ratio;
  int batch;
  std::vector<uint8_t> mask;  // [batch * N]

  uint8_t masked(int b, int patch) const { return mask[size_t(b) * geom.N + patch]; }
  int masked_count_per_image() const;
  /// Pixel-level broadcast of the patch mask as a constant [B,C,H,W] tensor.
  Tensor pixel_mask() const;
};

/// [B,C,H,W] -> [B,N,P*P*C], blocks in row-major grid order, each patch laid
/// out channel-planar row-major. unpatchify inverts it exactly.
Tensor patchify(const Tensor& x, int P);
Tensor unpatchify(const Tensor& xp, const PatchGeometry& geom);

/// Exactly floor(ratio*N) distinct patches per image, uniform over subsets.
MaskPlan sample_mask(const PatchGeometry& geom, int batch, float ratio, Rng& rng);

/// x_mask = (1 - m) ⊙ x_p, reshaped back to image form.
Tensor apply_mask(const Tensor& x, const MaskPlan& plan);

}  // namespace mimdarts
