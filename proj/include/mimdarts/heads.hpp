#pragma once

#include "mimdarts/modules.hpp"

namespace mimdarts {

/// Global average pooling + one linear layer to class logits.
struct ClassifierHead {
  LinearLayer fc;

  ClassifierHead(int in_channels, int num_classes, Rng& rng) : fc(in_channels, num_classes, rng) {}
  Tensor forward(const Tensor& x_inter, bool training) {
    return fc.forward(global_avg_pool(x_inter), training);
  }
  void collect(ModuleState& s) { fc.collect(s); }
};

struct DecoderConfig {
  int in_channels = 64;   // C' of the encoder output
  int width = 128;        // channels after the 1x1 propagation conv
  int out_channels = 3;
  Scalar hardtanh_lo = -3.f;  // normalized data range of the dataset
  Scalar hardtanh_hi = 3.f;
};

/// Reconstruction decoder: 3x3 spatial propagation, 1x1 channel propagation,
/// two x2 upsampling stages (3x3 conv + BN + ReLU, then 4x4 stride-2
/// transposed conv halving channels), final 3x3 conv to image channels,
/// HardTanh clip to the normalized range.
class ReconstructionDecoder {
 public:
  ReconstructionDecoder(const DecoderConfig& cfg, Rng& rng);

  /// [B,C',H/4,W/4] -> [B,3,H,W]
  Tensor forward(const Tensor& x_inter, bool training);
  void collect(ModuleState& s);
  const DecoderConfig& config() const { return cfg_; }

 private:
  DecoderConfig cfg_;
  Conv2dLayer spatial_conv_;   // 3x3, C' -> C'
  Conv2dLayer channel_conv_;   // 1x1, C' -> width
  Conv2dLayer filter1_;        // 3x3 learned filter before each upsampling
  BatchNormLayer bn1_;
  ConvTranspose2dLayer up1_;   // width -> width/2, x2
  Conv2dLayer filter2_;
  BatchNormLayer bn2_;
  ConvTranspose2dLayer up2_;   // width/2 -> width/4, x2
  Conv2dLayer out_conv_;       // 3x3 -> out_channels
};

}  // namespace mimdarts
