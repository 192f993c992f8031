#include "mimdarts/heads.hpp"

#include <stdexcept>

namespace mimdarts {

ReconstructionDecoder::ReconstructionDecoder(const DecoderConfig& cfg, Rng& rng)
    : cfg_(cfg),
      spatial_conv_(cfg.in_channels, cfg.in_channels, 3, 1, 1, rng),
      channel_conv_(cfg.in_channels, cfg.width, 1, 1, 0, rng),
      filter1_(cfg.width, cfg.width, 3, 1, 1, rng),
      bn1_(cfg.width),
      up1_(cfg.width, cfg.width / 2, 4, 2, 1, rng),
      filter2_(cfg.width / 2, cfg.width / 2, 3, 1, 1, rng),
      bn2_(cfg.width / 2),
      up2_(cfg.width / 2, cfg.width / 4, 4, 2, 1, rng),
      out_conv_(cfg.width / 4, cfg.out_channels, 3, 1, 1, rng) {
  if (cfg.width % 4 != 0) throw std::invalid_argument("decoder width must be divisible by 4");
}

Tensor ReconstructionDecoder::forward(const Tensor& x_inter, bool training) {
  if (x_inter.shape().size() != 4 || x_inter.shape()[1] != cfg_.in_channels)
    throw std::invalid_argument("decoder: expected [B," + std::to_string(cfg_.in_channels) +
                                ",H/4,W/4] input, got " + shape_str(x_inter.shape()));
  Tensor h = spatial_conv_.forward(x_inter, training);
  h = channel_conv_.forward(h, training);
  h = relu(bn1_.forward(filter1_.forward(h, training), training));
  h = up1_.forward(h, training);
  h = relu(bn2_.forward(filter2_.forward(h, training), training));
  h = up2_.forward(h, training);
  h = out_conv_.forward(h, training);
  return hardtanh(h, cfg_.hardtanh_lo, cfg_.hardtanh_hi);
}

void ReconstructionDecoder::collect(ModuleState& s) {
  spatial_conv_.collect(s);
  channel_conv_.collect(s);
  filter1_.collect(s);
  bn1_.collect(s);
  up1_.collect(s);
  filter2_.collect(s);
  bn2_.collect(s);
  up2_.collect(s);
  out_conv_.collect(s);
}

}  // namespace mimdarts
