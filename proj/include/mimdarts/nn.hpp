#pragma once

#include "mimdarts/tensor.hpp"

namespace mimdarts {

/// Cross-correlation of [B,C,H,W] with weights [O,C/groups,K,K].
/// Output spatial size: (H + 2*padding - dilation*(K-1) - 1) / stride + 1.
Tensor conv2d(const Tensor& input, const Tensor& weight, int stride, int padding,
              int dilation = 1, int groups = 1);

/// Transposed convolution, weights [C_in,C_out,K,K]; the adjoint of conv2d.
/// Output spatial size: (H - 1) * stride - 2*padding + K.
Tensor conv_transpose2d(const Tensor& input, const Tensor& weight, int stride, int padding);

/// Per-channel batch normalization over (B,H,W). Running stats are plain
/// buffers owned by the caller; updated only in training mode.
struct BatchNormStats {
  Buffer running_mean;
  Buffer running_var;
};
Tensor batch_norm(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                  BatchNormStats& stats, bool training, Scalar momentum = Scalar(0.1),
                  Scalar eps = Scalar(1e-5));

Tensor max_pool2d(const Tensor& input, int kernel, int stride, int padding);
/// Average pooling; padded positions are excluded from the divisor.
Tensor avg_pool2d(const Tensor& input, int kernel, int stride, int padding);

/// [B,C,H,W] -> [B,C] spatial mean.
Tensor global_avg_pool(const Tensor& input);

/// x[B,F] * w[F,K] + bias[K] (bias optional: pass undefined Tensor).
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

/// Mean over the batch of -log softmax(logits)[label]; log-sum-exp in double.
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels);

}  // namespace mimdarts
