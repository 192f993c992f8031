#pragma once

#include "mimdarts/nn.hpp"
#include "mimdarts/tensor.hpp"

namespace mimdarts {

enum class MseReduction { kMean, kSum, kNorm };
enum class LambdaMode { kAdaptive, kFixed };

/// Per-step record of the joint loss; fields appear verbatim in the metrics CSV.
struct JointLossReport {
  double l_cls = 0.0;
  double l_mse = 0.0;
  double lambda = 0.0;
  double total = 0.0;
  bool epsilon_guard_triggered = false;
};

/// MSE restricted to masked pixels: sum m⊙(rec-target)² / max(1, Σm) for the
/// mean reduction. Returns 0 and flags the guard when the mask is empty.
Tensor masked_mse(const Tensor& x_rec, const Tensor& target, const Tensor& pixel_mask,
                  MseReduction reduction, bool* guard_flag = nullptr);

/// total = l_cls + λ·l_mse with λ outside the tape. Adaptive mode sets
/// λ = detach(l_cls)/max(detach(l_mse), ε).
Tensor joint_loss(const Tensor& l_cls, const Tensor& l_mse, LambdaMode mode,
                  double fixed_lambda, JointLossReport& report, double eps = 1e-8);

}  // namespace mimdarts
