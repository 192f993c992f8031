#include "mimdarts/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace mimdarts {

namespace {

Tensor sqrt_scalar(const Tensor& x) {
  auto xn = x.node();
  auto rn = std::make_shared<TensorNode>();
  rn->shape = {1};
  rn->data = Buffer::Constant(1, Scalar(std::sqrt(double(xn->data[0]))));
  rn->requires_grad = xn->requires_grad;
  if (rn->requires_grad) {
    rn->parents = {xn};
    TensorNode* r = rn.get();
    rn->backprop = [r, xn]() {
      const Scalar denom = std::max(r->data[0], Scalar(1e-12));
      xn->ensure_grad()[0] += r->grad[0] * Scalar(0.5) / denom;
    };
  }
  return Tensor(std::move(rn));
}

}  // namespace

Tensor masked_mse(const Tensor& x_rec, const Tensor& target, const Tensor& pixel_mask,
                  MseReduction reduction, bool* guard_flag) {
  if (x_rec.shape() != target.shape() || x_rec.shape() != pixel_mask.shape())
    throw std::invalid_argument("masked_mse: shape mismatch");
  double count = 0.0;
  for (int64_t i = 0; i < pixel_mask.numel(); ++i) count += double(pixel_mask.data()[i]);
  if (guard_flag) *guard_flag = false;
  if (count == 0.0) {
    if (guard_flag) *guard_flag = true;
    return Tensor::scalar(0.f);
  }
  Tensor diff = mul(sub(x_rec, target), pixel_mask);
  Tensor sq_sum = sum(mul(diff, diff));
  switch (reduction) {
    case MseReduction::kMean:
      return scale(sq_sum, Scalar(1.0 / count));
    case MseReduction::kSum:
      return sq_sum;
    case MseReduction::kNorm:
      return sqrt_scalar(sq_sum);
  }
  throw std::logic_error("masked_mse: unknown reduction");
}

Tensor joint_loss(const Tensor& l_cls, const Tensor& l_mse, LambdaMode mode,
                  double fixed_lambda, JointLossReport& report, double eps) {
  const double c = double(l_cls.item());
  const double m = double(l_mse.item());
  if (!std::isfinite(c) || !std::isfinite(m))
    throw std::runtime_error("joint_loss: non-finite loss (l_cls=" + std::to_string(c) +
                             ", l_mse=" + std::to_string(m) + ")");
  double lambda;
  bool guard = false;
  if (mode == LambdaMode::kAdaptive) {
    guard = m < eps;
    lambda = c / std::max(m, eps);
  } else {
    lambda = fixed_lambda;
  }
  Tensor total = add(l_cls, scale(l_mse, Scalar(lambda)));
  report.l_cls = c;
  report.l_mse = m;
  report.lambda = lambda;
  report.total = double(total.item());
  report.epsilon_guard_triggered = guard;
  return total;
}

}  // namespace mimdarts
