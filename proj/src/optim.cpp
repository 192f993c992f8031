#include "mimdarts/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace mimdarts {

SgdMomentum::SgdMomentum(std::vector<Tensor> params, double lr, double momentum,
                         double weight_decay)
    : params_(std::move(params)), lr_(lr), momentum_(momentum), weight_decay_(weight_decay) {
  for (const auto& p : params_) velocity_.push_back(Buffer::Zero(p.numel()));
}

void SgdMomentum::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

void SgdMomentum::step() {
  for (size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i];
    if (!p.has_grad()) continue;
    Buffer g = p.grad() + Scalar(weight_decay_) * p.data();
    velocity_[i] = Scalar(momentum_) * velocity_[i] + g;
    p.data() -= Scalar(lr_) * velocity_[i];
  }
}

Adam::Adam(std::vector<Tensor> params, double lr, double beta1, double beta2,
           double weight_decay, double eps)
    : params_(std::move(params)),
      lr_(lr),
      beta1_(beta1),
      beta2_(beta2),
      weight_decay_(weight_decay),
      eps_(eps) {
  for (const auto& p : params_) {
    m_.push_back(Buffer::Zero(p.numel()));
    v_.push_back(Buffer::Zero(p.numel()));
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

void Adam::step() {
  std::vector<Buffer> grads;
  grads.reserve(params_.size());
  for (auto& p : params_)
    grads.push_back(p.has_grad() ? p.grad() : Buffer::Zero(p.numel()));
  step_with(grads);
}

void Adam::step_with(const std::vector<Buffer>& grads) {
  if (grads.size() != params_.size()) throw std::invalid_argument("Adam: gradient count mismatch");
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, double(t_));
  const double bc2 = 1.0 - std::pow(beta2_, double(t_));
  for (size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i];
    Buffer g = grads[i] + Scalar(weight_decay_) * p.data();
    m_[i] = Scalar(beta1_) * m_[i] + Scalar(1.0 - beta1_) * g;
    v_[i] = Scalar(beta2_) * v_[i] + Scalar(1.0 - beta2_) * g * g;
    Buffer m_hat = m_[i] / Scalar(bc1);
    Buffer v_hat = v_[i] / Scalar(bc2);
    p.data() -= Scalar(lr_) * m_hat / (v_hat.sqrt() + Scalar(eps_));
  }
}

double cosine_lr(double lr_max, double lr_min, int epoch, int total_epochs) {
  if (total_epochs <= 1) return lr_max;
  const double t = double(epoch) / double(total_epochs - 1);
  return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(M_PI * t));
}

}  // namespace mimdarts
