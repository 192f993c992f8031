#pragma once

#include "mimdarts/tensor.hpp"

#include <vector>

namespace mimdarts {

/// SGD with classical momentum and decoupled-from-nothing L2 weight decay
/// (decay added to the gradient, the usual convnet recipe).
class SgdMomentum {
 public:
  SgdMomentum(std::vector<Tensor> params, double lr, double momentum, double weight_decay);

  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }
  void zero_grad();
  void step();

  std::vector<Buffer>& velocity() { return velocity_; }
  const std::vector<Tensor>& params() const { return params_; }

 private:
  std::vector<Tensor> params_;
  std::vector<Buffer> velocity_;
  double lr_, momentum_, weight_decay_;
};

/// Adam with L2 weight decay added to the gradient.
class Adam {
 public:
  Adam(std::vector<Tensor> params, double lr, double beta1, double beta2, double weight_decay,
       double eps = 1e-8);

  void zero_grad();
  void step();
  /// One update from externally computed gradients (same order as params).
  void step_with(const std::vector<Buffer>& grads);

  int64_t& t() { return t_; }
  std::vector<Buffer>& m() { return m_; }
  std::vector<Buffer>& v() { return v_; }
  const std::vector<Tensor>& params() const { return params_; }

 private:
  std::vector<Tensor> params_;
  std::vector<Buffer> m_, v_;
  int64_t t_ = 0;
  double lr_, beta1_, beta2_, weight_decay_, eps_;
};

/// Cosine annealing from lr_max to lr_min over total epochs.
double cosine_lr(double lr_max, double lr_min, int epoch, int total_epochs);

}  // namespace mimdarts
