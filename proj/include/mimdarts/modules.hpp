#pragma once

#include "mimdarts/nn.hpp"
#include "mimdarts/rng.hpp"
#include "mimdarts/tensor.hpp"

#include <memory>
#include <vector>

namespace mimdarts {

/// Mutable training state reachable from a module tree: learnable parameters
/// (in a stable registration order) and batch-norm running stats.
struct ModuleState {
  std::vector<Tensor> params;
  std::vector<BatchNormStats*> bn_stats;
};

struct Module {
  virtual ~Module() = default;
  virtual Tensor forward(const Tensor& x, bool training) = 0;
  virtual void collect(ModuleState& state) {}
};

struct Conv2dLayer : Module {
  Tensor weight;
  int stride, padding, dilation, groups;

  Conv2dLayer(int in_c, int out_c, int kernel, int stride, int padding, Rng& rng,
              int dilation = 1, int groups = 1);
  Tensor forward(const Tensor& x, bool) override {
    return conv2d(x, weight, stride, padding, dilation, groups);
  }
  void collect(ModuleState& s) override { s.params.push_back(weight); }
};

struct ConvTranspose2dLayer : Module {
  Tensor weight;  // [in_c, out_c, K, K]
  int stride, padding;

  ConvTranspose2dLayer(int in_c, int out_c, int kernel, int stride, int padding, Rng& rng);
  Tensor forward(const Tensor& x, bool) override {
    return conv_transpose2d(x, weight, stride, padding);
  }
  void collect(ModuleState& s) override { s.params.push_back(weight); }
};

struct BatchNormLayer : Module {
  Tensor gamma, beta;
  BatchNormStats stats;

  explicit BatchNormLayer(int channels);
  Tensor forward(const Tensor& x, bool training) override {
    return batch_norm(x, gamma, beta, stats, training);
  }
  void collect(ModuleState& s) override {
    s.params.push_back(gamma);
    s.params.push_back(beta);
    s.bn_stats.push_back(&stats);
  }
};

/// ReLU -> conv -> batch norm, the standard preprocessing block.
struct ReluConvBn : Module {
  Conv2dLayer conv;
  BatchNormLayer bn;
  bool pre_relu;

  ReluConvBn(int in_c, int out_c, int kernel, int stride, int padding, Rng& rng,
             bool pre_relu = true)
      : conv(in_c, out_c, kernel, stride, padding, rng), bn(out_c), pre_relu(pre_relu) {}
  Tensor forward(const Tensor& x, bool training) override {
    Tensor h = pre_relu ? relu(x) : x;
    return bn.forward(conv.forward(h, training), training);
  }
  void collect(ModuleState& s) override {
    conv.collect(s);
    bn.collect(s);
  }
};

/// Channel-preserving stride-2 reduction: two offset 1x1 stride-2 convs
/// concatenated, then batch norm.
struct FactorizedReduce : Module {
  Conv2dLayer conv1, conv2;
  BatchNormLayer bn;

  FactorizedReduce(int in_c, int out_c, Rng& rng);
  Tensor forward(const Tensor& x, bool training) override;
  void collect(ModuleState& s) override {
    conv1.collect(s);
    conv2.collect(s);
    bn.collect(s);
  }
};

/// Depthwise-separable conv block applied twice (stride only in the first).
struct SepConv : Module {
  std::vector<std::unique_ptr<Module>> seq;

  SepConv(int channels, int kernel, int stride, Rng& rng);
  Tensor forward(const Tensor& x, bool training) override;
  void collect(ModuleState& s) override;
};

/// Single dilated depthwise-separable block, dilation 2.
struct DilConv : Module {
  std::vector<std::unique_ptr<Module>> seq;

  DilConv(int channels, int kernel, int stride, Rng& rng);
  Tensor forward(const Tensor& x, bool training) override;
  void collect(ModuleState& s) override;
};

struct Identity : Module {
  Tensor forward(const Tensor& x, bool) override { return x; }
};

/// Multiplies by zero; stride-2 variant also drops resolution.
struct ZeroOp : Module {
  int stride;
  explicit ZeroOp(int stride) : stride(stride) {}
  Tensor forward(const Tensor& x, bool) override;
};

struct PoolOp : Module {
  bool is_max;
  int stride;
  PoolOp(bool is_max, int stride) : is_max(is_max), stride(stride) {}
  Tensor forward(const Tensor& x, bool) override {
    return is_max ? max_pool2d(x, 3, stride, 1) : avg_pool2d(x, 3, stride, 1);
  }
};

struct LinearLayer : Module {
  Tensor weight, bias;

  LinearLayer(int in_f, int out_f, Rng& rng);
  Tensor forward(const Tensor& x, bool) override { return linear(x, weight, bias); }
  void collect(ModuleState& s) override {
    s.params.push_back(weight);
    s.params.push_back(bias);
  }
};

}  // namespace mimdarts
