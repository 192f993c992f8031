#include "mimdarts/modules.hpp"

#include <cmath>

namespace mimdarts {

namespace {

Tensor kaiming_conv(int out_c, int in_c_per_group, int kernel, Rng& rng) {
  const double fan_in = double(in_c_per_group) * kernel * kernel;
  const double sd = std::sqrt(2.0 / fan_in);
  Tensor w = Tensor::zeros({out_c, in_c_per_group, kernel, kernel}, /*requires_grad=*/true);
  for (int64_t i = 0; i < w.numel(); ++i) w.data()[i] = Scalar(sd * rng.normal());
  return w;
}

}  // namespace

Conv2dLayer::Conv2dLayer(int in_c, int out_c, int kernel, int stride, int padding, Rng& rng,
                         int dilation, int groups)
    : weight(kaiming_conv(out_c, in_c / groups, kernel, rng)),
      stride(stride),
      padding(padding),
      dilation(dilation),
      groups(groups) {}

ConvTranspose2dLayer::ConvTranspose2dLayer(int in_c, int out_c, int kernel, int stride,
                                           int padding, Rng& rng)
    : stride(stride), padding(padding) {
  const double fan_in = double(in_c) * kernel * kernel;
  const double sd = std::sqrt(2.0 / fan_in);
  weight = Tensor::zeros({in_c, out_c, kernel, kernel}, /*requires_grad=*/true);
  for (int64_t i = 0; i < weight.numel(); ++i) weight.data()[i] = Scalar(sd * rng.normal());
}

BatchNormLayer::BatchNormLayer(int channels)
    : gamma(Tensor::full({channels}, Scalar(1), /*requires_grad=*/true)),
      beta(Tensor::zeros({channels}, /*requires_grad=*/true)) {}

FactorizedReduce::FactorizedReduce(int in_c, int out_c, Rng& rng)
    : conv1(in_c, out_c - out_c / 2, 1, 2, 0, rng),
      conv2(in_c, out_c / 2, 1, 2, 0, rng),
      bn(out_c) {}

Tensor FactorizedReduce::forward(const Tensor& x, bool training) {
  Tensor h = relu(x);
  Tensor a = conv1.forward(h, training);
  Tensor b = conv2.forward(shift_spatial(h, 1), training);
  return bn.forward(concat_channels({a, b}), training);
}

SepConv::SepConv(int channels, int kernel, int stride, Rng& rng) {
  const int pad = (kernel - 1) / 2;
  // relu, depthwise (stride), pointwise, bn; then relu, depthwise, pointwise, bn
  seq.push_back(std::make_unique<Conv2dLayer>(channels, channels, kernel, stride, pad, rng, 1,
                                              channels));
  seq.push_back(std::make_unique<Conv2dLayer>(channels, channels, 1, 1, 0, rng));
  seq.push_back(std::make_unique<BatchNormLayer>(channels));
  seq.push_back(std::make_unique<Conv2dLayer>(channels, channels, kernel, 1, pad, rng, 1,
                                              channels));
  seq.push_back(std::make_unique<Conv2dLayer>(channels, channels, 1, 1, 0, rng));
  seq.push_back(std::make_unique<BatchNormLayer>(channels));
}

Tensor SepConv::forward(const Tensor& x, bool training) {
  Tensor h = relu(x);
  h = seq[0]->forward(h, training);
  h = seq[1]->forward(h, training);
  h = seq[2]->forward(h, training);
  h = relu(h);
  h = seq[3]->forward(h, training);
  h = seq[4]->forward(h, training);
  return seq[5]->forward(h, training);
}

void SepConv::collect(ModuleState& s) {
  for (auto& m : seq) m->collect(s);
}

DilConv::DilConv(int channels, int kernel, int stride, Rng& rng) {
  const int dilation = 2;
  const int pad = dilation * (kernel - 1) / 2;
  seq.push_back(std::make_unique<Conv2dLayer>(channels, channels, kernel, stride, pad, rng,
                                              dilation, channels));
  seq.push_back(std::make_unique<Conv2dLayer>(channels, channels, 1, 1, 0, rng));
  seq.push_back(std::make_unique<BatchNormLayer>(channels));
}

Tensor DilConv::forward(const Tensor& x, bool training) {
  Tensor h = relu(x);
  for (auto& m : seq) h = m->forward(h, training);
  return h;
}

void DilConv::collect(ModuleState& s) {
  for (auto& m : seq) m->collect(s);
}

Tensor ZeroOp::forward(const Tensor& x, bool) {
  const Shape& s = x.shape();
  if (stride == 1) return scale(x, Scalar(0));
  return Tensor::zeros({s[0], s[1], s[2] / stride, s[3] / stride});
}

LinearLayer::LinearLayer(int in_f, int out_f, Rng& rng) {
  const double sd = std::sqrt(1.0 / double(in_f));
  weight = Tensor::zeros({in_f, out_f}, /*requires_grad=*/true);
  for (int64_t i = 0; i < weight.numel(); ++i) weight.data()[i] = Scalar(sd * rng.normal());
  bias = Tensor::zeros({out_f}, /*requires_grad=*/true);
}

}  // namespace mimdarts
