#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace mimdarts {

using Scalar = float;
using Buffer = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
using Shape = std::vector<int>;

int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct TensorNode {
  Shape shape;
  Buffer data;
  Buffer grad;  // empty until first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode>> parents;
  // Propagates this->grad into parents' grads. Empty for leaves.
  std::function<void()> backprop;

  int64_t numel() const { return data.size(); }
  Buffer& ensure_grad();
};

/// Dense float32 tensor participating in a reverse-mode tape.
/// Copies are shallow (shared node), like the usual autograd handle idiom.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<TensorNode> node) : node_(std::move(node)) {}

  static Tensor zeros(const Shape& shape, bool requires_grad = false);
  static Tensor full(const Shape& shape, Scalar value, bool requires_grad = false);
  static Tensor from_data(const Shape& shape, std::vector<Scalar> values,
                          bool requires_grad = false);
  static Tensor from_buffer(const Shape& shape, Buffer buf, bool requires_grad = false);
  static Tensor scalar(Scalar value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int64_t numel() const { return node_->numel(); }
  bool requires_grad() const { return node_->requires_grad; }
  Buffer& data() { return node_->data; }
  const Buffer& data() const { return node_->data; }
  Buffer& grad() { return node_->ensure_grad(); }
  bool has_grad() const { return node_->grad.size() > 0; }
  Scalar item() const;

  void zero_grad();
  /// Reverse-mode sweep from a scalar tensor. Grads accumulate additively.
  void backward() const;

  /// Same values, cut from the tape, requires_grad = false.
  Tensor detach() const;

  std::shared_ptr<TensorNode>& node() { return node_; }
  const std::shared_ptr<TensorNode>& node() const { return node_; }

 private:
  std::shared_ptr<TensorNode> node_;
};

// ---- elementwise / structural primitives ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, Scalar c);
Tensor add_scalar(const Tensor& a, Scalar c);
/// x * s where s is a one-element tensor on the tape.
Tensor scale_by(const Tensor& x, const Tensor& s);
Tensor relu(const Tensor& x);
Tensor hardtanh(const Tensor& x, Scalar lo, Scalar hi);
/// Softmax over the last axis of a 1-D or 2-D tensor.
Tensor softmax(const Tensor& x, int axis);
Tensor reshape(const Tensor& x, const Shape& new_shape);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
/// One element of a flat tensor as a scalar tensor (gradient scatters back).
Tensor select(const Tensor& x, int64_t index);
/// Concatenate along the channel axis of [B,C,H,W] tensors.
Tensor concat_channels(const std::vector<Tensor>& xs);
/// Spatial crop x[:, :, off:, off:].
Tensor shift_spatial(const Tensor& x, int offset);

}  // namespace mimdarts
