#include "mimdarts/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace mimdarts {

int64_t shape_numel(const Shape& shape) {
  int64_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("non-positive dimension in shape " + shape_str(shape));
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream ss;
  ss << "[";
  for (size_t i = 0; i < shape.size(); ++i) ss << (i ? "," : "") << shape[i];
  ss << "]";
  return ss.str();
}

Buffer& TensorNode::ensure_grad() {
  if (grad.size() == 0) grad = Buffer::Zero(data.size());
  return grad;
}

Tensor Tensor::zeros(const Shape& shape, bool requires_grad) {
  auto n = std::make_shared<TensorNode>();
  n->shape = shape;
  n->data = Buffer::Zero(shape_numel(shape));
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::full(const Shape& shape, Scalar value, bool requires_grad) {
  Tensor t = zeros(shape, requires_grad);
  t.data().setConstant(value);
  return t;
}

Tensor Tensor::from_data(const Shape& shape, std::vector<Scalar> values, bool requires_grad) {
  if (static_cast<int64_t>(values.size()) != shape_numel(shape))
    throw std::invalid_argument("data length does not match shape " + shape_str(shape));
  Buffer buf(values.size());
  std::copy(values.begin(), values.end(), buf.data());
  return from_buffer(shape, std::move(buf), requires_grad);
}

Tensor Tensor::from_buffer(const Shape& shape, Buffer buf, bool requires_grad) {
  if (buf.size() != shape_numel(shape))
    throw std::invalid_argument("buffer length does not match shape " + shape_str(shape));
  auto n = std::make_shared<TensorNode>();
  n->shape = shape;
  n->data = std::move(buf);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::scalar(Scalar value, bool requires_grad) {
  return from_data({1}, {value}, requires_grad);
}

Scalar Tensor::item() const {
  if (numel() != 1) throw std::invalid_argument("item() on non-scalar tensor " + shape_str(shape()));
  return node_->data[0];
}

void Tensor::zero_grad() { node_->grad.resize(0); }

Tensor Tensor::detach() const {
  auto n = std::make_shared<TensorNode>();
  n->shape = node_->shape;
  n->data = node_->data;
  n->requires_grad = false;
  return Tensor(std::move(n));
}

namespace {

void topo_visit(TensorNode* node, std::unordered_set<TensorNode*>& seen,
                std::vector<TensorNode*>& order) {
  // Iterative DFS; graphs can be thousands of nodes deep.
  struct Frame {
    TensorNode* n;
    size_t next_parent;
  };
  std::vector<Frame> stack{{node, 0}};
  seen.insert(node);
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.n->parents.size()) {
      TensorNode* p = f.n->parents[f.next_parent++].get();
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(f.n);
      stack.pop_back();
    }
  }
}

}  // namespace

void Tensor::backward() const {
  if (numel() != 1) throw std::invalid_argument("backward() requires a scalar loss");
  if (!node_->requires_grad) return;
  std::unordered_set<TensorNode*> seen;
  std::vector<TensorNode*> order;
  topo_visit(node_.get(), seen, order);
  node_->ensure_grad()[0] += Scalar(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backprop) (*it)->backprop();
  }
}

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                " vs " + shape_str(b.shape()));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  Buffer out = a.data() + b.data();
  auto an = a.node(), bn = b.node();
  auto rn = std::make_shared<TensorNode>();
  rn->shape = a.shape();
  rn->data = std::move(out);
  rn->requires_grad = an->requires_grad || bn->requires_grad;
  if (rn->requires_grad) {
    rn->parents = {an, bn};
    TensorNode* r = rn.get();
    rn->backprop = [r, an, bn]() {
      if (an->requires_grad) an->ensure_grad() += r->grad;
      if (bn->requires_grad) bn->ensure_grad() += r->grad;
    };
  }
  return Tensor(std::move(rn));
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  auto an = a.node(), bn = b.node();
  auto rn = std::make_shared<TensorNode>();
  rn->shape = a.shape();
  rn->data = an->data - bn->data;
  rn->requires_grad = an->requires_grad || bn->requires_grad;
  if (rn->requires_grad) {
    rn->parents = {an, bn};
    TensorNode* r = rn.get();
    rn->backprop = [r, an, bn]() {
      if (an->requires_grad) an->ensure_grad() += r->grad;
      if (bn->requires_grad) bn->ensure_grad() -= r->grad;
    };
  }
  return Tensor(std::move(rn));
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  auto an = a.node(), bn = b.node();
  auto rn = std::make_shared<TensorNode>();
  rn->shape = a.shape();
  rn->data = an->data * bn->data;
  rn->requires_grad = an->requires_grad || bn->requires_grad;
  if (rn->requires_grad) {
    rn->parents = {an, bn};
    TensorNode* r = rn.get();
    rn->backprop = [r, an, bn]() {
      if (an->requires_grad) an->ensure_grad() += r->grad * bn->data;
      if (bn->requires_grad) bn->ensure_grad() += r->grad * an->data;
    };
  }
  return Tensor(std::move(rn));
}

Tensor scale(const Tensor& a, Scalar c) {
  auto an = a.node();
  auto rn = std::make_shared<TensorNode>();
  rn->shape = a.shape();
  rn->data = an->data * c;
  rn->requires_grad = an->requires_grad;
  if (rn->requires_grad) {
    rn->parents = {an};
    TensorNode* r = rn.get();
    rn->backprop = [r, an, c]() { an->ensure_grad() += r->grad * c; };
  }
  return Tensor(std::move(rn));
}

Tensor add_scalar(const Tensor& a, Scalar c) {
  auto an = a.node();
  auto rn = std::make_shared<TensorNode>();
  rn->shape = a.shape();
  rn->data = an->data + c;
  rn->requires_grad = an->requires_grad;
  if (rn->requires_grad) {
    rn->parents = {an};
    TensorNode* r = rn.get();
    rn->backprop = [r, an]() { an->ensure_grad() += r->grad; };
  }
  return Tensor(std::move(rn));
}

Tensor scale_by(const Tensor& x, const Tensor& s) {
  if (s.numel() != 1) throw std::invalid_argument("scale_by: scale must be scalar");
  auto xn = x.node(), sn = s.node();
  auto rn = std::make_shared<TensorNode>();
  rn->shape = x.shape();
  rn->data = xn->data * sn->data[0];
  rn->requires_grad = xn->requires_grad || sn->requires_grad;
  if (rn->requires_grad) {
    rn->parents = {xn, sn};
    TensorNode* r = rn.get();
    rn->backprop = [r, xn, sn]() {
      if (xn->requires_grad) xn->ensure_grad() += r->grad * sn->data[0];
      if (sn->requires_grad) {
        // accumulate the dot product in double; it feeds the alpha gradient
        double acc = 0.0;
        const Scalar* g = r->grad.data();
        const Scalar* v = xn->data.data();
        for (int64_t i = 0; i < r->grad.size(); ++i) acc += double(g[i]) * double(v[i]);
        sn->ensure_grad()[0] += Scalar(acc);
      }
    };
  }
  return Tensor(std::move(rn));
}

Tensor relu(const Tensor& x) {
  auto xn = x.node();
  auto rn = std::make_shared<TensorNode>();
  rn->shape = x.shape();
  rn->data = xn->data.max(Scalar(0));
  rn->requires_grad = xn->requires_grad;
  if (rn->requires_grad) {
    rn->parents = {xn};
    TensorNode* r = rn.get();
    rn->backprop = [r, xn]() {
      xn->ensure_grad() += r->grad * (xn->data > Scalar(0)).cast<Scalar>();
    };
  }
  return Tensor(std::move(rn));
}

Tensor hardtanh(const Tensor& x, Scalar lo, Scalar hi) {
  if (!(lo < hi)) throw std::invalid_argument("hardtanh: lo must be < hi");
  auto xn = x.node();
  auto rn = std::make_shared<TensorNode>();
  rn->shape = x.shape();
  rn->data = xn->data.max(lo).min(hi);
  rn->requires_grad = xn->requires_grad;
  if (rn->requires_grad) {
    rn->parents = {xn};
    TensorNode* r = rn.get();
    rn->backprop = [r, xn, lo, hi]() {
      xn->ensure_grad() +=
          r->grad * ((xn->data > lo) && (xn->data < hi)).cast<Scalar>();
    };
  }
  return Tensor(std::move(rn));
}

Tensor softmax(const Tensor& x, int axis) {
  const Shape& shp = x.shape();
  int rows, cols;
  if (shp.size() == 1) {
    if (axis != 0 && axis != -1) throw std::invalid_argument("softmax: invalid axis for 1-D input");
    rows = 1;
    cols = shp[0];
  } else if (shp.size() == 2) {
    if (axis != 1 && axis != -1) throw std::invalid_argument("softmax: only last-axis softmax is supported");
    rows = shp[0];
    cols = shp[1];
  } else {
    throw std::invalid_argument("softmax: expects 1-D or 2-D input, got " + shape_str(shp));
  }
  auto xn = x.node();
  Buffer out(xn->data.size());
  for (int r = 0; r < rows; ++r) {
    const Scalar* in = xn->data.data() + int64_t(r) * cols;
    Scalar* o = out.data() + int64_t(r) * cols;
    Scalar m = *std::max_element(in, in + cols);
    double denom = 0.0;
    for (int c = 0; c < cols; ++c) denom += std::exp(double(in[c]) - double(m));
    for (int c = 0; c < cols; ++c) o[c] = Scalar(std::exp(double(in[c]) - double(m)) / denom);
  }
  auto rn = std::make_shared<TensorNode>();
  rn->shape = shp;
  rn->data = std::move(out);
  rn->requires_grad = xn->requires_grad;
  if (rn->requires_grad) {
    rn->parents = {xn};
    TensorNode* r = rn.get();
    rn->backprop = [r, xn, rows, cols]() {
      Buffer& gin = xn->ensure_grad();
      for (int row = 0; row < rows; ++row) {
        const Scalar* p = r->data.data() + int64_t(row) * cols;
        const Scalar* g = r->grad.data() + int64_t(row) * cols;
        Scalar* gi = gin.data() + int64_t(row) * cols;
        double dot = 0.0;
        for (int c = 0; c < cols; ++c) dot += double(g[c]) * double(p[c]);
        for (int c = 0; c < cols; ++c) gi[c] += p[c] * (g[c] - Scalar(dot));
      }
    };
  }
  return Tensor(std::move(rn));
}

Tensor reshape(const Tensor& x, const Shape& new_shape) {
  if (shape_numel(new_shape) != x.numel())
    throw std::invalid_argument("reshape: element count mismatch " + shape_str(x.shape()) +
                                " -> " + shape_str(new_shape));
  auto xn = x.node();
  auto rn = std::make_shared<TensorNode>();
  rn->shape = new_shape;
  rn->data = xn->data;
  rn->requires_grad = xn->requires_grad;
  if (rn->requires_grad) {
    rn->parents = {xn};
    TensorNode* r = rn.get();
    rn->backprop = [r, xn]() { xn->ensure_grad() += r->grad; };
  }
  return Tensor(std::move(rn));
}

Tensor sum(const Tensor& x) {
  auto xn = x.node();
  double acc = 0.0;
  for (int64_t i = 0; i < xn->data.size(); ++i) acc += double(xn->data[i]);
  auto rn = std::make_shared<TensorNode>();
  rn->shape = {1};
  rn->data = Buffer::Constant(1, Scalar(acc));
  rn->requires_grad = xn->requires_grad;
  if (rn->requires_grad) {
    rn->parents = {xn};
    TensorNode* r = rn.get();
    rn->backprop = [r, xn]() { xn->ensure_grad() += r->grad[0]; };
  }
  return Tensor(std::move(rn));
}

Tensor mean(const Tensor& x) { return scale(sum(x), Scalar(1) / Scalar(x.numel())); }

Tensor select(const Tensor& x, int64_t index) {
  if (index < 0 || index >= x.numel())
    throw std::invalid_argument("select: index out of range");
  auto xn = x.node();
  auto rn = std::make_shared<TensorNode>();
  rn->shape = {1};
  rn->data = Buffer::Constant(1, xn->data[index]);
  rn->requires_grad = xn->requires_grad;
  if (rn->requires_grad) {
    rn->parents = {xn};
    TensorNode* r = rn.get();
    rn->backprop = [r, xn, index]() { xn->ensure_grad()[index] += r->grad[0]; };
  }
  return Tensor(std::move(rn));
}

Tensor concat_channels(const std::vector<Tensor>& xs) {
  if (xs.empty()) throw std::invalid_argument("concat_channels: empty input list");
  const Shape& s0 = xs[0].shape();
  if (s0.size() != 4) throw std::invalid_argument("concat_channels: expects [B,C,H,W]");
  int B = s0[0], H = s0[2], W = s0[3];
  int C_total = 0;
  for (const auto& t : xs) {
    const Shape& s = t.shape();
    if (s.size() != 4 || s[0] != B || s[2] != H || s[3] != W)
      throw std::invalid_argument("concat_channels: incompatible shape " + shape_str(s));
    C_total += s[1];
  }
  const int64_t plane = int64_t(H) * W;
  Buffer out(int64_t(B) * C_total * plane);
  std::vector<std::shared_ptr<TensorNode>> parents;
  parents.reserve(xs.size());
  for (const auto& t : xs) parents.push_back(t.node());
  int64_t off_c = 0;
  for (const auto& t : xs) {
    int C = t.shape()[1];
    for (int b = 0; b < B; ++b) {
      const Scalar* src = t.data().data() + int64_t(b) * C * plane;
      Scalar* dst = out.data() + (int64_t(b) * C_total + off_c) * plane;
      std::copy(src, src + int64_t(C) * plane, dst);
    }
    off_c += C;
  }
  auto rn = std::make_shared<TensorNode>();
  rn->shape = {B, C_total, H, W};
  rn->data = std::move(out);
  for (const auto& p : parents) rn->requires_grad = rn->requires_grad || p->requires_grad;
  if (rn->requires_grad) {
    rn->parents = parents;
    TensorNode* r = rn.get();
    rn->backprop = [r, parents, B, C_total, plane]() {
      int64_t off_c = 0;
      for (const auto& p : parents) {
        int C = p->shape[1];
        if (p->requires_grad) {
          Buffer& g = p->ensure_grad();
          for (int b = 0; b < B; ++b) {
            const Scalar* src = r->grad.data() + (int64_t(b) * C_total + off_c) * plane;
            Scalar* dst = g.data() + int64_t(b) * C * plane;
            for (int64_t i = 0; i < int64_t(C) * plane; ++i) dst[i] += src[i];
          }
        }
        off_c += C;
      }
    };
  }
  return Tensor(std::move(rn));
}

Tensor shift_spatial(const Tensor& x, int offset) {
  const Shape& s = x.shape();
  if (s.size() != 4) throw std::invalid_argument("shift_spatial: expects [B,C,H,W]");
  int B = s[0], C = s[1], H = s[2], W = s[3];
  if (offset < 0 || offset >= H || offset >= W)
    throw std::invalid_argument("shift_spatial: offset out of range");
  int Ho = H - offset, Wo = W - offset;
  Buffer out(int64_t(B) * C * Ho * Wo);
  for (int b = 0; b < B; ++b)
    for (int c = 0; c < C; ++c) {
      const Scalar* src = x.data().data() + ((int64_t(b) * C + c) * H + offset) * W + offset;
      Scalar* dst = out.data() + (int64_t(b) * C + c) * Ho * Wo;
      for (int h = 0; h < Ho; ++h) std::copy(src + int64_t(h) * W, src + int64_t(h) * W + Wo, dst + int64_t(h) * Wo);
    }
  auto xn = x.node();
  auto rn = std::make_shared<TensorNode>();
  rn->shape = {B, C, Ho, Wo};
  rn->data = std::move(out);
  rn->requires_grad = xn->requires_grad;
  if (rn->requires_grad) {
    rn->parents = {xn};
    TensorNode* r = rn.get();
    rn->backprop = [r, xn, B, C, H, W, Ho, Wo, offset]() {
      Buffer& g = xn->ensure_grad();
      for (int b = 0; b < B; ++b)
        for (int c = 0; c < C; ++c) {
          const Scalar* src = r->grad.data() + (int64_t(b) * C + c) * Ho * Wo;
          Scalar* dst = g.data() + ((int64_t(b) * C + c) * H + offset) * W + offset;
          for (int h = 0; h < Ho; ++h)
            for (int w = 0; w < Wo; ++w) dst[int64_t(h) * W + w] += src[int64_t(h) * Wo + w];
        }
    };
  }
  return Tensor(std::move(rn));
}

}  // namespace mimdarts
