#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "gml/error.hpp"
#include "gml/net/config.hpp"

namespace gml::net {

/// Reverse-mode differentiation over feature maps. Each op appends a node
/// holding its value and a backward rule; backward() replays the rules in
/// reverse order, accumulating parameter gradients into the span given at
/// construction. Node values are planes x height x width, row-major.
///
/// Eigen picks vectorized code paths from buffer addresses, so every buffer the
/// tape hands to Eigen is its own max-aligned copy; otherwise results could
/// differ in the last bit from run to run.
template <class T>
class Tape {
 public:
  using Id = std::size_t;
  using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using ConstMap = Eigen::Map<const RowMat>;
  using Map = Eigen::Map<RowMat>;
  using Buffer = std::vector<T, Eigen::aligned_allocator<T>>;

  Tape(std::span<const T> params, std::span<T> param_grad)
      : params_(params.begin(), params.end()), out_grad_(param_grad) {
    if (!param_grad.empty()) param_grad_.assign(param_grad.size(), T(0));
  }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Id input(std::span<const T> x, FeatureShape shape) {
    require(x.size() == shape.size(), Errc::shape_mismatch, "input size does not match its shape");
    Node n;
    n.shape = shape;
    n.value.assign(x.begin(), x.end());
    n.needs_grad = false;
    return push(std::move(n));
  }

  /// Same-padded convolution with the given stride.
  Id conv2d(Id xid, const LayerSlice& layer, const ConvBlock& blk) {
    const FeatureShape in = nodes_[xid].shape;
    const int kh = blk.kernel_h, kw = blk.kernel_w, st = blk.stride;
    const int ph = kh / 2, pw = kw / 2;
    const int ho = (in.height + st - 1) / st, wo = (in.width + st - 1) / st;
    const int cout = blk.out_planes;
    const Eigen::Index k = static_cast<Eigen::Index>(in.planes) * kh * kw;
    const Eigen::Index p = static_cast<Eigen::Index>(ho) * wo;
    require(layer.weight_size == static_cast<std::size_t>(cout * k), Errc::shape_mismatch,
            "conv weight size mismatch in " + layer.name);

    Node n;
    n.shape = {cout, ho, wo};
    n.saved.assign(static_cast<std::size_t>(k * p), T(0));
    const Buffer& x = nodes_[xid].value;
    // im2col
    for (int c = 0; c < in.planes; ++c)
      for (int ky = 0; ky < kh; ++ky)
        for (int kx = 0; kx < kw; ++kx) {
          T* row = n.saved.data() + ((static_cast<std::size_t>(c) * kh + ky) * kw + kx) * p;
          for (int oy = 0; oy < ho; ++oy) {
            const int iy = oy * st + ky - ph;
            if (iy < 0 || iy >= in.height) continue;
            const T* src = x.data() + (static_cast<std::size_t>(c) * in.height + iy) * in.width;
            T* dst = row + static_cast<std::size_t>(oy) * wo;
            for (int ox = 0; ox < wo; ++ox) {
              const int ix = ox * st + kx - pw;
              if (ix >= 0 && ix < in.width) dst[ox] = src[ix];
            }
          }
        }
    n.value.resize(static_cast<std::size_t>(cout * p));
    ConstMap w(params_.data() + layer.weight_offset, cout, k);
    ConstMap col(n.saved.data(), k, p);
    Map out(n.value.data(), cout, p);
    out.noalias() = w * col;
    for (int c = 0; c < cout; ++c) out.row(c).array() += params_[layer.bias_offset + c];

    const Id id = nodes_.size();
    n.backward = [this, id, xid, layer, blk, in, ho, wo, k, p, cout]() {
      Node& self = nodes_[id];
      ConstMap dout(self.grad.data(), cout, p);
      ConstMap col(self.saved.data(), k, p);
      Map dw(param_grad_.data() + layer.weight_offset, cout, k);
      dw.noalias() += dout * col.transpose();
      for (int c = 0; c < cout; ++c) param_grad_[layer.bias_offset + c] += dout.row(c).sum();
      Node& xn = nodes_[xid];
      if (!xn.needs_grad) return;
      RowMat dcol = ConstMap(params_.data() + layer.weight_offset, cout, k).transpose() * dout;
      const int kh = blk.kernel_h, kw = blk.kernel_w, st = blk.stride, ph = kh / 2, pw = kw / 2;
      for (int c = 0; c < in.planes; ++c)
        for (int ky = 0; ky < kh; ++ky)
          for (int kx = 0; kx < kw; ++kx) {
            const T* row = dcol.data() + ((static_cast<std::size_t>(c) * kh + ky) * kw + kx) * p;
            for (int oy = 0; oy < ho; ++oy) {
              const int iy = oy * st + ky - ph;
              if (iy < 0 || iy >= in.height) continue;
              T* dst = xn.grad.data() + (static_cast<std::size_t>(c) * in.height + iy) * in.width;
              const T* src = row + static_cast<std::size_t>(oy) * wo;
              for (int ox = 0; ox < wo; ++ox) {
                const int ix = ox * st + kx - pw;
                if (ix >= 0 && ix < in.width) dst[ix] += src[ox];
              }
            }
          }
    };
    return push(std::move(n));
  }

  Id relu(Id xid) {
    Node n;
    n.shape = nodes_[xid].shape;
    n.value = nodes_[xid].value;
    for (auto& v : n.value) v = v > T(0) ? v : T(0);
    const Id id = nodes_.size();
    n.backward = [this, id, xid]() {
      Node& self = nodes_[id];
      Node& xn = nodes_[xid];
      if (!xn.needs_grad) return;
      for (std::size_t i = 0; i < self.value.size(); ++i)
        if (self.value[i] > T(0)) xn.grad[i] += self.grad[i];
    };
    return push(std::move(n));
  }

  /// Non-overlapping max-pool; trailing rows/columns that do not fill a window are dropped.
  Id maxpool(Id xid, int pool_h, int pool_w) {
    const FeatureShape in = nodes_[xid].shape;
    if (pool_h == 1 && pool_w == 1) return xid;
    Node n;
    n.shape = {in.planes, in.height / pool_h, in.width / pool_w};
    n.value.resize(n.shape.size());
    n.index.resize(n.shape.size());
    const Buffer& x = nodes_[xid].value;
    std::size_t o = 0;
    for (int c = 0; c < in.planes; ++c)
      for (int oy = 0; oy < n.shape.height; ++oy)
        for (int ox = 0; ox < n.shape.width; ++ox, ++o) {
          std::size_t best = (static_cast<std::size_t>(c) * in.height + oy * pool_h) * in.width + ox * pool_w;
          for (int dy = 0; dy < pool_h; ++dy)
            for (int dx = 0; dx < pool_w; ++dx) {
              const std::size_t i = (static_cast<std::size_t>(c) * in.height + oy * pool_h + dy) * in.width +
                                    ox * pool_w + dx;
              if (x[i] > x[best]) best = i;
            }
          n.value[o] = x[best];
          n.index[o] = static_cast<std::uint32_t>(best);
        }
    const Id id = nodes_.size();
    n.backward = [this, id, xid]() {
      Node& self = nodes_[id];
      Node& xn = nodes_[xid];
      if (!xn.needs_grad) return;
      for (std::size_t o = 0; o < self.value.size(); ++o) xn.grad[self.index[o]] += self.grad[o];
    };
    return push(std::move(n));
  }

  Id global_avg_pool(Id xid) {
    const FeatureShape in = nodes_[xid].shape;
    const std::size_t hw = static_cast<std::size_t>(in.height) * in.width;
    Node n;
    n.shape = {in.planes, 1, 1};
    n.value.resize(in.planes);
    const Buffer& x = nodes_[xid].value;
    for (int c = 0; c < in.planes; ++c) {
      T acc(0);
      for (std::size_t i = 0; i < hw; ++i) acc += x[c * hw + i];
      n.value[c] = acc / static_cast<T>(hw);
    }
    const Id id = nodes_.size();
    n.backward = [this, id, xid, hw]() {
      Node& self = nodes_[id];
      Node& xn = nodes_[xid];
      if (!xn.needs_grad) return;
      for (std::size_t c = 0; c < self.value.size(); ++c) {
        const T g = self.grad[c] / static_cast<T>(hw);
        for (std::size_t i = 0; i < hw; ++i) xn.grad[c * hw + i] += g;
      }
    };
    return push(std::move(n));
  }

  /// Fully connected layer y = W x + b over the flattened input.
  Id dense(Id xid, const LayerSlice& layer) {
    const std::size_t in = nodes_[xid].value.size();
    require(in == layer.fan_in, Errc::shape_mismatch, "dense input size mismatch in " + layer.name);
    const std::size_t out = layer.bias_size;
    Node n;
    n.shape = {static_cast<int>(out), 1, 1};
    n.value.resize(out);
    ConstMap w(params_.data() + layer.weight_offset, static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> x(nodes_[xid].value.data(), static_cast<Eigen::Index>(in));
    Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> y(n.value.data(), static_cast<Eigen::Index>(out));
    y.noalias() = w * x;
    for (std::size_t j = 0; j < out; ++j) n.value[j] += params_[layer.bias_offset + j];
    const Id id = nodes_.size();
    n.backward = [this, id, xid, layer, in, out]() {
      Node& self = nodes_[id];
      Node& xn = nodes_[xid];
      const auto ei = static_cast<Eigen::Index>(in), eo = static_cast<Eigen::Index>(out);
      Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> dy(self.grad.data(), eo);
      Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> x(xn.value.data(), ei);
      Map dw(param_grad_.data() + layer.weight_offset, eo, ei);
      dw.noalias() += dy * x.transpose();
      for (std::size_t j = 0; j < out; ++j) param_grad_[layer.bias_offset + j] += self.grad[j];
      if (!xn.needs_grad) return;
      Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> dx(xn.grad.data(), ei);
      dx.noalias() += ConstMap(params_.data() + layer.weight_offset, eo, ei).transpose() * dy;
    };
    return push(std::move(n));
  }

  std::span<const T> value(Id id) const { return nodes_[id].value; }
  const FeatureShape& shape(Id id) const { return nodes_[id].shape; }

  /// Seeds d(loss)/d(node `out`) and propagates to the parameters.
  void backward(Id out, std::span<const T> seed) {
    require(out_grad_.size() == params_.size(), Errc::dimension_mismatch, "gradient buffer size mismatch");
    require(seed.size() == nodes_[out].value.size(), Errc::shape_mismatch, "seed size mismatch");
    for (std::size_t i = 0; i <= out; ++i)
      if (nodes_[i].needs_grad) nodes_[i].grad.assign(nodes_[i].value.size(), T(0));
    std::copy(seed.begin(), seed.end(), nodes_[out].grad.begin());
    for (std::size_t i = out + 1; i-- > 0;)
      if (nodes_[i].backward) nodes_[i].backward();
    for (std::size_t i = 0; i < out_grad_.size(); ++i) out_grad_[i] += param_grad_[i];
  }

 private:
  struct Node {
    FeatureShape shape;
    Buffer value;
    Buffer grad;
    Buffer saved;
    std::vector<std::uint32_t> index;
    bool needs_grad = true;
    std::function<void()> backward;
  };

  Id push(Node n) {
    nodes_.push_back(std::move(n));
    return nodes_.size() - 1;
  }

  Buffer params_;
  Buffer param_grad_;
  std::span<T> out_grad_;
  std::vector<Node> nodes_;
};

}  // namespace gml::net
