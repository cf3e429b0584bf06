#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "cpgan/autodiff/tape.hpp"
#include "cpgan/autodiff/tensor.hpp"
#include "cpgan/error.hpp"

namespace cpgan::ad {

template <typename Real>
using RowMatrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Real>
using MatrixMap = Eigen::Map<RowMatrix<Real>>;
template <typename Real>
using ConstMatrixMap = Eigen::Map<const RowMatrix<Real>>;

namespace detail {

// Allocator whose value-initialization is a no-op, for scratch buffers that are
// fully overwritten before being read.
template <typename T>
struct DefaultInitAllocator : std::allocator<T> {
  template <typename U>
  struct rebind {
    using other = DefaultInitAllocator<U>;
  };
  using std::allocator<T>::allocator;
  template <typename U>
  void construct(U* p) noexcept {
    ::new (static_cast<void*>(p)) U;
  }
  template <typename U, typename... Args>
  void construct(U* p, Args&&... args) {
    ::new (static_cast<void*>(p)) U(std::forward<Args>(args)...);
  }
};

}  // namespace detail

template <typename Real>
using Scratch = std::vector<Real, detail::DefaultInitAllocator<Real>>;

namespace detail {

[[noreturn]] inline void shape_mismatch(std::string_view op, const Shape& a, const Shape& b,
                                        std::string_view why = {}) {
  std::ostringstream os;
  os << op << ": incompatible shapes " << to_string(a) << " and " << to_string(b);
  if (!why.empty()) os << " (" << why << ")";
  throw ShapeError(os.str());
}

/// Gradient buffer of an input node, allocated on first use; nullptr when untracked.
template <typename Real>
std::vector<Real>* grad_buffer(const std::shared_ptr<TensorNode<Real>>& node) {
  if (!node->requires_grad) return nullptr;
  if (node->grad.empty()) node->grad.assign(node->values->size(), Real(0));
  return &node->grad;
}

template <typename Real>
using LocalBackward = std::function<void(std::span<const Real> output_grad,
                                         std::span<const Real> output_values)>;

/// Wraps freshly computed values into a tensor and records it when any input is tracked.
template <typename Real>
Tensor<Real> emit(std::string_view op, Shape shape, std::vector<Real> values,
                  const std::vector<Tensor<Real>>& inputs, LocalBackward<Real> backward) {
  check_finite<Real>(op, values);
  auto node = std::make_shared<TensorNode<Real>>();
  node->shape = std::move(shape);
  node->values = std::make_shared<std::vector<Real>>(std::move(values));
  Tape<Real>* tape = active_tape<Real>();
  bool track = false;
  for (const auto& in : inputs) track = track || in.requires_grad();
  if (track && tape != nullptr) {
    node->requires_grad = true;
    node->leaf = false;
    std::vector<std::shared_ptr<TensorNode<Real>>> in_nodes;
    in_nodes.reserve(inputs.size());
    for (const auto& in : inputs) in_nodes.push_back(in.node());
    tape->record(op, in_nodes, node,
                 [fn = std::move(backward), out = node->values](std::span<const Real> g) {
                   fn(g, *out);
                 });
  }
  return Tensor<Real>(std::move(node));
}

template <typename Real>
void require_same_shape(std::string_view op, const Tensor<Real>& a, const Tensor<Real>& b) {
  if (a.shape() != b.shape()) shape_mismatch(op, a.shape(), b.shape());
}

/// Right-aligned broadcast shape; each aligned pair must match or contain a 1.
inline Shape broadcast_shape(std::string_view op, const Shape& a, const Shape& b) {
  const std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    const std::size_t da = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
    const std::size_t db = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
    if (da != db && da != 1 && db != 1) shape_mismatch(op, a, b, "not trailing-broadcastable");
    out[i] = std::max(da, db);
  }
  return out;
}

/// For every flat output index of `target`, the flat index into `source`.
inline std::vector<std::size_t> broadcast_index(const Shape& source, const Shape& target) {
  const std::size_t rank = target.size();
  const std::size_t offset = rank - source.size();
  std::vector<std::size_t> src_stride(rank, 0);
  std::size_t stride = 1;
  for (std::size_t i = source.size(); i-- > 0;) {
    src_stride[i + offset] = source[i] == 1 ? 0 : stride;
    stride *= source[i];
  }
  const std::size_t n = numel(target);
  std::vector<std::size_t> index(n);
  std::vector<std::size_t> counter(rank, 0);
  std::size_t src = 0;
  for (std::size_t flat = 0; flat < n; ++flat) {
    index[flat] = src;
    for (std::size_t d = rank; d-- > 0;) {
      ++counter[d];
      src += src_stride[d];
      if (counter[d] < target[d]) break;
      src -= src_stride[d] * counter[d];
      counter[d] = 0;
    }
  }
  return index;
}

// `derivative(x, y)` is dy/dx given input x and output y.
template <typename Real, typename Fn, typename Deriv>
Tensor<Real> unary(std::string_view op, const Tensor<Real>& x, Fn fn, Deriv derivative) {
  const auto xv = x.values();
  std::vector<Real> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = fn(xv[i]);
  auto xn = x.node();
  return emit<Real>(op, x.shape(), std::move(out), {x},
                    [xn, derivative](std::span<const Real> g, std::span<const Real> y) {
                      auto* gx = grad_buffer(xn);
                      const auto& xval = *xn->values;
                      for (std::size_t i = 0; i < g.size(); ++i)
                        (*gx)[i] += g[i] * derivative(xval[i], y[i]);
                    });
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Shape primitives

/// Expands leading and unit dimensions of `x` to `shape` (numpy rule, right-aligned).
template <typename Real>
Tensor<Real> broadcast_to(const Tensor<Real>& x, const Shape& shape) {
  if (x.rank() > shape.size()) detail::shape_mismatch("broadcast", x.shape(), shape);
  if (detail::broadcast_shape("broadcast", x.shape(), shape) != shape)
    detail::shape_mismatch("broadcast", x.shape(), shape, "target smaller than source");
  if (x.shape() == shape) return x;
  auto index = std::make_shared<std::vector<std::size_t>>(detail::broadcast_index(x.shape(), shape));
  const auto xv = x.values();
  std::vector<Real> out(index->size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[(*index)[i]];
  auto xn = x.node();
  return detail::emit<Real>("broadcast", shape, std::move(out), {x},
                            [xn, index](std::span<const Real> g, std::span<const Real>) {
                              auto* gx = detail::grad_buffer(xn);
                              for (std::size_t i = 0; i < g.size(); ++i) (*gx)[(*index)[i]] += g[i];
                            });
}

template <typename Real>
Tensor<Real> reshape(const Tensor<Real>& x, const Shape& shape) {
  if (numel(shape) != x.size()) detail::shape_mismatch("reshape", x.shape(), shape);
  std::vector<Real> out(x.values().begin(), x.values().end());
  auto xn = x.node();
  return detail::emit<Real>("reshape", shape, std::move(out), {x},
                            [xn](std::span<const Real> g, std::span<const Real>) {
                              auto* gx = detail::grad_buffer(xn);
                              for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i];
                            });
}

/// Concatenates along `axis`; all other extents must agree.
template <typename Real>
Tensor<Real> concat(const std::vector<Tensor<Real>>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) throw ShapeError("concat: axis out of range for " + to_string(first));
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    if (p.rank() != first.size()) detail::shape_mismatch("concat", first, p.shape());
    for (std::size_t d = 0; d < first.size(); ++d)
      if (d != axis && p.dim(d) != first[d]) detail::shape_mismatch("concat", first, p.shape());
    out_shape[axis] += p.dim(axis);
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= first[d];
  for (std::size_t d = axis + 1; d < first.size(); ++d) inner *= first[d];
  const std::size_t out_block = out_shape[axis] * inner;
  std::vector<Real> out(numel(out_shape));
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    offsets.push_back(offset);
    const std::size_t block = p.dim(axis) * inner;
    const auto pv = p.values();
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(pv.begin() + o * block, block, out.begin() + o * out_block + offset);
    offset += block;
  }
  std::vector<std::shared_ptr<detail::TensorNode<Real>>> nodes;
  for (const auto& p : parts) nodes.push_back(p.node());
  return detail::emit<Real>(
      "concat", out_shape, std::move(out), parts,
      [nodes, offsets, outer, out_block, inner, axis](std::span<const Real> g, std::span<const Real>) {
        for (std::size_t k = 0; k < nodes.size(); ++k) {
          auto* gp = detail::grad_buffer(nodes[k]);
          if (!gp) continue;
          const std::size_t block = nodes[k]->shape[axis] * inner;
          for (std::size_t o = 0; o < outer; ++o)
            for (std::size_t i = 0; i < block; ++i)
              (*gp)[o * block + i] += g[o * out_block + offsets[k] + i];
        }
      });
}

/// Alias of `x` that is never differentiated through.
template <typename Real>
Tensor<Real> stop_gradient(const Tensor<Real>& x) {
  return x.detach();
}

// ---------------------------------------------------------------------------
// Elementwise arithmetic

namespace detail {

template <typename Real, typename Fwd, typename Bwd>
Tensor<Real> binary(std::string_view op, Tensor<Real> a, Tensor<Real> b, Fwd fwd, Bwd bwd) {
  if (a.shape() != b.shape()) {
    const Shape s = broadcast_shape(op, a.shape(), b.shape());
    a = broadcast_to(a, s);
    b = broadcast_to(b, s);
  }
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<Real> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i], bv[i]);
  auto an = a.node();
  auto bn = b.node();
  return emit<Real>(op, a.shape(), std::move(out), {a, b},
                    [an, bn, bwd](std::span<const Real> g, std::span<const Real>) {
                      auto* ga = grad_buffer(an);
                      auto* gb = grad_buffer(bn);
                      const auto& x = *an->values;
                      const auto& y = *bn->values;
                      for (std::size_t i = 0; i < g.size(); ++i) {
                        const auto [da, db] = bwd(x[i], y[i]);
                        if (ga) (*ga)[i] += g[i] * da;
                        if (gb) (*gb)[i] += g[i] * db;
                      }
                    });
}

}  // namespace detail

template <typename Real>
Tensor<Real> add(const Tensor<Real>& a, const Tensor<Real>& b) {
  return detail::binary<Real>(
      "add", a, b, [](Real x, Real y) { return x + y; },
      [](Real, Real) { return std::pair<Real, Real>{1, 1}; });
}

template <typename Real>
Tensor<Real> sub(const Tensor<Real>& a, const Tensor<Real>& b) {
  return detail::binary<Real>(
      "sub", a, b, [](Real x, Real y) { return x - y; },
      [](Real, Real) { return std::pair<Real, Real>{1, -1}; });
}

template <typename Real>
Tensor<Real> mul(const Tensor<Real>& a, const Tensor<Real>& b) {
  return detail::binary<Real>(
      "mul", a, b, [](Real x, Real y) { return x * y; },
      [](Real x, Real y) { return std::pair<Real, Real>{y, x}; });
}

/// scale * x + shift with constant scale and shift.
template <typename Real>
Tensor<Real> affine(const Tensor<Real>& x, Real scale, Real shift = Real(0)) {
  return detail::unary<Real>(
      "affine", x, [scale, shift](Real v) { return scale * v + shift; },
      [scale](Real, Real) { return scale; });
}

template <typename Real>
Tensor<Real> square(const Tensor<Real>& x) {
  return detail::unary<Real>(
      "square", x, [](Real v) { return v * v; }, [](Real v, Real) { return 2 * v; });
}

template <typename Real>
Tensor<Real> log(const Tensor<Real>& x) {
  return detail::unary<Real>(
      "log", x, [](Real v) { return std::log(v); }, [](Real v, Real) { return Real(1) / v; });
}

template <typename Real>
Tensor<Real> tanh(const Tensor<Real>& x) {
  return detail::unary<Real>(
      "tanh", x,
      [](Real v) {
        // (1 - e) / (1 + e) with e = exp(-2|v|): one exp, cheaper than libm tanh.
        const Real e = std::exp(-2 * std::abs(v));
        return std::copysign((1 - e) / (1 + e), v);
      },
      [](Real, Real y) { return 1 - y * y; });
}

template <typename Real>
Tensor<Real> sigmoid(const Tensor<Real>& x) {
  return detail::unary<Real>(
      "sigmoid", x,
      [](Real v) {
        if (v >= 0) return Real(1) / (1 + std::exp(-v));
        const Real e = std::exp(v);
        return e / (1 + e);
      },
      [](Real, Real y) { return y * (1 - y); });
}

template <typename Real>
Tensor<Real> leaky_relu(const Tensor<Real>& x, Real slope) {
  return detail::unary<Real>(
      "leaky_relu", x,
      // Branch-free so it vectorizes on random-signed inputs.
      [slope](Real v) { return std::max(v, Real(0)) + slope * std::min(v, Real(0)); },
      [slope](Real v, Real) { return v > 0 ? Real(1) : slope; });
}

/// Clamps into [lo, hi]; the gradient is zero where the bound is active.
template <typename Real>
Tensor<Real> clamp(const Tensor<Real>& x, Real lo, Real hi) {
  if (!(lo <= hi)) throw ArgumentError("clamp: lo > hi");
  return detail::unary<Real>(
      "clamp", x, [lo, hi](Real v) { return std::clamp(v, lo, hi); },
      [lo, hi](Real v, Real) { return (v < lo || v > hi) ? Real(0) : Real(1); });
}

// ---------------------------------------------------------------------------
// Reductions

template <typename Real>
Tensor<Real> sum(const Tensor<Real>& x) {
  Real total = 0;
  for (Real v : x.values()) total += v;
  auto xn = x.node();
  return detail::emit<Real>("sum", {1}, {total}, {x},
                            [xn](std::span<const Real> g, std::span<const Real>) {
                              auto* gx = detail::grad_buffer(xn);
                              for (auto& v : *gx) v += g[0];
                            });
}

template <typename Real>
Tensor<Real> mean(const Tensor<Real>& x) {
  Real total = 0;
  for (Real v : x.values()) total += v;
  const Real inv = Real(1) / static_cast<Real>(x.size());
  auto xn = x.node();
  return detail::emit<Real>("mean", {1}, {total * inv}, {x},
                            [xn, inv](std::span<const Real> g, std::span<const Real>) {
                              auto* gx = detail::grad_buffer(xn);
                              for (auto& v : *gx) v += g[0] * inv;
                            });
}

// ---------------------------------------------------------------------------
// Linear algebra

/// (m x k) * (k x n) matrix product.
template <typename Real>
Tensor<Real> matmul(const Tensor<Real>& a, const Tensor<Real>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
    detail::shape_mismatch("matmul", a.shape(), b.shape());
  const auto m = static_cast<Eigen::Index>(a.dim(0));
  const auto k = static_cast<Eigen::Index>(a.dim(1));
  const auto n = static_cast<Eigen::Index>(b.dim(1));
  std::vector<Real> out(static_cast<std::size_t>(m * n));
  ConstMatrixMap<Real> am(a.values().data(), m, k);
  ConstMatrixMap<Real> bm(b.values().data(), k, n);
  MatrixMap<Real>(out.data(), m, n).noalias() = am * bm;
  auto an = a.node();
  auto bn = b.node();
  return detail::emit<Real>(
      "matmul", {a.dim(0), b.dim(1)}, std::move(out), {a, b},
      [an, bn, m, k, n](std::span<const Real> g, std::span<const Real>) {
        ConstMatrixMap<Real> gm(g.data(), m, n);
        if (auto* ga = detail::grad_buffer(an)) {
          MatrixMap<Real>(ga->data(), m, k).noalias() +=
              gm * ConstMatrixMap<Real>(bn->values->data(), k, n).transpose();
        }
        if (auto* gb = detail::grad_buffer(bn)) {
          MatrixMap<Real>(gb->data(), k, n).noalias() +=
              ConstMatrixMap<Real>(an->values->data(), m, k).transpose() * gm;
        }
      });
}

/// x + b with b (C) broadcast over every axis of x (N, C, ...) except axis 1.
template <typename Real>
Tensor<Real> add_bias(const Tensor<Real>& x, const Tensor<Real>& b) {
  if (x.rank() < 2 || b.rank() != 1 || b.dim(0) != x.dim(1))
    detail::shape_mismatch("add_bias", x.shape(), b.shape(), "bias must match axis 1");
  const std::size_t n = x.dim(0), c = x.dim(1), inner = x.size() / (n * c);
  const auto xv = x.values();
  const auto bv = b.values();
  std::vector<Real> out(xv.size());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t base = (i * c + ch) * inner;
      for (std::size_t j = 0; j < inner; ++j) out[base + j] = xv[base + j] + bv[ch];
    }
  auto xn = x.node();
  auto bn = b.node();
  return detail::emit<Real>("add_bias", x.shape(), std::move(out), {x, b},
                            [xn, bn, n, c, inner](std::span<const Real> g, std::span<const Real>) {
                              if (auto* gx = detail::grad_buffer(xn))
                                for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i];
                              if (auto* gb = detail::grad_buffer(bn))
                                for (std::size_t i = 0; i < n; ++i)
                                  for (std::size_t ch = 0; ch < c; ++ch) {
                                    Real acc = 0;
                                    const std::size_t base = (i * c + ch) * inner;
                                    for (std::size_t j = 0; j < inner; ++j) acc += g[base + j];
                                    (*gb)[ch] += acc;
                                  }
                            });
}

}  // namespace cpgan::ad
