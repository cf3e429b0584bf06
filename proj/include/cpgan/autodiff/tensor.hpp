#pragma once

#include <cmath>
#include <cstddef>
#include <type_traits>
#include <limits>
#include <cstdint>
#include <cstring>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cpgan/error.hpp"

namespace cpgan::ad {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

inline std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

template <typename Real>
void check_finite(std::string_view where, std::span<const Real> values) {
  // Fast path: OR of "exponent bits all set" over the raw bits, which vectorizes.
  using Bits = std::conditional_t<sizeof(Real) == 4, std::uint32_t, std::uint64_t>;
  static_assert(sizeof(Bits) == sizeof(Real) && std::numeric_limits<Real>::is_iec559);
  constexpr Bits exponent = sizeof(Real) == 4 ? Bits(0x7f800000u) : Bits(0x7ff0000000000000ull);
  Bits bad = 0;
  for (Real v : values) {
    Bits b;
    std::memcpy(&b, &v, sizeof b);
    bad |= Bits((b & exponent) == exponent);
  }
  if (bad == 0) return;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      std::ostringstream os;
      os << where << ": non-finite value " << values[i] << " at flat index " << i;
      throw NonFiniteError(os.str());
    }
  }
}

namespace detail {

template <typename Real>
struct TensorNode {
  Shape shape;
  // Shared so that detached aliases and parameter snapshots cost nothing.
  std::shared_ptr<std::vector<Real>> values;
  std::vector<Real> grad;
  bool requires_grad = false;
  bool leaf = true;
};

}  // namespace detail

/// Dense row-major array with optional gradient tracking.
///
/// A Tensor is a handle: copies share storage. Values never change after
/// construction, except through mutable_values() which is reserved for leaf
/// parameters updated by an optimizer between tape recordings.
template <typename Real>
class Tensor {
 public:
  using value_type = Real;
  using Node = detail::TensorNode<Real>;

  Tensor() = default;

  static Tensor from(Shape shape, std::vector<Real> values, bool requires_grad = false) {
    if (shape.empty()) throw ShapeError("Tensor: rank-0 shapes are written as [1]");
    for (std::size_t e : shape)
      if (e == 0) throw ShapeError("Tensor: zero extent in shape " + to_string(shape));
    if (numel(shape) != values.size()) {
      std::ostringstream os;
      os << "Tensor: shape " << to_string(shape) << " needs " << numel(shape) << " values, got "
         << values.size();
      throw ShapeError(os.str());
    }
    check_finite<Real>("Tensor", values);
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->values = std::make_shared<std::vector<Real>>(std::move(values));
    node->requires_grad = requires_grad;
    if (requires_grad) node->grad.assign(node->values->size(), Real(0));
    return Tensor(std::move(node));
  }

  static Tensor full(Shape shape, Real value, bool requires_grad = false) {
    const std::size_t n = numel(shape);
    return from(std::move(shape), std::vector<Real>(n, value), requires_grad);
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    return full(std::move(shape), Real(0), requires_grad);
  }

  static Tensor scalar(Real value, bool requires_grad = false) {
    return from({1}, {value}, requires_grad);
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t size() const { return node_->values->size(); }
  bool requires_grad() const { return node_->requires_grad; }
  bool is_leaf() const { return node_->leaf; }

  std::span<const Real> values() const { return *node_->values; }
  Real operator[](std::size_t i) const { return (*node_->values)[i]; }

  /// Scalar value of a one-element tensor.
  Real item() const {
    if (size() != 1) throw ShapeError("Tensor::item on shape " + to_string(shape()));
    return (*node_->values)[0];
  }

  /// In-place access for optimizer updates on leaves.
  std::span<Real> mutable_values() {
    if (!node_->leaf) throw TapeError("mutable_values on a recorded (non-leaf) tensor");
    return *node_->values;
  }

  std::span<const Real> grad() const {
    if (!node_->requires_grad) throw TapeError("grad() on a tensor without requires_grad");
    return node_->grad;
  }

  std::span<Real> mutable_grad() {
    if (!node_->requires_grad) throw TapeError("mutable_grad() on a tensor without requires_grad");
    return node_->grad;
  }

  void zero_grad() {
    if (node_->requires_grad) std::fill(node_->grad.begin(), node_->grad.end(), Real(0));
  }

  /// Alias sharing the same values, never tracked.
  Tensor detach() const {
    auto node = std::make_shared<Node>();
    node->shape = node_->shape;
    node->values = node_->values;
    return Tensor(std::move(node));
  }

  /// Deep copy of values into a fresh leaf.
  Tensor clone(bool requires_grad) const {
    return from(shape(), std::vector<Real>(values().begin(), values().end()), requires_grad);
  }

  /// True when both handles refer to the same node.
  bool same_node(const Tensor& other) const { return node_ == other.node_; }

  const std::shared_ptr<Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<Node> node_;
};

}  // namespace cpgan::ad
