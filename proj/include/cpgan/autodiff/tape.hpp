#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cpgan/autodiff/tensor.hpp"
#include "cpgan/error.hpp"

namespace cpgan::ad {

/// Ordered log of primitive applications for reverse-mode differentiation.
///
/// Single-threaded. Node ids are assigned in first-seen order, so every
/// record's inputs carry smaller ids than its output. A tape can be replayed
/// backward exactly once.
template <typename Real>
class Tape {
 public:
  using Node = detail::TensorNode<Real>;
  using BackwardFn = std::function<void(std::span<const Real> output_grad)>;

  struct Record {
    std::string_view op;
    std::vector<std::size_t> inputs;
    std::size_t output;
    BackwardFn backward;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void record(std::string_view op, std::span<const std::shared_ptr<Node>> inputs,
              const std::shared_ptr<Node>& output, BackwardFn backward) {
    if (consumed_) throw TapeError(std::string(op) + ": recording on a tape already replayed");
    Record rec{op, {}, 0, std::move(backward)};
    rec.inputs.reserve(inputs.size());
    for (const auto& in : inputs) rec.inputs.push_back(id_of(in));
    rec.output = id_of(output);
    records_.push_back(std::move(rec));
  }

  /// Accumulates d(loss)/d(leaf) into every requires_grad leaf reachable from loss.
  void backward(const Tensor<Real>& loss) {
    if (consumed_) throw TapeError("backward: tape already replayed; record a new tape");
    if (!loss.defined() || loss.size() != 1)
      throw TapeError("backward: loss must be a scalar, got shape " +
                      (loss.defined() ? to_string(loss.shape()) : std::string("<undefined>")));
    auto it = ids_.find(loss.node().get());
    if (it == ids_.end() || !loss.requires_grad())
      throw TapeError("backward: loss was not produced on this tape");
    consumed_ = true;
    Node& root = *loss.node();
    root.grad.assign(1, Real(1));
    visit_order_.clear();
    for (std::size_t r = records_.size(); r-- > 0;) {
      Record& rec = records_[r];
      Node& out = *nodes_[rec.output];
      if (out.grad.empty()) continue;  // not on a path to the loss
      visit_order_.push_back(r);
      rec.backward(out.grad);
    }
  }

  bool consumed() const { return consumed_; }
  std::span<const Record> records() const { return records_; }
  std::size_t node_count() const { return nodes_.size(); }
  /// Record indices in the order the last backward pass visited them.
  std::span<const std::size_t> visit_order() const { return visit_order_; }

  bool contains(const Tensor<Real>& t) const { return ids_.count(t.node().get()) != 0; }

 private:
  std::size_t id_of(const std::shared_ptr<Node>& node) {
    auto [it, inserted] = ids_.try_emplace(node.get(), nodes_.size());
    if (inserted) nodes_.push_back(node);
    return it->second;
  }

  std::vector<Record> records_;
  std::vector<std::shared_ptr<Node>> nodes_;
  std::unordered_map<const Node*, std::size_t> ids_;
  std::vector<std::size_t> visit_order_;
  bool consumed_ = false;
};

namespace detail {
template <typename Real>
inline thread_local Tape<Real>* current_tape = nullptr;
}  // namespace detail

/// The tape new primitive applications are recorded on, or nullptr.
/// Without an active tape nothing is recorded and outputs never require grad.
template <typename Real>
Tape<Real>* active_tape() {
  return detail::current_tape<Real>;
}

/// Makes a tape active on this thread for the lifetime of the scope.
template <typename Real>
class TapeScope {
 public:
  explicit TapeScope(Tape<Real>& tape) : previous_(detail::current_tape<Real>) {
    detail::current_tape<Real> = &tape;
  }
  ~TapeScope() { detail::current_tape<Real> = previous_; }
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape<Real>* previous_;
};

/// Replays `tape` from `loss`; leaf gradients land in each leaf's grad buffer.
template <typename Real>
void backward(Tape<Real>& tape, const Tensor<Real>& loss) {
  tape.backward(loss);
}

}  // namespace cpgan::ad
