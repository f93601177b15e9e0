#pragma once

#include <functional>
#include <string>
#include <vector>

#include "emap/tensor/tensor.hpp"

namespace emap {

template <typename T>
class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid until the tape is cleared.
template <typename T>
class Var {
 public:
  Var() = default;

  const BasicTensor<T>& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;
  std::size_t id() const noexcept { return id_; }
  Tape<T>* tape() const noexcept { return tape_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape<T>;
  Var(Tape<T>* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape<T>* tape_ = nullptr;
  std::size_t id_ = 0;
};

enum class GradMode { record, inference };

/// Reverse-mode autodiff tape. Ops append nodes in execution order; backward()
/// replays their adjoints in reverse. One tape belongs to one thread.
template <typename T>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  explicit Tape(GradMode mode = GradMode::record) : mode_(mode) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const noexcept { return mode_ == GradMode::record; }
  std::size_t size() const noexcept { return nodes_.size(); }

  Var<T> leaf(BasicTensor<T> value, bool requires_grad);
  Var<T> constant(BasicTensor<T> value) { return leaf(std::move(value), false); }

  /// Appends an op result. Throws NumericError if the value is not finite.
  Var<T> record(const char* op, BasicTensor<T> value, bool requires_grad, BackwardFn backward);

  /// Seeds d(output)/d(output) = 1; output must hold a single value.
  void backward(Var<T> output);
  void backward(Var<T> output, const BasicTensor<T>& seed);

  /// Gradient of the last backward pass w.r.t. v; zeros for nodes the output did not depend on.
  BasicTensor<T> grad(Var<T> v) const;
  bool has_grad(Var<T> v) const;

  /// Drops every node; all outstanding Vars become invalid.
  void clear();

  // Used by op implementations.
  const BasicTensor<T>& value_of(std::size_t id) const;
  bool node_requires_grad(std::size_t id) const;
  /// Gradient accumulator for id when it participates in differentiation, else nullptr.
  BasicTensor<T>* grad_sink(std::size_t id);
  const BasicTensor<T>& upstream(std::size_t id) const;

 private:
  struct Node {
    BasicTensor<T> value;
    BasicTensor<T> grad;
    bool requires_grad = false;
    BackwardFn backward;
  };

  void check(Var<T> v) const;

  GradMode mode_;
  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

extern template class Tape<float>;
extern template class Tape<double>;
extern template class Var<float>;
extern template class Var<double>;

}  // namespace emap
