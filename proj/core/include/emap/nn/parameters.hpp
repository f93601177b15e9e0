#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "emap/tensor/tape.hpp"

namespace emap {

struct Parameter {
  std::string name;
  Tensor value;
  bool trainable = true;
  Tensor grad;  // empty until a backward pass deposits into it
  Tensor m, v;  // Adam moments, sized lazily
};

/// Ordered, named parameter tensors. Order is insertion order and is the
/// serialization order.
class ParameterStore {
 public:
  std::size_t add(std::string name, Tensor value, bool trainable = true);

  std::size_t size() const noexcept { return params_.size(); }
  Parameter& operator[](std::size_t i) { return params_.at(i); }
  const Parameter& operator[](std::size_t i) const { return params_.at(i); }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  bool contains(const std::string& name) const;
  std::size_t index_of(const std::string& name) const;
  Parameter& at(const std::string& name) { return params_[index_of(name)]; }
  const Parameter& at(const std::string& name) const { return params_[index_of(name)]; }

  /// Sets the trainable flag on every parameter whose name starts with prefix; returns how many matched.
  std::size_t set_trainable(const std::string& prefix, bool trainable);

  std::size_t scalar_count() const;
  std::size_t trainable_scalar_count() const;

  void zero_grads();
  std::uint64_t adam_steps() const noexcept { return steps_; }
  void set_adam_steps(std::uint64_t s) noexcept { steps_ = s; }

  /// Raw little-endian bytes of every value in order; used for freeze checks and hashing.
  std::vector<std::uint8_t> value_bytes(const std::string& prefix = "") const;

 private:
  std::vector<Parameter> params_;
  std::uint64_t steps_ = 0;
};

/// Parameters placed on a tape for one forward/backward pass.
template <typename T>
struct BoundParameters {
  std::vector<Var<T>> vars;
  const Var<T>& operator[](std::size_t i) const { return vars.at(i); }
};

/// Records every parameter as a leaf; trainable ones request gradients unless
/// `gradients` is false.
template <typename T>
BoundParameters<T> bind(const ParameterStore& store, Tape<T>& tape, bool gradients = true);

/// Adds the tape gradients of trainable parameters into store grads.
template <typename T>
void collect_grads(ParameterStore& store, const Tape<T>& tape, const BoundParameters<T>& bound);

}  // namespace emap
