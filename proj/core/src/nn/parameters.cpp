#include "emap/nn/parameters.hpp"

#include <cstring>

namespace emap {

std::size_t ParameterStore::add(std::string name, Tensor value, bool trainable) {
  if (contains(name)) throw ArgumentError("duplicate parameter name '" + name + "'");
  params_.push_back(Parameter{std::move(name), std::move(value), trainable, {}, {}, {}});
  return params_.size() - 1;
}

bool ParameterStore::contains(const std::string& name) const {
  for (const auto& p : params_)
    if (p.name == name) return true;
  return false;
}

std::size_t ParameterStore::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < params_.size(); ++i)
    if (params_[i].name == name) return i;
  throw ArgumentError("no parameter named '" + name + "'");
}

std::size_t ParameterStore::set_trainable(const std::string& prefix, bool trainable) {
  std::size_t n = 0;
  for (auto& p : params_) {
    if (p.name.compare(0, prefix.size(), prefix) != 0) continue;
    p.trainable = trainable;
    ++n;
  }
  return n;
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

std::size_t ParameterStore::trainable_scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_)
    if (p.trainable) n += p.value.size();
  return n;
}

void ParameterStore::zero_grads() {
  for (auto& p : params_) p.grad = Tensor{};
}

std::vector<std::uint8_t> ParameterStore::value_bytes(const std::string& prefix) const {
  std::vector<std::uint8_t> out;
  for (const auto& p : params_) {
    if (p.name.compare(0, prefix.size(), prefix) != 0) continue;
    const auto* b = reinterpret_cast<const std::uint8_t*>(p.value.raw());
    out.insert(out.end(), b, b + p.value.size() * sizeof(float));
  }
  return out;
}

template <typename T>
BoundParameters<T> bind(const ParameterStore& store, Tape<T>& tape, bool gradients) {
  BoundParameters<T> bound;
  bound.vars.reserve(store.size());
  for (const auto& p : store) {
    if constexpr (std::is_same_v<T, float>)
      bound.vars.push_back(tape.leaf(p.value, gradients && p.trainable));
    else
      bound.vars.push_back(tape.leaf(p.value.template cast<T>(), gradients && p.trainable));
  }
  return bound;
}

template <typename T>
void collect_grads(ParameterStore& store, const Tape<T>& tape, const BoundParameters<T>& bound) {
  if (bound.vars.size() != store.size()) throw StateError("bound parameter count differs from the store");
  for (std::size_t i = 0; i < store.size(); ++i) {
    Parameter& p = store[i];
    if (!p.trainable || !tape.has_grad(bound.vars[i])) continue;
    const BasicTensor<T> g = tape.grad(bound.vars[i]);
    if (p.grad.empty()) p.grad = Tensor::zeros(p.value.shape());
    for (std::size_t k = 0; k < g.size(); ++k) p.grad[k] += static_cast<float>(g[k]);
  }
}

template BoundParameters<float> bind(const ParameterStore&, Tape<float>&, bool);
template BoundParameters<double> bind(const ParameterStore&, Tape<double>&, bool);
template void collect_grads(ParameterStore&, const Tape<float>&, const BoundParameters<float>&);
template void collect_grads(ParameterStore&, const Tape<double>&, const BoundParameters<double>&);

}  // namespace emap
