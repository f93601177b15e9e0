#include "emap/tensor/tape.hpp"

namespace emap {

template <typename T>
const BasicTensor<T>& Var<T>::value() const {
  if (!tape_) throw StateError("use of an unbound Var");
  return tape_->value_of(id_);
}

template <typename T>
bool Var<T>::requires_grad() const {
  if (!tape_) throw StateError("use of an unbound Var");
  return tape_->node_requires_grad(id_);
}

template <typename T>
Var<T> Tape<T>::leaf(BasicTensor<T> value, bool requires_grad) {
  nodes_.push_back(Node{std::move(value), {}, requires_grad && recording(), {}});
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Var<T> Tape<T>::record(const char* op, BasicTensor<T> value, bool requires_grad, BackwardFn backward) {
  if (!value.all_finite()) throw NumericError(std::string(op) + " produced a non-finite value");
  const bool track = requires_grad && recording();
  nodes_.push_back(Node{std::move(value), {}, track, track ? std::move(backward) : BackwardFn{}});
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
void Tape<T>::check(Var<T> v) const {
  if (v.tape_ != this || v.id_ >= nodes_.size()) throw StateError("Var does not belong to this tape");
}

template <typename T>
void Tape<T>::backward(Var<T> output) {
  check(output);
  if (nodes_[output.id_].value.size() != 1)
    throw ShapeError("backward without a seed needs a scalar output, got " +
                     to_string(nodes_[output.id_].value.shape()));
  backward(output, BasicTensor<T>::ones(nodes_[output.id_].value.shape()));
}

template <typename T>
void Tape<T>::backward(Var<T> output, const BasicTensor<T>& seed) {
  check(output);
  if (!recording()) throw StateError("backward on an inference-mode tape");
  if (backward_done_) throw StateError("second backward without a new forward; clear the tape first");
  Node& out = nodes_[output.id_];
  if (seed.shape() != out.value.shape()) throw ShapeError("backward seed shape mismatch");
  backward_done_ = true;
  if (!out.requires_grad) return;
  out.grad = seed;
  for (std::size_t i = output.id_ + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (node.backward && !node.grad.empty()) node.backward(*this, i);
  }
}

template <typename T>
BasicTensor<T> Tape<T>::grad(Var<T> v) const {
  check(v);
  if (!backward_done_) throw StateError("gradient requested before backward");
  const Node& node = nodes_[v.id_];
  if (node.grad.empty()) return BasicTensor<T>::zeros(node.value.shape());
  return node.grad;
}

template <typename T>
bool Tape<T>::has_grad(Var<T> v) const {
  check(v);
  return backward_done_ && nodes_[v.id_].requires_grad;
}

template <typename T>
void Tape<T>::clear() {
  nodes_.clear();
  nodes_.shrink_to_fit();
  backward_done_ = false;
}

template <typename T>
const BasicTensor<T>& Tape<T>::value_of(std::size_t id) const {
  if (id >= nodes_.size()) throw StateError("stale Var: tape was cleared");
  return nodes_[id].value;
}

template <typename T>
bool Tape<T>::node_requires_grad(std::size_t id) const {
  if (id >= nodes_.size()) throw StateError("stale Var: tape was cleared");
  return nodes_[id].requires_grad;
}

template <typename T>
BasicTensor<T>* Tape<T>::grad_sink(std::size_t id) {
  Node& node = nodes_[id];
  if (!node.requires_grad) return nullptr;
  if (node.grad.empty()) node.grad = BasicTensor<T>::zeros(node.value.shape());
  return &node.grad;
}

template <typename T>
const BasicTensor<T>& Tape<T>::upstream(std::size_t id) const {
  return nodes_[id].grad;
}

template class Tape<float>;
template class Tape<double>;
template class Var<float>;
template class Var<double>;

}  // namespace emap
