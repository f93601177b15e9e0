#include "emap/tensor/tensor.hpp"

#include <algorithm>
#include <sstream>

namespace emap {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (const auto d : shape) n *= d;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ')';
  return os.str();
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, T fill) : shape_(std::move(shape)) {
  for (const auto d : shape_)
    if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + to_string(shape_));
  data_.assign(numel(shape_), fill);
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
  for (const auto d : shape_)
    if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + to_string(shape_));
  if (numel(shape_) != data_.size())
    throw ShapeError("shape " + to_string(shape_) + " holds " + std::to_string(numel(shape_)) +
                     " values but " + std::to_string(data_.size()) + " were given");
}

template <typename T>
BasicTensor<T> BasicTensor<T>::reshaped(Shape shape) const {
  if (numel(shape) != data_.size())
    throw ShapeError("cannot reshape " + to_string(shape_) + " to " + to_string(shape));
  return BasicTensor(std::move(shape), data_);
}

template <typename T>
BasicTensor<T> BasicTensor<T>::slice_batch(std::size_t first, std::size_t count) const {
  if (shape_.empty() || count == 0 || first + count > shape_[0])
    throw ShapeError("batch slice [" + std::to_string(first) + ", " + std::to_string(first + count) +
                     ") out of range for " + to_string(shape_));
  const std::size_t stride = data_.size() / shape_[0];
  Shape s = shape_;
  s[0] = count;
  std::vector<T> out(data_.begin() + static_cast<std::ptrdiff_t>(first * stride),
                     data_.begin() + static_cast<std::ptrdiff_t>((first + count) * stride));
  return BasicTensor(std::move(s), std::move(out));
}

template <typename T>
void BasicTensor<T>::fill(T value) {
  std::fill(data_.begin(), data_.end(), value);
}

template <typename T>
BasicTensor<T> concat_batch(std::span<const BasicTensor<T>> parts) {
  if (parts.empty()) throw ShapeError("concat_batch needs at least one tensor");
  Shape item = parts[0].shape();
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.rank() != item.size() ||
        !std::equal(p.shape().begin() + 1, p.shape().end(), item.begin() + 1))
      throw ShapeError("concat_batch shape mismatch: " + to_string(p.shape()) + " vs " + to_string(item));
    total += p.shape()[0];
  }
  std::vector<T> data;
  data.reserve(total * (parts[0].size() / parts[0].shape()[0]));
  for (const auto& p : parts) data.insert(data.end(), p.storage().begin(), p.storage().end());
  item[0] = total;
  return BasicTensor<T>(std::move(item), std::move(data));
}

template class BasicTensor<float>;
template class BasicTensor<double>;
template BasicTensor<float> concat_batch(std::span<const BasicTensor<float>>);
template BasicTensor<double> concat_batch(std::span<const BasicTensor<double>>);

}  // namespace emap
