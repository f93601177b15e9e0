#pragma once

// Forward and backward kernels for the layer primitives. These operate on
// plain tensors; tape.hpp wraps them into recorded, differentiable ops.
// Backward kernels accumulate (+=) into gradient tensors that the caller has
// already sized.

#include <cstdint>
#include <vector>

#include "emap/tensor/tensor.hpp"

namespace emap {

enum class Padding { same, valid };

struct Conv2dOptions {
  Padding padding = Padding::same;
  std::size_t stride = 1;
};

namespace kernels {

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& x, const BasicTensor<T>& weight, const BasicTensor<T>& bias,
                      Conv2dOptions opt);

template <typename T>
void conv2d_backward(const BasicTensor<T>& x, const BasicTensor<T>& weight, const BasicTensor<T>& dy,
                     Conv2dOptions opt, BasicTensor<T>* dx, BasicTensor<T>* dweight, BasicTensor<T>* dbias);

/// Output spatial extent of a convolution; validates the options.
std::size_t conv_out_extent(std::size_t in, std::size_t kernel, Conv2dOptions opt);

/// Non-overlapping 2x2 stride-2 transposed convolution. weight: (Cin, Cout, 2, 2).
template <typename T>
BasicTensor<T> transpose_conv2d(const BasicTensor<T>& x, const BasicTensor<T>& weight, const BasicTensor<T>& bias);

template <typename T>
void transpose_conv2d_backward(const BasicTensor<T>& x, const BasicTensor<T>& weight, const BasicTensor<T>& dy,
                               BasicTensor<T>* dx, BasicTensor<T>* dweight, BasicTensor<T>* dbias);

/// 2x2 max pooling. argmax receives, per output element, the flat input index
/// that won (first in raster order on ties).
template <typename T>
BasicTensor<T> maxpool2x2(const BasicTensor<T>& x, std::vector<std::uint32_t>& argmax);

template <typename T>
void maxpool2x2_backward(const std::vector<std::uint32_t>& argmax, const BasicTensor<T>& dy, BasicTensor<T>& dx);

/// x: (N, D) or any (N, ...) flattened per row; weight (D, 1); bias (1). Returns (N, 1).
template <typename T>
BasicTensor<T> dense(const BasicTensor<T>& x, const BasicTensor<T>& weight, const BasicTensor<T>& bias);

template <typename T>
void dense_backward(const BasicTensor<T>& x, const BasicTensor<T>& weight, const BasicTensor<T>& dy,
                    BasicTensor<T>* dx, BasicTensor<T>* dweight, BasicTensor<T>* dbias);

template <typename T>
BasicTensor<T> concat_channels(const BasicTensor<T>& a, const BasicTensor<T>& b);

/// Splits dy of a channel concat back into the two operand gradients (+=).
template <typename T>
void concat_channels_backward(const BasicTensor<T>& dy, std::size_t channels_a, BasicTensor<T>* da,
                              BasicTensor<T>* db);

/// Numerically stable mean binary cross-entropy on logits.
template <typename T>
T bce_with_logits(const BasicTensor<T>& logits, const std::vector<int>& labels);

template <typename T>
T mse(const BasicTensor<T>& pred, const BasicTensor<T>& target);

template <typename T>
T sigmoid(T x) {
  if (x >= T{0}) return T{1} / (T{1} + std::exp(-x));
  const T e = std::exp(x);
  return e / (T{1} + e);
}

}  // namespace kernels
}  // namespace emap
