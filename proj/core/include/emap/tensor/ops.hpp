#pragma once

#include <vector>

#include "emap/tensor/kernels.hpp"
#include "emap/tensor/tape.hpp"

// Differentiable ops. Each records its result on the operands' tape; all
// operands must belong to the same tape.
namespace emap::ops {

template <typename T>
Var<T> conv2d(Var<T> x, Var<T> weight, Var<T> bias, Conv2dOptions opt = {});

template <typename T>
Var<T> transpose_conv2d(Var<T> x, Var<T> weight, Var<T> bias);

template <typename T>
Var<T> maxpool2x2(Var<T> x);

template <typename T>
Var<T> dense(Var<T> x, Var<T> weight, Var<T> bias);

template <typename T>
Var<T> relu(Var<T> x);

template <typename T>
Var<T> sigmoid(Var<T> x);

template <typename T>
Var<T> concat_channels(Var<T> a, Var<T> b);

/// Per batch item raster-order sum: (N, ...) -> (N, 1). This is the unity-weight head.
template <typename T>
Var<T> sum_per_item(Var<T> x);

/// Raster-order sum of every element -> shape (1).
template <typename T>
Var<T> sum_all(Var<T> x);

/// sum(x .* weights) with a constant weight tensor -> shape (1).
template <typename T>
Var<T> weighted_sum(Var<T> x, const BasicTensor<T>& weights);

/// Mean binary cross-entropy of sigmoid(logits) against {0,1} labels.
template <typename T>
Var<T> bce_loss(Var<T> logits, const std::vector<int>& labels);

/// Mean squared difference against a constant target of the same shape.
template <typename T>
Var<T> mse_loss(Var<T> pred, const BasicTensor<T>& target);

}  // namespace emap::ops
