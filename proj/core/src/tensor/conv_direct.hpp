#pragma once

// Implicit-GEMM kernels for stride-1, same-padded float convolutions. The
// input is zero-padded once and convolution windows are read straight from
// it, so no im2col buffer is materialized.

#include <cstddef>

namespace emap::kernels::direct {

struct Geometry {
  std::size_t cin, cout, h, w, kh, kw;
};

/// True when the fast path handles this geometry.
bool supported(const Geometry& g);

/// y[cout,h,w] = (accumulate ? y : bias) + sum_k weight[co,k] * window_k, k = (ci, dy, dx) ascending.
/// bias may be null when accumulate is true.
void forward(const Geometry& g, const float* x, const float* weight, const float* bias, float* y, bool accumulate);

/// dweight[co,k] += sum over pixels of dy[co,p] * window_k(p).
void weight_grad(const Geometry& g, const float* x, const float* dy, float* dweight);

/// dx += full correlation of dy with the flipped kernel.
void input_grad(const Geometry& g, const float* weight, const float* dy, float* dx);

}  // namespace emap::kernels::direct
