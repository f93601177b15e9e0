#pragma once

#include <cstddef>

namespace emap {

/// Row-major matrix operand: element (i, k) lives at ptr[i * row_stride + k * col_stride].
template <typename T>
struct MatrixView {
  const T* ptr;
  std::ptrdiff_t row_stride;
  std::ptrdiff_t col_stride;

  static MatrixView row_major(const T* p, std::size_t ld) {
    return {p, static_cast<std::ptrdiff_t>(ld), 1};
  }
  static MatrixView transposed(const T* p, std::size_t ld) {
    return {p, 1, static_cast<std::ptrdiff_t>(ld)};
  }
};

/// C[M,N] (+)= A[M,K] * B[K,N] with C row-major (leading dimension ldc).
///
/// Every output element is accumulated sequentially over k = 0..K-1 starting
/// from its prior value (accumulate) or zero, so results are independent of
/// blocking and bit-reproducible.
template <typename T>
void gemm(std::size_t M, std::size_t N, std::size_t K, MatrixView<T> A, MatrixView<T> B, T* C,
          std::size_t ldc, bool accumulate);

}  // namespace emap
