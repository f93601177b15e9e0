#include "emap/tensor/gemm.hpp"

#include <algorithm>
#include <cstring>
#include <type_traits>
#include <vector>

namespace emap {
namespace {

// Packs B into a contiguous row-major K x N buffer when it is not already.
template <typename T>
const T* contiguous_b(std::size_t N, std::size_t K, MatrixView<T> B, std::vector<T>& scratch,
                      std::size_t& ldb) {
  if (B.col_stride == 1) {
    ldb = static_cast<std::size_t>(B.row_stride);
    return B.ptr;
  }
  scratch.resize(K * N);
  for (std::size_t k = 0; k < K; ++k) {
    const T* src = B.ptr + static_cast<std::ptrdiff_t>(k) * B.row_stride;
    T* dst = scratch.data() + k * N;
    for (std::size_t j = 0; j < N; ++j) dst[j] = src[static_cast<std::ptrdiff_t>(j) * B.col_stride];
  }
  ldb = N;
  return scratch.data();
}

template <typename T>
void gemm_rows(std::size_t i0, std::size_t i1, std::size_t j0, std::size_t j1, std::size_t K,
               MatrixView<T> A, const T* B, std::size_t ldb, T* C, std::size_t ldc, bool accumulate) {
  for (std::size_t i = i0; i < i1; ++i) {
    T* crow = C + i * ldc;
    if (!accumulate) std::fill(crow + j0, crow + j1, T{0});
    const T* arow = A.ptr + static_cast<std::ptrdiff_t>(i) * A.row_stride;
    for (std::size_t k = 0; k < K; ++k) {
      const T a = arow[static_cast<std::ptrdiff_t>(k) * A.col_stride];
      const T* brow = B + k * ldb;
      for (std::size_t j = j0; j < j1; ++j) crow[j] += a * brow[j];
    }
  }
}

#if defined(__GNUC__)
typedef float vf16 __attribute__((vector_size(64)));

inline vf16 load16(const float* p) {
  vf16 v;
  std::memcpy(&v, p, sizeof(v));
  return v;
}
inline void store16(float* p, vf16 v) { std::memcpy(p, &v, sizeof(v)); }

constexpr std::size_t kNR = 32;

// Register-blocked MR x 32 tile, sequential over k.
template <int MR>
void tile_f32(std::size_t K, const float* A, std::ptrdiff_t rsa, std::ptrdiff_t csa, const float* B,
              std::size_t ldb, float* C, std::size_t ldc, bool accumulate) {
  vf16 c0[MR];
  vf16 c1[MR];
  for (int r = 0; r < MR; ++r) {
    if (accumulate) {
      c0[r] = load16(C + r * ldc);
      c1[r] = load16(C + r * ldc + 16);
    } else {
      c0[r] = vf16{};
      c1[r] = vf16{};
    }
  }
  for (std::size_t k = 0; k < K; ++k) {
    const vf16 b0 = load16(B + k * ldb);
    const vf16 b1 = load16(B + k * ldb + 16);
    const float* ak = A + static_cast<std::ptrdiff_t>(k) * csa;
    for (int r = 0; r < MR; ++r) {
      const float a = ak[r * rsa];
      c0[r] += a * b0;
      c1[r] += a * b1;
    }
  }
  for (int r = 0; r < MR; ++r) {
    store16(C + r * ldc, c0[r]);
    store16(C + r * ldc + 16, c1[r]);
  }
}

void gemm_f32(std::size_t M, std::size_t N, std::size_t K, MatrixView<float> A, const float* B,
              std::size_t ldb, float* C, std::size_t ldc, bool accumulate) {
  constexpr std::size_t kMR = 8;
  const std::size_t n_full = N - N % kNR;
  for (std::size_t j = 0; j < n_full; j += kNR) {
    std::size_t i = 0;
    for (; i + kMR <= M; i += kMR)
      tile_f32<8>(K, A.ptr + static_cast<std::ptrdiff_t>(i) * A.row_stride, A.row_stride, A.col_stride,
                  B + j, ldb, C + i * ldc + j, ldc, accumulate);
    const std::size_t rest = M - i;
    const float* a = A.ptr + static_cast<std::ptrdiff_t>(i) * A.row_stride;
    float* c = C + i * ldc + j;
    switch (rest) {
      case 7: tile_f32<7>(K, a, A.row_stride, A.col_stride, B + j, ldb, c, ldc, accumulate); break;
      case 6: tile_f32<6>(K, a, A.row_stride, A.col_stride, B + j, ldb, c, ldc, accumulate); break;
      case 5: tile_f32<5>(K, a, A.row_stride, A.col_stride, B + j, ldb, c, ldc, accumulate); break;
      case 4: tile_f32<4>(K, a, A.row_stride, A.col_stride, B + j, ldb, c, ldc, accumulate); break;
      case 3: tile_f32<3>(K, a, A.row_stride, A.col_stride, B + j, ldb, c, ldc, accumulate); break;
      case 2: tile_f32<2>(K, a, A.row_stride, A.col_stride, B + j, ldb, c, ldc, accumulate); break;
      case 1: tile_f32<1>(K, a, A.row_stride, A.col_stride, B + j, ldb, c, ldc, accumulate); break;
      default: break;
    }
  }
  if (n_full < N) gemm_rows<float>(0, M, n_full, N, K, A, B, ldb, C, ldc, accumulate);
}
#endif

}  // namespace

template <typename T>
void gemm(std::size_t M, std::size_t N, std::size_t K, MatrixView<T> A, MatrixView<T> B, T* C,
          std::size_t ldc, bool accumulate) {
  if (M == 0 || N == 0) return;
  thread_local std::vector<T> scratch;
  std::size_t ldb = 0;
  const T* b = contiguous_b(N, K, B, scratch, ldb);
#if defined(__GNUC__)
  if constexpr (std::is_same_v<T, float>) {
    gemm_f32(M, N, K, A, b, ldb, C, ldc, accumulate);
    return;
  }
#endif
  gemm_rows<T>(0, M, 0, N, K, A, b, ldb, C, ldc, accumulate);
}

template void gemm<float>(std::size_t, std::size_t, std::size_t, MatrixView<float>, MatrixView<float>, float*,
                          std::size_t, bool);
template void gemm<double>(std::size_t, std::size_t, std::size_t, MatrixView<double>, MatrixView<double>,
                           double*, std::size_t, bool);

}  // namespace emap
