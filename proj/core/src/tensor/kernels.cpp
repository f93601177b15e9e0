#include "emap/tensor/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <type_traits>

#include "conv_direct.hpp"
#include "emap/tensor/gemm.hpp"

namespace emap::kernels {
namespace {

void require_rank(const Shape& s, std::size_t rank, const char* what) {
  if (s.size() != rank)
    throw ShapeError(std::string(what) + " expects a rank-" + std::to_string(rank) + " tensor, got " + to_string(s));
}

struct ConvGeometry {
  std::size_t n, cin, h, w, cout, kh, kw, ho, wo, pad_h, pad_w, stride;
  std::size_t k() const { return cin * kh * kw; }
  std::size_t hw_out() const { return ho * wo; }
};

ConvGeometry conv_geometry(const Shape& xs, const Shape& ws, Conv2dOptions opt) {
  require_rank(xs, 4, "conv2d input");
  require_rank(ws, 4, "conv2d weight");
  if (opt.stride == 0) throw ArgumentError("conv2d stride must be >= 1");
  if (ws[1] != xs[1])
    throw ShapeError("conv2d channel mismatch: input " + to_string(xs) + " vs weight " + to_string(ws));
  ConvGeometry g{};
  g.n = xs[0];
  g.cin = xs[1];
  g.h = xs[2];
  g.w = xs[3];
  g.cout = ws[0];
  g.kh = ws[2];
  g.kw = ws[3];
  g.stride = opt.stride;
  if (opt.padding == Padding::same) {
    if (g.kh % 2 == 0 || g.kw % 2 == 0)
      throw ShapeError("same padding needs odd kernel sizes, got " + to_string(ws));
    g.pad_h = g.kh / 2;
    g.pad_w = g.kw / 2;
  }
  g.ho = conv_out_extent(g.h, g.kh, opt);
  g.wo = conv_out_extent(g.w, g.kw, opt);
  return g;
}

template <typename T>
void im2col(const T* x, const ConvGeometry& g, T* cols) {
  const std::size_t hw = g.hw_out();
  for (std::size_t ci = 0; ci < g.cin; ++ci) {
    const T* plane = x + ci * g.h * g.w;
    for (std::size_t dy = 0; dy < g.kh; ++dy) {
      for (std::size_t dx = 0; dx < g.kw; ++dx) {
        T* row = cols + ((ci * g.kh + dy) * g.kw + dx) * hw;
        for (std::size_t oh = 0; oh < g.ho; ++oh) {
          const auto ih = static_cast<std::ptrdiff_t>(oh * g.stride + dy) - static_cast<std::ptrdiff_t>(g.pad_h);
          T* out = row + oh * g.wo;
          if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.h)) {
            std::fill(out, out + g.wo, T{0});
            continue;
          }
          const T* src = plane + static_cast<std::size_t>(ih) * g.w;
          for (std::size_t ow = 0; ow < g.wo; ++ow) {
            const auto iw = static_cast<std::ptrdiff_t>(ow * g.stride + dx) - static_cast<std::ptrdiff_t>(g.pad_w);
            out[ow] = (iw < 0 || iw >= static_cast<std::ptrdiff_t>(g.w)) ? T{0} : src[iw];
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* cols, const ConvGeometry& g, T* dx) {
  const std::size_t hw = g.hw_out();
  for (std::size_t ci = 0; ci < g.cin; ++ci) {
    T* plane = dx + ci * g.h * g.w;
    for (std::size_t dy = 0; dy < g.kh; ++dy) {
      for (std::size_t dxk = 0; dxk < g.kw; ++dxk) {
        const T* row = cols + ((ci * g.kh + dy) * g.kw + dxk) * hw;
        for (std::size_t oh = 0; oh < g.ho; ++oh) {
          const auto ih = static_cast<std::ptrdiff_t>(oh * g.stride + dy) - static_cast<std::ptrdiff_t>(g.pad_h);
          if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.h)) continue;
          T* dst = plane + static_cast<std::size_t>(ih) * g.w;
          const T* src = row + oh * g.wo;
          for (std::size_t ow = 0; ow < g.wo; ++ow) {
            const auto iw = static_cast<std::ptrdiff_t>(ow * g.stride + dxk) - static_cast<std::ptrdiff_t>(g.pad_w);
            if (iw >= 0 && iw < static_cast<std::ptrdiff_t>(g.w)) dst[iw] += src[ow];
          }
        }
      }
    }
  }
}

template <typename T>
bool use_direct(const ConvGeometry& g) {
  if constexpr (!std::is_same_v<T, float>) {
    return false;
  } else {
    return g.stride == 1 && g.pad_h == g.kh / 2 && g.pad_w == g.kw / 2 && g.kh > 1 &&
           direct::supported({g.cin, g.cout, g.h, g.w, g.kh, g.kw});
  }
}

bool is_pointwise(const ConvGeometry& g) {
  return g.kh == 1 && g.kw == 1 && g.stride == 1 && g.pad_h == 0 && g.pad_w == 0;
}

}  // namespace

std::size_t conv_out_extent(std::size_t in, std::size_t kernel, Conv2dOptions opt) {
  if (opt.stride == 0) throw ArgumentError("conv2d stride must be >= 1");
  const std::size_t pad = opt.padding == Padding::same ? kernel / 2 : 0;
  if (in + 2 * pad < kernel)
    throw ShapeError("kernel " + std::to_string(kernel) + " larger than padded extent " + std::to_string(in + 2 * pad));
  return (in + 2 * pad - kernel) / opt.stride + 1;
}

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& x, const BasicTensor<T>& weight, const BasicTensor<T>& bias,
                      Conv2dOptions opt) {
  const ConvGeometry g = conv_geometry(x.shape(), weight.shape(), opt);
  if (bias.size() != g.cout)
    throw ShapeError("conv2d bias has " + std::to_string(bias.size()) + " values for " + std::to_string(g.cout) +
                     " output channels");
  BasicTensor<T> y({g.n, g.cout, g.ho, g.wo});
  const std::size_t hw = g.hw_out();
  const std::size_t k = g.k();
  if constexpr (std::is_same_v<T, float>) {
    if (use_direct<T>(g)) {
      const direct::Geometry dg{g.cin, g.cout, g.h, g.w, g.kh, g.kw};
      for (std::size_t n = 0; n < g.n; ++n)
        direct::forward(dg, x.raw() + n * g.cin * g.h * g.w, weight.raw(), bias.raw(), y.raw() + n * g.cout * hw,
                        false);
      return y;
    }
  }
  std::vector<T> cols;
  if (!is_pointwise(g)) cols.resize(k * hw);
  for (std::size_t n = 0; n < g.n; ++n) {
    const T* xn = x.raw() + n * g.cin * g.h * g.w;
    T* yn = y.raw() + n * g.cout * hw;
    for (std::size_t co = 0; co < g.cout; ++co) std::fill(yn + co * hw, yn + (co + 1) * hw, bias[co]);
    const T* b = xn;
    if (!is_pointwise(g)) {
      im2col(xn, g, cols.data());
      b = cols.data();
    }
    gemm<T>(g.cout, hw, k, MatrixView<T>::row_major(weight.raw(), k), MatrixView<T>::row_major(b, hw), yn, hw,
            true);
  }
  return y;
}

template <typename T>
void conv2d_backward(const BasicTensor<T>& x, const BasicTensor<T>& weight, const BasicTensor<T>& dy,
                     Conv2dOptions opt, BasicTensor<T>* dx, BasicTensor<T>* dweight, BasicTensor<T>* dbias) {
  const ConvGeometry g = conv_geometry(x.shape(), weight.shape(), opt);
  const std::size_t hw = g.hw_out();
  const std::size_t k = g.k();
  if (dy.shape() != Shape{g.n, g.cout, g.ho, g.wo})
    throw ShapeError("conv2d upstream gradient has shape " + to_string(dy.shape()));
  const bool fast = use_direct<T>(g);
  std::vector<T> cols(fast ? 0 : is_pointwise(g) ? 0 : k * hw);
  std::vector<T> dcols(dx && !fast ? k * hw : 0);
  for (std::size_t n = 0; n < g.n; ++n) {
    const T* xn = x.raw() + n * g.cin * g.h * g.w;
    const T* dyn = dy.raw() + n * g.cout * hw;
    if (dbias) {
      for (std::size_t co = 0; co < g.cout; ++co) {
        T acc = (*dbias)[co];
        for (std::size_t i = 0; i < hw; ++i) acc += dyn[co * hw + i];
        (*dbias)[co] = acc;
      }
    }
    if constexpr (std::is_same_v<T, float>) {
      if (fast) {
        const direct::Geometry dg{g.cin, g.cout, g.h, g.w, g.kh, g.kw};
        if (dweight) direct::weight_grad(dg, xn, dyn, dweight->raw());
        if (dx) direct::input_grad(dg, weight.raw(), dyn, dx->raw() + n * g.cin * g.h * g.w);
        continue;
      }
    }
    if (dweight) {
      const T* b = xn;
      if (!is_pointwise(g)) {
        im2col(xn, g, cols.data());
        b = cols.data();
      }
      gemm<T>(g.cout, k, hw, MatrixView<T>::row_major(dyn, hw), MatrixView<T>::transposed(b, hw), dweight->raw(), k,
              true);
    }
    if (dx) {
      T* dxn = dx->raw() + n * g.cin * g.h * g.w;
      if (is_pointwise(g)) {
        gemm<T>(k, hw, g.cout, MatrixView<T>::transposed(weight.raw(), k), MatrixView<T>::row_major(dyn, hw), dxn,
                hw, true);
      } else {
        gemm<T>(k, hw, g.cout, MatrixView<T>::transposed(weight.raw(), k), MatrixView<T>::row_major(dyn, hw),
                dcols.data(), hw, false);
        col2im_add(dcols.data(), g, dxn);
      }
    }
  }
}

template <typename T>
BasicTensor<T> transpose_conv2d(const BasicTensor<T>& x, const BasicTensor<T>& weight, const BasicTensor<T>& bias) {
  require_rank(x.shape(), 4, "transpose_conv2d input");
  require_rank(weight.shape(), 4, "transpose_conv2d weight");
  if (weight.dim(2) != 2 || weight.dim(3) != 2)
    throw ArgumentError("transpose_conv2d supports only 2x2 kernels with stride 2, got weight " +
                        to_string(weight.shape()));
  if (weight.dim(0) != x.dim(1))
    throw ShapeError("transpose_conv2d channel mismatch: input " + to_string(x.shape()) + " vs weight " +
                     to_string(weight.shape()));
  const std::size_t n = x.dim(0), cin = x.dim(1), h = x.dim(2), w = x.dim(3), cout = weight.dim(1);
  if (bias.size() != cout) throw ShapeError("transpose_conv2d bias size mismatch");
  const std::size_t hw = h * w, r4 = cout * 4;
  BasicTensor<T> y({n, cout, 2 * h, 2 * w});
  std::vector<T> tmp(r4 * hw);
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t r = 0; r < r4; ++r) std::fill(tmp.begin() + r * hw, tmp.begin() + (r + 1) * hw, bias[r / 4]);
    gemm<T>(r4, hw, cin, MatrixView<T>::transposed(weight.raw(), r4),
            MatrixView<T>::row_major(x.raw() + b * cin * hw, hw), tmp.data(), hw, true);
    for (std::size_t co = 0; co < cout; ++co)
      for (std::size_t d = 0; d < 4; ++d) {
        const T* src = tmp.data() + (co * 4 + d) * hw;
        for (std::size_t i = 0; i < h; ++i)
          for (std::size_t j = 0; j < w; ++j) y.at(b, co, 2 * i + d / 2, 2 * j + d % 2) = src[i * w + j];
      }
  }
  return y;
}

template <typename T>
void transpose_conv2d_backward(const BasicTensor<T>& x, const BasicTensor<T>& weight, const BasicTensor<T>& dy,
                               BasicTensor<T>* dx, BasicTensor<T>* dweight, BasicTensor<T>* dbias) {
  const std::size_t n = x.dim(0), cin = x.dim(1), h = x.dim(2), w = x.dim(3), cout = weight.dim(1);
  const std::size_t hw = h * w, r4 = cout * 4;
  if (dy.shape() != Shape{n, cout, 2 * h, 2 * w})
    throw ShapeError("transpose_conv2d upstream gradient has shape " + to_string(dy.shape()));
  std::vector<T> dtmp(r4 * hw);
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t co = 0; co < cout; ++co)
      for (std::size_t d = 0; d < 4; ++d) {
        T* dst = dtmp.data() + (co * 4 + d) * hw;
        for (std::size_t i = 0; i < h; ++i)
          for (std::size_t j = 0; j < w; ++j) dst[i * w + j] = dy.at(b, co, 2 * i + d / 2, 2 * j + d % 2);
      }
    if (dbias) {
      for (std::size_t co = 0; co < cout; ++co) {
        T acc = (*dbias)[co];
        const std::size_t plane = 4 * hw;
        const T* src = dy.raw() + (b * cout + co) * plane;
        for (std::size_t i = 0; i < plane; ++i) acc += src[i];
        (*dbias)[co] = acc;
      }
    }
    if (dx)
      gemm<T>(cin, hw, r4, MatrixView<T>::row_major(weight.raw(), r4), MatrixView<T>::row_major(dtmp.data(), hw),
              dx->raw() + b * cin * hw, hw, true);
    if (dweight)
      gemm<T>(cin, r4, hw, MatrixView<T>::row_major(x.raw() + b * cin * hw, hw),
              MatrixView<T>::transposed(dtmp.data(), hw), dweight->raw(), r4, true);
  }
}

template <typename T>
BasicTensor<T> maxpool2x2(const BasicTensor<T>& x, std::vector<std::uint32_t>& argmax) {
  require_rank(x.shape(), 4, "maxpool2x2 input");
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (h % 2 || w % 2) throw ArgumentError("maxpool2x2 needs even height and width, got " + to_string(x.shape()));
  BasicTensor<T> y({n, c, h / 2, w / 2});
  argmax.resize(y.size());
  std::size_t o = 0;
  for (std::size_t p = 0; p < n * c; ++p) {
    const std::size_t base = p * h * w;
    for (std::size_t i = 0; i < h / 2; ++i)
      for (std::size_t j = 0; j < w / 2; ++j, ++o) {
        std::size_t best = base + 2 * i * w + 2 * j;
        const std::size_t cand[3] = {best + 1, best + w, best + w + 1};
        for (const std::size_t q : cand)
          if (x[q] > x[best]) best = q;
        y[o] = x[best];
        argmax[o] = static_cast<std::uint32_t>(best);
      }
  }
  return y;
}

template <typename T>
void maxpool2x2_backward(const std::vector<std::uint32_t>& argmax, const BasicTensor<T>& dy, BasicTensor<T>& dx) {
  for (std::size_t o = 0; o < dy.size(); ++o) dx[argmax[o]] += dy[o];
}

template <typename T>
BasicTensor<T> dense(const BasicTensor<T>& x, const BasicTensor<T>& weight, const BasicTensor<T>& bias) {
  if (x.rank() < 2) throw ShapeError("dense input must be batched, got " + to_string(x.shape()));
  const std::size_t n = x.dim(0), d = x.size() / n;
  if (weight.shape() != Shape{d, 1})
    throw ShapeError("dense weight " + to_string(weight.shape()) + " does not match flattened input length " +
                     std::to_string(d));
  if (bias.size() != 1) throw ShapeError("dense bias must hold one value");
  BasicTensor<T> y({n, 1});
  for (std::size_t b = 0; b < n; ++b) {
    const T* row = x.raw() + b * d;
    T acc{0};
    for (std::size_t i = 0; i < d; ++i) acc += weight[i] * row[i];
    y[b] = acc + bias[0];
  }
  return y;
}

template <typename T>
void dense_backward(const BasicTensor<T>& x, const BasicTensor<T>& weight, const BasicTensor<T>& dy,
                    BasicTensor<T>* dx, BasicTensor<T>* dweight, BasicTensor<T>* dbias) {
  const std::size_t n = x.dim(0), d = x.size() / n;
  for (std::size_t b = 0; b < n; ++b) {
    const T g = dy[b];
    const T* row = x.raw() + b * d;
    if (dx) {
      T* drow = dx->raw() + b * d;
      for (std::size_t i = 0; i < d; ++i) drow[i] += g * weight[i];
    }
    if (dweight)
      for (std::size_t i = 0; i < d; ++i) (*dweight)[i] += g * row[i];
    if (dbias) (*dbias)[0] += g;
  }
}

template <typename T>
BasicTensor<T> concat_channels(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_rank(a.shape(), 4, "concat_channels operand");
  require_rank(b.shape(), 4, "concat_channels operand");
  if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3))
    throw ShapeError("concat_channels needs matching N, H, W: " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  const std::size_t n = a.dim(0), ca = a.dim(1), cb = b.dim(1), plane = a.dim(2) * a.dim(3);
  BasicTensor<T> y({n, ca + cb, a.dim(2), a.dim(3)});
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(a.raw() + i * ca * plane, ca * plane, y.raw() + i * (ca + cb) * plane);
    std::copy_n(b.raw() + i * cb * plane, cb * plane, y.raw() + i * (ca + cb) * plane + ca * plane);
  }
  return y;
}

template <typename T>
void concat_channels_backward(const BasicTensor<T>& dy, std::size_t channels_a, BasicTensor<T>* da,
                              BasicTensor<T>* db) {
  const std::size_t n = dy.dim(0), c = dy.dim(1), plane = dy.dim(2) * dy.dim(3), cb = c - channels_a;
  for (std::size_t i = 0; i < n; ++i) {
    const T* src = dy.raw() + i * c * plane;
    if (da) {
      T* dst = da->raw() + i * channels_a * plane;
      for (std::size_t k = 0; k < channels_a * plane; ++k) dst[k] += src[k];
    }
    if (db) {
      T* dst = db->raw() + i * cb * plane;
      for (std::size_t k = 0; k < cb * plane; ++k) dst[k] += src[channels_a * plane + k];
    }
  }
}

template <typename T>
T bce_with_logits(const BasicTensor<T>& logits, const std::vector<int>& labels) {
  if (logits.size() != labels.size())
    throw ShapeError("bce: " + std::to_string(logits.size()) + " logits for " + std::to_string(labels.size()) +
                     " labels");
  T acc{0};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1)
      throw ArgumentError("bce label must be 0 or 1, got " + std::to_string(labels[i]));
    const T t = logits[i];
    acc += std::max(t, T{0}) - t * static_cast<T>(labels[i]) + std::log1p(std::exp(-std::abs(t)));
  }
  return acc / static_cast<T>(labels.size());
}

template <typename T>
T mse(const BasicTensor<T>& pred, const BasicTensor<T>& target) {
  if (pred.shape() != target.shape())
    throw ShapeError("mse shape mismatch: " + to_string(pred.shape()) + " vs " + to_string(target.shape()));
  T acc{0};
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const T d = pred[i] - target[i];
    acc += d * d;
  }
  return acc / static_cast<T>(pred.size());
}

#define EMAP_INSTANTIATE(T)                                                                                        \
  template BasicTensor<T> conv2d(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&,             \
                                 Conv2dOptions);                                                                   \
  template void conv2d_backward(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&,              \
                                Conv2dOptions, BasicTensor<T>*, BasicTensor<T>*, BasicTensor<T>*);                 \
  template BasicTensor<T> transpose_conv2d(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&);  \
  template void transpose_conv2d_backward(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&,    \
                                          BasicTensor<T>*, BasicTensor<T>*, BasicTensor<T>*);                      \
  template BasicTensor<T> maxpool2x2(const BasicTensor<T>&, std::vector<std::uint32_t>&);                         \
  template void maxpool2x2_backward(const std::vector<std::uint32_t>&, const BasicTensor<T>&, BasicTensor<T>&);   \
  template BasicTensor<T> dense(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&);             \
  template void dense_backward(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&,               \
                               BasicTensor<T>*, BasicTensor<T>*, BasicTensor<T>*);                                 \
  template BasicTensor<T> concat_channels(const BasicTensor<T>&, const BasicTensor<T>&);                          \
  template void concat_channels_backward(const BasicTensor<T>&, std::size_t, BasicTensor<T>*, BasicTensor<T>*);   \
  template T bce_with_logits(const BasicTensor<T>&, const std::vector<int>&);                                     \
  template T mse(const BasicTensor<T>&, const BasicTensor<T>&);

EMAP_INSTANTIATE(float)
EMAP_INSTANTIATE(double)
#undef EMAP_INSTANTIATE

}  // namespace emap::kernels
