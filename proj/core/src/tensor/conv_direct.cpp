#include "conv_direct.hpp"

#include <algorithm>
#include <cstring>
#include <vector>

namespace emap::kernels::direct {
namespace {

typedef float vf16 __attribute__((vector_size(64)));

inline vf16 load16(const float* p) {
  vf16 v;
  std::memcpy(&v, p, sizeof(v));
  return v;
}
inline void store16(float* p, vf16 v) { std::memcpy(p, &v, sizeof(v)); }

inline float lane_sum(vf16 v) {
  float s = 0.0f;
  for (int i = 0; i < 16; ++i) s += v[i];
  return s;
}

struct Padded {
  std::size_t hp, wp;
  std::vector<float> data;
  std::vector<std::size_t> offsets;  // per k = (ci, dy, dx)
};

void pad_input(const Geometry& g, const float* x, Padded& p) {
  const std::size_t ph = g.kh / 2, pw = g.kw / 2;
  p.hp = g.h + 2 * ph;
  p.wp = g.w + 2 * pw;
  p.data.assign(g.cin * p.hp * p.wp, 0.0f);
  for (std::size_t c = 0; c < g.cin; ++c)
    for (std::size_t i = 0; i < g.h; ++i)
      std::memcpy(p.data.data() + (c * p.hp + i + ph) * p.wp + pw, x + (c * g.h + i) * g.w, g.w * sizeof(float));
  p.offsets.resize(g.cin * g.kh * g.kw);
  std::size_t k = 0;
  for (std::size_t c = 0; c < g.cin; ++c)
    for (std::size_t dy = 0; dy < g.kh; ++dy)
      for (std::size_t dx = 0; dx < g.kw; ++dx) p.offsets[k++] = (c * p.hp + dy) * p.wp + dx;
}

// MR output channels x 32 consecutive pixels of one output row.
template <int MR>
void forward_tile(std::size_t K, const std::size_t* off, const float* xbase, const float* wt, std::size_t ldw,
                  const float* bias, float* y, std::size_t ystride, bool accumulate) {
  vf16 c0[MR];
  vf16 c1[MR];
  for (int r = 0; r < MR; ++r) {
    if (accumulate) {
      c0[r] = load16(y + r * ystride);
      c1[r] = load16(y + r * ystride + 16);
    } else {
      const vf16 b = vf16{} + bias[r];
      c0[r] = b;
      c1[r] = b;
    }
  }
  for (std::size_t k = 0; k < K; ++k) {
    const float* xp = xbase + off[k];
    const vf16 b0 = load16(xp);
    const vf16 b1 = load16(xp + 16);
    const float* a = wt + k * ldw;
    for (int r = 0; r < MR; ++r) {
      c0[r] += a[r] * b0;
      c1[r] += a[r] * b1;
    }
  }
  for (int r = 0; r < MR; ++r) {
    store16(y + r * ystride, c0[r]);
    store16(y + r * ystride + 16, c1[r]);
  }
}

using ForwardTile = void (*)(std::size_t, const std::size_t*, const float*, const float*, std::size_t,
                             const float*, float*, std::size_t, bool);
constexpr ForwardTile kForwardTiles[9] = {nullptr,         forward_tile<1>, forward_tile<2>,
                                          forward_tile<3>, forward_tile<4>, forward_tile<5>,
                                          forward_tile<6>, forward_tile<7>, forward_tile<8>};

// R output channels x S kernel taps, partial sums kept per lane over 16-pixel chunks.
template <int R, int S>
void weight_tile(const Geometry& g, std::size_t wp, const float* dy, const float* xp, const std::size_t* off,
                 float* dw, std::size_t ldw) {
  vf16 acc[R][S];
  for (int r = 0; r < R; ++r)
    for (int s = 0; s < S; ++s) acc[r][s] = vf16{};
  const std::size_t plane = g.h * g.w;
  for (std::size_t oh = 0; oh < g.h; ++oh) {
    for (std::size_t ow = 0; ow < g.w; ow += 16) {
      vf16 d[R];
      for (int r = 0; r < R; ++r) d[r] = load16(dy + r * plane + oh * g.w + ow);
      const std::size_t base = oh * wp + ow;
      for (int s = 0; s < S; ++s) {
        const vf16 xv = load16(xp + off[s] + base);
        for (int r = 0; r < R; ++r) acc[r][s] += d[r] * xv;
      }
    }
  }
  for (int r = 0; r < R; ++r)
    for (int s = 0; s < S; ++s) dw[r * ldw + s] += lane_sum(acc[r][s]);
}

using WeightTile = void (*)(const Geometry&, std::size_t, const float*, const float*, const std::size_t*, float*,
                            std::size_t);
constexpr WeightTile kWeightTiles[5][5] = {
    {nullptr, nullptr, nullptr, nullptr, nullptr},
    {nullptr, weight_tile<1, 1>, weight_tile<1, 2>, weight_tile<1, 3>, weight_tile<1, 4>},
    {nullptr, weight_tile<2, 1>, weight_tile<2, 2>, weight_tile<2, 3>, weight_tile<2, 4>},
    {nullptr, weight_tile<3, 1>, weight_tile<3, 2>, weight_tile<3, 3>, weight_tile<3, 4>},
    {nullptr, weight_tile<4, 1>, weight_tile<4, 2>, weight_tile<4, 3>, weight_tile<4, 4>},
};

}  // namespace

bool supported(const Geometry& g) {
  return g.kh % 2 == 1 && g.kw % 2 == 1 && g.w % 32 == 0 && g.h > 0 && g.cin > 0 && g.cout > 0;
}

void forward(const Geometry& g, const float* x, const float* weight, const float* bias, float* y, bool accumulate) {
  thread_local Padded pad;
  thread_local std::vector<float> wt;
  pad_input(g, x, pad);
  const std::size_t K = g.cin * g.kh * g.kw;
  wt.resize(K * g.cout);
  for (std::size_t co = 0; co < g.cout; ++co)
    for (std::size_t k = 0; k < K; ++k) wt[k * g.cout + co] = weight[co * K + k];
  const std::size_t plane = g.h * g.w;
  for (std::size_t oh = 0; oh < g.h; ++oh) {
    for (std::size_t ow = 0; ow < g.w; ow += 32) {
      const float* xbase = pad.data.data() + oh * pad.wp + ow;
      for (std::size_t co = 0; co < g.cout; co += 8) {
        const std::size_t mr = std::min<std::size_t>(8, g.cout - co);
        kForwardTiles[mr](K, pad.offsets.data(), xbase, wt.data() + co, g.cout, bias ? bias + co : nullptr,
                          y + co * plane + oh * g.w + ow, plane, accumulate);
      }
    }
  }
}

void weight_grad(const Geometry& g, const float* x, const float* dy, float* dweight) {
  thread_local Padded pad;
  pad_input(g, x, pad);
  const std::size_t K = g.cin * g.kh * g.kw;
  const std::size_t plane = g.h * g.w;
  for (std::size_t co = 0; co < g.cout; co += 4) {
    const std::size_t r = std::min<std::size_t>(4, g.cout - co);
    for (std::size_t k = 0; k < K; k += 4) {
      const std::size_t s = std::min<std::size_t>(4, K - k);
      kWeightTiles[r][s](g, pad.wp, dy + co * plane, pad.data.data(), pad.offsets.data() + k, dweight + co * K + k,
                         K);
    }
  }
}

void input_grad(const Geometry& g, const float* weight, const float* dy, float* dx) {
  thread_local std::vector<float> flipped;
  const std::size_t kk = g.kh * g.kw;
  flipped.resize(g.cin * g.cout * kk);
  // flipped[ci, co, a, b] = weight[co, ci, kh-1-a, kw-1-b]
  for (std::size_t ci = 0; ci < g.cin; ++ci)
    for (std::size_t co = 0; co < g.cout; ++co)
      for (std::size_t a = 0; a < g.kh; ++a)
        for (std::size_t b = 0; b < g.kw; ++b)
          flipped[((ci * g.cout + co) * g.kh + a) * g.kw + b] =
              weight[((co * g.cin + ci) * g.kh + (g.kh - 1 - a)) * g.kw + (g.kw - 1 - b)];
  const Geometry t{g.cout, g.cin, g.h, g.w, g.kh, g.kw};
  forward(t, dy, flipped.data(), nullptr, dx, true);
}

}  // namespace emap::kernels::direct
