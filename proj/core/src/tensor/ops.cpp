#include "emap/tensor/ops.hpp"

#include <memory>

namespace emap::ops {
namespace {

template <typename T>
Tape<T>& same_tape(std::initializer_list<Var<T>> vars) {
  Tape<T>* tape = nullptr;
  for (const auto& v : vars) {
    if (!v.valid()) throw StateError("op received an unbound Var");
    if (tape && v.tape() != tape) throw StateError("op operands live on different tapes");
    tape = v.tape();
  }
  return *tape;
}

template <typename T>
bool any_grad(std::initializer_list<Var<T>> vars) {
  for (const auto& v : vars)
    if (v.requires_grad()) return true;
  return false;
}

}  // namespace

template <typename T>
Var<T> conv2d(Var<T> x, Var<T> weight, Var<T> bias, Conv2dOptions opt) {
  Tape<T>& tape = same_tape({x, weight, bias});
  auto y = kernels::conv2d(x.value(), weight.value(), bias.value(), opt);
  const std::size_t ix = x.id(), iw = weight.id(), ib = bias.id();
  return tape.record("conv2d", std::move(y), any_grad({x, weight, bias}), [=](Tape<T>& t, std::size_t self) {
    kernels::conv2d_backward(t.value_of(ix), t.value_of(iw), t.upstream(self), opt, t.grad_sink(ix),
                             t.grad_sink(iw), t.grad_sink(ib));
  });
}

template <typename T>
Var<T> transpose_conv2d(Var<T> x, Var<T> weight, Var<T> bias) {
  Tape<T>& tape = same_tape({x, weight, bias});
  auto y = kernels::transpose_conv2d(x.value(), weight.value(), bias.value());
  const std::size_t ix = x.id(), iw = weight.id(), ib = bias.id();
  return tape.record("transpose_conv2d", std::move(y), any_grad({x, weight, bias}),
                     [=](Tape<T>& t, std::size_t self) {
                       kernels::transpose_conv2d_backward(t.value_of(ix), t.value_of(iw), t.upstream(self),
                                                          t.grad_sink(ix), t.grad_sink(iw), t.grad_sink(ib));
                     });
}

template <typename T>
Var<T> maxpool2x2(Var<T> x) {
  Tape<T>& tape = same_tape({x});
  auto argmax = std::make_shared<std::vector<std::uint32_t>>();
  auto y = kernels::maxpool2x2(x.value(), *argmax);
  const std::size_t ix = x.id();
  return tape.record("maxpool2x2", std::move(y), x.requires_grad(), [=](Tape<T>& t, std::size_t self) {
    if (auto* dx = t.grad_sink(ix)) kernels::maxpool2x2_backward(*argmax, t.upstream(self), *dx);
  });
}

template <typename T>
Var<T> dense(Var<T> x, Var<T> weight, Var<T> bias) {
  Tape<T>& tape = same_tape({x, weight, bias});
  auto y = kernels::dense(x.value(), weight.value(), bias.value());
  const std::size_t ix = x.id(), iw = weight.id(), ib = bias.id();
  return tape.record("dense", std::move(y), any_grad({x, weight, bias}), [=](Tape<T>& t, std::size_t self) {
    kernels::dense_backward(t.value_of(ix), t.value_of(iw), t.upstream(self), t.grad_sink(ix), t.grad_sink(iw),
                            t.grad_sink(ib));
  });
}

template <typename T>
Var<T> relu(Var<T> x) {
  Tape<T>& tape = same_tape({x});
  BasicTensor<T> y = x.value();
  for (auto& v : y.data()) v = v > T{0} ? v : T{0};
  const std::size_t ix = x.id();
  return tape.record("relu", std::move(y), x.requires_grad(), [=](Tape<T>& t, std::size_t self) {
    auto* dx = t.grad_sink(ix);
    if (!dx) return;
    const auto& in = t.value_of(ix);
    const auto& dy = t.upstream(self);
    for (std::size_t i = 0; i < dy.size(); ++i)
      if (in[i] > T{0}) (*dx)[i] += dy[i];
  });
}

template <typename T>
Var<T> sigmoid(Var<T> x) {
  Tape<T>& tape = same_tape({x});
  BasicTensor<T> y = x.value();
  for (auto& v : y.data()) v = kernels::sigmoid(v);
  const std::size_t ix = x.id();
  return tape.record("sigmoid", std::move(y), x.requires_grad(), [=](Tape<T>& t, std::size_t self) {
    auto* dx = t.grad_sink(ix);
    if (!dx) return;
    const auto& s = t.value_of(self);
    const auto& dy = t.upstream(self);
    for (std::size_t i = 0; i < dy.size(); ++i) (*dx)[i] += dy[i] * s[i] * (T{1} - s[i]);
  });
}

template <typename T>
Var<T> concat_channels(Var<T> a, Var<T> b) {
  Tape<T>& tape = same_tape({a, b});
  auto y = kernels::concat_channels(a.value(), b.value());
  const std::size_t ia = a.id(), ib = b.id(), ca = a.value().dim(1);
  return tape.record("concat_channels", std::move(y), any_grad({a, b}), [=](Tape<T>& t, std::size_t self) {
    kernels::concat_channels_backward(t.upstream(self), ca, t.grad_sink(ia), t.grad_sink(ib));
  });
}

template <typename T>
Var<T> sum_per_item(Var<T> x) {
  Tape<T>& tape = same_tape({x});
  const auto& in = x.value();
  if (in.rank() < 2) throw ShapeError("sum_per_item needs a batched tensor, got " + to_string(in.shape()));
  const std::size_t n = in.dim(0), per = in.size() / n;
  BasicTensor<T> y({n, 1});
  for (std::size_t b = 0; b < n; ++b) y[b] = raster_sum<T>(in.data().subspan(b * per, per));
  const std::size_t ix = x.id();
  return tape.record("sum_per_item", std::move(y), x.requires_grad(), [=](Tape<T>& t, std::size_t self) {
    auto* dx = t.grad_sink(ix);
    if (!dx) return;
    const auto& dy = t.upstream(self);
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t i = 0; i < per; ++i) (*dx)[b * per + i] += dy[b];
  });
}

template <typename T>
Var<T> sum_all(Var<T> x) {
  Tape<T>& tape = same_tape({x});
  const std::size_t ix = x.id();
  return tape.record("sum_all", BasicTensor<T>::scalar(raster_sum<T>(x.value().data())), x.requires_grad(),
                     [=](Tape<T>& t, std::size_t self) {
                       auto* dx = t.grad_sink(ix);
                       if (!dx) return;
                       const T g = t.upstream(self)[0];
                       for (auto& v : dx->data()) v += g;
                     });
}

template <typename T>
Var<T> weighted_sum(Var<T> x, const BasicTensor<T>& weights) {
  Tape<T>& tape = same_tape({x});
  if (weights.shape() != x.value().shape())
    throw ShapeError("weighted_sum weight shape " + to_string(weights.shape()) + " vs " + to_string(x.shape()));
  T acc{0};
  for (std::size_t i = 0; i < weights.size(); ++i) acc += x.value()[i] * weights[i];
  const std::size_t ix = x.id();
  return tape.record("weighted_sum", BasicTensor<T>::scalar(acc), x.requires_grad(),
                     [=](Tape<T>& t, std::size_t self) {
                       auto* dx = t.grad_sink(ix);
                       if (!dx) return;
                       const T g = t.upstream(self)[0];
                       for (std::size_t i = 0; i < weights.size(); ++i) (*dx)[i] += g * weights[i];
                     });
}

template <typename T>
Var<T> bce_loss(Var<T> logits, const std::vector<int>& labels) {
  Tape<T>& tape = same_tape({logits});
  const T loss = kernels::bce_with_logits(logits.value(), labels);
  const std::size_t ix = logits.id();
  return tape.record("bce_loss", BasicTensor<T>::scalar(loss), logits.requires_grad(),
                     [=](Tape<T>& t, std::size_t self) {
                       auto* dx = t.grad_sink(ix);
                       if (!dx) return;
                       const T g = t.upstream(self)[0] / static_cast<T>(labels.size());
                       const auto& z = t.value_of(ix);
                       for (std::size_t i = 0; i < labels.size(); ++i)
                         (*dx)[i] += g * (kernels::sigmoid(z[i]) - static_cast<T>(labels[i]));
                     });
}

template <typename T>
Var<T> mse_loss(Var<T> pred, const BasicTensor<T>& target) {
  Tape<T>& tape = same_tape({pred});
  const T loss = kernels::mse(pred.value(), target);
  const std::size_t ix = pred.id();
  return tape.record("mse_loss", BasicTensor<T>::scalar(loss), pred.requires_grad(),
                     [=](Tape<T>& t, std::size_t self) {
                       auto* dx = t.grad_sink(ix);
                       if (!dx) return;
                       const auto& p = t.value_of(ix);
                       const T g = t.upstream(self)[0] * T{2} / static_cast<T>(p.size());
                       for (std::size_t i = 0; i < p.size(); ++i) (*dx)[i] += g * (p[i] - target[i]);
                     });
}

#define EMAP_INSTANTIATE(T)                                                        \
  template Var<T> conv2d(Var<T>, Var<T>, Var<T>, Conv2dOptions);                   \
  template Var<T> transpose_conv2d(Var<T>, Var<T>, Var<T>);                        \
  template Var<T> maxpool2x2(Var<T>);                                              \
  template Var<T> dense(Var<T>, Var<T>, Var<T>);                                   \
  template Var<T> relu(Var<T>);                                                    \
  template Var<T> sigmoid(Var<T>);                                                 \
  template Var<T> concat_channels(Var<T>, Var<T>);                                 \
  template Var<T> sum_per_item(Var<T>);                                            \
  template Var<T> sum_all(Var<T>);                                                 \
  template Var<T> weighted_sum(Var<T>, const BasicTensor<T>&);                     \
  template Var<T> bce_loss(Var<T>, const std::vector<int>&);                       \
  template Var<T> mse_loss(Var<T>, const BasicTensor<T>&);

EMAP_INSTANTIATE(float)
EMAP_INSTANTIATE(double)
#undef EMAP_INSTANTIATE

}  // namespace emap::ops
