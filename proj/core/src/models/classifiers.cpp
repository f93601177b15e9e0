#include "emap/models/classifiers.hpp"

#include <algorithm>
#include <cmath>

namespace emap {
namespace {

template <typename T>
Var<T> param(const ModelGraph& m, const BoundParameters<T>& p, const std::string& name) {
  return p[m.params.index_of(name)];
}

std::string enc_conv(std::size_t i) { return "enc.conv" + std::to_string(i); }
std::string dec_conv(std::size_t i) { return "dec.conv" + std::to_string(i); }

LayerSpec conv_layer(std::string name, std::size_t cout, std::size_t cin, std::size_t k, bool trainable) {
  return LayerSpec{std::move(name), {cout, cin, k, k}, {cout}, cin * k * k, cout * k * k, trainable};
}

std::vector<LayerSpec> encoder_layers(const BlackBoxSpec& e, bool trainable) {
  std::vector<LayerSpec> out;
  for (std::size_t i = 1; i <= e.conv_layers; ++i)
    out.push_back(conv_layer(enc_conv(i), e.filters, i == 1 ? e.in_channels : e.filters, e.kernel, trainable));
  return out;
}

std::vector<LayerSpec> decoder_layers(const BlackBoxSpec& e, const DecoderSpec& d) {
  std::vector<LayerSpec> out;
  out.push_back(LayerSpec{"dec.tconv", {e.filters, d.tconv_filters, 2, 2}, {d.tconv_filters}, e.filters * 4,
                          d.tconv_filters * 4, true});
  std::size_t cin = d.tconv_filters + e.filters;
  for (std::size_t i = 1; i <= d.conv_layers; ++i) {
    out.push_back(conv_layer(dec_conv(i), d.filters, cin, d.kernel, true));
    cin = d.filters;
  }
  out.push_back(conv_layer("dec.out", 1, cin, d.kernel, true));
  return out;
}

void check_images(const ModelGraph& m, const Shape& s) {
  const auto& e = m.encoder;
  if (s.size() != 4 || s[1] != e.in_channels || s[2] != e.image_size || s[3] != e.image_size)
    throw ShapeError("model expects images (N, " + std::to_string(e.in_channels) + ", " +
                     std::to_string(e.image_size) + ", " + std::to_string(e.image_size) + "), got " + to_string(s));
}

}  // namespace

void BlackBoxSpec::validate() const {
  if (conv_layers == 0) throw ArgumentError("blackbox.conv_layers must be >= 1");
  if (filters == 0) throw ArgumentError("blackbox.filters must be >= 1");
  if (kernel % 2 == 0) throw ArgumentError("blackbox.kernel must be odd");
  if (in_channels == 0) throw ArgumentError("blackbox.in_channels must be >= 1");
  if (image_size < 2 || image_size % 2 != 0) throw ArgumentError("image size must be even for the max-pool");
}

void DecoderSpec::validate() const {
  if (tconv_filters == 0) throw ArgumentError("decoder.tconv_filters must be >= 1");
  if (filters == 0) throw ArgumentError("decoder.filters must be >= 1");
  if (kernel % 2 == 0) throw ArgumentError("decoder.kernel must be odd");
}

std::string to_string(Activation a) { return a == Activation::linear ? "linear" : "relu"; }

Activation parse_activation(const std::string& text) {
  if (text == "linear") return Activation::linear;
  if (text == "relu") return Activation::relu;
  throw ArgumentError("unknown activation '" + text + "' (expected linear or relu)");
}

std::string to_string(ModelKind k) { return k == ModelKind::blackbox ? "blackbox" : "interpretable"; }

ModelKind parse_model_kind(const std::string& text) {
  if (text == "blackbox") return ModelKind::blackbox;
  if (text == "interpretable") return ModelKind::interpretable;
  throw ArgumentError("unknown model kind '" + text + "'");
}

std::vector<LayerSpec> ModelGraph::layers() const {
  if (kind == ModelKind::blackbox) {
    auto out = encoder_layers(encoder, true);
    out.push_back(LayerSpec{"fc", {encoder.dense_inputs(), 1}, {1}, encoder.dense_inputs(), 1, true});
    return out;
  }
  auto out = encoder_layers(encoder, false);
  for (auto& l : decoder_layers(encoder, decoder)) out.push_back(std::move(l));
  return out;
}

ModelGraph build_blackbox(const BlackBoxSpec& spec, const InitScheme& init) {
  spec.validate();
  ModelGraph m;
  m.kind = ModelKind::blackbox;
  m.encoder = spec;
  m.init = init;
  m.params = init_params(m.layers(), init);
  return m;
}

ModelGraph build_interpretable(const ModelGraph& blackbox, const DecoderSpec& dec, const InitScheme& init) {
  if (blackbox.kind != ModelKind::blackbox) throw ArgumentError("build_interpretable needs a black-box model");
  dec.validate();
  ModelGraph m;
  m.kind = ModelKind::interpretable;
  m.encoder = blackbox.encoder;
  m.decoder = dec;
  m.init = init;
  for (const auto& p : blackbox.params)
    if (p.name.rfind("enc.", 0) == 0) m.params.add(p.name, p.value, false);
  const ParameterStore dec_params = init_params(decoder_layers(m.encoder, dec), init);
  for (const auto& p : dec_params) m.params.add(p.name, p.value, true);
  return m;
}

ModelGraph build_interpretable_from_scratch(const BlackBoxSpec& enc, const DecoderSpec& dec, const InitScheme& init) {
  enc.validate();
  dec.validate();
  ModelGraph m;
  m.kind = ModelKind::interpretable;
  m.encoder = enc;
  m.decoder = dec;
  m.init = init;
  m.params = init_params(m.layers(), init);
  m.params.set_trainable("enc.", true);
  return m;
}

template <typename T>
EncoderOutput<T> encoder_forward(const ModelGraph& m, const BoundParameters<T>& p, Var<T> x) {
  check_images(m, x.shape());
  Var<T> h = x;
  for (std::size_t i = 1; i <= m.encoder.conv_layers; ++i) {
    const std::string n = enc_conv(i);
    h = ops::relu(ops::conv2d(h, param(m, p, n + ".weight"), param(m, p, n + ".bias")));
  }
  return {h, ops::maxpool2x2(h)};
}

template <typename T>
Var<T> blackbox_forward(const ModelGraph& m, const BoundParameters<T>& p, Var<T> x) {
  if (m.kind != ModelKind::blackbox) throw ArgumentError("blackbox_forward on an interpretable model");
  const auto enc = encoder_forward(m, p, x);
  return ops::dense(enc.pooled, param(m, p, "fc.weight"), param(m, p, "fc.bias"));
}

template <typename T>
InterpretableOutput<T> interpretable_forward(const ModelGraph& m, const BoundParameters<T>& p, Var<T> x) {
  if (m.kind != ModelKind::interpretable) throw ArgumentError("interpretable_forward on a black-box model");
  const auto enc = encoder_forward(m, p, x);
  Var<T> u = ops::relu(ops::transpose_conv2d(enc.pooled, param(m, p, "dec.tconv.weight"), param(m, p, "dec.tconv.bias")));
  Var<T> h = ops::concat_channels(u, enc.skip);
  for (std::size_t i = 1; i <= m.decoder.conv_layers; ++i) {
    const std::string n = dec_conv(i);
    h = ops::relu(ops::conv2d(h, param(m, p, n + ".weight"), param(m, p, n + ".bias")));
  }
  Var<T> emap = ops::conv2d(h, param(m, p, "dec.out.weight"), param(m, p, "dec.out.bias"));
  if (m.decoder.penultimate == Activation::relu) emap = ops::relu(emap);
  return {emap, ops::sum_per_item(emap)};
}

template <typename T>
Var<T> model_statistic(const ModelGraph& m, const BoundParameters<T>& p, Var<T> x) {
  return m.kind == ModelKind::blackbox ? blackbox_forward(m, p, x) : interpretable_forward(m, p, x).t;
}

std::vector<float> predict(const ModelGraph& m, const Tensor& images, std::size_t batch_size) {
  check_images(m, images.shape());
  std::vector<float> out;
  out.reserve(images.dim(0));
  for (std::size_t first = 0; first < images.dim(0); first += batch_size) {
    const std::size_t n = std::min(batch_size, images.dim(0) - first);
    Tape<float> tape(GradMode::inference);
    const auto p = bind(m.params, tape, false);
    const auto t = model_statistic(m, p, tape.constant(images.slice_batch(first, n)));
    out.insert(out.end(), t.value().data().begin(), t.value().data().end());
  }
  return out;
}

Tensor forward_blackbox(const ModelGraph& m, const Tensor& batch) {
  Tape<float> tape(GradMode::inference);
  const auto p = bind(m.params, tape, false);
  return blackbox_forward(m, p, tape.constant(batch)).value();
}

EmapBatch compute_emaps(const ModelGraph& m, const Tensor& images, std::size_t batch_size) {
  check_images(m, images.shape());
  const std::size_t N = images.dim(0), S = m.encoder.image_size;
  EmapBatch r{Tensor({N, 1, S, S}), {}};
  r.t.reserve(N);
  for (std::size_t first = 0; first < N; first += batch_size) {
    const std::size_t n = std::min(batch_size, N - first);
    Tape<float> tape(GradMode::inference);
    const auto p = bind(m.params, tape, false);
    const auto out = interpretable_forward(m, p, tape.constant(images.slice_batch(first, n)));
    std::copy(out.emap.value().raw(), out.emap.value().raw() + n * S * S, r.emaps.raw() + first * S * S);
    r.t.insert(r.t.end(), out.t.value().data().begin(), out.t.value().data().end());
  }
  return r;
}

Tensor compute_latent(const ModelGraph& m, const Tensor& images, std::size_t batch_size) {
  check_images(m, images.shape());
  const std::size_t N = images.dim(0), h = m.encoder.image_size / 2, C = m.encoder.filters;
  Tensor out({N, C, h, h});
  const std::size_t per = C * h * h;
  for (std::size_t first = 0; first < N; first += batch_size) {
    const std::size_t n = std::min(batch_size, N - first);
    Tape<float> tape(GradMode::inference);
    const auto p = bind(m.params, tape, false);
    const auto enc = encoder_forward(m, p, tape.constant(images.slice_batch(first, n)));
    std::copy(enc.pooled.value().raw(), enc.pooled.value().raw() + n * per, out.raw() + first * per);
  }
  return out;
}

ScalarModel scalar_model(const ModelGraph& m) {
  return [&m](Tape<float>& tape, Var<float> x) {
    const auto p = bind(m.params, tape, false);
    return model_statistic(m, p, x);
  };
}

namespace {

// d(sum_n t_n)/d(images); each t_n depends only on image n.
Tensor input_gradient(const ScalarModel& model, const Tensor& batch) {
  Tape<float> tape;
  auto x = tape.leaf(batch, true);
  auto t = model(tape, x);
  if (t.value().size() != batch.dim(0)) throw ShapeError("scalar model must return one value per image");
  tape.backward(t, Tensor::ones(t.shape()));
  return tape.grad(x);
}

}  // namespace

Tensor saliency(const ScalarModel& model, const Tensor& images, std::size_t batch_size) {
  Tensor out(images.shape());
  const std::size_t N = images.dim(0), per = images.size() / N;
  for (std::size_t first = 0; first < N; first += batch_size) {
    const std::size_t n = std::min(batch_size, N - first);
    const Tensor g = input_gradient(model, images.slice_batch(first, n));
    for (std::size_t i = 0; i < g.size(); ++i) out[first * per + i] = std::abs(g[i]);
  }
  return out;
}

Tensor integrated_gradients(const ScalarModel& model, const Tensor& images, std::size_t steps,
                            const Tensor* baseline, std::size_t batch_size) {
  if (steps < 1) throw ArgumentError("integrated_gradients needs steps >= 1");
  const Tensor zero = Tensor::zeros(images.shape());
  const Tensor& base = baseline ? *baseline : zero;
  if (base.shape() != images.shape()) throw ShapeError("baseline shape must match the images");
  Tensor out(images.shape());
  const std::size_t N = images.dim(0), per = images.size() / N;
  for (std::size_t first = 0; first < N; first += batch_size) {
    const std::size_t n = std::min(batch_size, N - first);
    const Tensor f = images.slice_batch(first, n);
    const Tensor b = base.slice_batch(first, n);
    std::vector<double> acc(f.size(), 0.0);
    Tensor point(f.shape());
    for (std::size_t k = 1; k <= steps; ++k) {
      const double alpha = static_cast<double>(k) / static_cast<double>(steps);
      for (std::size_t i = 0; i < f.size(); ++i)
        point[i] = static_cast<float>(b[i] + alpha * (static_cast<double>(f[i]) - b[i]));
      const Tensor g = input_gradient(model, point);
      for (std::size_t i = 0; i < g.size(); ++i) acc[i] += g[i];
    }
    for (std::size_t i = 0; i < f.size(); ++i)
      out[first * per + i] =
          static_cast<float>((static_cast<double>(f[i]) - b[i]) * acc[i] / static_cast<double>(steps));
  }
  return out;
}

#define EMAP_INSTANTIATE(T)                                                                             \
  template EncoderOutput<T> encoder_forward(const ModelGraph&, const BoundParameters<T>&, Var<T>);      \
  template Var<T> blackbox_forward(const ModelGraph&, const BoundParameters<T>&, Var<T>);               \
  template InterpretableOutput<T> interpretable_forward(const ModelGraph&, const BoundParameters<T>&,   \
                                                        Var<T>);                                        \
  template Var<T> model_statistic(const ModelGraph&, const BoundParameters<T>&, Var<T>);

EMAP_INSTANTIATE(float)
EMAP_INSTANTIATE(double)
#undef EMAP_INSTANTIATE

}  // namespace emap
