#include "emap/nn/init.hpp"

#include <cmath>

namespace emap {

std::string to_string(InitKind kind) {
  switch (kind) {
    case InitKind::glorot_uniform: return "glorot_uniform";
    case InitKind::random_normal: return "random_normal";
    case InitKind::random_uniform: return "random_uniform";
  }
  return "?";
}

InitKind parse_init_kind(const std::string& text) {
  if (text == "glorot_uniform") return InitKind::glorot_uniform;
  if (text == "random_normal") return InitKind::random_normal;
  if (text == "random_uniform") return InitKind::random_uniform;
  throw ArgumentError("unknown init scheme '" + text + "' (expected glorot_uniform, random_normal, random_uniform)");
}

Tensor sample_weights(const InitScheme& scheme, const Shape& shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  Tensor w(shape);
  switch (scheme.kind) {
    case InitKind::glorot_uniform: {
      if (fan_in + fan_out == 0) throw ShapeError("glorot_uniform needs fan_in + fan_out > 0");
      const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
      for (auto& v : w.data()) v = static_cast<float>(rng.uniform(-limit, limit));
      break;
    }
    case InitKind::random_normal:
      for (auto& v : w.data()) v = static_cast<float>(rng.normal(0.0, scheme.normal_std));
      break;
    case InitKind::random_uniform:
      for (auto& v : w.data()) v = static_cast<float>(rng.uniform(-scheme.uniform_limit, scheme.uniform_limit));
      break;
  }
  return w;
}

ParameterStore init_params(const std::vector<LayerSpec>& arch, const InitScheme& scheme) {
  ParameterStore store;
  for (const auto& layer : arch) {
    if (layer.weight_shape.empty() || numel(layer.weight_shape) == 0 || layer.bias_shape.empty())
      throw ShapeError("layer '" + layer.name + "' has an unresolved shape");
    Rng rng(derive_seed(scheme.seed, "init/" + layer.name));
    store.add(layer.name + ".weight", sample_weights(scheme, layer.weight_shape, layer.fan_in, layer.fan_out, rng),
              layer.trainable);
    store.add(layer.name + ".bias", Tensor::zeros(layer.bias_shape), layer.trainable);
  }
  return store;
}

}  // namespace emap
