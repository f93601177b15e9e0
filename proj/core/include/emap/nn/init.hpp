#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "emap/nn/parameters.hpp"
#include "emap/util/rng.hpp"

namespace emap {

enum class InitKind { glorot_uniform, random_normal, random_uniform };

std::string to_string(InitKind kind);
InitKind parse_init_kind(const std::string& text);

struct InitScheme {
  InitKind kind = InitKind::glorot_uniform;
  std::uint64_t seed = 0;
  double normal_std = 0.05;
  double uniform_limit = 0.05;
};

/// One weighted layer as seen by the initializer. Biases are always zero.
struct LayerSpec {
  std::string name;
  Shape weight_shape;
  Shape bias_shape;
  std::size_t fan_in = 0;
  std::size_t fan_out = 0;
  bool trainable = true;
};

/// Samples a weight tensor under the scheme from the given stream.
Tensor sample_weights(const InitScheme& scheme, const Shape& shape, std::size_t fan_in, std::size_t fan_out, Rng& rng);

/// Builds "<name>.weight" / "<name>.bias" for every layer in order. Each layer
/// draws from its own stream derived from (scheme.seed, layer name).
ParameterStore init_params(const std::vector<LayerSpec>& arch, const InitScheme& scheme);

}  // namespace emap
