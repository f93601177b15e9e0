#pragma once

#include <functional>
#include <string>
#include <vector>

#include "emap/nn/init.hpp"
#include "emap/nn/parameters.hpp"
#include "emap/tensor/ops.hpp"

namespace emap {

/// Conv stack (kernel x kernel, same padding, ReLU) -> one 2x2 max-pool ->
/// dense -> scalar logit t.
struct BlackBoxSpec {
  std::size_t conv_layers = 4;
  std::size_t filters = 32;
  std::size_t kernel = 5;
  std::size_t in_channels = 1;
  std::size_t image_size = 64;

  void validate() const;
  std::size_t dense_inputs() const { return filters * (image_size / 2) * (image_size / 2); }
};

enum class Activation { linear, relu };
std::string to_string(Activation a);
Activation parse_activation(const std::string& text);

/// One Deconv block: ReLU transposed conv (2x2, stride 2) -> concat with the
/// pre-pool encoder activation -> conv_layers ReLU convs -> one-filter
/// penultimate conv with the chosen activation.
struct DecoderSpec {
  std::size_t tconv_filters = 128;
  std::size_t conv_layers = 3;
  std::size_t filters = 128;
  std::size_t kernel = 5;
  Activation penultimate = Activation::linear;

  void validate() const;
};

enum class ModelKind { blackbox, interpretable };
std::string to_string(ModelKind k);
ModelKind parse_model_kind(const std::string& text);

/// Architecture plus parameters. Parameter names: "enc.conv<i>.*" (i from 1),
/// "fc.*" for the black-box head, "dec.tconv.*", "dec.conv<i>.*", "dec.out.*".
struct ModelGraph {
  ModelKind kind = ModelKind::blackbox;
  BlackBoxSpec encoder;
  DecoderSpec decoder;  // meaningful for interpretable models only
  InitScheme init;
  ParameterStore params;

  /// Layers in parameter order, as the initializer sees them.
  std::vector<LayerSpec> layers() const;
};

ModelGraph build_blackbox(const BlackBoxSpec& spec, const InitScheme& init);

/// Interpretable model whose encoder is a frozen copy of the black-box
/// feature extractor; only decoder parameters are trainable.
ModelGraph build_interpretable(const ModelGraph& blackbox, const DecoderSpec& dec, const InitScheme& init);

/// Interpretable model with every parameter randomly initialized and trainable.
ModelGraph build_interpretable_from_scratch(const BlackBoxSpec& enc, const DecoderSpec& dec, const InitScheme& init);

template <typename T>
struct EncoderOutput {
  Var<T> skip;    // last conv activation, before pooling
  Var<T> pooled;  // latent representation
};

template <typename T>
struct InterpretableOutput {
  Var<T> emap;  // (N, 1, S, S)
  Var<T> t;     // (N, 1) raster sums of emap
};

template <typename T>
EncoderOutput<T> encoder_forward(const ModelGraph& m, const BoundParameters<T>& p, Var<T> x);

/// Black-box logit t, (N, 1).
template <typename T>
Var<T> blackbox_forward(const ModelGraph& m, const BoundParameters<T>& p, Var<T> x);

template <typename T>
InterpretableOutput<T> interpretable_forward(const ModelGraph& m, const BoundParameters<T>& p, Var<T> x);

/// Test statistic of either model kind for a batch: (N, 1).
template <typename T>
Var<T> model_statistic(const ModelGraph& m, const BoundParameters<T>& p, Var<T> x);

/// Inference helpers over a whole image tensor (N,1,S,S), processed in batches.
std::vector<float> predict(const ModelGraph& m, const Tensor& images, std::size_t batch_size = 64);
Tensor forward_blackbox(const ModelGraph& m, const Tensor& batch);

struct EmapBatch {
  Tensor emaps;            // (N, 1, S, S)
  std::vector<float> t;    // forward scalar per image
};
EmapBatch compute_emaps(const ModelGraph& m, const Tensor& images, std::size_t batch_size = 64);

/// Encoder latent (N, C, S/2, S/2).
Tensor compute_latent(const ModelGraph& m, const Tensor& images, std::size_t batch_size = 64);

/// Differentiable scalar model on image batches: images (N,1,S,S) -> (N,1).
using ScalarModel = std::function<Var<float>(Tape<float>&, Var<float>)>;

/// t for a black-box, t-hat for an interpretable model; parameters are constants.
ScalarModel scalar_model(const ModelGraph& m);

/// |dt/df| per pixel, (N,1,S,S).
Tensor saliency(const ScalarModel& model, const Tensor& images, std::size_t batch_size = 64);

/// (f - b) * mean_{k=1..steps} dt/df at b + (k/steps)(f - b). Baseline defaults to zeros.
Tensor integrated_gradients(const ScalarModel& model, const Tensor& images, std::size_t steps = 50,
                            const Tensor* baseline = nullptr, std::size_t batch_size = 64);

}  // namespace emap
