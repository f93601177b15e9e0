#include <gtest/gtest.h>

#include <cmath>

#include "emap/models/classifiers.hpp"
#include "emap/tensor/grad_check.hpp"
#include "test_util.hpp"

namespace emap {
namespace {

using testing::random_tensor;

BlackBoxSpec tiny_encoder(std::size_t size = 32) {
  BlackBoxSpec e;
  e.conv_layers = 2;
  e.filters = 4;
  e.kernel = 3;
  e.image_size = size;
  return e;
}

DecoderSpec tiny_decoder() {
  DecoderSpec d;
  d.tconv_filters = 4;
  d.conv_layers = 1;
  d.filters = 4;
  d.kernel = 3;
  return d;
}

Tensor images(std::size_t n, std::size_t size, std::uint64_t seed) {
  return random_tensor<float>({n, 1, size, size}, seed, 0.0, 1.0);
}

void fill_prefix(ParameterStore& store, const std::string& prefix, float v) {
  for (auto& p : store)
    if (p.name.rfind(prefix, 0) == 0) p.value.fill(v);
}

TEST(Classifiers, DefaultDenseInputs) {
  EXPECT_EQ(BlackBoxSpec{}.dense_inputs(), 32768u);
}

// Hand-counted: conv1 1*32*25+32, conv2..4 32*32*25+32, fc 32768+1.
TEST(Classifiers, DefaultBlackBoxParameterCount) {
  const auto m = build_blackbox({}, {InitKind::glorot_uniform, 1});
  EXPECT_EQ(m.params.scalar_count(), 832u + 3u * 25632u + 32769u);
}

// tconv 32*128*4+128, conv1 160*128*25+128, conv2,3 128*128*25+128, out 128*25+1.
TEST(Classifiers, DefaultDecoderParameterCount) {
  const auto bb = build_blackbox({}, {InitKind::glorot_uniform, 1});
  const auto m = build_interpretable(bb, {}, {InitKind::glorot_uniform, 2});
  EXPECT_EQ(m.params.trainable_scalar_count(), 1351297u);
  EXPECT_EQ(m.params.scalar_count() - m.params.trainable_scalar_count(), 77728u);
}

TEST(Classifiers, ZeroWeightsGiveBias) {
  auto m = build_blackbox(tiny_encoder(), {InitKind::glorot_uniform, 3});
  fill_prefix(m.params, "", 0.0f);
  m.params.at("fc.bias").value.fill(0.7f);
  for (const float t : predict(m, images(3, 32, 1))) EXPECT_EQ(t, 0.7f);
}

TEST(Classifiers, EncoderIsFrozenCopy) {
  const auto bb = build_blackbox(tiny_encoder(), {InitKind::glorot_uniform, 4});
  const auto m = build_interpretable(bb, tiny_decoder(), {InitKind::glorot_uniform, 5});
  EXPECT_EQ(m.params.value_bytes("enc."), bb.params.value_bytes("enc."));
  for (const auto& p : m.params) EXPECT_EQ(p.trainable, p.name.rfind("dec.", 0) == 0) << p.name;
  EXPECT_EQ(compute_latent(m, images(2, 32, 2)), compute_latent(bb, images(2, 32, 2)));

  const auto scratch = build_interpretable_from_scratch(tiny_encoder(), tiny_decoder(), {InitKind::glorot_uniform, 5});
  EXPECT_EQ(scratch.params.trainable_scalar_count(), scratch.params.scalar_count());
}

TEST(Classifiers, EmapShapeFollowsImageSize) {
  for (const std::size_t s : {32u, 64u, 128u}) {
    const auto m = build_interpretable_from_scratch(tiny_encoder(s), tiny_decoder(), {InitKind::glorot_uniform, 6});
    const auto out = compute_emaps(m, images(2, s, 3));
    EXPECT_EQ(out.emaps.shape(), (Shape{2, 1, s, s}));
  }
}

TEST(Classifiers, UnityIdentityIsExact) {
  const auto m = build_interpretable_from_scratch(tiny_encoder(), tiny_decoder(), {InitKind::glorot_uniform, 7});
  const Tensor x = images(5, 32, 4);
  const auto out = compute_emaps(m, x, 2);
  const auto t = predict(m, x, 3);
  const std::size_t plane = 32 * 32;
  for (std::size_t i = 0; i < 5; ++i) {
    const float s = raster_sum(std::span<const float>(out.emaps.raw() + i * plane, plane));
    EXPECT_EQ(out.t[i], s);
    EXPECT_EQ(t[i], s);
  }
}

TEST(Classifiers, ReluPenultimateIsNonNegative) {
  DecoderSpec d = tiny_decoder();
  d.penultimate = Activation::relu;
  const auto m = build_interpretable_from_scratch(tiny_encoder(), d, {InitKind::random_normal, 8});
  const auto out = compute_emaps(m, images(3, 32, 5));
  for (const float v : out.emaps.data()) EXPECT_GE(v, 0.0f);
}

TEST(Classifiers, ZeroDecoderGivesZeroEmap) {
  const auto bb = build_blackbox(tiny_encoder(), {InitKind::glorot_uniform, 9});
  auto m = build_interpretable(bb, tiny_decoder(), {InitKind::glorot_uniform, 9});
  fill_prefix(m.params, "dec.", 0.0f);
  const auto out = compute_emaps(m, images(2, 32, 6));
  EXPECT_EQ(out.emaps, Tensor::zeros({2, 1, 32, 32}));
  for (const float t : out.t) EXPECT_EQ(t, 0.0f);
}

TEST(Classifiers, WrongInputShapeRejected) {
  const auto m = build_blackbox(tiny_encoder(), {InitKind::glorot_uniform, 1});
  EXPECT_THROW(predict(m, images(1, 64, 1)), ShapeError);
  EXPECT_THROW(compute_emaps(m, images(1, 32, 1)), ArgumentError);
}

TEST(Classifiers, EndToEndGradientCheck) {
  BlackBoxSpec e = tiny_encoder(8);
  e.filters = 2;
  DecoderSpec d = tiny_decoder();
  d.tconv_filters = 2;
  d.filters = 2;
  const auto m = build_interpretable_from_scratch(e, d, {InitKind::glorot_uniform, 10});
  std::vector<Tensor64> inputs{random_tensor({1, 1, 8, 8}, 11, 0.0, 1.0)};
  // random biases: zero ones put pre-activations exactly on ReLU kinks
  std::uint64_t seed = 20;
  for (const auto& p : m.params)
    inputs.push_back(p.name.ends_with(".bias") ? random_tensor(p.value.shape(), seed++, -0.1, 0.1)
                                                : p.value.cast<double>());
  const GradCheckFn fn = [&m](Tape<double>&, std::span<const Var<double>> in) {
    BoundParameters<double> p{{in.begin() + 1, in.end()}};
    return interpretable_forward(m, p, in[0]).emap;
  };
  EXPECT_LE(grad_check(fn, inputs), 1e-3);
}

// t = sum(w .* x): saliency is |w| and IG from a zero baseline is w .* x.
ScalarModel linear_model(const Tensor& w) {
  return [w](Tape<float>& tape, Var<float> x) {
    return ops::dense(x, tape.constant(w), tape.constant(Tensor::zeros({1})));
  };
}

TEST(Attribution, LinearModelClosedForm) {
  const Tensor w = random_tensor<float>({16 * 16, 1}, 12);
  const Tensor x = images(3, 16, 13);
  const Tensor sal = saliency(linear_model(w), x, 2);
  const Tensor ig = integrated_gradients(linear_model(w), x, 7, nullptr, 2);
  for (std::size_t n = 0; n < 3; ++n)
    for (std::size_t k = 0; k < 256; ++k) {
      EXPECT_EQ(sal[n * 256 + k], std::abs(w[k]));
      EXPECT_NEAR(ig[n * 256 + k], w[k] * x[n * 256 + k], 1e-6);
    }
}

TEST(Attribution, ConstantModelGivesZeroMaps) {
  const Tensor x = images(2, 16, 14);
  const ScalarModel constant = linear_model(Tensor::zeros({256, 1}));
  EXPECT_EQ(saliency(constant, x), Tensor::zeros(x.shape()));
  EXPECT_EQ(integrated_gradients(constant, x), Tensor::zeros(x.shape()));
}

ScalarModel smooth_model() {
  const Tensor w = random_tensor<float>({2, 1, 3, 3}, 15);
  const Tensor b = random_tensor<float>({2}, 16);
  return [w, b](Tape<float>& tape, Var<float> x) {
    return ops::sum_per_item(ops::sigmoid(ops::conv2d(x, tape.constant(w), tape.constant(b))));
  };
}

double statistic(const ScalarModel& model, const Tensor& x) {
  Tape<float> tape(GradMode::inference);
  return model(tape, tape.constant(x)).value()[0];
}

TEST(Attribution, IntegratedGradientsCompleteness) {
  const ScalarModel model = smooth_model();
  const Tensor x = images(1, 8, 17);
  const double delta = statistic(model, x) - statistic(model, Tensor::zeros(x.shape()));
  const Tensor ig200 = integrated_gradients(model, x, 200);
  const Tensor ig2000 = integrated_gradients(model, x, 2000);
  double total200 = 0.0, total2000 = 0.0;
  for (const float v : ig200.data()) total200 += v;
  for (const float v : ig2000.data()) total2000 += v;
  EXPECT_NEAR(total200 / delta, 1.0, 0.02);
  EXPECT_NEAR(total2000 / delta, 1.0, 0.002);
  EXPECT_NEAR(total200 / total2000, 1.0, 0.02);
}

TEST(Attribution, BaselineShapeMustMatch) {
  const Tensor x = images(1, 8, 18);
  const Tensor b = Tensor::zeros({1, 1, 4, 4});
  EXPECT_THROW(integrated_gradients(smooth_model(), x, 10, &b), ShapeError);
  EXPECT_THROW(integrated_gradients(smooth_model(), x, 0), ArgumentError);
}

}  // namespace
}  // namespace emap
