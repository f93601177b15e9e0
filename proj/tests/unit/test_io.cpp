#include <gtest/gtest.h>

#include <cstring>
#include <fstream>

#include "emap/data/image_io.hpp"
#include "emap/io/checkpoint.hpp"
#include "emap/io/config.hpp"
#include "emap/io/export.hpp"
#include "emap/tensor/f32t.hpp"
#include "test_util.hpp"

namespace emap {
namespace {

using testing::ScratchDir;

ModelGraph small_interpretable(std::uint64_t seed) {
  BlackBoxSpec e;
  e.conv_layers = 2;
  e.filters = 3;
  e.kernel = 3;
  e.image_size = 32;
  DecoderSpec d;
  d.tconv_filters = 5;
  d.conv_layers = 2;
  d.filters = 4;
  d.kernel = 3;
  d.penultimate = Activation::relu;
  const auto bb = build_blackbox(e, {InitKind::random_normal, seed});
  return build_interpretable(bb, d, {InitKind::random_uniform, seed + 1});
}

CheckpointMeta sample_meta() {
  CheckpointMeta m;
  m.train = TrainConfig{};
  m.train->lr = 1.5e-4;
  m.dataset_hash = 0x0123456789abcdefULL;
  m.seeds = {{"data", 1}, {"decoder/init", 42}};
  m.epoch = 17;
  return m;
}

std::string header_of(const std::vector<std::uint8_t>& bytes) {
  const std::uint32_t len = get_u32_le(bytes.data() + 5);
  return std::string(bytes.begin() + 9, bytes.begin() + 9 + len);
}

// Recomputes the trailing checksum after an intentional edit.
void reseal(std::vector<std::uint8_t>& bytes) {
  const std::size_t body = bytes.size() - 4;
  const std::uint32_t c = crc32(bytes.data(), body);
  bytes.resize(body);
  put_u32_le(bytes, c);
}

void replace_in_header(std::vector<std::uint8_t>& bytes, const std::string& from, const std::string& to) {
  ASSERT_EQ(from.size(), to.size());
  const std::string h = header_of(bytes);
  const auto at = h.find(from);
  ASSERT_NE(at, std::string::npos) << from;
  std::memcpy(bytes.data() + 9 + at, to.data(), to.size());
  reseal(bytes);
}

template <typename F>
std::string io_error(F&& f) {
  try {
    f();
  } catch (const IoError& e) {
    return e.what();
  }
  return "no IoError";
}

TEST(Checkpoint, RoundTripReproducesOutputsBitForBit) {
  ScratchDir dir("ckpt_roundtrip");
  auto m = small_interpretable(5);
  m.params.set_adam_steps(123);
  const CheckpointMeta meta = sample_meta();
  save_checkpoint(m, meta, dir / "m.ckpt");
  const Checkpoint c = load_checkpoint(dir / "m.ckpt");

  EXPECT_EQ(c.model.kind, ModelKind::interpretable);
  EXPECT_EQ(c.model.params.value_bytes(), m.params.value_bytes());
  EXPECT_EQ(c.model.params.adam_steps(), 123u);
  for (std::size_t i = 0; i < m.params.size(); ++i) {
    EXPECT_EQ(c.model.params[i].name, m.params[i].name);
    EXPECT_EQ(c.model.params[i].trainable, m.params[i].trainable);
  }
  EXPECT_EQ(c.meta.dataset_hash, meta.dataset_hash);
  EXPECT_EQ(c.meta.seeds, meta.seeds);
  EXPECT_EQ(c.meta.epoch, 17u);
  ASSERT_TRUE(c.meta.train.has_value());
  EXPECT_EQ(c.meta.train->lr, 1.5e-4);

  const Tensor probes = testing::random_tensor<float>({4, 1, 32, 32}, 8, 0.0, 1.0);
  const EmapBatch a = compute_emaps(m, probes), b = compute_emaps(c.model, probes);
  EXPECT_EQ(a.emaps, b.emaps);
  EXPECT_EQ(a.t, b.t);
  EXPECT_EQ(encode_checkpoint(c.model, c.meta), encode_checkpoint(m, meta));
}

TEST(Checkpoint, BlackBoxRoundTrip) {
  BlackBoxSpec e;
  e.conv_layers = 1;
  e.filters = 2;
  e.kernel = 3;
  e.image_size = 16;
  const auto bb = build_blackbox(e, {InitKind::glorot_uniform, 3});
  const Checkpoint c = decode_checkpoint(encode_checkpoint(bb, {}));
  EXPECT_EQ(c.model.kind, ModelKind::blackbox);
  EXPECT_FALSE(c.meta.train.has_value());
  const Tensor x = testing::random_tensor<float>({2, 1, 16, 16}, 1, 0.0, 1.0);
  EXPECT_EQ(predict(bb, x), predict(c.model, x));
}

TEST(Checkpoint, HeaderRecordsInitAndNoTimestamps) {
  const std::string h = header_of(encode_checkpoint(small_interpretable(5), sample_meta()));
  EXPECT_NE(h.find("\"kind\":\"random_uniform\""), std::string::npos) << h;
  EXPECT_NE(h.find("\"timestamps\":null"), std::string::npos);
  EXPECT_NE(h.find("0123456789abcdef"), std::string::npos);
}

TEST(Checkpoint, CorruptionIsDetected) {
  const auto good = encode_checkpoint(small_interpretable(5), sample_meta());

  auto truncated = good;
  truncated.resize(good.size() - 10);
  EXPECT_NE(io_error([&] { decode_checkpoint(truncated); }).find("crc"), std::string::npos);

  auto flipped = good;
  flipped[good.size() / 2] ^= 0x10;
  EXPECT_NE(io_error([&] { decode_checkpoint(flipped, "x.ckpt"); }).find("checkpoint x.ckpt: crc: checksum mismatch"),
            std::string::npos);

  auto magic = good;
  magic[0] = 'X';
  EXPECT_NE(io_error([&] { decode_checkpoint(magic); }).find("magic"), std::string::npos);

  auto version = good;
  version[4] = 9;
  reseal(version);
  EXPECT_NE(io_error([&] { decode_checkpoint(version); }).find("version: unsupported version 9"), std::string::npos);
}

TEST(Checkpoint, ManifestMustMatchArchitecture) {
  const auto good = encode_checkpoint(small_interpretable(5), sample_meta());

  auto renamed = good;
  replace_in_header(renamed, "\"dec.conv1.weight\"", "\"dec.conv9.weight\"");
  EXPECT_NE(io_error([&] { decode_checkpoint(renamed); }).find("'dec.conv9.weight' where 'dec.conv1.weight' belongs"),
            std::string::npos);

  auto wrong_kind = good;
  replace_in_header(wrong_kind, "\"kind\":\"random_uniform\"", "\"kind\":\"random_uniforn\"");
  EXPECT_NE(io_error([&] { decode_checkpoint(wrong_kind); }).find("init.kind"), std::string::npos);

  auto bad_json = good;
  bad_json[9] = '[';
  reseal(bad_json);
  EXPECT_NE(io_error([&] { decode_checkpoint(bad_json); }).find("header"), std::string::npos);
}

TEST(Config, DefaultsAndOverrides) {
  const RunConfig d = parse_run_config("");
  EXPECT_EQ(d.data.image_size, 64u);
  EXPECT_EQ(d.blackbox.filters, 32u);
  EXPECT_EQ(d.decoder.filters, 128u);
  EXPECT_EQ(d.distill_lr, 3e-5);
  EXPECT_EQ(d.distill_max_epochs, 200u);
  EXPECT_EQ(d.top_fraction, 0.01);

  const RunConfig c = parse_run_config(
      "[data]\nimage_size = 32\n[train]\ndistill_lr = 1e-3\ndistill_max_epochs = 40\nrestore_best = false\n"
      "[experiment]\nseed = 9\nnoise_sigmas = 0.1, 0.2\nzeropad_fill = spatial\n");
  EXPECT_EQ(c.data.image_size, 32u);
  EXPECT_EQ(c.blackbox.image_size, 32u);
  EXPECT_EQ(c.distill_lr, 1e-3);
  EXPECT_EQ(c.distill_train().max_epochs, 40u);
  EXPECT_EQ(c.blackbox_train().max_epochs, 200u);
  EXPECT_EQ(c.zeropad().stage1.max_epochs, 40u);
  EXPECT_FALSE(c.restore_best);
  EXPECT_EQ(c.noise_sigmas, (std::vector<double>{0.1, 0.2}));
  EXPECT_EQ(c.zeropad_fill, FillRule::spatial);
  EXPECT_EQ(c.seed, 9u);
  EXPECT_NE(c.data.seed, d.data.seed);
  EXPECT_NE(c.blackbox_init.seed, c.decoder_init.seed);
}

TEST(Config, ErrorsNameTheKey) {
  auto message = [](const std::string& text) -> std::string {
    try {
      parse_run_config(text);
    } catch (const std::exception& e) {
      return e.what();
    }
    return "accepted";
  };
  EXPECT_NE(message("[train]\nbogus = 1\n").find("train.bogus"), std::string::npos);
  EXPECT_NE(message("[nowhere]\nx = 1\n").find("nowhere"), std::string::npos);
  EXPECT_NE(message("[train]\npatience = five\n").find("train.patience"), std::string::npos);
  EXPECT_NE(message("[eval]\ntop_fraction = 0\n").find("eval.top_fraction"), std::string::npos);
  EXPECT_NE(message("[decoder]\ninit = magic\n").find("decoder.init"), std::string::npos);
}

TEST(Config, IniRoundTrip) {
  RunConfig c = parse_run_config("[experiment]\nseed = 4\nencoder_depths = 1, 2\n[train]\nblackbox_lr = 0.0003\n");
  const std::string text = to_ini(c);
  const RunConfig back = parse_run_config(text);
  EXPECT_EQ(to_ini(back), text);
  EXPECT_EQ(back.blackbox_lr, 3e-4);
  EXPECT_EQ(back.encoder_depths, (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(back.data.seed, c.data.seed);
}

TEST(Export, EmapFilesAgree) {
  ScratchDir dir("export");
  const Tensor e = testing::random_tensor<float>({1, 1, 16, 16}, 4);
  export_emap(e, 12, dir / "e");
  EXPECT_EQ(read_f32t(dir / "e.f32t"), e);
  const EmapMeta m = read_emap_meta(dir / "e.meta");
  EXPECT_EQ(m.image_index, 12u);
  EXPECT_EQ(m.sum, raster_sum<float>(e.data()));
  const Tensor img = read_gray_image(dir / "e.pgm");
  EXPECT_EQ(img.shape(), (Shape{1, 1, 16, 16}));
  EXPECT_FLOAT_EQ(*std::min_element(img.data().begin(), img.data().end()), 0.0f);
  EXPECT_FLOAT_EQ(*std::max_element(img.data().begin(), img.data().end()), 1.0f);
  EXPECT_THROW(export_emap(Tensor({2, 1, 4, 4}), 0, dir / "bad"), ShapeError);
}

TEST(Export, ConstantMapIsMidGray) {
  ScratchDir dir("export_const");
  export_emap(Tensor({1, 1, 8, 8}, 3.0f), 0, dir / "c");
  const Tensor img = read_gray_image(dir / "c.pgm");
  for (const float v : img.data()) EXPECT_NEAR(v, 0.5f, 1.0f / 65535.0f);
}

TEST(Export, NumbersRoundTrip) {
  for (const double v : {0.1, 1.0 / 3.0, -2.5e-300, 12345.678}) EXPECT_EQ(std::stod(format_number(v)), v);
  EXPECT_EQ(format_number(std::nan("")), "nan");
}

}  // namespace
}  // namespace emap
