#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "emap/data/dataset.hpp"
#include "emap/data/image_io.hpp"
#include "emap/tensor/f32t.hpp"
#include "emap/util/log.hpp"

namespace emap {
namespace {

namespace fs = std::filesystem;

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("emap_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

DatasetConfig small_config() {
  DatasetConfig c;
  c.image_size = 32;
  c.train_per_class = 6;
  c.val_per_class = 3;
  c.test_per_class = 4;
  c.seed = 17;
  return c;
}

std::size_t lattice_disk(double radius) {
  std::size_t n = 0;
  const int r = static_cast<int>(std::ceil(radius));
  for (int y = -r; y <= r; ++y)
    for (int x = -r; x <= r; ++x)
      if (x * x + y * y <= radius * radius) ++n;
  return n;
}

std::size_t count_nonzero(const float* p, std::size_t n) {
  std::size_t c = 0;
  for (std::size_t i = 0; i < n; ++i) c += p[i] != 0.0f;
  return c;
}

TEST(Background, NoClustersGivesMidGray) {
  DatasetConfig c = small_config();
  c.mean_clusters = 0.0;
  EXPECT_EQ(gen_background(c, 5), Tensor({1, 1, 32, 32}, 0.5f));
}

TEST(Background, DeterministicAndNormalized) {
  const DatasetConfig c = small_config();
  const Tensor a = gen_background(c, 99);
  EXPECT_EQ(a, gen_background(c, 99));
  EXPECT_NE(a, gen_background(c, 100));
  float lo = 1.0f, hi = 0.0f;
  for (const float v : a.data()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  EXPECT_EQ(lo, 0.0f);
  EXPECT_EQ(hi, 1.0f);
}

// Monte Carlo sanity band for the mean intensity of normalized backgrounds.
TEST(Background, MeanPixelInsideBand) {
  DatasetConfig c;
  double total = 0.0;
  for (std::uint64_t s = 0; s < 200; ++s) {
    const Tensor b = gen_background(c, s);
    double m = 0.0;
    for (const float v : b.data()) m += v;
    total += m / static_cast<double>(b.size());
  }
  const double mean = total / 200.0;
  EXPECT_GT(mean, 0.1);
  EXPECT_LT(mean, 0.9);
}

TEST(Tumor, PeakOnZeroImageIsClippedAmplitude) {
  const Tensor zero({1, 1, 64, 64});
  for (const double amp : {0.4, 1.0, 1.7}) {
    for (int p = 0; p < 9; ++p) {
      const auto ins = insert_tumor(zero, p, amp, 3.0);
      const auto [r, c] = grid_position(64, p);
      EXPECT_FLOAT_EQ(ins.image.at(0, 0, r, c), static_cast<float>(std::min(amp, 1.0)));
      float peak = 0.0f;
      for (const float v : ins.image.data()) peak = std::max(peak, v);
      EXPECT_FLOAT_EQ(peak, static_cast<float>(std::min(amp, 1.0)));
    }
  }
}

TEST(Tumor, AddedMassMatchesContinuousIntegral) {
  const Tensor zero({1, 1, 64, 64});
  const double amp = 0.5, sigma = 3.0;
  const auto ins = insert_tumor(zero, 4, amp, sigma);
  double mass = 0.0;
  for (const float v : ins.image.data()) mass += v;
  // the integer-lattice sum of a sigma=3 Gaussian equals 2*pi*sigma^2 to well under 0.1%
  EXPECT_NEAR(mass / (amp * 2.0 * M_PI * sigma * sigma), 1.0, 2e-3);
}

TEST(Tumor, MaskIsLatticeDisk) {
  EXPECT_EQ(lattice_disk(6.0), 113u);
  const auto ins = insert_tumor(Tensor({1, 1, 64, 64}), 0, 1.0, 3.0);
  EXPECT_EQ(count_nonzero(ins.mask.raw(), ins.mask.size()), 113u);
}

TEST(Tumor, InvalidPosition) {
  EXPECT_THROW(insert_tumor(Tensor({1, 1, 64, 64}), 9, 1.0, 3.0), ArgumentError);
  EXPECT_THROW(insert_tumor(Tensor({1, 1, 64, 64}), -1, 1.0, 3.0), ArgumentError);
}

TEST(Tumor, GridStrictlyInside) {
  for (const std::size_t s : {32u, 64u, 128u})
    for (int p = 0; p < 9; ++p) {
      const auto [r, c] = grid_position(s, p);
      EXPECT_GT(r, 0u);
      EXPECT_LT(r, s - 1);
      EXPECT_GT(c, 0u);
      EXPECT_LT(c, s - 1);
    }
  EXPECT_EQ(grid_position(64, 4), (std::array<std::size_t, 2>{32, 32}));
}

TEST(Dataset, BalanceMasksAndChangesConfinedToSupport) {
  DatasetConfig c = small_config();
  c.image_size = 64;
  const Dataset ds = gen_dataset(c);
  const std::size_t plane = 64 * 64;
  const std::size_t mask_area = lattice_disk(6.0);
  const double support_r2 = std::pow(c.support_radius_factor * c.tumor_width, 2);
  for (const Split s : {Split::train, Split::val, Split::test}) {
    const SplitData& d = ds.split(s);
    ASSERT_EQ(d.size(), 2 * c.per_class(s));
    std::size_t positives = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      positives += d.labels[i];
      const std::size_t area = count_nonzero(d.masks.raw() + i * plane, plane);
      EXPECT_EQ(area, d.labels[i] == 1 ? mask_area : 0u);
      const Tensor bg = gen_background(c, d.seeds[i]);
      for (std::size_t k = 0; k < plane; ++k) {
        const bool differs = d.images[i * plane + k] != bg[k];
        if (!differs) continue;
        ASSERT_EQ(d.labels[i], 1);
        const auto [r, col] = grid_position(64, d.positions[i]);
        const double dy = static_cast<double>(k / 64) - static_cast<double>(r);
        const double dx = static_cast<double>(k % 64) - static_cast<double>(col);
        EXPECT_LE(dy * dy + dx * dx, support_r2);
      }
    }
    EXPECT_EQ(positives, c.per_class(s));
  }
}

TEST(Dataset, TwoTumorMaskArea) {
  DatasetConfig c = small_config();
  c.image_size = 64;
  c.variant = Variant::two_tumor;
  c.train_per_class = 40;
  const Dataset ds = gen_dataset(c);
  const std::size_t plane = 64 * 64;
  bool saw_overlap_free = false;
  for (std::size_t i = 0; i < ds.train.size(); ++i) {
    if (ds.train.labels[i] == 0) continue;
    const std::size_t area = count_nonzero(ds.train.masks.raw() + i * plane, plane);
    EXPECT_GE(area, 113u);
    EXPECT_LE(area, 226u);
    if (ds.train.positions[i] == 4) EXPECT_EQ(area, 113u);
    saw_overlap_free |= area == 226u;
  }
  EXPECT_TRUE(saw_overlap_free);
}

TEST(Dataset, SeedDeterminesBytesAndThreadsDoNot) {
  const DatasetConfig c = small_config();
  const Dataset a = gen_dataset(c, 1);
  const Dataset b = gen_dataset(c, 3);
  EXPECT_EQ(a.content_hash(), b.content_hash());
  DatasetConfig c2 = c;
  c2.seed = 18;
  EXPECT_NE(a.content_hash(), gen_dataset(c2).content_hash());
  EXPECT_NE(config_hash(c), config_hash(c2));
}

TEST(Dataset, ConfigValidation) {
  DatasetConfig c = small_config();
  c.image_size = 48;
  EXPECT_THROW(c.validate(), ArgumentError);
  c = small_config();
  c.val_per_class = 0;
  EXPECT_THROW(c.validate(), ArgumentError);
}

TEST(Dataset, SaveLoadRoundTrip) {
  const Dataset a = gen_dataset(small_config());
  const fs::path dir = scratch_dir("ds_roundtrip");
  save_dataset(a, dir);
  const Dataset b = load_dataset(dir);
  EXPECT_EQ(a.content_hash(), b.content_hash());
  EXPECT_EQ(a.config.canonical(), b.config.canonical());
  EXPECT_EQ(a.test.positions, b.test.positions);
  EXPECT_EQ(a.train.seeds, b.train.seeds);
  fs::remove_all(dir);
}

TEST(ImageDir, PgmExportRoundTripWithinQuantization) {
  const Dataset ds = gen_dataset(small_config());
  const fs::path dir = scratch_dir("pgm_roundtrip");
  export_split_pgm(ds.test, dir);
  const SplitData back = load_image_dir(dir, 32);
  ASSERT_EQ(back.size(), ds.test.size());
  const std::size_t plane = 32 * 32;
  for (std::size_t j = 0; j < back.size(); ++j) {
    // file names are the original indices
    const std::size_t i = std::stoul(fs::path(back.sources[j]).stem().string());
    EXPECT_EQ(back.labels[j], ds.test.labels[i]);
    for (std::size_t k = 0; k < plane; ++k)
      ASSERT_LE(std::abs(back.images[j * plane + k] - ds.test.images[i * plane + k]), 1.0f / 255.0f);
  }
  fs::remove_all(dir);
}

TEST(ImageDir, FullScalePixelAndErrors) {
  const fs::path dir = scratch_dir("imgdir");
  fs::create_directories(dir / "1");
  std::vector<float> px(4 * 4, 0.0f);
  px[0] = 1.0f;
  write_pgm(dir / "1" / "a.pgm", px.data(), 4, 4);
  const SplitData d = load_image_dir(dir, 4);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d.images[0], 1.0f);
  EXPECT_EQ(d.labels[0], 1);
  EXPECT_THROW(load_image_dir(dir, 8), IoError);
  write_file_bytes(dir / "1" / "b.pgm", {'n', 'o', 'p', 'e'});
  try {
    load_image_dir(dir, 4);
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("b.pgm"), std::string::npos);
  }
  fs::remove_all(dir);
}

TEST(ImageDir, EmptyDirectoryGivesEmptySplit) {
  log::set_min_level(log::Level::error);
  const fs::path dir = scratch_dir("imgdir_empty");
  EXPECT_EQ(load_image_dir(dir, 16).size(), 0u);
  log::set_min_level(log::Level::info);
  fs::remove_all(dir);
}

TEST(ImageIo, SixteenBitPgm) {
  const fs::path dir = scratch_dir("pgm16");
  const std::vector<float> v{0.0f, 0.25f, 0.5f, 1.0f};
  write_pgm(dir / "x.pgm", v.data(), 2, 2, 65535);
  const Tensor t = read_gray_image(dir / "x.pgm");
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(t[i], v[i], 1.0 / 65535.0);
  fs::remove_all(dir);
}

}  // namespace
}  // namespace emap
