#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "emap/tensor/tensor.hpp"

namespace emap {

enum class Variant { single_tumor, two_tumor };
enum class Split { train, val, test };

std::string to_string(Variant v);
Variant parse_variant(const std::string& text);
std::string to_string(Split s);

struct DatasetConfig {
  std::size_t image_size = 64;
  std::size_t train_per_class = 1000;
  std::size_t val_per_class = 200;
  std::size_t test_per_class = 200;

  // clustered lumpy background
  double mean_clusters = 20.0;
  double mean_blobs_per_cluster = 5.0;
  double cluster_spread = 6.0;
  double blob_width = 2.5;
  double blob_amplitude = 1.0;

  // Gaussian tumor
  double tumor_amplitude = 1.0;
  double tumor_width = 3.0;
  double mask_radius_factor = 2.0;   // mask disk radius in units of tumor_width
  double support_radius_factor = 4.0;  // tumor is zero beyond this many widths

  Variant variant = Variant::single_tumor;
  std::uint64_t seed = 0;

  std::size_t per_class(Split s) const;
  /// Throws ArgumentError naming the offending field.
  void validate(std::size_t pool_layers = 1) const;
  /// Canonical "key=value" lines; the basis of config_hash.
  std::string canonical() const;
};

std::uint64_t config_hash(const DatasetConfig& cfg);

/// Position index 0..8 on the 3x3 grid at (i*S/4, j*S/4), i,j in {1,2,3},
/// row-major: index = 3*(i-1) + (j-1). Returns (row, col).
std::array<std::size_t, 2> grid_position(std::size_t image_size, int position_index);

/// Marks "no tumor" in position records.
inline constexpr int kNoTumor = -1;

struct SplitData {
  Tensor images;  // (N, 1, S, S) in [0,1]
  std::vector<int> labels;
  Tensor masks;  // (N, 1, S, S) binary; empty when unavailable
  std::vector<int> positions;  // grid index of the (varying) tumor, kNoTumor for normals
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> sources;  // file paths for loaded data

  std::size_t size() const noexcept { return labels.size(); }
  bool has_masks() const noexcept { return !masks.empty(); }
  /// Batch of items [first, first + count) as (count, 1, S, S).
  Tensor batch(std::size_t first, std::size_t count) const { return images.slice_batch(first, count); }
};

struct Dataset {
  DatasetConfig config;
  SplitData train, val, test;

  SplitData& split(Split s);
  const SplitData& split(Split s) const;
  /// FNV-1a over images, masks and labels of every split.
  std::uint64_t content_hash() const;
};

/// Clustered lumpy background, min-max normalized to [0,1]; (1,1,S,S).
Tensor gen_background(const DatasetConfig& cfg, std::uint64_t image_seed);

struct TumorInsertion {
  Tensor image;  // (1,1,S,S), clipped to [0,1]
  Tensor mask;   // (1,1,S,S) binary disk of radius mask_radius_factor * width
};

/// Adds A*exp(-r^2 / (2 width^2)) centred on a grid position (truncated at
/// support_radius_factor * width), clips to [0,1] and returns the mask.
TumorInsertion insert_tumor(const Tensor& background, int position_index, double amplitude, double width,
                            double mask_radius_factor = 2.0, double support_radius_factor = 4.0);

/// Generates all splits. Items alternate normal, abnormal, normal, ... and each
/// item draws from streams derived from (seed, split, index); `threads` only
/// changes speed.
Dataset gen_dataset(const DatasetConfig& cfg, std::size_t threads = 1);

/// One item of a split, generated in isolation (used by gen_dataset).
void gen_item(const DatasetConfig& cfg, Split split, std::size_t index, SplitData& out);

/// Loads "<dir>/0/*" (normal) and "<dir>/1/*" (abnormal) 8-bit grayscale
/// PGM/PNG files in lexicographic order. No masks.
SplitData load_image_dir(const std::filesystem::path& dir, std::size_t expected_size);

// On-disk dataset: <dir>/<split>_images.f32t, <split>_masks.f32t, manifest.csv,
// dataset.ini (config echo).
void save_dataset(const Dataset& ds, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

/// Writes <dir>/<label>/<index>.pgm (8-bit) for every item; readable by load_image_dir.
void export_split_pgm(const SplitData& split, const std::filesystem::path& dir);

}  // namespace emap
