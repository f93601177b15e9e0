#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "emap/eval/metrics.hpp"
#include "emap/training/zeropad.hpp"

namespace emap {

/// Everything a run needs. Component seeds are derived from `seed`.
struct RunConfig {
  DatasetConfig data;
  BlackBoxSpec blackbox;
  InitScheme blackbox_init;
  DecoderSpec decoder;
  InitScheme decoder_init;

  double blackbox_lr = 3e-5;
  double distill_lr = 3e-5;
  double direct_lr = 3e-5;
  std::size_t patience = 5;
  std::size_t max_epochs = 200;
  std::size_t distill_max_epochs = 200;  // distillation and zero-pad stage 1
  std::size_t batch_size = 32;
  bool restore_best = true;

  double top_fraction = 0.01;
  std::size_t ig_steps = 50;
  std::size_t eval_batch_size = 64;
  std::size_t fpfn_per_category = 8;
  std::size_t histogram_bins = 50;

  std::uint64_t seed = 0;
  std::vector<InitKind> stability_schemes{InitKind::glorot_uniform, InitKind::random_normal,
                                          InitKind::random_uniform};
  std::vector<std::size_t> encoder_depths{1, 3, 4, 6};
  std::vector<std::size_t> decoder_depths{0, 2, 3, 5, 7};
  std::vector<double> noise_sigmas{0.01, 0.03, 0.07, 0.09, 0.1, 0.2, 0.3};
  FillRule zeropad_fill = FillRule::raster;
  double zeropad_stage1_lr = 3e-5;
  double zeropad_stage1_threshold = 1e-2;

  /// Pushes `seed` into every component seed.
  void apply_seed(std::uint64_t s);
  /// Throws ArgumentError naming "section.key" for the first invalid value.
  void validate() const;

  TrainConfig blackbox_train() const;
  TrainConfig distill_train() const;
  TrainConfig direct_train() const;
  DistillSetup distill_setup() const;
  BlackBoxSetup blackbox_setup() const;
  ZeroPadConfig zeropad() const;
};

/// Parses INI text; missing keys keep defaults, unknown sections or keys are
/// errors. The config seed is applied, then everything is validated.
RunConfig parse_run_config(const std::string& text, const std::string& source = "<config>");
RunConfig load_run_config(const std::filesystem::path& path);

/// Fully resolved INI text, every key present.
std::string to_ini(const RunConfig& cfg);

}  // namespace emap
