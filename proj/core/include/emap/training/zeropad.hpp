#pragma once

#include <vector>

#include "emap/eval/studies.hpp"

namespace emap {

struct ZeroPadConfig {
  std::vector<double> noise_sigmas{0.01, 0.03, 0.07, 0.09, 0.1, 0.2, 0.3};
  FillRule fill = FillRule::raster;
  TrainConfig stage1{3e-5, 5, 200, 32, LossKind::mse};
  double stage1_threshold = 1e-2;  // best validation MSE above this flags non-convergence
  double top_fraction = 0.01;
  std::uint64_t noise_seed = 0;
};

struct ZeroPadRow {
  double sigma = 0.0;  // 0 is stage 2: distillation straight from the stage-1 weights
  double mean_ssim = 0.0;
  double mean_overlap = 0.0;
  double distilled_acc = 0.0;
};

struct ZeroPadReport {
  TrainReport stage1;
  bool stage1_converged = false;
  std::vector<ZeroPadRow> rows;  // stage 2 first, then one row per sigma in order
};

/// Test-set mean SSIM between E-maps and zero-padded latents.
double mean_ssim_to_target(const ModelGraph& interpretable, const SplitData& split, FillRule fill);

/// Stage 1 regresses the E-map onto the zero-padded latent; stage 2 distills
/// from those weights; stage 3 re-distills after Gaussian weight noise.
ZeroPadReport zero_pad_experiment(const ModelGraph& blackbox, const Dataset& data, const DistillSetup& setup,
                                  const ZeroPadConfig& cfg);

/// Adds N(0, sigma) noise to every decoder parameter.
void perturb_decoder(ModelGraph& model, double sigma, std::uint64_t seed);

}  // namespace emap
