#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "emap/eval/metrics.hpp"
#include "emap/training/training.hpp"

namespace emap {

/// Decoder architecture, its initialization and the distillation schedule.
struct DistillSetup {
  DecoderSpec decoder;
  InitScheme init;
  TrainConfig train{3e-5, 5, 200, 32, LossKind::mse};
};

/// Black-box statistics, and E-map statistics plus top-k overlaps when an
/// interpretable model is given.
MetricsReport evaluate(const ModelGraph& blackbox, const ModelGraph* interpretable, const SplitData& split,
                       double top_fraction = 0.01, std::size_t batch_size = 64);

/// Distills a fresh decoder on top of `blackbox` and returns the student.
ModelGraph distill_new(const ModelGraph& blackbox, const Dataset& data, const DistillSetup& setup,
                       TrainReport* report = nullptr);

enum class AttributionMethod { emap, saliency, integrated_gradients };
std::string to_string(AttributionMethod m);

struct OverlapRow {
  std::size_t image_index = 0;
  AttributionMethod method = AttributionMethod::emap;
  double percent = 0.0;
};

struct OverlapStudy {
  std::vector<OverlapRow> rows;
  std::array<double, 3> mean{};  // indexed by AttributionMethod
  double random_baseline = 0.0;  // mean mask-area fraction in percent
};

/// Top-k overlap with tumor masks on abnormal images: E-maps of the
/// interpretable model; saliency and IG of the black-box.
OverlapStudy overlap_study(const ModelGraph& interpretable, const ModelGraph& blackbox, const SplitData& split,
                           double top_fraction = 0.01, std::size_t ig_steps = 50);

struct StabilityResult {
  std::vector<std::string> arms;
  std::vector<bool> converged;
  std::vector<std::vector<double>> mean_ssim;  // NaN where an arm did not converge
  double mean_pairwise = 0.0;
  std::vector<ModelGraph> models;
};

/// One distillation per initialization scheme; mean per-image SSIM of the
/// test-set E-maps for every pair of arms. An arm converges when its best
/// validation MSE is below the variance of the teacher's validation statistics.
StabilityResult stability_study(const ModelGraph& blackbox, const Dataset& data, const std::vector<InitKind>& schemes,
                                const DistillSetup& setup);

struct SweepRow {
  std::string arm;
  double blackbox_acc = 0.0;
  double distilled_acc = 0.0;
};

struct BlackBoxSetup {
  BlackBoxSpec spec;
  InitScheme init;
  TrainConfig train;
};

/// Trains a black-box and a distilled decoder per encoder depth.
std::vector<SweepRow> sweep_encoder_depth(const Dataset& data, const std::vector<std::size_t>& depths,
                                          const BlackBoxSetup& blackbox, const DistillSetup& setup);

/// Distills one decoder per decoder depth on a fixed black-box.
std::vector<SweepRow> sweep_decoder_depth(const ModelGraph& blackbox, const Dataset& data,
                                          const std::vector<std::size_t>& conv_layers, const DistillSetup& setup);

struct FpFnSummary {
  std::array<std::size_t, 4> found{};    // TP, TN, FP, FN
  std::array<std::size_t, 4> written{};  // examples exported per category
  std::size_t files = 0;
};

/// Writes <dir>/<category>/<index>_image.pgm and <index>_emap.f32t for up to
/// `per_category` examples of each outcome plus <dir>/index.csv.
FpFnSummary export_fp_fn(const ModelGraph& interpretable, const SplitData& split, const std::filesystem::path& dir,
                         std::size_t per_category = 8);

}  // namespace emap
